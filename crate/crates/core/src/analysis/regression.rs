use serde::Serialize;

use crate::error::{invalid, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ln y` on `ln x`, i.e. `y ≈ exp(intercept)·x^slope`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(invalid(format!(
            "need at least 3 points to fit (got {})",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|&&(x, y)| !(x > 0.0 && x.is_finite() && y > 0.0 && y.is_finite()))
    {
        return Err(invalid(format!(
            "log-log fit needs positive finite values (got x={x}, y={y}); filter exact cases first"
        )));
    }

    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(invalid("log-log fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };

    Ok(PowerLawFit {
        slope,
        intercept,
        r2,
    })
}

/// Empirical convergence order from `(N, error)` pairs: returns
/// `(order, intercept, r2)` with `error ≈ exp(intercept)·N^{-order}`.
pub fn fit_order(points: &[(usize, f64)]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n as f64, e)).collect();
    let fit = fit_power_law(&pts)?;
    Ok((-fit.slope, fit.intercept, fit.r2))
}
