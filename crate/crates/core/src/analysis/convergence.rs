use serde::Serialize;

use super::regression::fit_order;
use super::{tally_paths, MonteCarlo};
use crate::brownian::{coarsen, generate, GridSpec};
use crate::error::{invalid, Error, Result};
use crate::models::Diffusion;
use crate::schemes::{simulate, SchemeKind};

/// Mean errors at or below this level are treated as the rounding floor of
/// an exact scheme, and no order is fitted.
pub const EXACT_ERROR_FLOOR: f64 = 1e-12;

/// Minimum `n_ref / N` when the reference is a fine Milstein run.
const MIN_REFERENCE_RATIO: usize = 8;

/// Observables recorded per resolution.
const PER_RESOLUTION: usize = 3;

/// Strong error at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorPoint {
    pub n: usize,
    /// `E|X(T) − x_N(N)|`.
    pub mean_abs_error: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Supplementary: `E[(X(T) − x_N(N))²]^{1/2}`.
    pub rms_error: f64,
    /// Supplementary: mean over paths of `max_k |X(t_k) − x_N(k)|`.
    pub mean_max_node_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    #[serde(rename = "model")]
    pub model_name: String,
    pub scheme: SchemeKind,
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub n_ref: usize,
    /// `true` when the reference is the closed-form solution.
    pub exact_reference: bool,
    pub points: Vec<ErrorPoint>,
    pub fitted_order: Option<f64>,
    pub fit_intercept: Option<f64>,
    pub fit_r2: Option<f64>,
    /// Every error sits at the rounding floor; no order was fitted.
    pub exact_scheme: bool,
    pub failed_paths: usize,
}

impl ConvergenceReport {
    pub fn resolutions(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    /// `exp(fit_intercept)`, the empirical constant in `error ≈ c·N^{-order}`.
    pub fn empirical_constant(&self) -> Option<f64> {
        self.fit_intercept.map(f64::exp)
    }
}

/// Strong error of `scheme` at `n_coarse` steps against a reference on the
/// same Brownian paths sampled at `n_ref` steps.
pub fn strong_error(
    d: &Diffusion,
    a: f64,
    scheme: SchemeKind,
    n_coarse: usize,
    n_ref: usize,
    mc: &MonteCarlo,
) -> Result<ErrorPoint> {
    let (points, _) = run_study(d, a, scheme, &[n_coarse], n_ref, mc)?;
    Ok(points[0])
}

/// Strong errors at each resolution plus a log-log order fit.
///
/// The reference is the closed-form solution when the model has one, and a
/// Milstein run at `n_ref` steps otherwise. Every resolution integrates a
/// coarsening of the same fine path.
pub fn convergence_study(
    d: &Diffusion,
    a: f64,
    scheme: SchemeKind,
    resolutions: &[usize],
    n_ref: usize,
    mc: &MonteCarlo,
) -> Result<ConvergenceReport> {
    let (points, failed_paths) = run_study(d, a, scheme, resolutions, n_ref, mc)?;

    let exact_scheme = points.iter().all(|p| p.mean_abs_error <= EXACT_ERROR_FLOOR);
    let (fitted_order, fit_intercept, fit_r2) = if exact_scheme || points.len() < 3 {
        (None, None, None)
    } else {
        let pts: Vec<(usize, f64)> = points.iter().map(|p| (p.n, p.mean_abs_error)).collect();
        let (order, intercept, r2) = fit_order(&pts)?;
        (Some(order), Some(intercept), Some(r2))
    };

    Ok(ConvergenceReport {
        model_name: d.name().to_string(),
        scheme,
        horizon: mc.horizon,
        seed: mc.seed,
        n_paths: mc.n_paths,
        n_ref,
        exact_reference: d.has_exact_solution(),
        points,
        fitted_order,
        fit_intercept,
        fit_r2,
        exact_scheme,
        failed_paths,
    })
}

fn run_study(
    d: &Diffusion,
    a: f64,
    scheme: SchemeKind,
    resolutions: &[usize],
    n_ref: usize,
    mc: &MonteCarlo,
) -> Result<(Vec<ErrorPoint>, usize)> {
    mc.validate()?;
    if resolutions.is_empty() {
        return Err(invalid("no resolutions given"));
    }
    if resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!(
            "resolutions must be strictly increasing (got {resolutions:?})"
        )));
    }
    let exact = d.has_exact_solution();
    for &n in resolutions {
        if n == 0 || !n_ref.is_multiple_of(n) {
            return Err(invalid(format!(
                "resolution {n} does not divide the reference resolution {n_ref}"
            )));
        }
        if !exact && n_ref / n < MIN_REFERENCE_RATIO {
            return Err(invalid(format!(
                "reference resolution {n_ref} must be at least {MIN_REFERENCE_RATIO}x resolution {n} when no closed form exists"
            )));
        }
    }

    let fine_spec = GridSpec::new(n_ref, mc.horizon)?;
    let width = PER_RESOLUTION * resolutions.len();

    let tally = tally_paths(0..mc.n_paths as u64, width, |p, out| {
        let fine = generate(fine_spec, mc.seed, p);
        let reference: Vec<f64> = if exact {
            let dt = fine_spec.dt();
            fine.node_values()
                .iter()
                .enumerate()
                .map(|(j, &b)| {
                    d.exact_terminal(a, b, j as f64 * dt)
                        .expect("model has a closed form")
                })
                .collect()
        } else {
            simulate(d, a, &fine, SchemeKind::Milstein)?.values
        };
        let reference_terminal = reference[n_ref];

        for (i, &n) in resolutions.iter().enumerate() {
            let factor = n_ref / n;
            let coarse = coarsen(&fine, factor)?;
            debug_assert_eq!(coarse.terminal_value(), fine.terminal_value());
            let traj = simulate(d, a, &coarse, scheme)?;
            let err = reference_terminal - traj.terminal();
            let max_node = traj
                .values
                .iter()
                .enumerate()
                .map(|(k, &x)| (reference[k * factor] - x).abs())
                .fold(0.0, f64::max);
            out[PER_RESOLUTION * i] = err.abs();
            out[PER_RESOLUTION * i + 1] = err * err;
            out[PER_RESOLUTION * i + 2] = max_node;
        }
        Ok(())
    });
    tally.check_failures()?;
    let observables = tally.observables();

    let points = resolutions
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let abs = &observables[PER_RESOLUTION * i];
            ErrorPoint {
                n,
                mean_abs_error: abs.mean(),
                std_error: abs.std_error(),
                n_paths: abs.count() as usize,
                rms_error: observables[PER_RESOLUTION * i + 1].mean().sqrt(),
                mean_max_node_error: observables[PER_RESOLUTION * i + 2].mean(),
            }
        })
        .collect();
    Ok((points, tally.failed()))
}

/// Worst node-wise deviation from the closed-form solution at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactnessPoint {
    pub n: usize,
    /// `max |x_N(k) − X(t_k)| / |X(t_k)|` over nodes and paths (0/0 counts as 0).
    pub max_relative_deviation: f64,
    /// `max |x_N(k) − X(t_k)| / (1 + |X(t_k)|)`.
    pub max_scaled_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactnessReport {
    #[serde(rename = "model")]
    pub model_name: String,
    pub scheme: SchemeKind,
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub points: Vec<ExactnessPoint>,
}

impl ExactnessReport {
    pub fn worst_relative_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.max_relative_deviation)
            .fold(0.0, f64::max)
    }
}

/// Runs `scheme` on `n_paths` paths at each resolution and measures the
/// node-wise deviation from the model's closed-form solution.
pub fn check_exactness(
    d: &Diffusion,
    a: f64,
    scheme: SchemeKind,
    resolutions: &[usize],
    mc: &MonteCarlo,
) -> Result<ExactnessReport> {
    mc.validate()?;
    if !d.has_exact_solution() {
        return Err(Error::NoExactSolution(d.name().to_string()));
    }
    if resolutions.is_empty() || resolutions.contains(&0) {
        return Err(invalid("resolutions must be nonempty and positive"));
    }

    let mut points = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let spec = GridSpec::new(n, mc.horizon)?;
        let dt = spec.dt();
        let tally = tally_paths(0..mc.n_paths as u64, 2, |p, out| {
            let g = generate(spec, mc.seed, p);
            let traj = simulate(d, a, &g, scheme)?;
            let (mut rel, mut scaled) = (0.0f64, 0.0f64);
            for (k, (&x, &b)) in traj.values.iter().zip(&g.node_values()).enumerate() {
                let exact = d
                    .exact_terminal(a, b, k as f64 * dt)
                    .expect("checked above");
                let dev = (x - exact).abs();
                if dev > 0.0 {
                    rel = rel.max(dev / exact.abs());
                }
                scaled = scaled.max(dev / (1.0 + exact.abs()));
            }
            out[0] = rel;
            out[1] = scaled;
            Ok(())
        });
        if let Some((_, e)) = tally.first_failure() {
            return Err(e.clone());
        }
        let observables = tally.observables();
        points.push(ExactnessPoint {
            n,
            max_relative_deviation: observables[0].max(),
            max_scaled_deviation: observables[1].max(),
        });
    }

    Ok(ExactnessReport {
        model_name: d.name().to_string(),
        scheme,
        horizon: mc.horizon,
        seed: mc.seed,
        n_paths: mc.n_paths,
        points,
    })
}
