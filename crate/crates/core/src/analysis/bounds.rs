//! Theoretical bounds on the Wick scheme's second moment and on its mean
//! squared distance from Milstein, with Monte Carlo checks against them.
//!
//! The closed forms are stated for a unit horizon (`dt = 1/N`); the `_dt`
//! variants carry the same recursions for a general step length.

use serde::Serialize;

use super::regression::fit_power_law;
use super::{tally_paths, MonteCarlo};
use crate::brownian::{coarsen, generate, GridSpec};
use crate::error::{invalid, Result};
use crate::models::Diffusion;
use crate::schemes::{simulate, simulate_terminal, SchemeKind};

/// Number of standard errors an estimate may exceed a bound before it is
/// reported as a violation.
pub const VIOLATION_SIGMAS: f64 = 3.0;

/// Mean squared gaps at or below this are treated as exact agreement.
const EXACT_GAP_FLOOR: f64 = 1e-28;

/// `(1 + M₁e^{L₁²/N}/N)^k (a² + 1) − 1`, the second-moment bound after `k`
/// of `n` steps on the unit horizon.
pub fn second_moment_bound(a: f64, m1: f64, l1: f64, n: usize, k: usize) -> Result<f64> {
    if n == 0 || k > n {
        return Err(invalid(format!(
            "need 0 <= k <= n and n >= 1 (got n={n}, k={k})"
        )));
    }
    second_moment_bound_dt(a, m1, l1, 1.0 / n as f64, k)
}

/// Second-moment bound with step length `dt`:
/// `(1 + M₁e^{L₁²dt}dt)^k (a² + 1) − 1`.
pub fn second_moment_bound_dt(a: f64, m1: f64, l1: f64, dt: f64, k: usize) -> Result<f64> {
    check_constants(m1, l1, 0.0)?;
    if !(dt > 0.0) {
        return Err(invalid(format!("step length must be positive (got {dt})")));
    }
    let q = m1 * (l1 * l1 * dt).exp() * dt;
    // P(a²+1) − 1 written as a²P + (P − 1) so that k = 0 returns a² exactly.
    let log_p = k as f64 * q.ln_1p();
    Ok(a * a * log_p.exp() + log_p.exp_m1())
}

/// Upper bound on `E[(x_N(N) − y_N(N))²]`, Wick against Milstein, on the
/// unit horizon: `Λ_N((1 + L₁²/N + L₂²/2N²)^N − 1)/(L₁²/N + L₂²/2N²)` with
/// `Λ_N = M₁(1 + M₁e^{L₁²/N}/N)^N(a²+1)(e^{L₁²/N} − 1 − L₁²/N)/N`.
pub fn theoretical_gap_bound(l1: f64, l2: f64, m1: f64, a: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("gap bound needs n >= 1"));
    }
    theoretical_gap_bound_dt(l1, l2, m1, a, n, 1.0 / n as f64)
}

/// Gap bound after `n` steps of length `dt`.
pub fn theoretical_gap_bound_dt(
    l1: f64,
    l2: f64,
    m1: f64,
    a: f64,
    n: usize,
    dt: f64,
) -> Result<f64> {
    check_constants(m1, l1, l2)?;
    if n == 0 || !(dt > 0.0) {
        return Err(invalid(format!(
            "gap bound needs n >= 1 and dt > 0 (got n={n}, dt={dt})"
        )));
    }
    let x = l1 * l1 * dt;
    let q = m1 * x.exp() * dt;
    let growth = (n as f64 * q.ln_1p()).exp() * (a * a + 1.0);
    let lambda = m1 * growth * dt * exp_remainder(x);

    let r = x + l2 * l2 * dt * dt / 2.0;
    let ratio = if r == 0.0 {
        n as f64
    } else {
        (n as f64 * r.ln_1p()).exp_m1() / r
    };
    Ok(lambda * ratio)
}

/// `e^x − 1 − x` without cancellation for small `x`.
fn exp_remainder(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x * x / 2.0;
        let mut sum = 0.0;
        for j in 3..30 {
            sum += term;
            term *= x / j as f64;
            if term.abs() <= f64::EPSILON * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

fn check_constants(m1: f64, l1: f64, l2: f64) -> Result<()> {
    for (name, v) in [("M1", m1), ("L1", l1), ("L2", l2)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(format!(
                "{name} must be nonnegative and finite (got {v})"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundQuantity {
    SecondMoment,
    WickMilsteinGap,
}

/// Empirical value next to its theoretical bound. `index` is the step `k`
/// for second moments and the resolution `N` for gaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEntry {
    pub index: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundViolation {
    pub index: usize,
    pub empirical: f64,
    pub bound: f64,
    /// `empirical − 3·std_error − bound`, positive by construction.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub quantity: BoundQuantity,
    #[serde(rename = "model")]
    pub model_name: String,
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub entries: Vec<BoundEntry>,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    fn new(
        quantity: BoundQuantity,
        d: &Diffusion,
        mc: &MonteCarlo,
        entries: Vec<BoundEntry>,
    ) -> Self {
        let violations = entries
            .iter()
            .filter_map(|e| {
                let bound = e.bound?;
                let slack = e.empirical - VIOLATION_SIGMAS * e.std_error - bound;
                (slack > 0.0).then_some(BoundViolation {
                    index: e.index,
                    empirical: e.empirical,
                    bound,
                    slack,
                })
            })
            .collect();
        Self {
            quantity,
            model_name: d.name().to_string(),
            horizon: mc.horizon,
            seed: mc.seed,
            n_paths: mc.n_paths,
            entries,
            violations,
        }
    }
}

/// Estimates `E[x_N(k)²]` for the Wick scheme at every node and compares
/// with [`second_moment_bound_dt`].
pub fn check_second_moment(
    d: &Diffusion,
    a: f64,
    n: usize,
    mc: &MonteCarlo,
) -> Result<BoundReport> {
    mc.validate()?;
    let m1 = d.require(d.growth_constant(), "a growth constant M1")?;
    let l1 = d.require(d.lipschitz_sigma(), "a Lipschitz constant L1")?;
    let spec = GridSpec::new(n, mc.horizon)?;

    let tally = tally_paths(0..mc.n_paths as u64, n + 1, |p, out| {
        let g = generate(spec, mc.seed, p);
        let traj = simulate(d, a, &g, SchemeKind::Wick)?;
        for (o, x) in out.iter_mut().zip(&traj.values) {
            *o = x * x;
        }
        Ok(())
    });
    tally.check_failures()?;

    let entries = tally
        .observables()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            Ok(BoundEntry {
                index: k,
                empirical: m.mean(),
                std_error: m.std_error(),
                bound: Some(second_moment_bound_dt(a, m1, l1, spec.dt(), k)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::new(
        BoundQuantity::SecondMoment,
        d,
        mc,
        entries,
    ))
}

/// Gap study result: per-resolution mean squared Wick–Milstein distance and
/// the fitted slope of `ln gap` against `ln N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub bounds: BoundReport,
    pub fitted_slope: Option<f64>,
    pub fit_intercept: Option<f64>,
    pub fit_r2: Option<f64>,
    /// Both schemes agreed on every path; no slope was fitted.
    pub exact_agreement: bool,
}

/// Runs Wick and Milstein on coarsenings of the same path at each resolution
/// and estimates `E[(x_N(N) − y_N(N))²]`.
///
/// The theoretical bound column is filled only when the model declares L₁,
/// L₂ and M₁.
pub fn check_gap_rate(
    d: &Diffusion,
    a: f64,
    resolutions: &[usize],
    mc: &MonteCarlo,
) -> Result<GapReport> {
    mc.validate()?;
    if resolutions.len() < 3 {
        return Err(invalid(format!(
            "gap rate needs at least 3 resolutions (got {})",
            resolutions.len()
        )));
    }
    if resolutions.windows(2).any(|w| w[0] >= w[1]) || resolutions[0] == 0 {
        return Err(invalid(format!(
            "resolutions must be positive and strictly increasing (got {resolutions:?})"
        )));
    }
    let finest = *resolutions.last().expect("nonempty");
    if let Some(&n) = resolutions.iter().find(|&&n| !finest.is_multiple_of(n)) {
        return Err(invalid(format!(
            "resolution {n} does not divide the finest resolution {finest}"
        )));
    }
    let fine_spec = GridSpec::new(finest, mc.horizon)?;

    let tally = tally_paths(0..mc.n_paths as u64, resolutions.len(), |p, out| {
        let fine = generate(fine_spec, mc.seed, p);
        for (o, &n) in out.iter_mut().zip(resolutions) {
            let g = coarsen(&fine, finest / n)?;
            let x = simulate_terminal(d, a, &g, SchemeKind::Wick)?;
            let y = simulate_terminal(d, a, &g, SchemeKind::Milstein)?;
            *o = (x - y) * (x - y);
        }
        Ok(())
    });
    tally.check_failures()?;

    let constants = match (
        d.lipschitz_sigma(),
        d.lipschitz_sigma_sigma_prime(),
        d.growth_constant(),
    ) {
        (Some(l1), Some(l2), Some(m1)) => Some((l1, l2, m1)),
        _ => None,
    };
    let entries = resolutions
        .iter()
        .zip(&tally.observables())
        .map(|(&n, m)| {
            let bound = constants
                .map(|(l1, l2, m1)| {
                    theoretical_gap_bound_dt(l1, l2, m1, a, n, mc.horizon / n as f64)
                })
                .transpose()?;
            Ok(BoundEntry {
                index: n,
                empirical: m.mean(),
                std_error: m.std_error(),
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let exact_agreement = entries.iter().all(|e| e.empirical <= EXACT_GAP_FLOOR);
    let fit = if exact_agreement {
        None
    } else {
        let pts: Vec<(f64, f64)> = entries
            .iter()
            .map(|e| (e.index as f64, e.empirical))
            .collect();
        Some(fit_power_law(&pts)?)
    };

    Ok(GapReport {
        bounds: BoundReport::new(BoundQuantity::WickMilsteinGap, d, mc, entries),
        fitted_slope: fit.map(|f| f.slope),
        fit_intercept: fit.map(|f| f.intercept),
        fit_r2: fit.map(|f| f.r2),
        exact_agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn second_moment_bound_edges() {
        for a in [0.0, 0.1, 1.0, -3.7] {
            assert_eq!(second_moment_bound(a, 2.0, 1.0, 10, 0).unwrap(), a * a);
            for k in [1, 5, 10] {
                assert_eq!(second_moment_bound(a, 0.0, 1.0, 10, k).unwrap(), a * a);
            }
        }
        assert!(second_moment_bound(1.0, 1.0, 1.0, 4, 5).is_err());
        assert!(second_moment_bound(1.0, 1.0, 1.0, 0, 0).is_err());
        assert!(second_moment_bound(1.0, -1.0, 1.0, 4, 1).is_err());
    }

    #[test]
    fn second_moment_bound_direct_value() {
        let direct = (1.0 + 2.0 * 0.25f64.exp() / 4.0).powi(4) * 2.0 - 1.0;
        assert_relative_eq!(
            second_moment_bound(1.0, 2.0, 1.0, 4, 4).unwrap(),
            direct,
            max_relative = 1e-14
        );
    }

    #[test]
    fn second_moment_bound_satisfies_its_recursion() {
        // b_{k+1} = b_k (1 + q) + q with q = M₁e^{L₁²/N}/N and b_0 = a².
        let (a, m1, l1, n) = (0.7, 1.5, 0.8, 20);
        let q = m1 * (l1 * l1 / n as f64).exp() / n as f64;
        let mut b = a * a;
        for k in 0..n {
            assert_relative_eq!(
                second_moment_bound(a, m1, l1, n, k).unwrap(),
                b,
                max_relative = 1e-13
            );
            b = b * (1.0 + q) + q;
        }
    }

    #[test]
    fn gap_bound_degenerate_cases() {
        assert_eq!(theoretical_gap_bound(0.0, 0.0, 1.0, 1.0, 16).unwrap(), 0.0);
        assert_eq!(theoretical_gap_bound(1.0, 1.0, 0.0, 1.0, 16).unwrap(), 0.0);
        assert!(theoretical_gap_bound(1.0, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn gap_bound_matches_unrolled_recursion() {
        // e_{k+1} = (1 + L₁²/N + L₂²/2N²) e_k + Λ_N with e_0 = 0.
        for &(l1, l2, m1, a, n) in &[
            (1.0, 1.0, 1.0, 0.0, 16usize),
            (0.5, 2.0, 3.0, 1.2, 40),
            (2.0, 0.3, 0.5, -1.0, 7),
        ] {
            let nf = n as f64;
            let x = l1 * l1 / nf;
            let lambda = m1 * (1.0 + m1 * x.exp() / nf).powi(n as i32) * (a * a + 1.0) / nf
                * (x.exp() - 1.0 - x);
            let growth = 1.0 + x + l2 * l2 / (2.0 * nf * nf);
            let mut e = 0.0;
            for _ in 0..n {
                e = growth * e + lambda;
            }
            assert_relative_eq!(
                theoretical_gap_bound(l1, l2, m1, a, n).unwrap(),
                e,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn gap_bound_decays_like_inverse_square() {
        let b1 = theoretical_gap_bound(1.0, 1.0, 1.0, 1.0, 1000).unwrap();
        let b2 = theoretical_gap_bound(1.0, 1.0, 1.0, 1.0, 2000).unwrap();
        assert_relative_eq!(b1 / b2, 4.0, max_relative = 0.01);
    }

    #[test]
    fn exp_remainder_is_accurate() {
        for x in [1e-8, 1e-4, 0.05, 0.099, 0.1, 0.5, 2.0, -0.05] {
            let reference = (2..40).fold((0.0, 1.0), |(s, t): (f64, f64), j| {
                let t = if j == 2 {
                    x * x / 2.0
                } else {
                    t * x / j as f64
                };
                (s + t, t)
            });
            assert_relative_eq!(exp_remainder(x), reference.0, max_relative = 1e-14);
        }
    }
}
