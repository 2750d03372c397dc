//! Wick calculus on a single Gaussian increment.
//!
//! For an increment `ΔB ~ N(0, dt)` the j-th Wick power is
//! `dt^{j/2} He_j(ΔB/√dt)` and the Wick exponential is
//! `exp(uΔB − u²dt/2)`. Everything here is a pure function.

use crate::error::{invalid, Error, Result};

/// Largest Hermite degree / Wick power / truncation order accepted.
pub const MAX_ORDER: usize = 64;

/// Exponent magnitude beyond which `exp` is refused instead of overflowing.
pub const EXPONENT_GUARD: f64 = 700.0;

/// Switch point, on the dimensionless scale `|u|(|ΔB| + √dt)`, between the
/// closed-form increment and its third-order Wick series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Probabilists' Hermite polynomial `He_j(x)` by the three-term recurrence.
pub fn hermite(j: usize, x: f64) -> Result<f64> {
    check_order(j)?;
    let (mut prev, mut cur) = (1.0, x);
    if j == 0 {
        return Ok(prev);
    }
    for k in 1..j {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `(ΔB)^{◇j}` for an increment of variance `dt`.
///
/// Uses the rescaled recurrence `W_{k+1} = ΔB·W_k − k·dt·W_{k−1}`, which
/// equals `dt^{j/2} He_j(ΔB/√dt)` without dividing by `√dt`.
pub fn wick_power(db: f64, dt: f64, j: usize) -> Result<f64> {
    check_order(j)?;
    check_dt(dt)?;
    let mut powers = WickPowers::new(db, dt);
    for _ in 0..j {
        powers.advance();
    }
    Ok(powers.cur)
}

/// `exp^{◇}{u ΔB} = exp(u ΔB − u² dt / 2)`.
pub fn wick_exponential(u: f64, db: f64, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    Ok(guarded_exponent(u, db, dt)?.exp())
}

/// State and noise seen by one step of the Wick scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickIncrementInput {
    /// σ at the current state.
    pub sigma_x: f64,
    /// σ′ at the current state.
    pub u: f64,
    /// Brownian increment over the step.
    pub db: f64,
    /// Step length.
    pub dt: f64,
}

impl WickIncrementInput {
    pub fn new(sigma_x: f64, u: f64, db: f64, dt: f64) -> Result<Self> {
        let inp = Self { sigma_x, u, db, dt };
        inp.validate()?;
        Ok(inp)
    }

    fn validate(&self) -> Result<()> {
        check_dt(self.dt)?;
        if !(self.sigma_x.is_finite() && self.u.is_finite() && self.db.is_finite()) {
            return Err(invalid(format!("non-finite Wick increment input {self:?}")));
        }
        Ok(())
    }
}

/// `(σ/σ′)(exp^{◇}{σ′ΔB} − 1)` without ever forming σ/σ′.
///
/// Above [`SERIES_THRESHOLD`] this is `(σ/u)·expm1(uΔB − u²dt/2)`; below it
/// the Wick series through `u³(ΔB)^{◇4}/24` is used, which reduces to `σΔB`
/// at `u = 0`. The fourth term keeps the two branches within 1e-10 of each
/// other even when `ΔB ≈ 0` and the leading term is `−σu·dt/2`.
pub fn wick_scheme_increment(inp: &WickIncrementInput) -> Result<f64> {
    inp.validate()?;
    let WickIncrementInput { sigma_x, u, db, dt } = *inp;
    let scale = u.abs() * (db.abs() + dt.sqrt());
    if scale >= SERIES_THRESHOLD {
        let z = guarded_exponent(u, db, dt)?;
        Ok(sigma_x / u * z.exp_m1())
    } else {
        let w2 = db * db - dt;
        let w3 = db * w2 - 2.0 * dt * db;
        let w4 = db * w3 - 3.0 * dt * w2;
        Ok(sigma_x * (db + u * (w2 / 2.0 + u * (w3 / 6.0 + u * w4 / 24.0))))
    }
}

/// Partial sum `σ Σ_{j=1..order} u^{j−1} (ΔB)^{◇j} / j!` of the Wick series.
///
/// Order 1 is the Euler increment, order 2 the Milstein increment; the
/// terms are accumulated so that both coincide bit-for-bit with
/// [`crate::schemes::euler_step`] and [`crate::schemes::milstein_step`].
pub fn truncated_wick_increment(inp: &WickIncrementInput, order: usize) -> Result<f64> {
    if order == 0 {
        return Err(invalid("truncation order must be at least 1"));
    }
    check_order(order)?;
    inp.validate()?;
    let WickIncrementInput { sigma_x, u, db, dt } = *inp;

    let mut powers = WickPowers::new(db, dt);
    let mut acc = 0.0;
    let mut u_pow = 1.0;
    let mut factorial = 1.0;
    for j in 1..=order {
        let w = powers.advance();
        factorial *= j as f64;
        acc += sigma_x * u_pow * w / factorial;
        u_pow *= u;
    }
    Ok(acc)
}

/// Iterator state over `W_0 = 1, W_1 = ΔB, W_2, ...`.
struct WickPowers {
    db: f64,
    dt: f64,
    prev: f64,
    cur: f64,
    index: usize,
}

impl WickPowers {
    fn new(db: f64, dt: f64) -> Self {
        Self {
            db,
            dt,
            prev: 0.0,
            cur: 1.0,
            index: 0,
        }
    }

    /// Moves from `W_k` to `W_{k+1}` and returns it.
    fn advance(&mut self) -> f64 {
        let next = if self.index == 0 {
            self.db
        } else {
            self.db * self.cur - self.index as f64 * self.dt * self.prev
        };
        self.prev = self.cur;
        self.cur = next;
        self.index += 1;
        next
    }
}

fn guarded_exponent(u: f64, db: f64, dt: f64) -> Result<f64> {
    let z = u * db - 0.5 * u * u * dt;
    if !(z.abs() <= EXPONENT_GUARD) {
        return Err(Error::ExponentOverflow { exponent: z });
    }
    Ok(z)
}

fn check_order(j: usize) -> Result<()> {
    if j > MAX_ORDER {
        return Err(invalid(format!(
            "order {j} exceeds the supported maximum of {MAX_ORDER}"
        )));
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!(
            "step length must be positive and finite (got {dt})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite(1, 3.7).unwrap(), 3.7);
        for (x, want) in [(0.0, -1.0), (1.0, 0.0), (2.0, 3.0)] {
            assert_eq!(hermite(2, x).unwrap(), want);
        }
    }

    #[test]
    fn hermite_matches_monomial_expansion() {
        // He5(x) = x^5 - 10x^3 + 15x, with x = 1.25 exactly representable.
        let x: f64 = 1.25;
        let expected = x.powi(5) - 10.0 * x.powi(3) + 15.0 * x;
        assert_eq!(expected, 2.2705078125);
        assert_relative_eq!(hermite(5, x).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn hermite_rejects_high_degree() {
        assert!(hermite(64, 0.5).is_ok());
        let err = hermite(65, 0.5).unwrap_err();
        assert!(err.to_string().contains("65"));
    }

    #[test]
    fn wick_powers_low_orders() {
        assert_eq!(wick_power(0.37, 0.2, 1).unwrap(), 0.37);
        assert_eq!(wick_power(0.37, 0.2, 0).unwrap(), 1.0);
        let n = 16.0;
        assert_relative_eq!(
            wick_power(0.3, 1.0 / n, 2).unwrap(),
            0.09 - 1.0 / n,
            max_relative = 1e-15
        );
        // 0.2^3 - 3*0.01*0.2 = 0.002
        assert_relative_eq!(
            wick_power(0.2, 0.01, 3).unwrap(),
            0.002,
            max_relative = 1e-13
        );
    }

    #[test]
    fn wick_power_is_scaled_hermite() {
        for &(db, dt) in &[(0.3, 0.01), (-1.1, 0.5), (2.0, 3.0)] {
            let s: f64 = dt;
            let s = s.sqrt();
            for j in 0..12 {
                let via_hermite = s.powi(j as i32) * hermite(j, db / s).unwrap();
                assert_relative_eq!(
                    wick_power(db, dt, j).unwrap(),
                    via_hermite,
                    max_relative = 1e-12,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn wick_power_rejects_bad_dt() {
        assert!(wick_power(0.1, 0.0, 2).is_err());
        assert!(wick_power(0.1, -1.0, 2).is_err());
    }

    #[test]
    fn wick_exponential_examples() {
        assert_eq!(wick_exponential(0.0, 0.3, 0.1).unwrap(), 1.0);
        assert_relative_eq!(
            wick_exponential(1.0, 0.1, 0.01).unwrap(),
            0.095f64.exp(),
            max_relative = 1e-15
        );
        let v = wick_exponential(2.0, 0.0, 0.1).unwrap();
        assert!(v < 1.0 && v > 0.0);
    }

    #[test]
    fn wick_exponential_overflow_guard() {
        match wick_exponential(100.0, 8.0, 1e-6) {
            Err(Error::ExponentOverflow { exponent }) => assert!(exponent > 700.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn increment_at_zero_derivative() {
        let inp = WickIncrementInput::new(1.7, 0.0, -0.42, 0.01).unwrap();
        assert_eq!(wick_scheme_increment(&inp).unwrap(), 1.7 * -0.42);
    }

    #[test]
    fn increment_closed_form() {
        let inp = WickIncrementInput::new(1.0, 1.0, 0.1, 0.01).unwrap();
        assert_relative_eq!(
            wick_scheme_increment(&inp).unwrap(),
            0.095f64.exp_m1(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn increment_series_branch_tiny_derivative() {
        let inp = WickIncrementInput::new(2.0, 1e-12, 0.3, 0.01).unwrap();
        assert_relative_eq!(
            wick_scheme_increment(&inp).unwrap(),
            0.6,
            max_relative = 1e-10
        );
    }

    #[test]
    fn increment_rejects_invalid_input() {
        assert!(WickIncrementInput::new(1.0, 1.0, f64::NAN, 0.1).is_err());
        assert!(WickIncrementInput::new(1.0, 1.0, 0.1, 0.0).is_err());
        let raw = WickIncrementInput {
            sigma_x: 1.0,
            u: 1.0,
            db: 0.1,
            dt: -1.0,
        };
        assert!(wick_scheme_increment(&raw).is_err());
    }

    #[test]
    fn truncated_low_orders() {
        let inp = WickIncrementInput::new(1.3, 0.7, -0.2, 0.04).unwrap();
        assert_eq!(truncated_wick_increment(&inp, 1).unwrap(), 1.3 * -0.2);
        let one = WickIncrementInput::new(1.0, 1.0, 0.1, 0.01).unwrap();
        assert_relative_eq!(
            truncated_wick_increment(&one, 2).unwrap(),
            0.1,
            max_relative = 1e-15
        );
        assert!(truncated_wick_increment(&inp, 0).is_err());
        assert!(truncated_wick_increment(&inp, 65).is_err());
    }

    #[test]
    fn truncated_series_converges_to_closed_form() {
        for &(u, db) in &[(1.0, 0.5), (2.0, -0.5), (-3.0, 0.3), (0.5, 1.9)] {
            let inp = WickIncrementInput::new(0.8, u, db, 0.05).unwrap();
            let closed = wick_scheme_increment(&inp).unwrap();
            let series = truncated_wick_increment(&inp, 40).unwrap();
            assert_relative_eq!(series, closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn branches_agree_across_threshold() {
        let (db, dt) = (0.3, 0.01);
        let scale = db + f64::sqrt(dt);
        let at = |s: f64| {
            let inp = WickIncrementInput::new(1.5, s / scale, db, dt).unwrap();
            wick_scheme_increment(&inp).unwrap()
        };
        let below = at(SERIES_THRESHOLD * (1.0 - 1e-12));
        let above = at(SERIES_THRESHOLD);
        assert_relative_eq!(below, above, max_relative = 1e-10);
    }
}
