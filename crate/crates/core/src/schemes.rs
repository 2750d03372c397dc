//! One-step maps and path integrators.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::brownian::{BrownianGrid, GridSpec};
use crate::error::{invalid, Error, Result};
use crate::models::Diffusion;
use crate::wick::{truncated_wick_increment, wick_scheme_increment, WickIncrementInput, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Euler,
    Milstein,
    Wick,
    /// Wick series truncated after `order` terms.
    WickTruncated(usize),
}

impl SchemeKind {
    pub fn truncated(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(invalid(format!(
                "truncation order must be in 1..={MAX_ORDER} (got {order})"
            )));
        }
        Ok(SchemeKind::WickTruncated(order))
    }

    /// Applies one step of this scheme.
    pub fn step(self, x: f64, d: &Diffusion, db: f64, dt: f64) -> Result<f64> {
        match self {
            SchemeKind::Euler => Ok(euler_step(x, d, db, dt)),
            SchemeKind::Milstein => Ok(milstein_step(x, d, db, dt)),
            SchemeKind::Wick => wick_step(x, d, db, dt),
            SchemeKind::WickTruncated(order) => truncated_step(x, d, db, dt, order),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Euler => f.write_str("euler"),
            SchemeKind::Milstein => f.write_str("milstein"),
            SchemeKind::Wick => f.write_str("wick"),
            SchemeKind::WickTruncated(order) => write!(f, "wick_truncated({order})"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    /// Accepts `euler`, `milstein`, `wick`, `wick_truncated:3` and
    /// `wick_truncated(3)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "euler" => return Ok(SchemeKind::Euler),
            "milstein" => return Ok(SchemeKind::Milstein),
            "wick" => return Ok(SchemeKind::Wick),
            _ => {}
        }
        let order = s
            .strip_prefix("wick_truncated")
            .and_then(|rest| {
                rest.strip_prefix(':')
                    .or_else(|| rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
            })
            .ok_or_else(|| {
                invalid(format!(
                    "unknown scheme `{s}` (expected euler, milstein, wick or wick_truncated:<order>)"
                ))
            })?;
        let order = order
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad truncation order in `{s}`")))?;
        SchemeKind::truncated(order)
    }
}

impl Serialize for SchemeKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// `x + σ(x)ΔB`.
#[inline]
pub fn euler_step(x: f64, d: &Diffusion, db: f64, _dt: f64) -> f64 {
    x + d.sigma(x) * db
}

/// `y + σ(y)ΔB + σ(y)σ′(y)(ΔB² − dt)/2`.
#[inline]
pub fn milstein_step(y: f64, d: &Diffusion, db: f64, dt: f64) -> f64 {
    let sigma = d.sigma(y);
    let sp = d.sigma_prime(y);
    y + (sigma * db + sigma * sp * (db * db - dt) / 2.0)
}

/// One step of the Wick-exponential scheme,
/// `x + (σ/σ′)(exp^{◇}{σ′ΔB} − 1)` in its regularized form.
#[inline]
pub fn wick_step(x: f64, d: &Diffusion, db: f64, dt: f64) -> Result<f64> {
    let inp = WickIncrementInput {
        sigma_x: d.sigma(x),
        u: d.sigma_prime(x),
        db,
        dt,
    };
    Ok(x + wick_scheme_increment(&inp)?)
}

/// One step with the Wick series truncated after `order` terms.
pub fn truncated_step(x: f64, d: &Diffusion, db: f64, dt: f64, order: usize) -> Result<f64> {
    let inp = WickIncrementInput {
        sigma_x: d.sigma(x),
        u: d.sigma_prime(x),
        db,
        dt,
    };
    Ok(x + truncated_wick_increment(&inp, order)?)
}

/// Node values `x_N(0..=N)` of one scheme along one Brownian path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub scheme: SchemeKind,
    pub model_name: String,
}

impl Trajectory {
    pub fn terminal(&self) -> f64 {
        *self
            .values
            .last()
            .expect("trajectory has at least one node")
    }
}

/// Runs `kind` from `a` over every increment of `g`.
///
/// Aborts with the failing step index on a kernel error or a non-finite
/// state.
pub fn simulate(d: &Diffusion, a: f64, g: &BrownianGrid, kind: SchemeKind) -> Result<Trajectory> {
    if !a.is_finite() {
        return Err(invalid(format!("initial value must be finite (got {a})")));
    }
    let dt = g.dt();
    let mut values = Vec::with_capacity(g.increments().len() + 1);
    let mut x = a;
    values.push(x);
    for (k, &db) in g.increments().iter().enumerate() {
        x = kind.step(x, d, db, dt).map_err(|e| Error::Step {
            step: k,
            source: Box::new(e),
        })?;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k, value: x });
        }
        values.push(x);
    }
    Ok(Trajectory {
        grid: g.spec(),
        values,
        scheme: kind,
        model_name: d.name().to_string(),
    })
}

/// Terminal value only; same arithmetic as [`simulate`] without storing nodes.
pub fn simulate_terminal(d: &Diffusion, a: f64, g: &BrownianGrid, kind: SchemeKind) -> Result<f64> {
    let dt = g.dt();
    let mut x = a;
    for (k, &db) in g.increments().iter().enumerate() {
        x = kind.step(x, d, db, dt).map_err(|e| Error::Step {
            step: k,
            source: Box::new(e),
        })?;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k, value: x });
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::generate;
    use crate::models::{make_constant, make_linear, make_pythagoras, make_sine};
    use approx::assert_relative_eq;

    #[test]
    fn euler_examples() {
        assert_eq!(euler_step(0.4, &make_constant(0.0), 0.3, 0.1), 0.4);
        assert_relative_eq!(euler_step(1.0, &make_linear(1.0).unwrap(), 0.2, 0.1), 1.2);
        assert_eq!(euler_step(0.0, &make_pythagoras(), 0.5, 0.1), 0.5);
    }

    #[test]
    fn milstein_examples() {
        let d = make_sine();
        let y = 0.7;
        assert_relative_eq!(
            milstein_step(y, &d, 0.0, 0.1),
            y - y.sin() * y.cos() * 0.1 / 2.0,
            max_relative = 1e-15
        );
        assert_eq!(
            milstein_step(0.3, &make_constant(2.0), 0.25, 0.1),
            0.3 + 0.5
        );
        assert_relative_eq!(
            milstein_step(1.0, &make_linear(1.0).unwrap(), 0.1, 0.01),
            1.1,
            max_relative = 1e-15
        );
    }

    #[test]
    fn wick_examples() {
        let lin = make_linear(1.0).unwrap();
        assert_relative_eq!(
            wick_step(1.0, &lin, 0.1, 0.01).unwrap(),
            0.095f64.exp(),
            max_relative = 1e-15
        );
        assert_eq!(
            wick_step(0.5, &make_constant(3.0), 0.25, 0.01).unwrap(),
            0.5 + 0.75
        );
        let d = make_sine();
        let x = 0.9;
        let next = wick_step(x, &d, 0.0, 0.02).unwrap();
        assert!(next < x);
        let expected = x + x.sin() / x.cos() * (-(x.cos().powi(2)) * 0.02 / 2.0).exp_m1();
        assert_relative_eq!(next, expected, max_relative = 1e-14);
    }

    #[test]
    fn truncated_orders_one_and_two_are_euler_and_milstein() {
        let d = make_pythagoras();
        for &(x, db, dt) in &[(0.3, 0.1, 0.01), (-2.0, -0.4, 0.2), (5.0, 0.0, 0.5)] {
            assert_eq!(
                truncated_step(x, &d, db, dt, 1).unwrap(),
                euler_step(x, &d, db, dt)
            );
            assert_eq!(
                truncated_step(x, &d, db, dt, 2).unwrap(),
                milstein_step(x, &d, db, dt)
            );
        }
    }

    #[test]
    fn high_order_truncation_matches_wick_on_linear() {
        let d = make_linear(1.3).unwrap();
        for &db in &[-0.5, -0.2, 0.0, 0.17, 0.5] {
            let w = wick_step(1.1, &d, db, 0.01).unwrap();
            let t = truncated_step(1.1, &d, db, 0.01, 40).unwrap();
            assert_relative_eq!(t, w, max_relative = 1e-12);
        }
    }

    #[test]
    fn scheme_kind_parsing() {
        assert_eq!("wick".parse::<SchemeKind>().unwrap(), SchemeKind::Wick);
        assert_eq!("euler".parse::<SchemeKind>().unwrap(), SchemeKind::Euler);
        assert_eq!(
            "milstein".parse::<SchemeKind>().unwrap(),
            SchemeKind::Milstein
        );
        assert_eq!(
            "wick_truncated:3".parse::<SchemeKind>().unwrap(),
            SchemeKind::WickTruncated(3)
        );
        assert_eq!(
            "wick_truncated(5)".parse::<SchemeKind>().unwrap(),
            SchemeKind::WickTruncated(5)
        );
        assert!("wick_truncated:0".parse::<SchemeKind>().is_err());
        assert!("wick_truncated".parse::<SchemeKind>().is_err());
        assert!("heun".parse::<SchemeKind>().is_err());
        let k = SchemeKind::WickTruncated(7);
        assert_eq!(k.to_string().parse::<SchemeKind>().unwrap(), k);
    }

    #[test]
    fn simulate_one_step_and_failures() {
        let d = make_sine();
        let g = generate(GridSpec::unit(1).unwrap(), 4, 0);
        let traj = simulate(&d, 1.0, &g, SchemeKind::Milstein).unwrap();
        assert_eq!(traj.values.len(), 2);
        assert_eq!(
            traj.values[1],
            milstein_step(1.0, &d, g.increments()[0], 1.0)
        );
        assert_eq!(
            traj.terminal(),
            simulate_terminal(&d, 1.0, &g, SchemeKind::Milstein).unwrap()
        );

        let blowup = crate::models::Diffusion::new("blowup", |x: f64| 1e300 * x, |_| 1e300);
        let g = generate(GridSpec::unit(4).unwrap(), 4, 0);
        let err = simulate(&blowup, 1.0, &g, SchemeKind::Euler).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err:?}");
        let err = simulate(&blowup, 1.0, &g, SchemeKind::Wick).unwrap_err();
        assert!(matches!(err, Error::Step { step: 0, .. }), "{err:?}");
    }
}
