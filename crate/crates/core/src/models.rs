//! Diffusion coefficients for drift-less scalar SDEs `dX = σ(X) dB` and a
//! small catalog of models satisfying the usual smoothness hypotheses
//! (σ and σσ′ continuously differentiable with bounded derivatives).

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type TerminalFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Probe grid used by the catalog self-checks.
pub const DEFAULT_PROBES: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-6;
const FD_ABS_TOL: f64 = 1e-9;
// Slack for rounding in the constant checks; identities such as
// (√(1+x²))² = 1+x² only hold up to an ulp.
const BOUND_REL_SLACK: f64 = 1e-12;

/// A diffusion coefficient σ together with its analytic derivative and the
/// constants the second-moment and gap bounds consume.
///
/// Immutable once built; the function fields must be pure.
#[derive(Clone)]
pub struct Diffusion {
    name: String,
    sigma: ScalarFn,
    sigma_prime: ScalarFn,
    lipschitz_sigma: Option<f64>,
    lipschitz_sigma_sigma_prime: Option<f64>,
    growth_constant: Option<f64>,
    exact_terminal: Option<TerminalFn>,
}

impl Diffusion {
    pub fn new<S, D>(name: impl Into<String>, sigma: S, sigma_prime: D) -> Self
    where
        S: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            sigma: Arc::new(sigma),
            sigma_prime: Arc::new(sigma_prime),
            lipschitz_sigma: None,
            lipschitz_sigma_sigma_prime: None,
            growth_constant: None,
            exact_terminal: None,
        }
    }

    /// Declares L₁, the Lipschitz constant of σ.
    pub fn with_lipschitz_sigma(mut self, l1: f64) -> Self {
        self.lipschitz_sigma = Some(l1);
        self
    }

    /// Declares L₂, the Lipschitz constant of σσ′.
    pub fn with_lipschitz_sigma_sigma_prime(mut self, l2: f64) -> Self {
        self.lipschitz_sigma_sigma_prime = Some(l2);
        self
    }

    /// Declares M₁ with σ(x)² ≤ M₁(1 + x²).
    pub fn with_growth_constant(mut self, m1: f64) -> Self {
        self.growth_constant = Some(m1);
        self
    }

    /// Attaches the closed-form strong solution `(a, B(t), t) ↦ X(t)`.
    pub fn with_exact_terminal<F>(mut self, exact: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.exact_terminal = Some(Arc::new(exact));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }

    #[inline]
    pub fn sigma_prime(&self, x: f64) -> f64 {
        (self.sigma_prime)(x)
    }

    pub fn lipschitz_sigma(&self) -> Option<f64> {
        self.lipschitz_sigma
    }

    pub fn lipschitz_sigma_sigma_prime(&self) -> Option<f64> {
        self.lipschitz_sigma_sigma_prime
    }

    pub fn growth_constant(&self) -> Option<f64> {
        self.growth_constant
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact_terminal.is_some()
    }

    /// Strong solution at time `t` started from `a`, given the Brownian value
    /// `b = B(t)`. `None` when the model has no closed form.
    pub fn exact_terminal(&self, a: f64, b: f64, t: f64) -> Option<f64> {
        self.exact_terminal.as_ref().map(|f| f(a, b, t))
    }

    pub(crate) fn require(&self, value: Option<f64>, constant: &'static str) -> Result<f64> {
        value.ok_or_else(|| Error::MissingConstant {
            model: self.name.clone(),
            constant,
        })
    }
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffusion")
            .field("name", &self.name)
            .field("lipschitz_sigma", &self.lipschitz_sigma)
            .field(
                "lipschitz_sigma_sigma_prime",
                &self.lipschitz_sigma_sigma_prime,
            )
            .field("growth_constant", &self.growth_constant)
            .field("exact", &self.exact_terminal.is_some())
            .finish()
    }
}

/// σ(x) = αx. The Wick scheme reproduces its solution
/// `a·exp(αB(t) − α²t/2)` exactly at every grid node.
pub fn make_linear(alpha: f64) -> Result<Diffusion> {
    if !alpha.is_finite() || alpha == 0.0 {
        return Err(invalid(format!(
            "linear model needs a finite nonzero alpha (got {alpha}); use constant:c=0 for zero diffusion"
        )));
    }
    Ok(Diffusion::new("linear", move |x| alpha * x, move |_| alpha)
        .with_lipschitz_sigma(alpha.abs())
        .with_lipschitz_sigma_sigma_prime(alpha * alpha)
        .with_growth_constant(alpha * alpha)
        .with_exact_terminal(move |a, b, t| a * (alpha * b - 0.5 * alpha * alpha * t).exp()))
}

/// σ(x) = c, so σ′ ≡ 0 and every scheme reduces to `x + c·ΔB`.
pub fn make_constant(c: f64) -> Diffusion {
    Diffusion::new("constant", move |_| c, |_| 0.0)
        .with_lipschitz_sigma(0.0)
        .with_lipschitz_sigma_sigma_prime(0.0)
        .with_growth_constant(c * c)
        .with_exact_terminal(move |a, b, _| a + c * b)
}

/// σ(x) = √(1 + x²); σσ′ = x, so L₁ = L₂ = M₁ = 1.
pub fn make_pythagoras() -> Diffusion {
    Diffusion::new(
        "pythagoras",
        |x: f64| x.hypot(1.0),
        |x: f64| x / x.hypot(1.0),
    )
    .with_lipschitz_sigma(1.0)
    .with_lipschitz_sigma_sigma_prime(1.0)
    .with_growth_constant(1.0)
}

/// σ(x) = sin x; σσ′ = sin(2x)/2, so L₁ = L₂ = M₁ = 1.
pub fn make_sine() -> Diffusion {
    Diffusion::new("sine", f64::sin, f64::cos)
        .with_lipschitz_sigma(1.0)
        .with_lipschitz_sigma_sigma_prime(1.0)
        .with_growth_constant(1.0)
}

#[derive(Debug, Clone)]
pub struct ModelCatalogEntry {
    pub name: String,
    pub diffusion: Diffusion,
    pub default_initial: f64,
    pub notes: String,
}

/// Every shipped model with its default parameters.
pub fn catalog() -> Vec<ModelCatalogEntry> {
    ["linear", "constant", "pythagoras", "sine"]
        .iter()
        .map(|name| parse_model_spec(name).expect("catalog defaults are valid"))
        .collect()
}

/// Parses `name[:key=value[,key=value]*]`, e.g. `linear:alpha=2.0` or
/// `constant:c=0,a=5`. Every model accepts `a` (initial value, default 1).
pub fn parse_model_spec(spec: &str) -> Result<ModelCatalogEntry> {
    let (name, params) = match spec.split_once(':') {
        Some((name, rest)) => (name.trim(), parse_params(rest)?),
        None => (spec.trim(), Vec::new()),
    };

    let allowed: &[&str] = match name {
        "linear" => &["alpha", "a"],
        "constant" => &["c", "a"],
        "pythagoras" | "sine" => &["a"],
        other => {
            return Err(invalid(format!(
                "unknown model `{other}` (expected one of linear, constant, pythagoras, sine)"
            )))
        }
    };
    if let Some((key, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(invalid(format!("model `{name}` has no parameter `{key}`")));
    }
    let get = |key: &str, default: f64| {
        params
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map_or(default, |(_, v)| *v)
    };

    let a = get("a", 1.0);
    let (diffusion, notes) = match name {
        "linear" => {
            let alpha = get("alpha", 1.0);
            (
                make_linear(alpha)?,
                format!("sigma(x) = {alpha}*x; geometric Brownian motion, exact solution known"),
            )
        }
        "constant" => {
            let c = get("c", 1.0);
            (
                make_constant(c),
                format!("sigma(x) = {c}; X = a + c*B, all schemes exact"),
            )
        }
        "pythagoras" => (make_pythagoras(), "sigma(x) = sqrt(1 + x^2)".to_string()),
        _ => (make_sine(), "sigma(x) = sin(x)".to_string()),
    };

    Ok(ModelCatalogEntry {
        name: name.to_string(),
        diffusion,
        default_initial: a,
        notes,
    })
}

fn parse_params(rest: &str) -> Result<Vec<(String, f64)>> {
    rest.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                invalid(format!(
                    "malformed model parameter `{pair}` (expected key=value)"
                ))
            })?;
            let value: f64 = v.trim().parse().map_err(|_| {
                invalid(format!(
                    "model parameter `{}` is not a number: `{}`",
                    k.trim(),
                    v.trim()
                ))
            })?;
            if !value.is_finite() {
                return Err(invalid(format!(
                    "model parameter `{}` must be finite",
                    k.trim()
                )));
            }
            Ok((k.trim().to_string(), value))
        })
        .collect()
}

/// A hypothesis that failed at a probe point or probe pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Central finite difference of σ disagrees with the declared σ′.
    Derivative {
        x: f64,
        declared: f64,
        finite_difference: f64,
    },
    /// σ(x)² > M₁(1 + x²).
    Growth { x: f64, sigma_sq: f64, bound: f64 },
    /// |σ(x) − σ(y)| > L₁|x − y|.
    LipschitzSigma {
        x: f64,
        y: f64,
        ratio: f64,
        declared: f64,
    },
    /// |σσ′(x) − σσ′(y)| > L₂|x − y|.
    LipschitzSigmaSigmaPrime {
        x: f64,
        y: f64,
        ratio: f64,
        declared: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Derivative { x, declared, finite_difference } => write!(
                f,
                "derivative at x={x}: declared {declared:e}, finite difference {finite_difference:e} (off by {:e})",
                (declared - finite_difference).abs()
            ),
            Violation::Growth { x, sigma_sq, bound } => write!(
                f,
                "growth at x={x}: sigma^2 = {sigma_sq:e} > {bound:e} (excess {:e})",
                sigma_sq - bound
            ),
            Violation::LipschitzSigma { x, y, ratio, declared } => write!(
                f,
                "lipschitz(sigma) on ({x}, {y}): slope {ratio:e} > declared {declared:e}"
            ),
            Violation::LipschitzSigmaSigmaPrime { x, y, ratio, declared } => write!(
                f,
                "lipschitz(sigma*sigma') on ({x}, {y}): slope {ratio:e} > declared {declared:e}"
            ),
        }
    }
}

/// Checks σ′ against finite differences and the declared constants against
/// every probe point and probe pair. Report-only: an empty list means no
/// violation was found.
pub fn validate_model(d: &Diffusion, probe_points: &[f64]) -> Result<Vec<Violation>> {
    if probe_points.is_empty() {
        return Err(invalid("validate_model needs at least one probe point"));
    }
    let mut out = Vec::new();

    for &x in probe_points {
        let declared = d.sigma_prime(x);
        let fd = (d.sigma(x + FD_STEP) - d.sigma(x - FD_STEP)) / (2.0 * FD_STEP);
        if !((fd - declared).abs() <= (FD_REL_TOL * declared.abs()).max(FD_ABS_TOL)) {
            out.push(Violation::Derivative {
                x,
                declared,
                finite_difference: fd,
            });
        }
        if let Some(m1) = d.growth_constant() {
            let s = d.sigma(x);
            let bound = m1 * (1.0 + x * x);
            if s * s > bound * (1.0 + BOUND_REL_SLACK) {
                out.push(Violation::Growth {
                    x,
                    sigma_sq: s * s,
                    bound,
                });
            }
        }
    }

    let ssp = |x: f64| d.sigma(x) * d.sigma_prime(x);
    for (i, &x) in probe_points.iter().enumerate() {
        for &y in &probe_points[i + 1..] {
            let gap = (x - y).abs();
            if gap == 0.0 {
                continue;
            }
            if let Some(l1) = d.lipschitz_sigma() {
                let ratio = (d.sigma(x) - d.sigma(y)).abs() / gap;
                if ratio > l1 * (1.0 + BOUND_REL_SLACK) + f64::EPSILON {
                    out.push(Violation::LipschitzSigma {
                        x,
                        y,
                        ratio,
                        declared: l1,
                    });
                }
            }
            if let Some(l2) = d.lipschitz_sigma_sigma_prime() {
                let ratio = (ssp(x) - ssp(y)).abs() / gap;
                if ratio > l2 * (1.0 + BOUND_REL_SLACK) + f64::EPSILON {
                    out.push(Violation::LipschitzSigmaSigmaPrime {
                        x,
                        y,
                        ratio,
                        declared: l2,
                    });
                }
            }
        }
    }
    Ok(out)
}
