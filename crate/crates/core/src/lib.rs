//! Strong approximation of drift-less scalar Itô SDEs `dX = σ(X) dB`.
//!
//! The crate provides the Wick-exponential scheme
//!
//! ```text
//! x_{k+1} = x_k + (σ(x_k)/σ′(x_k)) (exp(σ′(x_k) ΔB_k − σ′(x_k)² Δt / 2) − 1)
//! ```
//!
//! alongside Euler–Maruyama and Milstein, a reproducible Brownian path
//! generator, and a Monte Carlo layer that measures strong errors, fits
//! convergence orders, and checks the scheme against its second-moment and
//! Wick–Milstein gap bounds.
//!
//! ```
//! use wicksde::{generate, make_linear, simulate, GridSpec, SchemeKind};
//!
//! let model = make_linear(1.0).unwrap();
//! let path = generate(GridSpec::unit(64).unwrap(), 42, 0);
//! let traj = simulate(&model, 1.0, &path, SchemeKind::Wick).unwrap();
//! let exact = model.exact_terminal(1.0, path.terminal_value(), 1.0).unwrap();
//! assert!((traj.terminal() - exact).abs() < 1e-12 * exact);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod analysis;
pub mod brownian;
pub mod error;
pub mod models;
pub mod report;
pub mod schemes;
pub mod wick;

pub use analysis::{
    check_exactness, check_gap_rate, check_second_moment, convergence_study, fit_order,
    second_moment_bound, strong_error, theoretical_gap_bound, BoundReport, ConvergenceReport,
    ErrorPoint, ExactnessReport, GapReport, MonteCarlo,
};
pub use brownian::{coarsen, generate, polygonal_value, BrownianGrid, GridSpec};
pub use error::{Error, Result};
pub use models::{
    catalog, make_constant, make_linear, make_pythagoras, make_sine, parse_model_spec,
    validate_model, Diffusion, ModelCatalogEntry, Violation,
};
pub use schemes::{
    euler_step, milstein_step, simulate, truncated_step, wick_step, SchemeKind, Trajectory,
};
pub use wick::{
    hermite, truncated_wick_increment, wick_exponential, wick_power, wick_scheme_increment,
    WickIncrementInput,
};
