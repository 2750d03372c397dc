//! Aligned-column text rendering of the analysis reports.

use std::fmt;

use crate::analysis::{BoundQuantity, BoundReport, ConvergenceReport, ExactnessReport, GapReport};

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reference = if self.exact_reference {
            "closed form".to_string()
        } else {
            format!("milstein at N={}", self.n_ref)
        };
        writeln!(
            f,
            "strong error  model={}  scheme={}  T={}  paths={}  seed={}  reference={}",
            self.model_name, self.scheme, self.horizon, self.n_paths, self.seed, reference
        )?;
        writeln!(
            f,
            "{:>8}  {:>14}  {:>12}  {:>14}  {:>14}",
            "N", "mean_abs_err", "std_err", "rms_err*", "max_node_err*"
        )?;
        for p in &self.points {
            writeln!(
                f,
                "{:>8}  {:>14.6e}  {:>12.3e}  {:>14.6e}  {:>14.6e}",
                p.n, p.mean_abs_error, p.std_error, p.rms_error, p.mean_max_node_error
            )?;
        }
        if self.exact_scheme {
            writeln!(
                f,
                "exact scheme: all errors at the rounding floor, no order fitted"
            )?;
        } else {
            writeln!(
                f,
                "fitted order {}  r2 {}  constant {}",
                opt(self.fitted_order, 4),
                opt(self.fit_r2, 4),
                opt(self.empirical_constant(), 4)
            )?;
        }
        if self.failed_paths > 0 {
            writeln!(f, "aborted paths: {}", self.failed_paths)?;
        }
        write!(f, "(* supplementary)")
    }
}

impl fmt::Display for ExactnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "exactness  model={}  scheme={}  T={}  paths={}  seed={}",
            self.model_name, self.scheme, self.horizon, self.n_paths, self.seed
        )?;
        writeln!(
            f,
            "{:>8}  {:>16}  {:>16}",
            "N", "max_rel_dev", "max_scaled_dev"
        )?;
        for p in &self.points {
            writeln!(
                f,
                "{:>8}  {:>16.6e}  {:>16.6e}",
                p.n, p.max_relative_deviation, p.max_scaled_deviation
            )?;
        }
        write!(
            f,
            "worst relative deviation {:.6e}",
            self.worst_relative_deviation()
        )
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (title, index) = match self.quantity {
            BoundQuantity::SecondMoment => ("second moment E[x_N(k)^2]", "k"),
            BoundQuantity::WickMilsteinGap => ("wick-milstein gap E[(x_N(N)-y_N(N))^2]", "N"),
        };
        writeln!(
            f,
            "{title}  model={}  T={}  paths={}  seed={}",
            self.model_name, self.horizon, self.n_paths, self.seed
        )?;
        writeln!(
            f,
            "{:>8}  {:>14}  {:>12}  {:>14}",
            index, "empirical", "std_err", "bound"
        )?;
        for e in &self.entries {
            let bound = e
                .bound
                .map_or_else(|| "-".to_string(), |b| format!("{b:.6e}"));
            writeln!(
                f,
                "{:>8}  {:>14.6e}  {:>12.3e}  {:>14}",
                e.index, e.empirical, e.std_error, bound
            )?;
        }
        if self.violations.is_empty() {
            write!(f, "no violations")
        } else {
            write!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                write!(
                    f,
                    "\n  {index}={}: empirical {:.6e} > bound {:.6e} (slack {:.3e})",
                    v.index, v.empirical, v.bound, v.slack
                )?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for GapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.bounds)?;
        if self.exact_agreement {
            write!(
                f,
                "exact agreement: wick and milstein coincide, no slope fitted"
            )
        } else {
            write!(
                f,
                "fitted slope {}  r2 {}",
                opt(self.fitted_slope, 4),
                opt(self.fit_r2, 4)
            )
        }
    }
}
