use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use serde_json::json;
use wicksde::{
    check_exactness, check_gap_rate, check_second_moment, convergence_study, validate_model,
    BoundReport, ConvergenceReport, ExactnessReport, GapReport, MonteCarlo, Violation,
};

use crate::args::{Command, OutputFormat, RunConfig};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "WICKSDE_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Analysis(#[from] wicksde::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot write output: {0}")]
    Stdout(io::Error),
}

/// A rendered report plus the embedded checks it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub rendered: String,
    pub failures: Vec<String>,
}

/// Runs the analysis behind `config` and renders its report.
pub fn execute(config: &RunConfig) -> Result<Execution, RunError> {
    let d = &config.model.diffusion;
    let a = config.model.default_initial;
    let mc = MonteCarlo::new(config.n_paths, config.seed).with_horizon(config.horizon);
    let format = config.output_format;
    let mut failures = Vec::new();

    let rendered = match config.command {
        Command::Converge => {
            let reports = config
                .schemes
                .iter()
                .map(|&s| convergence_study(d, a, s, &config.resolutions, config.n_ref, &mc))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &reports {
                check_order(config, r, &mut failures);
            }
            render_convergence(&reports, format)
        }
        Command::Exactness => {
            let reports = config
                .schemes
                .iter()
                .map(|&s| check_exactness(d, a, s, &config.resolutions, &mc))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &reports {
                let worst = r.worst_relative_deviation();
                if !(worst <= config.tolerance) {
                    failures.push(format!(
                        "{}: max relative deviation {worst:.6e} exceeds {:e}",
                        r.scheme, config.tolerance
                    ));
                }
            }
            render_exactness(&reports, format)
        }
        Command::Lemma1 => {
            let report = check_second_moment(d, a, config.steps, &mc)?;
            for v in &report.violations {
                failures.push(format!(
                    "second moment at k={} is {:.6e}, above bound {:.6e} by {:.3e}",
                    v.index, v.empirical, v.bound, v.slack
                ));
            }
            render_bounds(&report, format, None)
        }
        Command::Gap => {
            let report = check_gap_rate(d, a, &config.resolutions, &mc)?;
            for v in &report.bounds.violations {
                failures.push(format!(
                    "gap at N={} is {:.6e}, above bound {:.6e} by {:.3e}",
                    v.index, v.empirical, v.bound, v.slack
                ));
            }
            if let Some(w) = config.expect {
                match report.fitted_slope {
                    Some(s) if w.contains(s) => {}
                    Some(s) => failures.push(format!(
                        "fitted gap slope {s:.4} outside [{}, {}]",
                        w.min, w.max
                    )),
                    None => failures.push("no gap slope was fitted".to_string()),
                }
            }
            render_gap(&report, format)
        }
        Command::Validate => {
            let violations = validate_model(d, &config.probes)?;
            failures.extend(violations.iter().map(|v| v.to_string()));
            render_validation(&config.model_spec, &config.probes, &violations, format)
        }
    };
    Ok(Execution { rendered, failures })
}

fn check_order(config: &RunConfig, r: &ConvergenceReport, failures: &mut Vec<String>) {
    if let Some(w) = config.expect {
        match r.fitted_order {
            Some(p) if w.contains(p) => {}
            Some(p) => failures.push(format!(
                "{}: fitted order {p:.4} outside [{}, {}]",
                r.scheme, w.min, w.max
            )),
            None => failures.push(format!("{}: no order was fitted", r.scheme)),
        }
    }
    if let Some(min) = config.min_r2 {
        match r.fit_r2 {
            Some(r2) if r2 >= min => {}
            Some(r2) => failures.push(format!("{}: fit r2 {r2:.4} below {min}", r.scheme)),
            None => failures.push(format!("{}: no order was fitted", r.scheme)),
        }
    }
}

/// Round-trip exact formatting for CSV cells.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn to_json<T: serde::Serialize>(reports: &[T]) -> String {
    let value = match reports {
        [single] => serde_json::to_value(single),
        many => serde_json::to_value(many),
    }
    .expect("reports serialize");
    serde_json::to_string_pretty(&value).expect("json values serialize") + "\n"
}

fn join_text<T: std::fmt::Display>(reports: &[T]) -> String {
    reports
        .iter()
        .map(|r| format!("{r}\n"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_convergence(reports: &[ConvergenceReport], format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => join_text(reports),
        OutputFormat::Json => to_json(reports),
        OutputFormat::Csv => {
            let multi = reports.len() > 1;
            let mut out = String::from(if multi {
                "scheme,n,mean_abs_error,std_error\n"
            } else {
                "n,mean_abs_error,std_error\n"
            });
            for r in reports {
                for p in &r.points {
                    if multi {
                        write!(out, "{},", r.scheme).unwrap();
                    }
                    writeln!(
                        out,
                        "{},{},{}",
                        p.n,
                        num(p.mean_abs_error),
                        num(p.std_error)
                    )
                    .unwrap();
                }
            }
            out
        }
    }
}

fn render_exactness(reports: &[ExactnessReport], format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => join_text(reports),
        OutputFormat::Json => to_json(reports),
        OutputFormat::Csv => {
            let mut out = String::from("scheme,n,max_relative_deviation,max_scaled_deviation\n");
            for r in reports {
                for p in &r.points {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        r.scheme,
                        p.n,
                        num(p.max_relative_deviation),
                        num(p.max_scaled_deviation)
                    )
                    .unwrap();
                }
            }
            out
        }
    }
}

fn render_bounds(report: &BoundReport, format: OutputFormat, index: Option<&str>) -> String {
    match format {
        OutputFormat::Text => format!("{report}\n"),
        OutputFormat::Json => to_json(std::slice::from_ref(report)),
        OutputFormat::Csv => {
            let mut out = format!("{},empirical,std_error,bound\n", index.unwrap_or("k"));
            for e in &report.entries {
                writeln!(
                    out,
                    "{},{},{},{}",
                    e.index,
                    num(e.empirical),
                    num(e.std_error),
                    opt_num(e.bound)
                )
                .unwrap();
            }
            out
        }
    }
}

fn render_gap(report: &GapReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => format!("{report}\n"),
        OutputFormat::Json => to_json(std::slice::from_ref(report)),
        OutputFormat::Csv => render_bounds(&report.bounds, format, Some("n")),
    }
}

fn render_validation(
    spec: &str,
    probes: &[f64],
    violations: &[Violation],
    format: OutputFormat,
) -> String {
    match format {
        OutputFormat::Text => {
            let mut out = format!("validate  model={spec}  probes={}\n", probes.len());
            if violations.is_empty() {
                out.push_str("no violations\n");
            }
            for v in violations {
                writeln!(out, "  {v}").unwrap();
            }
            out
        }
        OutputFormat::Json => {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            let value = json!({ "model": spec, "probes": probes, "violations": list });
            serde_json::to_string_pretty(&value).expect("json values serialize") + "\n"
        }
        OutputFormat::Csv => {
            let mut out = String::from("violation\n");
            for v in violations {
                writeln!(out, "\"{}\"", v.to_string().replace('"', "\"\"")).unwrap();
            }
            out
        }
    }
}

/// Runs `config`, writes the report to its output path or `stdout`, and
/// reports failed checks and errors on `stderr`. Returns the exit code.
pub fn run(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = execute(config).and_then(|exec| {
        emit(config, &exec.rendered, stdout)?;
        Ok(exec.failures)
    });
    match result {
        Ok(failures) if failures.is_empty() => EXIT_OK,
        Ok(failures) => {
            for f in &failures {
                let _ = writeln!(stderr, "check failed: {f}");
            }
            EXIT_ASSERTION
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn emit(config: &RunConfig, rendered: &str, stdout: &mut dyn Write) -> Result<(), RunError> {
    match &config.output_path {
        Some(path) => File::create(path)
            .and_then(|mut f| f.write_all(rendered.as_bytes()))
            .map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            }),
        None => stdout
            .write_all(rendered.as_bytes())
            .map_err(RunError::Stdout),
    }
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn worker_count() -> Result<usize, String> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!(
                "error: {WORKERS_ENV}: expected a positive integer, got '{v}'"
            )),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::parse_args;

    fn config(args: &[&str]) -> RunConfig {
        parse_args(std::iter::once("wicksde").chain(args.iter().copied())).unwrap()
    }

    fn run_to_string(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(&config(args), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn exactness_on_linear_model_passes() {
        let (code, out, _) = run_to_string(&[
            "exactness",
            "--model",
            "linear:alpha=2",
            "--resolutions",
            "64",
            "--n-paths",
            "100",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("worst relative deviation"));
    }

    #[test]
    fn exactness_failure_exits_with_assertion_code() {
        let (code, _, err) = run_to_string(&[
            "exactness",
            "--model",
            "linear:alpha=2",
            "--scheme",
            "euler",
            "--resolutions",
            "16",
            "--n-paths",
            "10",
        ]);
        assert_eq!(code, EXIT_ASSERTION);
        assert!(err.contains("max relative deviation"), "{err}");
    }

    #[test]
    fn csv_has_the_documented_schema() {
        let (code, out, _) = run_to_string(&[
            "converge",
            "--model",
            "sine",
            "--resolutions",
            "8,16,32",
            "--n-ref",
            "256",
            "--n-paths",
            "200",
            "--format",
            "csv",
        ]);
        assert_eq!(code, EXIT_OK);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("n,mean_abs_error,std_error"));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 3);
        for row in rows {
            let cells: Vec<&str> = row.split(',').collect();
            assert_eq!(cells.len(), 3);
            let x: f64 = cells[1].parse().unwrap();
            assert_eq!(num(x), cells[1]);
        }
    }

    #[test]
    fn lemma1_with_zero_diffusion_passes() {
        let (code, out, _) = run_to_string(&[
            "lemma1",
            "--model",
            "constant:c=0",
            "--n-paths",
            "100",
            "--format",
            "csv",
        ]);
        assert_eq!(code, EXIT_OK);
        for row in out.lines().skip(1) {
            assert_eq!(row.split(',').nth(1), Some(num(1.0).as_str()));
        }
    }

    #[test]
    fn analysis_errors_are_runtime_failures() {
        let (code, _, err) =
            run_to_string(&["exactness", "--model", "pythagoras", "--n-paths", "10"]);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(err.starts_with("error:"), "{err}");
    }
}
