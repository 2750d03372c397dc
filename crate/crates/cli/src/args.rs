use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wicksde::models::DEFAULT_PROBES;
use wicksde::{parse_model_spec, ModelCatalogEntry, SchemeKind};

/// A command line that could not be turned into a [`RunConfig`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArgsError {
    /// Invalid usage; the message names the offending flag.
    #[error("{0}")]
    Usage(String),
    /// `--help` or `--version`: print and exit successfully.
    #[error("{0}")]
    Info(String),
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> ArgsError {
    ArgsError::Usage(format!("error: {flag}: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Converge,
    Exactness,
    Lemma1,
    Gap,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
    Json,
}

/// Inclusive acceptance window for a fitted order or slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub min: f64,
    pub max: f64,
}

impl Window {
    pub fn contains(&self, x: f64) -> bool {
        self.min <= x && x <= self.max
    }
}

/// A fully validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// The model spec as given on the command line.
    pub model_spec: String,
    pub model: ModelCatalogEntry,
    pub schemes: Vec<SchemeKind>,
    pub resolutions: Vec<usize>,
    pub n_ref: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Step count for `lemma1`.
    pub steps: usize,
    pub probes: Vec<f64>,
    pub tolerance: f64,
    pub expect: Option<Window>,
    pub min_r2: Option<f64>,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

#[derive(Parser)]
#[command(
    name = "wicksde",
    version,
    about = "Strong-error studies for the Wick-exponential SDE scheme"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Strong errors and fitted convergence order per scheme.
    Converge(Common),
    /// Node-wise deviation from a closed-form solution.
    Exactness(Common),
    /// Empirical second moments against their theoretical bound.
    Lemma1(Common),
    /// Mean squared Wick-Milstein gap against resolution.
    Gap(Common),
    /// Finite-difference check of a model's derivative and constants.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Model spec, e.g. `linear:alpha=2,a=1` or `pythagoras`.
    #[arg(long, default_value = "pythagoras")]
    model: String,
    /// Schemes: euler, milstein, wick, wick_truncated:<order>. Repeatable or comma-separated.
    #[arg(long = "scheme", value_delimiter = ',', default_value = "wick", value_parser = parse_scheme)]
    schemes: Vec<SchemeKind>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    resolutions: Vec<usize>,
    /// Reference resolution for the Milstein reference solution.
    #[arg(long, default_value_t = 1024)]
    n_ref: usize,
    #[arg(long, default_value_t = 20_000)]
    n_paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    horizon: f64,
    /// Number of steps for lemma1.
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Probe points for validate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    probes: Option<Vec<f64>>,
    /// Largest acceptable relative deviation for exactness.
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    /// Required window MIN:MAX for the fitted order (converge) or slope (gap).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    expect_order: Option<Window>,
    /// Required minimum r² of the order fit (converge).
    #[arg(long)]
    min_r2: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse().map_err(|e: wicksde::Error| e.to_string())
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (lo, hi) = s.split_once(':').ok_or("expected MIN:MAX")?;
    let min: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad minimum '{lo}'"))?;
    let max: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad maximum '{hi}'"))?;
    if !(min <= max) {
        return Err(format!("empty window {min}:{max}"));
    }
    Ok(Window { min, max })
}

/// Parses a full argument vector, program name included.
pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, ArgsError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ArgsError::Info(e.to_string()),
            _ => ArgsError::Usage(e.to_string()),
        }
    })?;
    let (command, c) = match cli.command {
        Cmd::Converge(c) => (Command::Converge, c),
        Cmd::Exactness(c) => (Command::Exactness, c),
        Cmd::Lemma1(c) => (Command::Lemma1, c),
        Cmd::Gap(c) => (Command::Gap, c),
        Cmd::Validate(c) => (Command::Validate, c),
    };

    let model = parse_model_spec(&c.model).map_err(|e| usage("--model", e))?;
    if c.schemes.is_empty() {
        return Err(usage("--scheme", "no scheme given"));
    }
    if c.resolutions.is_empty() {
        return Err(usage("--resolutions", "no resolutions given"));
    }
    if c.resolutions.contains(&0) {
        return Err(usage("--resolutions", "resolutions must be positive"));
    }
    if matches!(command, Command::Converge | Command::Gap) {
        if c.resolutions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(usage(
                "--resolutions",
                "resolutions must be strictly increasing",
            ));
        }
        if let Some(&bad) = c.resolutions.iter().find(|&&n| !c.n_ref.is_multiple_of(n)) {
            return Err(usage(
                "--n-ref",
                format!("{} is not a multiple of resolution {bad}", c.n_ref),
            ));
        }
    }
    if c.n_paths < 2 {
        return Err(usage("--n-paths", "need at least 2 paths"));
    }
    if !(c.horizon > 0.0 && c.horizon.is_finite()) {
        return Err(usage("--horizon", "must be positive and finite"));
    }
    if c.steps == 0 {
        return Err(usage("--steps", "must be positive"));
    }
    if !(c.tolerance >= 0.0) {
        return Err(usage("--tolerance", "must be nonnegative"));
    }

    Ok(RunConfig {
        command,
        model_spec: c.model,
        model,
        schemes: c.schemes,
        resolutions: c.resolutions,
        n_ref: c.n_ref,
        n_paths: c.n_paths,
        seed: c.seed,
        horizon: c.horizon,
        steps: c.steps,
        probes: c.probes.unwrap_or_else(|| DEFAULT_PROBES.to_vec()),
        tolerance: c.tolerance,
        expect: c.expect_order,
        min_r2: c.min_r2,
        output_path: c.output,
        output_format: c.format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, ArgsError> {
        parse_args(std::iter::once("wicksde").chain(args.iter().copied()))
    }

    fn usage_message(args: &[&str]) -> String {
        match parse(args) {
            Err(ArgsError::Usage(m)) => m,
            other => panic!("expected a usage error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_are_filled_in() {
        let c = parse(&["converge", "--model", "linear:alpha=1", "--scheme", "wick"]).unwrap();
        assert_eq!(c.command, Command::Converge);
        assert_eq!(c.schemes, vec![SchemeKind::Wick]);
        assert_eq!(c.resolutions, vec![8, 16, 32, 64, 128]);
        assert_eq!(
            (c.n_ref, c.n_paths, c.seed, c.horizon),
            (1024, 20_000, 42, 1.0)
        );
        assert_eq!(c.output_format, OutputFormat::Text);
        assert_eq!(c.model.name, "linear");
        assert!(c.output_path.is_none());
    }

    #[test]
    fn non_divisor_reference_is_rejected() {
        let m = usage_message(&["converge", "--resolutions", "8,16,33", "--n-ref", "1024"]);
        assert!(m.contains("--n-ref") && m.contains("33"), "{m}");
    }

    #[test]
    fn gap_config_round_trips() {
        let c = parse(&["gap", "--model", "pythagoras", "--n-paths", "20000"]).unwrap();
        assert_eq!(c.command, Command::Gap);
        assert_eq!(c.n_paths, 20_000);
        assert_eq!(c.model.name, "pythagoras");
    }

    #[test]
    fn schemes_accept_repetition_and_commas() {
        let c = parse(&[
            "converge",
            "--scheme",
            "euler,milstein",
            "--scheme",
            "wick_truncated:3",
        ])
        .unwrap();
        assert_eq!(
            c.schemes,
            vec![
                SchemeKind::Euler,
                SchemeKind::Milstein,
                SchemeKind::WickTruncated(3)
            ]
        );
    }

    #[test]
    fn errors_name_the_flag() {
        assert!(usage_message(&["converge", "--model", "cubic"]).contains("--model"));
        assert!(usage_message(&["converge", "--model", "linear:beta=2"]).contains("--model"));
        assert!(usage_message(&["converge", "--resolutions", "16,8"]).contains("--resolutions"));
        assert!(usage_message(&["converge", "--resolutions", "8,x"]).contains("--resolutions"));
        assert!(usage_message(&["converge", "--scheme", "heun"]).contains("--scheme"));
        assert!(usage_message(&["converge", "--horizon", "-1"]).contains("--horizon"));
        assert!(usage_message(&["converge", "--n-paths", "1"]).contains("--n-paths"));
        assert!(usage_message(&["gap", "--expect-order", "3:1"]).contains("--expect-order"));
    }

    #[test]
    fn windows_accept_negative_bounds() {
        let c = parse(&["gap", "--expect-order", "-2.3:-1.7"]).unwrap();
        assert_eq!(
            c.expect,
            Some(Window {
                min: -2.3,
                max: -1.7
            })
        );
        let c = parse(&["validate", "--probes", "-1,0.5"]).unwrap();
        assert_eq!(c.probes, vec![-1.0, 0.5]);
    }

    #[test]
    fn exactness_does_not_need_a_dividing_reference() {
        let c = parse(&[
            "exactness",
            "--model",
            "linear:alpha=2",
            "--resolutions",
            "64",
            "--n-ref",
            "100",
        ]);
        assert!(c.is_ok());
    }

    #[test]
    fn help_is_not_a_usage_error() {
        assert!(matches!(parse(&["--help"]), Err(ArgsError::Info(_))));
        assert!(matches!(parse(&[]), Err(ArgsError::Usage(_))));
    }
}
