//! Argument parsing and report rendering for the `wicksde` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

mod args;
mod run;

pub use args::{parse_args, ArgsError, Command, OutputFormat, RunConfig, Window};
pub use run::{
    execute, run, worker_count, Execution, RunError, EXIT_ASSERTION, EXIT_OK, EXIT_RUNTIME,
    EXIT_USAGE, WORKERS_ENV,
};
