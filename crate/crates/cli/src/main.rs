use std::io;
use std::process::ExitCode;

use wicksde_cli::{parse_args, run, worker_count, ArgsError, EXIT_USAGE};

fn main() -> ExitCode {
    let config = match parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(ArgsError::Info(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(ArgsError::Usage(text)) => {
            eprint!("{}", text.trim_end());
            eprintln!();
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let workers = match worker_count() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to start worker pool");
    let code = pool.install(|| run(&config, &mut io::stdout().lock(), &mut io::stderr().lock()));
    ExitCode::from(code as u8)
}
