use std::process::ExitCode;

fn main() -> ExitCode {
    match bingham::cli::execute(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(bingham::cli::CliError::Usage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
