use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(overbench::cli::run_cli(std::env::args_os()))
}
