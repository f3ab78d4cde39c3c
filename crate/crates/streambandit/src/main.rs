use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(streambandit::cli::dispatch(std::env::args_os()))
}
