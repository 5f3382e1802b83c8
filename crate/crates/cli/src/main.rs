use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(patrol_cli::run(std::env::args_os()) as u8)
}
