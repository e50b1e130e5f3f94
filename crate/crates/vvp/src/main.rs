use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(vvp::cli::run(std::env::args()) as u8)
}
