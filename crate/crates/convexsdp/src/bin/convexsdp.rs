use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(convexsdp::cli::run(std::env::args_os()))
}
