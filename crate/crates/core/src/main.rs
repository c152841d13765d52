use std::process::ExitCode;

fn main() -> ExitCode {
    gq_upir::harness::cli::run(std::env::args_os())
}
