use std::process::ExitCode;

fn main() -> ExitCode {
    lowramp::cli::run(std::env::args_os())
}
