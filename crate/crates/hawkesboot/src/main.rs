use std::process::ExitCode;

fn main() -> ExitCode {
    hawkesboot::cli::main_with_args(std::env::args_os())
}
