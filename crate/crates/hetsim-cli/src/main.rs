use std::process::ExitCode;

fn main() -> ExitCode {
    hetsim_cli::main_with(std::env::args_os())
}
