use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(l2v_cli::main_with(std::env::args_os()))
}
