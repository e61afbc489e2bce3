use std::process::ExitCode;

fn main() -> ExitCode {
    let code = querylab_core::experiment::run_command(std::env::args_os());
    ExitCode::from(code as u8)
}
