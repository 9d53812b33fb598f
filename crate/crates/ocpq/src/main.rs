use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    ocpq::cli::init_logging();
    let code = ocpq::cli::run_cli(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
