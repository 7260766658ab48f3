use std::process::ExitCode;

fn main() -> ExitCode {
    match fpqr_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpqr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
