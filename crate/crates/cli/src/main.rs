mod commands;
mod error;
mod report;
mod schema;

use std::process::ExitCode;

fn main() -> ExitCode {
    let matches = match schema::cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            // help and version are successful exits
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match schema::resolve(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(&config).and_then(|r| report::emit(&config, r)) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe, as with `| head`
        Err(error::CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Err(write_err) = report::emit_failure(&config, &e) {
                eprintln!("error: could not write failure report: {write_err}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
