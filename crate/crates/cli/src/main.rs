use std::process::ExitCode;

fn main() -> ExitCode {
    match deotsu_cli::run(std::env::args_os()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(deotsu_cli::CliError::Info(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("deotsu: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
