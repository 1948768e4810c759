use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tabanon_cli::cli_main(std::env::args_os()).code())
}
