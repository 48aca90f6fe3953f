use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = mmw_core::cli::run_from(std::env::args_os());
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
