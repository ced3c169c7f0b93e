use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = hucrl_cli::Cli::parse();
    match hucrl_cli::execute(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
