use std::process::ExitCode;

use clap::Parser;
use yanc_cli::{finish, init_logging, StoreArgs};

#[derive(Parser)]
#[command(about = "Push, remove and list static flows")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    match cli.store.connect("flowctl") {
        Ok(fs) => finish(yanc_core::apps::flowctl(fs.as_ref(), &cli.args)),
        Err(e) => {
            eprintln!("flowctl: {e}");
            ExitCode::from(yanc_core::apps::flowctl::EXIT_UNREACHABLE as u8)
        }
    }
}
