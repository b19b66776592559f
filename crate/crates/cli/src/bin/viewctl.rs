use std::process::ExitCode;

use clap::Parser;
use yanc_cli::{finish, init_logging, StoreArgs};

#[derive(Parser)]
#[command(about = "Define, tear down and list views")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    match cli.store.connect("viewctl") {
        Ok(fs) => finish(yanc_core::views::viewctl(fs.as_ref(), &cli.args)),
        Err(e) => {
            eprintln!("viewctl: {e}");
            ExitCode::from(3)
        }
    }
}
