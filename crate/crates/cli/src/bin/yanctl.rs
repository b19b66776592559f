use std::process::ExitCode;

use clap::Parser;
use yanc_cli::{finish, init_logging, StoreArgs};

#[derive(Parser)]
#[command(about = "Operate directly on the network file tree")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    match cli.store.connect("yanctl") {
        Ok(fs) => finish(yanc_core::apps::yanctl(fs.as_ref(), &cli.args)),
        Err(e) => {
            eprintln!("yanctl: {e}");
            ExitCode::from(yanc_core::apps::yanctl::exit_code(&e) as u8)
        }
    }
}
