//! Reactive router.

use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use yanc_cli::{init_logging, run_daemon, StoreArgs};
use yanc_core::apps::Routerd;

#[derive(Parser)]
#[command(about = "Learn hosts and install exact-match paths on demand")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    /// Milliseconds to sleep when no packet-ins are pending.
    #[arg(long, default_value_t = 5)]
    interval: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    let fs = match cli.store.connect("routerd") {
        Ok(fs) => fs,
        Err(e) => {
            eprintln!("routerd: {e}");
            return ExitCode::from(3);
        }
    };
    run_daemon("routerd", &mut Routerd::new(fs), Duration::from_millis(cli.interval))
}
