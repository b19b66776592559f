//! Views engine.

use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use yanc_cli::{init_logging, run_daemon, StoreArgs};
use yanc_core::schema::VIEWS_IDENTITY;
use yanc_core::views::ViewsEngine;

#[derive(Parser)]
#[command(about = "Maintain slice views: mirrors, flow translation, packet-in filtering")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    /// Milliseconds to sleep when idle.
    #[arg(long, default_value_t = 10)]
    interval: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    let fs = match cli.store.connect(VIEWS_IDENTITY) {
        Ok(fs) => fs,
        Err(e) => {
            eprintln!("viewsd: {e}");
            return ExitCode::from(3);
        }
    };
    run_daemon("viewsd", &mut ViewsEngine::new(fs), Duration::from_millis(cli.interval))
}
