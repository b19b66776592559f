//! Topology discovery daemon.

use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use yanc_cli::{init_logging, StoreArgs};
use yanc_core::apps::Topod;

#[derive(Parser)]
#[command(about = "Discover links with LLDP and record them as peer links")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    /// Milliseconds between probe rounds.
    #[arg(long, default_value_t = 1000)]
    interval: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    let fs = match cli.store.connect("topod") {
        Ok(fs) => fs,
        Err(e) => {
            eprintln!("topod: {e}");
            return ExitCode::from(3);
        }
    };
    let mut t = Topod::new(fs);
    let interval = Duration::from_millis(cli.interval);
    loop {
        if let Err(e) = t.probe() {
            log::warn!("probe: {e}");
        }
        std::thread::sleep(interval);
        match t.collect() {
            Ok(c) => {
                for l in &c.added {
                    log::info!("link up {l:?}");
                }
                for l in &c.removed {
                    log::info!("link down {l:?}");
                }
            }
            Err(e) => log::warn!("collect: {e}"),
        }
    }
}
