//! Store server.

use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use clap::Parser;
use yanc_cli::{init_logging, DEFAULT_STORE};
use yanc_core::remote::serve;
use yanc_core::{NetFs, Store};

#[derive(Parser)]
#[command(about = "Serve the network file tree over TCP")]
struct Cli {
    #[arg(long, default_value = DEFAULT_STORE)]
    listen: String,
    /// Restore from this file at start and save to it periodically.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Seconds between snapshots.
    #[arg(long, default_value_t = 30)]
    snapshot_interval: u64,
    #[arg(long, default_value = "info")]
    log_level: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    let store = Store::new();
    if let Some(p) = cli.snapshot.as_ref().filter(|p| p.exists()) {
        let text = match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("yancd: {}: {e}", p.display());
                return ExitCode::FAILURE;
            }
        };
        if let Err(e) = store.restore(&text) {
            eprintln!("yancd: {}: {e}", p.display());
            return ExitCode::FAILURE;
        }
    }
    let fs = NetFs::new(store.clone());
    let server = match serve(fs, cli.listen.as_str()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("yancd: {}: {e}", cli.listen);
            return ExitCode::FAILURE;
        }
    };
    log::info!("serving on {}", server.addr());
    loop {
        thread::sleep(Duration::from_secs(cli.snapshot_interval.max(1)));
        if let Some(p) = &cli.snapshot {
            let tmp = p.with_extension("tmp");
            if let Err(e) = std::fs::write(&tmp, store.snapshot()).and_then(|_| std::fs::rename(&tmp, p)) {
                log::warn!("snapshot {}: {e}", p.display());
            }
        }
    }
}
