//! Shared plumbing for the daemons and tools.

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::Args;
use yanc_core::apps::{Daemon, Outcome};
use yanc_core::sim::Topology;
use yanc_core::{FsApi, FsResult, RemoteFs};

pub const DEFAULT_STORE: &str = "127.0.0.1:7070";

#[derive(Debug, Clone, Args)]
pub struct StoreArgs {
    /// Store endpoint (host:port).
    #[arg(long = "mount", visible_alias = "store", env = "YANC_STORE", default_value = DEFAULT_STORE)]
    pub store: String,
    /// error, warn, info, debug or trace.
    #[arg(long, default_value = "warn")]
    pub log_level: String,
    /// Tab-separated output only; this is already the default format.
    #[arg(long)]
    pub porcelain: bool,
}

impl StoreArgs {
    pub fn connect(&self, identity: &str) -> FsResult<Arc<dyn FsApi>> {
        Ok(Arc::new(RemoteFs::connect(self.store.as_str(), identity)?))
    }
}

pub fn init_logging(level: &str) {
    let _ = env_logger::Builder::new().parse_filters(level).try_init();
}

/// Prints a tool outcome and converts its status.
pub fn finish(o: Outcome) -> ExitCode {
    print!("{}", o.stdout);
    eprint!("{}", o.stderr);
    ExitCode::from(o.code.clamp(0, 255) as u8)
}

/// Steps `d` forever, sleeping `idle` whenever it had nothing to do.
pub fn run_daemon(name: &str, d: &mut dyn Daemon, idle: Duration) -> ! {
    loop {
        match d.step() {
            Ok(true) => {}
            Ok(false) => thread::sleep(idle),
            Err(e) => {
                log::warn!("{name}: {e}");
                thread::sleep(idle);
            }
        }
    }
}

/// `linear:N`, `ring:N`, `star:N`, or a topology file.
pub fn load_topology(arg: &str) -> Result<Topology, String> {
    if let Some((shape, n)) = arg.split_once(':') {
        if !Path::new(arg).exists() {
            let n: u64 = n.parse().map_err(|_| format!("bad size in {arg:?}"))?;
            return match shape {
                "linear" => Ok(Topology::linear(n)),
                "ring" => Ok(Topology::ring(n)),
                "star" => Ok(Topology::star(n)),
                _ => Err(format!("unknown shape {shape:?}")),
            };
        }
    }
    let text = std::fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?;
    text.parse().map_err(|e| format!("{arg}: {e}"))
}
