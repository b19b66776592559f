//! Simulated switch fabric that dials a controller over TCP.

use std::net::TcpStream;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use clap::Parser;
use yanc_cli::{init_logging, load_topology};
use yanc_core::driver::TcpTransport;

#[derive(Parser)]
#[command(about = "Run a simulated OpenFlow 1.0 fabric against a driver")]
struct Cli {
    /// Topology file, or linear:N, ring:N, star:N.
    #[arg(long)]
    topo: String,
    /// Driver endpoint.
    #[arg(long, default_value = "127.0.0.1:6633")]
    connect: String,
    #[arg(long, default_value = "info")]
    log_level: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    let topo = match load_topology(&cli.topo) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("simfab: {e}");
            return ExitCode::from(2);
        }
    };
    let mut fabric = match topo.build() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("simfab: {e}");
            return ExitCode::from(2);
        }
    };
    for d in fabric.dpids() {
        let t = TcpStream::connect(cli.connect.as_str()).and_then(TcpTransport::new);
        match t {
            Ok(t) => fabric.attach(d, Box::new(t)).expect("dpid from the fabric"),
            Err(e) => {
                eprintln!("simfab: {}: {e}", cli.connect);
                return ExitCode::from(3);
            }
        }
    }
    log::info!("{} switches connected to {}", fabric.dpids().len(), cli.connect);
    loop {
        if fabric.poll() == 0 {
            thread::sleep(Duration::from_millis(1));
        }
    }
}
