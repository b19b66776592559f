//! OpenFlow 1.0 driver.

use std::process::ExitCode;
use std::sync::atomic::AtomicBool;

use clap::Parser;
use yanc_cli::{init_logging, StoreArgs};
use yanc_core::driver::Driver;

#[derive(Parser)]
#[command(about = "Connect OpenFlow 1.0 switches to the network file tree")]
struct Cli {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long, default_value = "0.0.0.0:6633")]
    listen: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.store.log_level);
    let fs = match cli.store.connect("ofdriver") {
        Ok(fs) => fs,
        Err(e) => {
            eprintln!("ofdriver: {e}");
            return ExitCode::from(3);
        }
    };
    let mut driver = Driver::new(fs);
    match driver.listen(cli.listen.as_str()) {
        Ok(a) => log::info!("listening on {a}"),
        Err(e) => {
            eprintln!("ofdriver: {}: {e}", cli.listen);
            return ExitCode::FAILURE;
        }
    }
    driver.run(&AtomicBool::new(false));
    ExitCode::SUCCESS
}
