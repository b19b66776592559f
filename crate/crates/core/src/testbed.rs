//! In-process network: simulated fabric, store, driver and applications,
//! stepped deterministically until nothing is left to do.

use std::sync::Arc;

use crate::api::FsApi;
use crate::apps::topod::Collected;
use crate::apps::{Daemon, Routerd, Topod};
use crate::driver::Driver;
use crate::error::FsResult;
use crate::schema::layout::switch_path;
use crate::schema::{read_committed, FlowSpec, NetFs, VIEWS_IDENTITY};
use crate::sim::{DeliveryReport, Fabric, SimError, Topology};
use crate::store::Store;
use crate::views::ViewsEngine;

/// Upper bound on pump rounds; reaching it means something keeps churning.
pub const PUMP_LIMIT: usize = 100_000;

pub struct Testbed {
    pub netfs: NetFs,
    pub fs: Arc<dyn FsApi>,
    pub driver: Driver,
    pub fabric: Fabric,
    pub topology: Topology,
    pub topod: Option<Topod>,
    pub routerd: Option<Routerd>,
    pub views: Option<ViewsEngine>,
}

impl Testbed {
    /// Builds `topo`, connects every switch and waits for the handshakes.
    pub fn new(topo: &Topology) -> Result<Testbed, SimError> {
        let netfs = NetFs::new(Store::new());
        let fs: Arc<dyn FsApi> = Arc::new(netfs.clone());
        let mut tb = Testbed {
            driver: Driver::new(fs.clone()),
            fabric: topo.build()?,
            topology: topo.clone(),
            netfs,
            fs,
            topod: None,
            routerd: None,
            views: None,
        };
        for d in tb.fabric.dpids() {
            tb.connect(d)?;
        }
        tb.pump();
        Ok(tb)
    }

    pub fn with_topod(mut self) -> Testbed {
        self.topod = Some(Topod::new(self.fs.clone()));
        self
    }

    pub fn with_routerd(mut self) -> Testbed {
        self.routerd = Some(Routerd::new(self.fs.clone()));
        self
    }

    pub fn with_views(mut self) -> Testbed {
        self.views = Some(ViewsEngine::new(Arc::new(self.netfs.with_identity(VIEWS_IDENTITY))));
        self
    }

    /// Opens a control channel for `dpid`; the handshake runs on `pump`.
    pub fn connect(&mut self, dpid: u64) -> Result<u64, SimError> {
        let pipe = self.fabric.connect(dpid)?;
        Ok(self.driver.attach(Box::new(pipe)))
    }

    pub fn disconnect(&mut self, dpid: u64) {
        self.fabric.disconnect(dpid);
    }

    /// Steps fabric, driver and applications until two consecutive idle
    /// rounds. Returns the number of rounds run.
    pub fn pump(&mut self) -> usize {
        let mut idle = 0;
        for round in 1..=PUMP_LIMIT {
            let mut busy = self.fabric.poll() > 0;
            busy |= self.driver.poll();
            if let Some(v) = self.views.as_mut() {
                busy |= v.step().unwrap_or_else(|e| {
                    log::warn!("views: {e}");
                    false
                });
            }
            if let Some(r) = self.routerd.as_mut() {
                busy |= r.step().unwrap_or_else(|e| {
                    log::warn!("routerd: {e}");
                    false
                });
            }
            idle = if busy { 0 } else { idle + 1 };
            if idle >= 2 {
                return round;
            }
        }
        log::warn!("pump limit reached");
        PUMP_LIMIT
    }

    /// One discovery round: probe, deliver, collect.
    pub fn topo_round(&mut self) -> FsResult<Collected> {
        let t = self.topod.as_mut().expect("testbed built with_topod");
        t.probe()?;
        self.pump();
        let c = self.topod.as_mut().expect("testbed built with_topod").collect()?;
        self.pump();
        Ok(c)
    }

    /// Injects a frame at a host port and pumps; the report covers
    /// everything the fabric emitted meanwhile, packet-outs included.
    pub fn send(&mut self, dpid: u64, port: u16, frame: &[u8]) -> Result<DeliveryReport, SimError> {
        self.fabric.take_report();
        self.fabric.inject(dpid, port, frame)?;
        self.pump();
        Ok(self.fabric.take_report())
    }

    /// Committed flows of a switch, by name.
    pub fn committed_flows(&self, dpid: u64) -> Vec<(String, FlowSpec)> {
        let sw = switch_path(dpid);
        let mut out = Vec::new();
        for name in self.fs.list(&format!("{sw}/flows")).unwrap_or_default() {
            if let Ok(Some(spec)) = read_committed(self.fs.as_ref(), &format!("{sw}/flows/{name}")) {
                if spec.version > 0 {
                    out.push((name, spec));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}
