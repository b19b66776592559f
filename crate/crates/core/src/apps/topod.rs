//! Link discovery: LLDP probes out of every port, `peer` links for every
//! probe heard back.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::{debug, info};

use crate::api::FsApi;
use crate::error::FsResult;
use crate::schema::layout::{port_path, switch_path, NET_ROOT};

use super::lldp::LldpProbe;
use super::{packet_out, pending_records, ports, switches, Daemon, Endpoint};

pub const BUFFER: &str = "topod";
/// Collections a link may go unseen before its `peer` links are removed.
pub const MISS_LIMIT: u32 = 3;

pub type Link = (Endpoint, Endpoint);

fn canon(a: Endpoint, b: Endpoint) -> Link {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn peer_file(e: Endpoint) -> String {
    format!("{}/peer", port_path(&switch_path(e.0), e.1))
}

pub struct Topod {
    fs: Arc<dyn FsApi>,
    /// Known links and how many collections in a row missed them.
    links: BTreeMap<Link, u32>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Collected {
    pub probes: usize,
    pub added: Vec<Link>,
    pub removed: Vec<Link>,
}

impl Topod {
    pub fn new(fs: Arc<dyn FsApi>) -> Topod {
        Topod {
            fs,
            links: BTreeMap::new(),
        }
    }

    pub fn links(&self) -> Vec<Link> {
        self.links.keys().copied().collect()
    }

    fn connected(&self, sw: &str) -> bool {
        self.fs.read_text(&format!("{sw}/status")).is_ok_and(|s| s == "connected")
    }

    /// Sends one probe out of every port of every connected switch, opening
    /// the discovery buffer first so replies are captured.
    pub fn probe(&mut self) -> FsResult<usize> {
        let mut sent = 0;
        for (dpid, sw) in switches(self.fs.as_ref(), NET_ROOT)? {
            self.fs.open_event_buffer(&sw, BUFFER)?;
            if !self.connected(&sw) {
                continue;
            }
            for p in ports(self.fs.as_ref(), &sw)? {
                let pp = port_path(&sw, p);
                if self.fs.read_text(&format!("{pp}/config.port_down")).is_ok_and(|v| v == "1") {
                    continue;
                }
                let src = self.fs.read_text(&format!("{pp}/hw_addr"))?.parse().unwrap_or_default();
                let frame = LldpProbe::new(dpid, p).encode(src);
                packet_out(self.fs.as_ref(), &sw, BUFFER, None, &[p], &frame)?;
                sent += 1;
            }
        }
        Ok(sent)
    }

    /// Consumes every buffered probe and updates `peer` links.
    pub fn collect(&mut self) -> FsResult<Collected> {
        let mut seen = BTreeSet::new();
        let mut out = Collected::default();
        for (dpid, sw) in switches(self.fs.as_ref(), NET_ROOT)? {
            let buf = self.fs.open_event_buffer(&sw, BUFFER)?;
            for (rec, r) in pending_records(self.fs.as_ref(), &buf)? {
                if let Some(probe) = LldpProbe::decode(&r.data) {
                    out.probes += 1;
                    if (probe.dpid, probe.port) != (dpid, r.in_port) {
                        seen.insert(canon((probe.dpid, probe.port), (dpid, r.in_port)));
                    }
                }
                self.fs.ack_event(&rec)?;
            }
            let marker = format!("{buf}/{}", crate::schema::OVERFLOWED_FILE);
            if self.fs.exists(&marker) {
                self.fs.remove(&marker, false)?;
            }
        }
        for &link in &seen {
            if self.links.insert(link, 0).is_none() {
                // a port that moved to a new peer leaves its old link stale
                let stale: Vec<Link> = self
                    .links
                    .keys()
                    .filter(|l| **l != link && [l.0, l.1].iter().any(|e| *e == link.0 || *e == link.1))
                    .copied()
                    .collect();
                for l in stale {
                    self.unlink(l)?;
                    out.removed.push(l);
                }
                info!("link up {:?} <-> {:?}", link.0, link.1);
                out.added.push(link);
            }
            self.link(link)?;
        }
        let missed: Vec<Link> = self.links.keys().filter(|l| !seen.contains(l)).copied().collect();
        for l in missed {
            let m = self.links.get_mut(&l).expect("known link");
            *m += 1;
            if *m >= MISS_LIMIT {
                info!("link down {:?} <-> {:?}", l.0, l.1);
                self.unlink(l)?;
                out.removed.push(l);
            }
        }
        debug!("collected {} probes, {} links", out.probes, self.links.len());
        Ok(out)
    }

    fn link(&self, (a, b): Link) -> FsResult<()> {
        for (from, to) in [(a, b), (b, a)] {
            let target = port_path(&switch_path(to.0), to.1);
            let file = peer_file(from);
            if self.fs.readlink(&file).ok().as_deref() != Some(target.as_str()) {
                self.fs.symlink(&file, &target)?;
            }
        }
        Ok(())
    }

    fn unlink(&mut self, (a, b): Link) -> FsResult<()> {
        self.links.remove(&(a, b));
        for (from, to) in [(a, b), (b, a)] {
            let file = peer_file(from);
            if self.fs.readlink(&file).ok() == Some(port_path(&switch_path(to.0), to.1)) {
                self.fs.remove(&file, false)?;
            }
        }
        Ok(())
    }
}

impl Daemon for Topod {
    /// Collects whatever arrived and sends a fresh round of probes.
    fn step(&mut self) -> FsResult<bool> {
        let c = self.collect()?;
        self.probe()?;
        Ok(!c.added.is_empty() || !c.removed.is_empty())
    }
}
