//! Applications that drive the network purely through file operations.

pub mod flowctl;
pub mod lldp;
pub mod routerd;
pub mod topod;
pub mod yanctl;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::api::FsApi;
use crate::error::{FsError, FsResult};
use crate::schema::layout::{is_record_name, parse_dpid_name, parse_port_name, port_path};
use crate::schema::EventRecord;

pub use flowctl::flowctl;
pub use routerd::Routerd;
pub use topod::Topod;
pub use yanctl::yanctl;

/// A long-running application advanced one step at a time.
pub trait Daemon: Send {
    /// Handles whatever is pending. True if anything was done.
    fn step(&mut self) -> FsResult<bool>;
}

/// Result of a command-line tool run as a library call.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    pub fn ok(stdout: String) -> Outcome {
        Outcome {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    pub fn fail(code: i32, stderr: String) -> Outcome {
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

static RECORD_SEQ: AtomicU64 = AtomicU64::new(1);

/// Hands `data` to the switch for transmission on each of `outputs`.
pub fn packet_out(fs: &dyn FsApi, switch: &str, tag: &str, in_port: Option<u16>, outputs: &[u16], data: &[u8]) -> FsResult<()> {
    let n = RECORD_SEQ.fetch_add(1, Ordering::Relaxed);
    let rec = format!("{switch}/packets_out/{tag}.{}.{n}", std::process::id());
    fs.mkdir(&rec)?;
    fs.write(&format!("{rec}/data"), data)?;
    let in_port = in_port.map_or("none".to_string(), |p| p.to_string());
    fs.write(&format!("{rec}/in_port"), in_port.as_bytes())?;
    for (i, p) in outputs.iter().enumerate() {
        let v = crate::schema::fields::format_output_port(*p);
        fs.write(&format!("{rec}/action.{i}.output"), v.as_bytes())?;
    }
    fs.write(&format!("{rec}/send"), b"1")
}

/// Switch directories directly under `view`, with their dpids.
pub fn switches(fs: &dyn FsApi, view: &str) -> FsResult<Vec<(u64, String)>> {
    let mut out = Vec::new();
    for name in fs.list(&format!("{view}/switches"))? {
        if let Ok(d) = parse_dpid_name(&name) {
            out.push((d, format!("{view}/switches/{name}")));
        }
    }
    Ok(out)
}

pub fn ports(fs: &dyn FsApi, switch: &str) -> FsResult<Vec<u16>> {
    let mut v: Vec<u16> = fs
        .list(&format!("{switch}/ports"))?
        .iter()
        .filter_map(|p| parse_port_name(p).ok())
        .collect();
    v.sort_unstable();
    Ok(v)
}

/// Pending records in one event buffer, oldest first.
pub fn pending_records(fs: &dyn FsApi, buffer: &str) -> FsResult<Vec<(String, EventRecord)>> {
    let mut out = Vec::new();
    for name in fs.list(buffer)? {
        if !is_record_name(&name) {
            continue;
        }
        let rec = format!("{buffer}/{name}");
        match EventRecord::from_files(|f| fs.read(&format!("{rec}/{f}"))) {
            Ok(r) => out.push((rec, r)),
            Err(FsError::NotFound(_)) => {}
            Err(e) => {
                log::warn!("{rec}: {e}");
                let _ = fs.ack_event(&rec);
            }
        }
    }
    Ok(out)
}

pub type Endpoint = (u64, u16);

/// Switch-level topology as recorded by `peer` links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    /// Every port of every switch.
    pub ports: BTreeMap<u64, Vec<u16>>,
    pub peers: BTreeMap<Endpoint, Endpoint>,
}

impl Graph {
    pub fn load(fs: &dyn FsApi, view: &str) -> FsResult<Graph> {
        let mut g = Graph::default();
        for (d, sw) in switches(fs, view)? {
            let ps = ports(fs, &sw)?;
            for &p in &ps {
                let Ok(target) = fs.readlink(&format!("{}/peer", port_path(&sw, p))) else {
                    continue;
                };
                if let Some(e) = endpoint_of(&target) {
                    g.peers.insert((d, p), e);
                }
            }
            g.ports.insert(d, ps);
        }
        Ok(g)
    }

    pub fn is_transit(&self, e: Endpoint) -> bool {
        self.peers.contains_key(&e)
    }

    /// Neighbors of `d` as `(local port, peer)`, ordered by peer dpid then local port.
    pub fn neighbors(&self, d: u64) -> Vec<(u16, Endpoint)> {
        let mut v: Vec<(u16, Endpoint)> = self
            .peers
            .range((d, 0)..=(d, u16::MAX))
            .filter(|(_, peer)| self.ports.contains_key(&peer.0))
            .map(|(&(_, p), &peer)| (p, peer))
            .collect();
        v.sort_by_key(|&(p, (pd, _))| (pd, p));
        v
    }

    /// Breadth-first shortest path. Each hop is `(dpid, in_port, out_port)`
    /// with the first `in_port` and last `out_port` taken from the arguments.
    pub fn path(&self, from: Endpoint, to: Endpoint) -> Option<Vec<(u64, u16, u16)>> {
        let mut prev: BTreeMap<u64, (u64, u16, u16)> = BTreeMap::new();
        let mut seen = BTreeSet::from([from.0]);
        let mut q = VecDeque::from([from.0]);
        while let Some(d) = q.pop_front() {
            if d == to.0 {
                break;
            }
            for (p, (nd, np)) in self.neighbors(d) {
                if seen.insert(nd) {
                    prev.insert(nd, (d, p, np));
                    q.push_back(nd);
                }
            }
        }
        if !seen.contains(&to.0) {
            return None;
        }
        let mut hops = Vec::new();
        let mut out_port = to.1;
        let mut cur = to.0;
        while cur != from.0 {
            let (pd, pout, in_port) = prev[&cur];
            hops.push((cur, in_port, out_port));
            out_port = pout;
            cur = pd;
        }
        hops.push((from.0, from.1, out_port));
        hops.reverse();
        Some(hops)
    }

    /// Ports on spanning-tree links, from breadth-first trees rooted at the
    /// lowest dpid of each component.
    pub fn tree_ports(&self) -> BTreeSet<Endpoint> {
        let mut tree = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for &root in self.ports.keys() {
            if !seen.insert(root) {
                continue;
            }
            let mut q = VecDeque::from([root]);
            while let Some(d) = q.pop_front() {
                for (p, (nd, np)) in self.neighbors(d) {
                    if seen.insert(nd) {
                        tree.insert((d, p));
                        tree.insert((nd, np));
                        q.push_back(nd);
                    }
                }
            }
        }
        tree
    }
}

/// `(dpid, port)` named by a port directory path.
pub fn endpoint_of(path: &str) -> Option<Endpoint> {
    match crate::schema::classify(path) {
        crate::schema::Place::Port { sw, port } => Some((parse_dpid_name(&sw.name).ok()?, parse_port_name(&port).ok()?)),
        _ => None,
    }
}
