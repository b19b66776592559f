//! Reactive exact-match router.
//!
//! Learns host locations from table misses at edge ports, installs one
//! exact-match flow per hop along a shortest path once the destination is
//! known, and floods along a spanning tree otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::{debug, warn};

use crate::addr::MacAddr;
use crate::api::FsApi;
use crate::codec::packet::{PacketHeader, ETH_IPV4, ETH_LLDP, IP_TCP, IP_UDP};
use crate::codec::translate::match_to_schema;
use crate::codec::{FlowKey, OfMatch, PacketInReason};
use crate::error::FsResult;
use crate::schema::layout::{flow_path, switch_path, NET_ROOT};
use crate::schema::EventRecord;

use super::{packet_out, pending_records, switches, Daemon, Endpoint, Graph};

pub const BUFFER: &str = "routerd";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub dpid: u64,
    pub port: u16,
    pub last_seen: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RouterStats {
    pub flows_installed: u64,
    pub paths: u64,
    pub packet_outs: u64,
    pub floods: u64,
    pub no_path: u64,
}

pub struct Routerd {
    fs: Arc<dyn FsApi>,
    macs: BTreeMap<MacAddr, Location>,
    opened: BTreeSet<u64>,
    seen: u64,
    pub stats: RouterStats,
}

/// The match a routed flow uses: the full key for TCP/UDP over IPv4, the
/// network subset for other IPv4, the link subset for everything else.
pub fn routing_match(key: &FlowKey) -> OfMatch {
    let mut m = OfMatch::exact(key);
    let tcp_udp = key.dl_type == ETH_IPV4 && matches!(key.nw_proto, IP_TCP | IP_UDP);
    if !tcp_udp {
        m.tp_src = None;
        m.tp_dst = None;
    }
    if key.dl_type != ETH_IPV4 {
        m.nw_src = None;
        m.nw_dst = None;
        m.nw_proto = None;
        m.nw_tos = None;
    }
    m
}

/// Stable flow name for a routed key.
pub fn flow_name(key: &FlowKey) -> String {
    // FNV-1a over the key's canonical JSON
    let bytes = serde_json::to_vec(key).expect("keys serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("rt-{h:016x}")
}

impl Routerd {
    pub fn new(fs: Arc<dyn FsApi>) -> Routerd {
        Routerd {
            fs,
            macs: BTreeMap::new(),
            opened: BTreeSet::new(),
            seen: 0,
            stats: RouterStats::default(),
        }
    }

    pub fn location(&self, mac: &MacAddr) -> Option<Location> {
        self.macs.get(mac).copied()
    }

    /// Opens the router's buffer on every switch not yet covered.
    pub fn open_buffers(&mut self) -> FsResult<()> {
        for (d, sw) in switches(self.fs.as_ref(), NET_ROOT)? {
            if !self.opened.contains(&d) {
                self.fs.open_event_buffer(&sw, BUFFER)?;
                self.opened.insert(d);
            }
        }
        Ok(())
    }

    fn install(&mut self, key: &FlowKey, hops: &[(u64, u16, u16)]) -> FsResult<()> {
        for &(d, in_port, out_port) in hops {
            let hop_key = FlowKey { in_port, ..*key };
            let dir = flow_path(&switch_path(d), &flow_name(&hop_key));
            self.fs.ensure_dir(&dir)?;
            for (f, v) in match_to_schema(&routing_match(&hop_key)) {
                self.fs.write(&format!("{dir}/{f}"), v.as_bytes())?;
            }
            self.fs.write(&format!("{dir}/action.0.output"), out_port.to_string().as_bytes())?;
            self.fs.commit_flow(&dir)?;
            self.stats.flows_installed += 1;
        }
        Ok(())
    }

    fn flood(&mut self, g: &Graph, tree: &BTreeSet<Endpoint>, dpid: u64, in_port: u16, data: &[u8]) -> FsResult<()> {
        let outs: Vec<u16> = g
            .ports
            .get(&dpid)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&p| p != in_port && (!g.is_transit((dpid, p)) || tree.contains(&(dpid, p))))
            .collect();
        if outs.is_empty() {
            return Ok(());
        }
        packet_out(self.fs.as_ref(), &switch_path(dpid), BUFFER, Some(in_port), &outs, data)?;
        self.stats.floods += 1;
        self.stats.packet_outs += 1;
        Ok(())
    }

    fn handle(&mut self, g: &Graph, tree: &BTreeSet<Endpoint>, dpid: u64, r: &EventRecord) -> FsResult<()> {
        if r.reason != PacketInReason::NoMatch {
            return Ok(());
        }
        let Some(h) = PacketHeader::parse(&r.data) else {
            return Ok(());
        };
        if h.dl_type == ETH_LLDP {
            return Ok(());
        }
        let here = (dpid, r.in_port);
        let transit = g.is_transit(here);
        self.seen += 1;
        if !transit && !h.dl_src.is_multicast() {
            self.macs.insert(
                h.dl_src,
                Location {
                    dpid,
                    port: r.in_port,
                    last_seen: self.seen,
                },
            );
        }
        let dst = if h.dl_dst.is_multicast() {
            None
        } else {
            self.macs.get(&h.dl_dst).copied()
        };
        match (dst, transit) {
            (None, _) => self.flood(g, tree, dpid, r.in_port, &r.data),
            // copies of frames already handled where they entered the fabric
            (Some(_), true) => Ok(()),
            (Some(to), false) => {
                let Some(hops) = g.path(here, (to.dpid, to.port)) else {
                    warn!("no path {here:?} -> {:?}", (to.dpid, to.port));
                    self.stats.no_path += 1;
                    return Ok(());
                };
                if hops.iter().any(|&(_, i, o)| i == o) {
                    return Ok(());
                }
                let key = h.flow_key(r.in_port);
                self.install(&key, &hops)?;
                self.stats.paths += 1;
                let &(last, _, egress) = hops.last().expect("non-empty path");
                packet_out(self.fs.as_ref(), &switch_path(last), BUFFER, None, &[egress], &r.data)?;
                self.stats.packet_outs += 1;
                debug!("routed {} -> {} over {} hops", h.dl_src, h.dl_dst, hops.len());
                Ok(())
            }
        }
    }
}

impl Daemon for Routerd {
    fn step(&mut self) -> FsResult<bool> {
        self.open_buffers()?;
        let mut pending = Vec::new();
        for (d, sw) in switches(self.fs.as_ref(), NET_ROOT)? {
            for (path, r) in pending_records(self.fs.as_ref(), &format!("{sw}/events/{BUFFER}"))? {
                let name = path.rsplit('/').next().unwrap_or_default().to_string();
                pending.push((name, d, path, r));
            }
        }
        if pending.is_empty() {
            return Ok(false);
        }
        // record names are store clock stamps, so this is arrival order
        pending.sort_by(|a, b| a.0.cmp(&b.0));
        let g = Graph::load(self.fs.as_ref(), NET_ROOT)?;
        let tree = g.tree_ports();
        for (_, d, path, r) in pending {
            if let Err(e) = self.handle(&g, &tree, d, &r) {
                warn!("{path}: {e}");
            }
            self.fs.ack_event(&path)?;
        }
        Ok(true)
    }
}
