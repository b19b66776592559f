//! Oracles and builders shared by the integration tests. The oracles are
//! written from the protocol rules directly and never call the code they
//! judge.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use yanc_core::codec::{Action, FlowKey, OfMatch};
use yanc_core::schema::dpid_name;
use yanc_core::testbed::Testbed;
use yanc_core::{FsApi, Ipv4Cidr, MacAddr};

pub type Endpoint = (u64, u16);

/// Reads `tests/fixtures/<name>.hex`: hex digits, whitespace ignored,
/// `#` to end of line is a comment.
pub fn fixture(name: &str) -> Vec<u8> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(format!("{name}.hex"));
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    let digits: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    assert!(digits.len().is_multiple_of(2), "{name}: odd number of hex digits");
    (0..digits.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).expect("hex digit"))
        .collect()
}

/// Prefix membership by comparing the leading bits one at a time.
pub fn prefix_contains(net: u32, len: u8, ip: u32) -> bool {
    (0..u32::from(len)).all(|i| {
        let bit = 31 - i;
        (net >> bit) & 1 == (ip >> bit) & 1
    })
}

fn field<T: PartialEq>(m: Option<T>, v: T) -> bool {
    match m {
        None => true,
        Some(x) => x == v,
    }
}

fn prefix(m: Option<Ipv4Cidr>, ip: u32) -> bool {
    match m {
        None => true,
        Some(c) => prefix_contains(c.addr(), c.prefix_len(), ip),
    }
}

/// Field-by-field predicate of a match against a packet.
pub fn predicate(m: &OfMatch, k: &FlowKey) -> bool {
    field(m.in_port, k.in_port)
        && field(m.dl_src, k.dl_src)
        && field(m.dl_dst, k.dl_dst)
        && field(m.dl_vlan, k.dl_vlan)
        && field(m.dl_vlan_pcp, k.dl_vlan_pcp)
        && field(m.dl_type, k.dl_type)
        && field(m.nw_tos, k.nw_tos)
        && field(m.nw_proto, k.nw_proto)
        && prefix(m.nw_src, k.nw_src)
        && prefix(m.nw_dst, k.nw_dst)
        && field(m.tp_src, k.tp_src)
        && field(m.tp_dst, k.tp_dst)
}

fn fully_specified(m: &OfMatch) -> bool {
    m.in_port.is_some()
        && m.dl_src.is_some()
        && m.dl_dst.is_some()
        && m.dl_vlan.is_some()
        && m.dl_vlan_pcp.is_some()
        && m.dl_type.is_some()
        && m.nw_tos.is_some()
        && m.nw_proto.is_some()
        && m.nw_src.is_some_and(|c| c.prefix_len() == 32)
        && m.nw_dst.is_some_and(|c| c.prefix_len() == 32)
        && m.tp_src.is_some()
        && m.tp_dst.is_some()
}

/// A flow table as a plain list in insertion order.
#[derive(Debug, Default)]
pub struct OracleTable {
    pub entries: Vec<(OfMatch, u16, Vec<Action>)>,
}

impl OracleTable {
    /// An add with the same match and priority replaces the actions in place.
    pub fn insert(&mut self, m: OfMatch, priority: u16, actions: Vec<Action>) {
        match self.entries.iter_mut().find(|e| e.0 == m && e.1 == priority) {
            Some(e) => e.2 = actions,
            None => self.entries.push((m, priority, actions)),
        }
    }

    /// Exact entries beat wildcard entries; within each class the highest
    /// priority wins and ties go to the earliest insertion.
    pub fn lookup(&self, k: &FlowKey) -> Option<&Vec<Action>> {
        let best = |exact: bool| {
            let mut best: Option<(usize, u16)> = None;
            for (i, (m, p, _)) in self.entries.iter().enumerate() {
                if fully_specified(m) == exact && predicate(m, k) && best.is_none_or(|(_, bp)| *p > bp) {
                    best = Some((i, *p));
                }
            }
            best.map(|(i, _)| &self.entries[i].2)
        };
        best(true).or_else(|| best(false))
    }
}

const MACS: [u64; 4] = [1, 2, 3, 0x0a0b0c];
const NETS: [u32; 4] = [0x0a00_0000, 0x0a00_0100, 0x0a01_0000, 0xc0a8_0000];

/// Packet headers drawn from small domains so that table entries collide.
pub fn random_key<R: Rng>(r: &mut R) -> FlowKey {
    FlowKey {
        in_port: r.gen_range(1..=4),
        dl_src: MacAddr::from_u64(*MACS.choose(r).unwrap()),
        dl_dst: MacAddr::from_u64(*MACS.choose(r).unwrap()),
        dl_vlan: *[0xffff, 10].choose(r).unwrap(),
        dl_vlan_pcp: r.gen_range(0..2),
        dl_type: *[0x0800, 0x0806].choose(r).unwrap(),
        nw_tos: 0,
        nw_proto: *[6, 17].choose(r).unwrap(),
        nw_src: NETS.choose(r).unwrap() | r.gen_range(0..4),
        nw_dst: NETS.choose(r).unwrap() | r.gen_range(0..4),
        tp_src: *[1024, 5555].choose(r).unwrap(),
        tp_dst: *[22, 80, 443].choose(r).unwrap(),
    }
}

/// Either an exact match on a key like `random_key`, or a sparse wildcard
/// match over the same domains.
pub fn random_match<R: Rng>(r: &mut R) -> OfMatch {
    if r.gen_bool(0.25) {
        return OfMatch::exact(&random_key(r));
    }
    let k = random_key(r);
    let mut m = OfMatch::all();
    let p = 0.3;
    if r.gen_bool(p) {
        m.in_port = Some(k.in_port);
    }
    if r.gen_bool(p) {
        m.dl_src = Some(k.dl_src);
    }
    if r.gen_bool(p) {
        m.dl_dst = Some(k.dl_dst);
    }
    if r.gen_bool(p) {
        m.dl_vlan = Some(k.dl_vlan);
    }
    if r.gen_bool(p) {
        m.dl_type = Some(k.dl_type);
    }
    if r.gen_bool(p) {
        m.nw_proto = Some(k.nw_proto);
    }
    if r.gen_bool(p) {
        m.nw_src = Some(Ipv4Cidr::new(k.nw_src, *[8, 16, 24, 30, 32].choose(r).unwrap()));
    }
    if r.gen_bool(p) {
        m.nw_dst = Some(Ipv4Cidr::new(k.nw_dst, *[8, 16, 24, 30, 32].choose(r).unwrap()));
    }
    if r.gen_bool(p) {
        m.tp_src = Some(k.tp_src);
    }
    if r.gen_bool(p) {
        m.tp_dst = Some(k.tp_dst);
    }
    m
}

pub fn sw(dpid: u64) -> String {
    format!("/net/switches/{}", dpid_name(dpid))
}

/// `/net/switches/<hex>/ports/<n>` parsed by hand.
pub fn parse_port_path(p: &str) -> Option<Endpoint> {
    let segs: Vec<&str> = p.trim_start_matches('/').split('/').collect();
    match segs.as_slice() {
        ["net", "switches", d, "ports", n] => Some((u64::from_str_radix(d, 16).ok()?, n.parse().ok()?)),
        _ => None,
    }
}

/// Every `peer` symlink in the store, as directed (port, peer) pairs.
pub fn peer_graph(fs: &dyn FsApi) -> BTreeSet<(Endpoint, Endpoint)> {
    let mut out = BTreeSet::new();
    for d in fs.list("/net/switches").unwrap_or_default() {
        let ports = format!("/net/switches/{d}/ports");
        for p in fs.list(&ports).unwrap_or_default() {
            let dir = format!("{ports}/{p}");
            if let Ok(t) = fs.readlink(&format!("{dir}/peer")) {
                out.insert((parse_port_path(&dir).expect("port path"), parse_port_path(&t).expect("peer target")));
            }
        }
    }
    out
}

/// Both directions of every fabric link.
pub fn link_graph(links: &[(Endpoint, Endpoint)]) -> BTreeSet<(Endpoint, Endpoint)> {
    links.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

/// Number of switches on a shortest switch path, by breadth-first search
/// over an undirected link list.
pub fn hop_count(links: &[(Endpoint, Endpoint)], from: u64, to: u64) -> Option<usize> {
    let mut seen = BTreeSet::from([from]);
    let mut frontier = vec![from];
    let mut n = 1;
    while !frontier.is_empty() {
        if frontier.contains(&to) {
            return Some(n);
        }
        let mut next = Vec::new();
        for &d in &frontier {
            for &((a, _), (b, _)) in links {
                for (x, y) in [(a, b), (b, a)] {
                    if x == d && seen.insert(y) {
                        next.push(y);
                    }
                }
            }
        }
        frontier = next;
        n += 1;
    }
    None
}

fn entry_key(m: &OfMatch, priority: u16, actions: &[Action]) -> String {
    format!("{m:?}|{priority}|{actions:?}")
}

/// Committed flows of `dpid` versus the simulated table: equal as multisets
/// of (match, priority, actions).
pub fn bijection(tb: &Testbed, dpid: u64) -> Result<usize, String> {
    let mut want: Vec<String> = tb
        .committed_flows(dpid)
        .iter()
        .map(|(_, s)| entry_key(&s.of_match, s.priority, &s.actions))
        .collect();
    let sw = tb.fabric.switch(dpid).ok_or_else(|| format!("no switch {dpid}"))?;
    let mut have: Vec<String> = sw
        .table
        .entries()
        .iter()
        .map(|e| entry_key(&e.of_match, e.priority, &e.actions))
        .collect();
    want.sort();
    have.sort();
    if want != have {
        let extra: Vec<_> = have.iter().filter(|h| !want.contains(h)).take(3).collect();
        let missing: Vec<_> = want.iter().filter(|w| !have.contains(w)).take(3).collect();
        return Err(format!(
            "switch {dpid}: {} committed, {} installed; missing {missing:?}; extra {extra:?}",
            want.len(),
            have.len()
        ));
    }
    Ok(want.len())
}

/// Stages and commits a flow through plain file writes.
pub fn commit(fs: &dyn FsApi, flow: &str, fields: &[(&str, &str)]) -> yanc_core::FsResult<u64> {
    if !fs.exists(flow) {
        fs.mkdir(flow)?;
    }
    for (k, v) in fields {
        fs.write(&format!("{flow}/{k}"), v.as_bytes())?;
    }
    fs.commit_flow(flow)
}

/// Every path under `root`, `root` included, without following links.
pub fn walk(fs: &dyn FsApi, root: &str) -> Vec<String> {
    let mut out = vec![root.to_string()];
    let mut i = 0;
    while i < out.len() {
        let p = out[i].clone();
        i += 1;
        if fs.stat(&p, false).is_ok_and(|s| s.kind == yanc_core::store::NodeKind::Directory) {
            for c in fs.list(&p).unwrap_or_default() {
                out.push(format!("{p}/{c}"));
            }
        }
    }
    out
}

pub fn host_mac(dpid: u64) -> MacAddr {
    MacAddr::from_u64(0x0200_0000_0000 | dpid)
}

pub fn host_ip(dpid: u64) -> u32 {
    0x0a00_0000 | dpid as u32
}

/// Message variants and their OpenFlow 1.0 type codes.
pub const VARIANTS: [(&str, u8); 11] = [
    ("hello", 0),
    ("echo_request", 2),
    ("echo_reply", 3),
    ("features_request", 5),
    ("features_reply", 6),
    ("packet_in", 10),
    ("packet_out", 13),
    ("flow_mod", 14),
    ("port_mod", 15),
    ("port_status", 12),
    ("unknown", 0),
];

/// Types the codec carries opaquely.
const OPAQUE_TYPES: [u8; 12] = [1, 4, 7, 8, 9, 11, 16, 17, 18, 19, 20, 21];

fn bytes<R: Rng>(r: &mut R, max: usize) -> Vec<u8> {
    let n = r.gen_range(0..=max);
    (0..n).map(|_| r.gen()).collect()
}

fn opt<R: Rng, T>(r: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if r.gen_bool(0.5) {
        Some(f(r))
    } else {
        None
    }
}

/// A match over the full value ranges.
pub fn wide_match<R: Rng>(r: &mut R) -> OfMatch {
    OfMatch {
        in_port: opt(r, |r| r.gen()),
        dl_src: opt(r, |r| MacAddr(r.gen())),
        dl_dst: opt(r, |r| MacAddr(r.gen())),
        dl_vlan: opt(r, |r| r.gen()),
        dl_vlan_pcp: opt(r, |r| r.gen()),
        dl_type: opt(r, |r| r.gen()),
        nw_tos: opt(r, |r| r.gen()),
        nw_proto: opt(r, |r| r.gen()),
        nw_src: opt(r, |r| Ipv4Cidr::new(r.gen(), r.gen_range(1..=32))),
        nw_dst: opt(r, |r| Ipv4Cidr::new(r.gen(), r.gen_range(1..=32))),
        tp_src: opt(r, |r| r.gen()),
        tp_dst: opt(r, |r| r.gen()),
    }
}

fn action<R: Rng>(r: &mut R) -> Action {
    match r.gen_range(0..4) {
        0 => Action::Output {
            port: r.gen(),
            max_len: r.gen(),
        },
        1 => Action::SetDlSrc(MacAddr(r.gen())),
        2 => Action::SetDlDst(MacAddr(r.gen())),
        _ => {
            let n = 4 + 8 * r.gen_range(0..3);
            Action::Unknown {
                action_type: *[1, 2, 3, 6, 7, 8, 9, 10, 11, 0xffff].choose(r).unwrap(),
                body: (0..n).map(|_| r.gen()).collect(),
            }
        }
    }
}

fn actions<R: Rng>(r: &mut R, max: usize) -> Vec<Action> {
    let n = r.gen_range(0..=max);
    (0..n).map(|_| action(r)).collect()
}

fn phy_port<R: Rng>(r: &mut R) -> yanc_core::codec::PhyPort {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789-";
    let n = r.gen_range(0..=15);
    yanc_core::codec::PhyPort {
        port_no: r.gen(),
        hw_addr: MacAddr(r.gen()),
        name: (0..n).map(|_| *ALNUM.choose(r).unwrap() as char).collect(),
        config: r.gen(),
        state: r.gen(),
        curr: r.gen(),
        advertised: r.gen(),
        supported: r.gen(),
        peer: r.gen(),
    }
}

/// A random message of the given variant name.
pub fn random_message<R: Rng>(r: &mut R, variant: &str) -> yanc_core::codec::OfMessage {
    use yanc_core::codec::*;
    let body = match variant {
        "hello" => OfBody::Hello,
        "echo_request" => OfBody::EchoRequest(bytes(r, 32)),
        "echo_reply" => OfBody::EchoReply(bytes(r, 32)),
        "features_request" => OfBody::FeaturesRequest,
        "features_reply" => OfBody::FeaturesReply(FeaturesReply {
            datapath_id: r.gen(),
            n_buffers: r.gen(),
            n_tables: r.gen(),
            capabilities: r.gen(),
            actions: r.gen(),
            ports: (0..r.gen_range(0..6)).map(|_| phy_port(r)).collect(),
        }),
        "packet_in" => OfBody::PacketIn(PacketIn {
            buffer_id: r.gen(),
            total_len: r.gen(),
            in_port: r.gen(),
            reason: match r.gen_range(0..3) {
                0 => PacketInReason::NoMatch,
                1 => PacketInReason::Action,
                _ => PacketInReason::Other(r.gen_range(2..=255)),
            },
            data: bytes(r, 128),
        }),
        "packet_out" => OfBody::PacketOut(PacketOut {
            buffer_id: r.gen(),
            in_port: r.gen(),
            actions: actions(r, 3),
            data: bytes(r, 128),
        }),
        "flow_mod" => OfBody::FlowMod(FlowMod {
            of_match: wide_match(r),
            cookie: r.gen(),
            command: match r.gen_range(0..6) {
                0 => FlowModCommand::Add,
                1 => FlowModCommand::Modify,
                2 => FlowModCommand::ModifyStrict,
                3 => FlowModCommand::Delete,
                4 => FlowModCommand::DeleteStrict,
                _ => FlowModCommand::Other(r.gen_range(5..=u16::MAX)),
            },
            idle_timeout: r.gen(),
            hard_timeout: r.gen(),
            priority: r.gen(),
            buffer_id: r.gen(),
            out_port: r.gen(),
            flags: r.gen(),
            actions: actions(r, 4),
        }),
        "port_mod" => OfBody::PortMod(PortMod {
            port_no: r.gen(),
            hw_addr: MacAddr(r.gen()),
            config: r.gen(),
            mask: r.gen(),
            advertise: r.gen(),
        }),
        "port_status" => OfBody::PortStatus(PortStatus {
            reason: match r.gen_range(0..4) {
                0 => PortStatusReason::Add,
                1 => PortStatusReason::Delete,
                2 => PortStatusReason::Modify,
                _ => PortStatusReason::Other(r.gen_range(3..=255)),
            },
            port: phy_port(r),
        }),
        "unknown" => OfBody::Unknown {
            msg_type: *OPAQUE_TYPES.choose(r).unwrap(),
            body: bytes(r, 64),
        },
        other => panic!("no variant {other}"),
    };
    OfMessage::new(r.gen(), body)
}

pub fn is_exact_match(m: &OfMatch) -> bool {
    fully_specified(m)
}

pub mod schema_cases;
