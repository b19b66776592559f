//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Sizes, seeds and time limits are pinned below.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yanc_core::apps::pending_records;
use yanc_core::codec::packet::tcp_frame;
use yanc_core::codec::translate::match_from_schema;
use yanc_core::codec::{
    parse, serialize, wire_matches, Action, Decoder, FeaturesReply, FlowKey, FlowMod, FlowModCommand, OfBody, OfMatch, OfMessage, PhyPort,
};
use yanc_core::driver::{Driver, MemPipe, Recv, Transport};
use yanc_core::schema::read_committed;
use yanc_core::sim::{FlowTable, Topology, HOST_PORT};
use yanc_core::store::{EventKind, NodeKind};
use yanc_core::testbed::Testbed;
use yanc_core::views::{define_view, read_flowspace, teardown_view};
use yanc_core::{FsApi, Ipv4Cidr, MacAddr, NetFs, Store};

const SEED: u64 = 0x5eed;
const ATOMICITY_TRIALS: usize = 200;
const CODEC_PER_VARIANT: usize = 1000;
const LOOKUP_TRIALS: usize = 10_000;
const LOOKUP_MAX_ENTRIES: usize = 32;
const CIDR_SAMPLES: usize = 4096;
const CIDR_PREFIXES: [u8; 6] = [0, 8, 16, 24, 30, 32];
const RECONNECT_FLOWS: usize = 100;
const WATCH_EVENTS: usize = 10_000;
const WATCH_CAPACITY: usize = 16_384;
const SMALL_CAPACITY: usize = 64;
const LOAD_FLOWS: usize = 1000;
const LOAD_SWITCHES: u64 = 10;
const LOAD_LIMIT: Duration = Duration::from_secs(10);

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn c1_semantic_creation() -> Check {
    let fs = NetFs::new(Store::new());
    fs.mkdir("/net/views/new_view").map_err(err)?;
    let view: BTreeSet<String> = fs.list("/net/views/new_view").map_err(err)?.into_iter().collect();
    ensure!(view == set(&["hosts", "switches", "views"]), "view children {view:?}");
    let s = sw(0x1);
    fs.mkdir(&s).map_err(err)?;
    let switch: BTreeSet<String> = fs.list(&s).map_err(err)?.into_iter().collect();
    ensure!(
        switch == set(&["ports", "flows", "events", "packets_out"]),
        "switch children {switch:?}"
    );
    Ok("view {hosts,switches,views}, switch {ports,flows,events,packets_out}".into())
}

fn c2_recursive_removal() -> Check {
    let fs = NetFs::new(Store::new());
    let s = sw(0x2);
    fs.mkdir(&s).map_err(err)?;
    for p in 1..=8 {
        fs.mkdir(&format!("{s}/ports/{p}")).map_err(err)?;
    }
    for i in 0..12 {
        commit(
            &fs,
            &format!("{s}/flows/f{i}"),
            &[("match.in_port", &(i + 1).to_string()), ("action.0.output", "2")],
        )
        .map_err(err)?;
    }
    let before: BTreeSet<String> = walk(&fs, &s).into_iter().collect();
    let nested = before.len() - 1;
    ensure!(nested >= 50, "only {nested} nested nodes");
    let w = fs.store().watch("/net", true, 65_536).map_err(err)?;
    fs.remove(&s, false).map_err(err)?;
    let evs = w.drain();
    ensure!(!fs.exists(&s), "switch still present");
    let left = walk(&fs, "/net").into_iter().filter(|p| p.starts_with(&s)).count();
    ensure!(left == 0, "{left} paths survive");
    ensure!(
        evs.iter().all(|e| e.kind == EventKind::Removed),
        "non-removal event {:?}",
        evs.iter().find(|e| e.kind != EventKind::Removed)
    );
    let removed: BTreeSet<String> = evs.iter().map(|e| e.path.clone()).collect();
    ensure!(removed == before, "removed {} of {} paths", removed.len(), before.len());
    Ok(format!("{nested} nested nodes, {} removed events", evs.len()))
}

struct FakeSwitch {
    pipe: MemPipe,
    dec: Decoder,
}

impl FakeSwitch {
    fn send(&mut self, body: OfBody) {
        self.pipe.send(&serialize(&OfMessage::new(0, body)).unwrap()).unwrap();
    }

    /// Answers the handshake and returns received flow mods.
    fn poll(&mut self, dpid: u64) -> Vec<FlowMod> {
        if let Recv::Data(d) = self.pipe.recv() {
            self.dec.feed(&d);
        }
        let mut out = Vec::new();
        while let Some(m) = self.dec.next_message().unwrap() {
            match m.body {
                OfBody::FeaturesRequest => self.send(OfBody::FeaturesReply(FeaturesReply {
                    datapath_id: dpid,
                    n_buffers: 0,
                    n_tables: 1,
                    capabilities: 0,
                    actions: 1,
                    ports: vec![PhyPort {
                        port_no: 1,
                        hw_addr: MacAddr::from_u64(1),
                        name: "eth1".into(),
                        config: 0,
                        state: 0,
                        curr: 0,
                        advertised: 0,
                        supported: 0,
                        peer: 0,
                    }],
                })),
                OfBody::EchoRequest(d) => self.send(OfBody::EchoReply(d)),
                OfBody::FlowMod(fm) => out.push(fm),
                _ => {}
            }
        }
        out
    }
}

fn c3_commit_atomicity() -> Check {
    const SENTINEL: u16 = 65_000;
    let dpid = 0xa1;
    let fs: Arc<dyn FsApi> = Arc::new(NetFs::new(Store::new()));
    let (ctl, pipe) = MemPipe::pair();
    let mut driver = Driver::new(fs.clone());
    driver.attach(Box::new(ctl));
    let stop = Arc::new(AtomicBool::new(false));
    let drv = {
        let stop = stop.clone();
        thread::spawn(move || driver.run(&stop))
    };
    let mut sw_side = FakeSwitch { pipe, dec: Decoder::new() };
    sw_side.send(OfBody::Hello);
    let s = sw(dpid);
    let deadline = Instant::now() + Duration::from_secs(30);
    let mut wipes = 0;
    while !(fs.exists(&format!("{s}/flows")) && wipes > 0) {
        wipes += sw_side.poll(dpid).len();
        ensure!(Instant::now() < deadline, "handshake timed out");
        thread::yield_now();
    }

    let first_bump: Arc<Vec<AtomicBool>> = Arc::new((0..ATOMICITY_TRIALS).map(|_| AtomicBool::new(false)).collect());
    let writer = {
        let fs = fs.clone();
        let first_bump = first_bump.clone();
        let s = s.clone();
        thread::spawn(move || -> Result<Vec<u16>, String> {
            let mut r = ChaCha8Rng::seed_from_u64(SEED ^ 3);
            let mut versions = Vec::new();
            for t in 0..ATOMICITY_TRIALS {
                let f = format!("{s}/flows/t{t}");
                fs.mkdir(&f).map_err(err)?;
                let k_max: u16 = r.gen_range(1..=3);
                for k in 1..=k_max + 1 {
                    let tp = (20 * t as u16 + k).to_string();
                    let prio = (100 + k).to_string();
                    let out = k.to_string();
                    let mut fields = vec![
                        ("match.dl_type", "0x0800"),
                        ("match.nw_proto", "6"),
                        ("match.tp_dst", tp.as_str()),
                        ("priority", prio.as_str()),
                        ("action.0.output", out.as_str()),
                    ];
                    fields.shuffle(&mut r);
                    if k > k_max {
                        // staged, never committed
                        fields.truncate(r.gen_range(1..=fields.len()));
                    }
                    for (name, v) in fields {
                        fs.write(&format!("{f}/{name}"), v.as_bytes()).map_err(err)?;
                        match r.gen_range(0..4) {
                            0 => thread::yield_now(),
                            1 => thread::sleep(Duration::from_micros(r.gen_range(1..200))),
                            _ => {}
                        }
                    }
                    if k <= k_max {
                        first_bump[t].store(true, Ordering::SeqCst);
                        fs.commit_flow(&f).map_err(err)?;
                    }
                }
                versions.push(k_max);
            }
            commit(
                fs.as_ref(),
                &format!("{s}/flows/zz"),
                &[
                    ("match.dl_type", "0x0800"),
                    ("match.nw_proto", "6"),
                    ("match.tp_dst", &SENTINEL.to_string()),
                ],
            )
            .map_err(err)?;
            Ok(versions)
        })
    };

    let mut seen: Vec<(FlowMod, bool)> = Vec::new();
    let deadline = Instant::now() + Duration::from_secs(60);
    'recv: loop {
        for fm in sw_side.poll(dpid) {
            let tp = fm.of_match.tp_dst.unwrap_or(0);
            if tp == SENTINEL {
                break 'recv;
            }
            let t = usize::from(tp / 20);
            let bumped = t < ATOMICITY_TRIALS && first_bump[t].load(Ordering::SeqCst);
            seen.push((fm, bumped));
        }
        ensure!(Instant::now() < deadline, "sentinel flow never arrived");
        thread::sleep(Duration::from_micros(200));
    }
    let versions = writer.join().map_err(|_| "writer panicked".to_string())??;
    stop.store(true, Ordering::SeqCst);
    drv.join().map_err(|_| "driver panicked".to_string())?;

    let mut last_add: BTreeMap<usize, u16> = BTreeMap::new();
    for (fm, bumped) in &seen {
        let Some(tp) = fm.of_match.tp_dst else {
            return Err(format!("flow mod without tp_dst: {fm:?}"));
        };
        let (t, k) = (usize::from(tp / 20), tp % 20);
        ensure!(*bumped, "flow mod for trial {t} before its first commit");
        ensure!(
            t < versions.len() && k >= 1 && k <= versions[t],
            "uncommitted values reached the switch: {fm:?}"
        );
        ensure!(fm.priority == 100 + k, "mixed priority {} with tp_dst {tp}", fm.priority);
        ensure!(
            fm.of_match.dl_type == Some(0x0800) && fm.of_match.nw_proto == Some(6),
            "mixed match {fm:?}"
        );
        if matches!(fm.command, FlowModCommand::Add | FlowModCommand::ModifyStrict) {
            ensure!(
                fm.actions == vec![Action::output(k)],
                "mixed actions {:?} with tp_dst {tp}",
                fm.actions
            );
            last_add.insert(t, k);
        }
    }
    for (t, &v) in versions.iter().enumerate() {
        ensure!(
            last_add.get(&t) == Some(&v),
            "trial {t}: last install {:?}, committed {v}",
            last_add.get(&t)
        );
    }
    Ok(format!("{ATOMICITY_TRIALS} trials, {} flow mods, none mixed or early", seen.len()))
}

fn c4_codec() -> Check {
    let mut r = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    for (variant, code) in VARIANTS {
        for _ in 0..CODEC_PER_VARIANT {
            let m = random_message(&mut r, variant);
            let b = serialize(&m).map_err(|e| format!("{variant}: {e}"))?;
            ensure!(b[0] == 0x01, "{variant}: version byte {}", b[0]);
            ensure!(usize::from(u16::from_be_bytes([b[2], b[3]])) == b.len(), "{variant}: header length");
            ensure!(variant == "unknown" || b[1] == code, "{variant}: type byte {}", b[1]);
            let (back, n) = parse(&b).map_err(|e| format!("{variant}: {e}"))?;
            ensure!(n == b.len() && back == m, "{variant}: decoded {back:?} from {m:?}");
            ensure!(serialize(&back).map_err(err)? == b, "{variant}: bytes differ after round trip");
        }
    }

    let goldens = [
        ("hello", OfMessage::new(1, OfBody::Hello)),
        ("features_request", OfMessage::new(2, OfBody::FeaturesRequest)),
        ("features_reply", golden_features_reply()),
        ("flow_mod_nw_src_24", golden_flow_mod()),
    ];
    for (name, m) in &goldens {
        let want = fixture(name);
        ensure!(serialize(m).map_err(err)? == want, "{name}: serialized bytes differ from fixture");
        let (back, n) = parse(&want).map_err(err)?;
        ensure!(n == want.len() && &back == m, "{name}: fixture decodes to {back:?}");
    }

    let stream_msgs: Vec<OfMessage> = (0..40)
        .map(|_| {
            let (v, _) = *VARIANTS.choose(&mut r).unwrap();
            random_message(&mut r, v)
        })
        .collect();
    let mut stream = Vec::new();
    for m in &stream_msgs {
        stream.extend(serialize(m).map_err(err)?);
    }
    let decode = |chunks: &[&[u8]]| -> Result<Vec<OfMessage>, String> {
        let mut d = Decoder::new();
        let mut out = Vec::new();
        for c in chunks {
            d.feed(c);
            while let Some(m) = d.next_message().map_err(err)? {
                out.push(m);
            }
        }
        ensure!(d.buffered() == 0, "{} bytes left over", d.buffered());
        Ok(out)
    };
    for cut in 0..=stream.len() {
        let (a, b) = stream.split_at(cut);
        ensure!(decode(&[a, b])? == stream_msgs, "split at {cut} changed the message sequence");
    }
    for _ in 0..200 {
        let mut cuts: Vec<usize> = (0..r.gen_range(1..30)).map(|_| r.gen_range(0..=stream.len())).collect();
        cuts.push(0);
        cuts.push(stream.len());
        cuts.sort();
        let chunks: Vec<&[u8]> = cuts.windows(2).map(|w| &stream[w[0]..w[1]]).collect();
        ensure!(decode(&chunks)? == stream_msgs, "split at {cuts:?} changed the message sequence");
    }
    Ok(format!(
        "{} variants x {CODEC_PER_VARIANT} round trips, 4 fixtures, {} split points",
        VARIANTS.len(),
        stream.len() + 1
    ))
}

fn golden_features_reply() -> OfMessage {
    let port = |n: u16, down: bool| PhyPort {
        port_no: n,
        hw_addr: MacAddr([2, 0, 0, 0, 0, n as u8]),
        name: format!("eth{n}"),
        config: u32::from(down),
        state: u32::from(down),
        curr: 0xa0,
        advertised: 0,
        supported: 0,
        peer: 0,
    };
    OfMessage::new(
        3,
        OfBody::FeaturesReply(FeaturesReply {
            datapath_id: 0xa1,
            n_buffers: 256,
            n_tables: 1,
            capabilities: 7,
            actions: 0xfff,
            ports: vec![port(1, false), port(2, true)],
        }),
    )
}

fn golden_flow_mod() -> OfMessage {
    OfMessage::new(
        4,
        OfBody::FlowMod(FlowMod {
            of_match: OfMatch {
                dl_type: Some(0x0800),
                nw_src: Some(Ipv4Cidr::new(0x0a00_0000, 24)),
                ..OfMatch::all()
            },
            cookie: 0,
            command: FlowModCommand::Add,
            idle_timeout: 0,
            hard_timeout: 0,
            priority: 100,
            buffer_id: 0xffff_ffff,
            out_port: 0xffff,
            flags: 0,
            actions: vec![Action::output(2)],
        }),
    )
}

fn c5_match_oracle() -> Check {
    let mut r = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let mut hits = 0;
    for trial in 0..LOOKUP_TRIALS {
        let mut sim = FlowTable::new();
        let mut oracle = OracleTable::default();
        let n = r.gen_range(0..=LOOKUP_MAX_ENTRIES);
        let mut inserted: Vec<(OfMatch, u16)> = Vec::new();
        for i in 0..n {
            let (m, p) = match inserted.choose(&mut r) {
                Some(prev) if r.gen_bool(0.1) => *prev,
                _ => (random_match(&mut r), *[1, 100, 100, 200, 65535].choose(&mut r).unwrap()),
            };
            let a = vec![Action::output(i as u16 + 1)];
            sim.insert(m, p, a.clone());
            oracle.insert(m, p, a);
            inserted.push((m, p));
        }
        let key = random_key(&mut r);
        let got = sim.lookup(&key).map(|e| &e.actions);
        let want = oracle.lookup(&key);
        ensure!(got == want, "trial {trial}: sim {got:?}, oracle {want:?} for {key:?}");
        hits += usize::from(want.is_some());
    }

    for len in CIDR_PREFIXES {
        let net: u32 = r.gen();
        let text = format!("{}/{len}", std::net::Ipv4Addr::from(net));
        let schema = match_from_schema([("match.nw_src", text.as_str())]).map_err(err)?;
        let mut wire = Vec::new();
        schema.encode(&mut wire);
        let wire: [u8; 40] = wire.try_into().map_err(|_| "match is not 40 bytes".to_string())?;
        let decoded = OfMatch::decode(&wire);
        let mut inside = 0;
        for i in 0..CIDR_SAMPLES {
            let ip = if i % 2 == 0 {
                let host_bits = if len == 32 { 0 } else { u32::MAX >> len };
                (net & !host_bits) | (r.gen::<u32>() & host_bits)
            } else {
                r.gen()
            };
            let key = FlowKey {
                nw_src: ip,
                ..FlowKey::default()
            };
            let want = prefix_contains(net, len, ip);
            inside += usize::from(want);
            ensure!(schema.matches(&key) == want, "{text}: schema predicate wrong for {ip:#010x}");
            ensure!(wire_matches(&wire, &key) == want, "{text}: wire predicate wrong for {ip:#010x}");
            ensure!(decoded.matches(&key) == want, "{text}: decoded predicate wrong for {ip:#010x}");
        }
        ensure!(inside >= CIDR_SAMPLES / 2, "{text}: sampling produced only {inside} members");
    }
    Ok(format!(
        "{LOOKUP_TRIALS} tables ({hits} hits), {CIDR_SAMPLES} addresses x {} prefix lengths",
        CIDR_PREFIXES.len()
    ))
}

fn c6_topology() -> Check {
    let mut out = Vec::new();
    for (name, topo) in [
        ("linear-3", Topology::linear(3)),
        ("ring-4", Topology::ring(4)),
        ("star-5", Topology::star(5)),
    ] {
        let mut tb = Testbed::new(&topo).map_err(err)?.with_topod();
        for _ in 0..2 {
            tb.topo_round().map_err(err)?;
        }
        let want = link_graph(&topo.links);
        let got = peer_graph(tb.fs.as_ref());
        ensure!(got == want, "{name}: peer links {got:?}, fabric {want:?}");
        let (a, b) = topo.links[0];
        tb.fabric.unlink(a.0, a.1).map_err(err)?;
        tb.pump();
        for _ in 0..3 {
            tb.topo_round().map_err(err)?;
        }
        let after = peer_graph(tb.fs.as_ref());
        let gone: BTreeSet<_> = want.difference(&after).copied().collect();
        ensure!(
            after.is_subset(&want),
            "{name}: new links after the cut: {:?}",
            after.difference(&want).collect::<Vec<_>>()
        );
        ensure!(
            gone == BTreeSet::from([(a, b), (b, a)]),
            "{name}: removed {gone:?} after cutting {a:?}-{b:?}"
        );
        out.push(format!("{name} {} links", topo.links.len()));
    }
    Ok(format!("{}; one cut each removes exactly 2 symlinks", out.join(", ")))
}

fn routed_testbed(topo: &Topology) -> Result<Testbed, String> {
    let mut tb = Testbed::new(topo).map_err(err)?.with_topod().with_routerd();
    for _ in 0..2 {
        tb.topo_round().map_err(err)?;
    }
    Ok(tb)
}

fn route_flows(tb: &Testbed) -> Vec<(u64, OfMatch)> {
    let mut out = Vec::new();
    for d in tb.fabric.dpids() {
        for (name, spec) in tb.committed_flows(d) {
            if name.starts_with("rt-") {
                out.push((d, spec.of_match));
            }
        }
    }
    out
}

fn host_frame(from: u64, to: u64) -> Vec<u8> {
    tcp_frame(host_mac(from), host_mac(to), host_ip(from), host_ip(to), 40_000, 80)
}

fn c7_routing() -> Check {
    let topo = Topology::linear(3);
    let mut tb = routed_testbed(&topo)?;
    tb.send(3, HOST_PORT, &host_frame(3, 1)).map_err(err)?;
    ensure!(route_flows(&tb).is_empty(), "flows installed toward an unknown host");
    let frame = host_frame(1, 3);
    let first = tb.send(1, HOST_PORT, &frame).map_err(err)?;
    ensure!(!first.packet_ins.is_empty(), "first frame raised no packet-in");
    let flows = route_flows(&tb);
    ensure!(flows.len() == 3, "{} flows installed", flows.len());
    ensure!(flows.iter().all(|(_, m)| is_exact_match(m)), "non-exact routing flow");
    let second = tb.send(1, HOST_PORT, &frame).map_err(err)?;
    ensure!(
        second.packet_ins.is_empty(),
        "{} packet-ins on the second frame",
        second.packet_ins.len()
    );
    let edges: Vec<(u64, u16)> = second.edge_emissions().map(|e| (e.dpid, e.port)).collect();
    ensure!(edges == [(3, HOST_PORT)], "second frame left at {edges:?}");
    ensure!(second.edge_emissions().all(|e| e.frame == frame), "frame altered in transit");

    let ring = Topology::ring(4);
    let mut tb = routed_testbed(&ring)?;
    tb.send(4, HOST_PORT, &host_frame(4, 1)).map_err(err)?;
    tb.send(1, HOST_PORT, &host_frame(1, 4)).map_err(err)?;
    let flows = route_flows(&tb);
    let shortest = hop_count(&ring.links, 1, 4).ok_or("ring disconnected")?;
    let on: BTreeSet<u64> = flows.iter().map(|(d, _)| *d).collect();
    ensure!(
        flows.len() == shortest && on == BTreeSet::from([1, 4]),
        "ring path over {on:?}, shortest has {shortest} switches"
    );
    let again = tb.send(1, HOST_PORT, &host_frame(1, 4)).map_err(err)?;
    let edges: Vec<(u64, u16)> = again.edge_emissions().map(|e| (e.dpid, e.port)).collect();
    ensure!(again.packet_ins.is_empty() && edges == [(4, HOST_PORT)], "ring delivery {edges:?}");
    Ok(format!(
        "linear-3: 3 exact flows, then 0 packet-ins, egress (3,{HOST_PORT}); ring-4: {shortest}-switch path"
    ))
}

fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
    items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn records(fs: &dyn FsApi, buf: &str) -> Vec<Vec<u8>> {
    pending_records(fs, buf)
        .unwrap_or_default()
        .into_iter()
        .map(|(_, r)| r.data)
        .collect()
}

fn tcp_to(port: u16, from: u64) -> Vec<u8> {
    tcp_frame(host_mac(from), host_mac(9), host_ip(from), host_ip(9), 40_000, port)
}

fn c8_slices() -> Check {
    let mut tb = Testbed::new(&Topology::linear(3)).map_err(err)?.with_views();
    let fs = tb.fs.clone();
    let members: Vec<String> = (1..=3).map(yanc_core::schema::dpid_name).collect();
    let tcp = [("match.dl_type", "0x0800"), ("match.nw_proto", "6")];
    let ssh_space = pairs(&[tcp[0], tcp[1], ("match.tp_dst", "22")]);
    let web_space = pairs(&[tcp[0], tcp[1], ("match.tp_dst", "80")]);
    define_view(fs.as_ref(), "/net/views/ssh", &members, &ssh_space).map_err(err)?;
    define_view(fs.as_ref(), "/net/views/web", &members, &web_space).map_err(err)?;
    tb.pump();

    let view_sw = |view: &str, d: u64| format!("{view}/switches/{}", yanc_core::schema::dpid_name(d));
    let mut bufs = BTreeMap::new();
    for v in ["/net/views/ssh", "/net/views/web"] {
        for d in 1..=3 {
            bufs.insert((v, d), fs.open_event_buffer(&view_sw(v, d), "app").map_err(err)?);
        }
    }
    let f22 = tcp_to(22, 1);
    let f80 = tcp_to(80, 1);
    tb.send(1, HOST_PORT, &f22).map_err(err)?;
    tb.send(1, HOST_PORT, &f80).map_err(err)?;
    let ssh_got = records(fs.as_ref(), &bufs[&("/net/views/ssh", 1)]);
    let web_got = records(fs.as_ref(), &bufs[&("/net/views/web", 1)]);
    ensure!(ssh_got == [f22.clone()], "ssh slice received {} records", ssh_got.len());
    ensure!(web_got == [f80.clone()], "web slice received {} records", web_got.len());
    ensure!(
        !ssh_got.iter().any(|r| web_got.contains(r)),
        "one packet-in delivered to both slices"
    );

    let d = 2;
    let ok_flow = format!("{}/flows/f", view_sw("/net/views/ssh", d));
    commit(
        fs.as_ref(),
        &ok_flow,
        &[tcp[0], tcp[1], ("match.tp_dst", "22"), ("action.0.output", "3")],
    )
    .map_err(err)?;
    let bad_flow = format!("{}/flows/g", view_sw("/net/views/ssh", d));
    commit(
        fs.as_ref(),
        &bad_flow,
        &[tcp[0], tcp[1], ("match.tp_dst", "80"), ("action.0.output", "3")],
    )
    .map_err(err)?;
    tb.pump();
    let ssh = read_flowspace(fs.as_ref(), "/net/views/ssh").map_err(err)?;
    let parent = read_committed(fs.as_ref(), &format!("{}/flows/ssh,f", sw(d)))
        .map_err(err)?
        .ok_or("no parent flow for ssh/f")?;
    ensure!(
        ssh.covers(&parent.of_match),
        "parent flow {:?} escapes the flowspace",
        parent.of_match
    );
    ensure!(fs.exists(&format!("{bad_flow}/error")), "tp_dst=80 flow has no error file");
    ensure!(!fs.exists(&format!("{}/flows/ssh,g", sw(d))), "tp_dst=80 flow reached the parent");
    bijection(&tb, d)?;

    let x = "/net/views/ssh/views/x";
    let h = "/net/views/ssh/views/x/views/h";
    define_view(
        fs.as_ref(),
        x,
        &members[..2],
        &pairs(&[tcp[0], tcp[1], ("match.tp_dst", "22"), ("match.nw_src", "10.0.0.0/8")]),
    )
    .map_err(err)?;
    tb.pump();
    define_view(
        fs.as_ref(),
        h,
        &members[1..2],
        &pairs(&[tcp[0], tcp[1], ("match.tp_dst", "22"), ("match.nw_src", "10.1.0.0/16")]),
    )
    .map_err(err)?;
    tb.pump();
    commit(
        fs.as_ref(),
        &format!("{}/flows/deep", view_sw(h, d)),
        &[tcp[0], tcp[1], ("match.tp_dst", "22"), ("action.0.output", "1")],
    )
    .map_err(err)?;
    tb.pump();
    let deep = read_committed(fs.as_ref(), &format!("{}/flows/ssh,x,h,deep", sw(d)))
        .map_err(err)?
        .ok_or("no parent flow for the 3-deep view")?;
    for v in ["/net/views/ssh", x, h] {
        let space = read_flowspace(fs.as_ref(), v).map_err(err)?;
        ensure!(space.covers(&deep.of_match), "3-deep flow {:?} escapes {v}", deep.of_match);
    }
    bijection(&tb, d)?;

    let removed = teardown_view(fs.as_ref(), "/net/views/ssh").map_err(err)?;
    tb.pump();
    for d in 1..=3 {
        let tagged: Vec<String> = fs
            .list(&format!("{}/flows", sw(d)))
            .map_err(err)?
            .into_iter()
            .filter(|n| n.starts_with("ssh,"))
            .collect();
        ensure!(tagged.is_empty(), "switch {d} keeps {tagged:?}");
        bijection(&tb, d)?;
        let left = tb
            .fabric
            .switch(d)
            .unwrap()
            .table
            .entries()
            .iter()
            .filter(|e| e.of_match.tp_dst == Some(22))
            .count();
        ensure!(left == 0, "switch {d} table keeps {left} ssh entries");
    }
    Ok(format!(
        "22 only in ssh, 80 rejected with error, 3-deep flow inside all flowspaces, teardown removed {removed} flows"
    ))
}

fn c9_reconnect() -> Check {
    let mut tb = Testbed::new(&Topology::linear(1)).map_err(err)?;
    let s = sw(1);
    for i in 0..RECONNECT_FLOWS {
        let tp = (1000 + i).to_string();
        let out = (i % 3 + 1).to_string();
        commit(
            tb.fs.as_ref(),
            &format!("{s}/flows/f{i}"),
            &[
                ("match.dl_type", "0x0800"),
                ("match.nw_proto", "6"),
                ("match.tp_dst", &tp),
                ("action.0.output", &out),
            ],
        )
        .map_err(err)?;
    }
    tb.pump();
    bijection(&tb, 1)?;
    tb.disconnect(1);
    tb.pump();
    // changes while the switch is away, plus a stray entry on the switch
    tb.fs.remove(&format!("{s}/flows/f0"), true).map_err(err)?;
    commit(tb.fs.as_ref(), &format!("{s}/flows/f1"), &[("action.0.output", "3")]).map_err(err)?;
    commit(
        tb.fs.as_ref(),
        &format!("{s}/flows/f{RECONNECT_FLOWS}"),
        &[("match.in_port", "2"), ("action.0.output", "1")],
    )
    .map_err(err)?;
    tb.fabric
        .switch_mut(1)
        .unwrap()
        .table
        .insert(OfMatch::all(), 1, vec![Action::output(2)]);
    let id = tb.connect(1).map_err(err)?;
    tb.pump();
    let n = bijection(&tb, 1)?;
    ensure!(n == RECONNECT_FLOWS, "{n} committed flows at reconnect, expected {RECONNECT_FLOWS}");
    let mods: Vec<&FlowMod> = tb
        .driver
        .sent(id)
        .iter()
        .filter_map(|m| match &m.body {
            OfBody::FlowMod(fm) => Some(fm),
            _ => None,
        })
        .collect();
    ensure!(
        mods.first()
            .is_some_and(|fm| fm.command == FlowModCommand::Delete && fm.of_match == OfMatch::all()),
        "reconciliation did not start with a wipe"
    );
    let adds = mods.iter().filter(|fm| fm.command == FlowModCommand::Add).count();
    ensure!(mods.len() == 1 + n && adds == n, "{} flow mods for {n} flows", mods.len());
    Ok(format!("{n} flows restored in one pass of {} flow mods", mods.len()))
}

fn c10_watch() -> Check {
    let store = Store::new();
    store.create("/w", NodeKind::Directory, 0o777).map_err(err)?;
    let files: Vec<String> = (0..50).map(|i| format!("/w/f{i}")).collect();
    for f in &files {
        store.create(f, NodeKind::File, 0o666).map_err(err)?;
    }
    let w = store.watch("/w", true, WATCH_CAPACITY).map_err(err)?;
    for i in 0..WATCH_EVENTS {
        store.write(&files[i % files.len()], i.to_string().as_bytes()).map_err(err)?;
    }
    let evs = w.drain();
    ensure!(evs.len() == WATCH_EVENTS, "{} events for {WATCH_EVENTS} mutations", evs.len());
    for (i, e) in evs.iter().enumerate() {
        ensure!(
            e.kind == EventKind::Modified && e.path == files[i % files.len()],
            "event {i} is {e:?}"
        );
    }
    ensure!(
        evs.windows(2).all(|p| p[0].seq < p[1].seq && p[0].stamp < p[1].stamp),
        "events out of order"
    );

    let small = store.watch("/w", true, SMALL_CAPACITY).map_err(err)?;
    let burst = 4 * SMALL_CAPACITY;
    for i in 0..burst {
        store.write(&files[i % files.len()], b"x").map_err(err)?;
    }
    let evs = small.drain();
    let overflows = evs.iter().filter(|e| e.kind == EventKind::Overflow).count();
    ensure!(
        overflows == 1 && evs[0].kind == EventKind::Overflow,
        "overflow marker missing or repeated"
    );
    let tail = &evs[1..];
    let expect: Vec<&String> = (burst - tail.len()..burst).map(|i| &files[i % files.len()]).collect();
    ensure!(
        tail.iter().map(|e| &e.path).collect::<Vec<_>>() == expect,
        "retained events are not the newest in order"
    );
    for f in &files[..10] {
        store.write(f, b"y").map_err(err)?;
    }
    let resumed = small.drain();
    ensure!(
        resumed.len() == 10
            && resumed
                .iter()
                .enumerate()
                .all(|(i, e)| e.kind == EventKind::Modified && e.path == files[i]),
        "delivery after overflow: {resumed:?}"
    );
    ensure!(resumed[0].seq > tail.last().unwrap().seq, "sequence went backwards after overflow");
    Ok(format!(
        "{WATCH_EVENTS} ordered events; capacity {SMALL_CAPACITY} overflowed once, then resumed in order"
    ))
}

fn c11_load() -> Check {
    let mut tb = Testbed::new(&Topology::linear(LOAD_SWITCHES)).map_err(err)?;
    let start = Instant::now();
    let per = LOAD_FLOWS / LOAD_SWITCHES as usize;
    for d in 1..=LOAD_SWITCHES {
        for i in 0..per {
            let tp = (1 + i).to_string();
            commit(
                tb.fs.as_ref(),
                &format!("{}/flows/f{i}", sw(d)),
                &[
                    ("match.dl_type", "0x0800"),
                    ("match.nw_proto", "17"),
                    ("match.tp_dst", &tp),
                    ("action.0.output", "2"),
                ],
            )
            .map_err(err)?;
        }
    }
    tb.pump();
    let mut total = 0;
    for d in 1..=LOAD_SWITCHES {
        total += bijection(&tb, d)?;
    }
    let took = start.elapsed();
    ensure!(total == LOAD_FLOWS, "{total} flows installed");
    ensure!(took < LOAD_LIMIT, "took {took:?}, limit {LOAD_LIMIT:?}");
    Ok(format!(
        "{total} flows on {LOAD_SWITCHES} switches converged in {:.2}s (limit {}s)",
        took.as_secs_f64(),
        LOAD_LIMIT.as_secs()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("semantic creation", c1_semantic_creation),
        ("recursive typed removal", c2_recursive_removal),
        ("commit atomicity", c3_commit_atomicity),
        ("codec", c4_codec),
        ("match-semantics oracle", c5_match_oracle),
        ("topology discovery", c6_topology),
        ("reactive routing", c7_routing),
        ("slice isolation", c8_slices),
        ("reconnect convergence", c9_reconnect),
        ("watch contract", c10_watch),
        ("load sanity", c11_load),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let res = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = started.elapsed().as_millis();
        match res {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{ms} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{ms} ms]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
