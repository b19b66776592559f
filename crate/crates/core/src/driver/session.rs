//! The OpenFlow 1.0 driver.
//!
//! All sessions and all switch watches are serviced from one poll loop.
//! The loop never holds the store while touching a transport: store calls
//! are individual [`FsApi`] operations.

use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use log::{debug, info, warn};

use crate::addr::MacAddr;
use crate::api::{EventSource, FsApi};
use crate::codec::{
    self, port, Decoder, FeaturesReply, FlowMod, FlowModCommand, OfBody, OfMatch, OfMessage, PacketOut, PhyPort, PortMod, PortStatus,
    PortStatusReason, NO_BUFFER, PORT_CONFIG_DOWN, PORT_STATE_LINK_DOWN,
};
use crate::error::{FsError, FsResult};
use crate::schema::fields::{packet_out_actions, parse_bool, parse_packet_out_in_port, ERROR_FILE};
use crate::schema::layout::{dpid_name, flow_path, parse_port_name, port_path, NET_ROOT};
use crate::schema::{read_committed, EventRecord, FlowSpec};
use crate::store::EventKind;

use super::transport::{Recv, TcpTransport, Transport};

/// Queue depth of the driver's per-switch watches.
pub const WATCH_CAPACITY: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    HelloSent,
    FeaturesPending,
    Ready,
    Dead,
}

struct Session {
    transport: Box<dyn Transport>,
    decoder: Decoder,
    state: SessionState,
    dpid: Option<u64>,
    next_xid: u32,
    sent: Vec<OfMessage>,
}

impl Session {
    fn send(&mut self, xid: Option<u32>, body: OfBody) -> bool {
        if self.state == SessionState::Dead {
            return false;
        }
        let xid = xid.unwrap_or_else(|| {
            let x = self.next_xid;
            self.next_xid = self.next_xid.wrapping_add(1);
            x
        });
        let msg = OfMessage::new(xid, body);
        let ok = match codec::serialize(&msg) {
            Ok(bytes) => self.transport.send(&bytes).is_ok(),
            Err(e) => {
                warn!("dropping unserializable {}: {e}", msg.body.name());
                return true;
            }
        };
        self.sent.push(msg);
        ok
    }
}

struct SwitchCtx {
    path: String,
    session: Option<u64>,
    flows: Box<dyn EventSource>,
    ports: Box<dyn EventSource>,
    packets_out: Box<dyn EventSource>,
    /// What the switch is believed to hold, by flow name.
    image: BTreeMap<String, FlowSpec>,
    port_down: BTreeMap<u16, bool>,
    hw_addr: BTreeMap<u16, MacAddr>,
}

pub struct Driver {
    fs: Arc<dyn FsApi>,
    sessions: BTreeMap<u64, Session>,
    switches: BTreeMap<u64, SwitchCtx>,
    next_session: u64,
    listener: Option<TcpListener>,
}

fn flow_mod_all_delete() -> FlowMod {
    FlowMod {
        of_match: OfMatch::all(),
        cookie: 0,
        command: FlowModCommand::Delete,
        idle_timeout: 0,
        hard_timeout: 0,
        priority: 0,
        buffer_id: NO_BUFFER,
        out_port: port::NONE,
        flags: 0,
        actions: Vec::new(),
    }
}

fn rel<'a>(path: &'a str, dir: &str) -> Option<Vec<&'a str>> {
    let rest = path.strip_prefix(dir)?.strip_prefix('/')?;
    Some(rest.split('/').collect())
}

impl Driver {
    pub fn new(fs: Arc<dyn FsApi>) -> Driver {
        Driver {
            fs,
            sessions: BTreeMap::new(),
            switches: BTreeMap::new(),
            next_session: 1,
            listener: None,
        }
    }

    /// Accepts switch connections on `addr` from now on.
    pub fn listen(&mut self, addr: impl ToSocketAddrs) -> io::Result<SocketAddr> {
        let l = TcpListener::bind(addr)?;
        l.set_nonblocking(true)?;
        let local = l.local_addr()?;
        self.listener = Some(l);
        Ok(local)
    }

    /// Starts a session on a fresh transport. Returns its id.
    pub fn attach(&mut self, transport: Box<dyn Transport>) -> u64 {
        let id = self.next_session;
        self.next_session += 1;
        let mut s = Session {
            transport,
            decoder: Decoder::new(),
            state: SessionState::HelloSent,
            dpid: None,
            next_xid: 1,
            sent: Vec::new(),
        };
        if !s.send(None, OfBody::Hello) {
            s.state = SessionState::Dead;
        }
        self.sessions.insert(id, s);
        id
    }

    pub fn session_state(&self, id: u64) -> Option<SessionState> {
        self.sessions.get(&id).map(|s| s.state)
    }

    /// The live session bound to `dpid`.
    pub fn session_for(&self, dpid: u64) -> Option<u64> {
        self.switches.get(&dpid)?.session
    }

    /// Messages sent on a session, in order.
    pub fn sent(&self, id: u64) -> &[OfMessage] {
        self.sessions.get(&id).map_or(&[], |s| &s.sent)
    }

    /// Flows the driver believes are installed on `dpid`.
    pub fn image(&self, dpid: u64) -> Option<&BTreeMap<String, FlowSpec>> {
        self.switches.get(&dpid).map(|c| &c.image)
    }

    /// One pass over listener, sessions and watches. True if anything happened.
    pub fn poll(&mut self) -> bool {
        let mut busy = self.accept();
        let ids: Vec<u64> = self.sessions.keys().copied().collect();
        for id in ids {
            busy |= self.service(id);
        }
        let dpids: Vec<u64> = self.switches.keys().copied().collect();
        for dpid in dpids {
            busy |= self.drain_watches(dpid);
        }
        busy
    }

    /// Polls until `stop` is set, sleeping briefly when idle.
    pub fn run(&mut self, stop: &AtomicBool) {
        while !stop.load(Ordering::Relaxed) {
            if !self.poll() {
                std::thread::sleep(Duration::from_millis(1));
            }
        }
    }

    fn accept(&mut self) -> bool {
        let mut accepted = Vec::new();
        if let Some(l) = &self.listener {
            loop {
                match l.accept() {
                    Ok((stream, peer)) => match TcpTransport::new(stream) {
                        Ok(t) => {
                            info!("switch connection from {peer}");
                            accepted.push(t);
                        }
                        Err(e) => warn!("cannot configure connection from {peer}: {e}"),
                    },
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                    Err(e) => {
                        warn!("accept failed: {e}");
                        break;
                    }
                }
            }
        }
        let busy = !accepted.is_empty();
        for t in accepted {
            self.attach(Box::new(t));
        }
        busy
    }

    fn service(&mut self, id: u64) -> bool {
        let Some(s) = self.sessions.get_mut(&id) else {
            return false;
        };
        if s.state == SessionState::Dead {
            return false;
        }
        let mut busy = false;
        let mut closed = false;
        loop {
            match s.transport.recv() {
                Recv::Data(d) => {
                    busy = true;
                    s.decoder.feed(&d);
                }
                Recv::Empty => break,
                Recv::Closed => {
                    closed = true;
                    break;
                }
            }
        }
        let mut msgs = Vec::new();
        loop {
            match s.decoder.next_message() {
                Ok(Some(m)) => msgs.push(m),
                Ok(None) => break,
                Err(e) => {
                    warn!("session {id}: protocol error: {e}");
                    closed = true;
                    break;
                }
            }
        }
        for m in msgs {
            if let Err(e) = self.handle(id, m) {
                warn!("session {id}: {e}");
            }
        }
        if closed {
            self.kill(id, true);
        }
        busy || closed
    }

    fn send(&mut self, id: u64, body: OfBody) {
        let ok = self.sessions.get_mut(&id).is_some_and(|s| s.send(None, body));
        if !ok {
            self.kill(id, true);
        }
    }

    fn kill(&mut self, id: u64, mark_disconnected: bool) {
        let Some(s) = self.sessions.get_mut(&id) else {
            return;
        };
        if s.state == SessionState::Dead {
            return;
        }
        s.state = SessionState::Dead;
        s.transport.close();
        let Some(dpid) = s.dpid else {
            return;
        };
        info!("switch {dpid:#018x}: session {id} closed");
        if let Some(ctx) = self.switches.get_mut(&dpid) {
            if ctx.session == Some(id) {
                ctx.session = None;
                ctx.image.clear();
                if mark_disconnected {
                    let _ = self.fs.write(&format!("{}/status", ctx.path), b"disconnected");
                }
            }
        }
    }

    fn handle(&mut self, id: u64, m: OfMessage) -> FsResult<()> {
        let state = self.sessions[&id].state;
        match (state, m.body) {
            (_, OfBody::EchoRequest(d)) => {
                if let Some(s) = self.sessions.get_mut(&id) {
                    s.send(Some(m.xid), OfBody::EchoReply(d));
                }
            }
            (SessionState::HelloSent, OfBody::Hello) => {
                self.sessions.get_mut(&id).expect("live session").state = SessionState::FeaturesPending;
                self.send(id, OfBody::FeaturesRequest);
            }
            (SessionState::FeaturesPending, OfBody::FeaturesReply(f)) => {
                if let Err(e) = self.on_features(id, f) {
                    self.kill(id, true);
                    return Err(e);
                }
            }
            (SessionState::Ready, OfBody::PacketIn(p)) => {
                let dpid = self.sessions[&id].dpid.expect("ready session has dpid");
                let path = &self.switches[&dpid].path;
                self.fs.enqueue_event(path, &EventRecord::from_packet_in(&p))?;
            }
            (SessionState::Ready, OfBody::PortStatus(ps)) => self.on_port_status(id, ps)?,
            (_, body) => debug!("session {id}: ignoring {} in state {state:?}", body.name()),
        }
        Ok(())
    }

    fn write_port(&mut self, dpid: u64, sw_path: &str, p: &PhyPort) -> FsResult<()> {
        if p.port_no == 0 || p.port_no > port::MAX {
            return Ok(());
        }
        let pp = port_path(sw_path, p.port_no);
        self.fs.ensure_dir(&pp)?;
        self.fs.write(&format!("{pp}/hw_addr"), p.hw_addr.to_string().as_bytes())?;
        if !p.name.is_empty() {
            self.fs.write(&format!("{pp}/name"), p.name.as_bytes())?;
        }
        let status = if p.state & PORT_STATE_LINK_DOWN != 0 { "down" } else { "up" };
        if self.fs.read_text(&format!("{pp}/config.port_status"))? != status {
            self.fs.write(&format!("{pp}/config.port_status"), status.as_bytes())?;
        }
        let down = p.config & PORT_CONFIG_DOWN != 0;
        if let Some(ctx) = self.switches.get_mut(&dpid) {
            ctx.port_down.insert(p.port_no, down);
            ctx.hw_addr.insert(p.port_no, p.hw_addr);
        }
        let want = if down { "1" } else { "0" };
        if self.fs.read_text(&format!("{pp}/config.port_down"))? != want {
            self.fs.write(&format!("{pp}/config.port_down"), want.as_bytes())?;
        }
        Ok(())
    }

    fn on_features(&mut self, id: u64, f: FeaturesReply) -> FsResult<()> {
        let dpid = f.datapath_id;
        if let Some(old) = self.switches.get(&dpid).and_then(|c| c.session) {
            if old != id {
                info!("switch {dpid:#018x}: session {id} supersedes {old}");
                self.kill(old, false);
            }
        }
        let path = format!("{NET_ROOT}/switches/{}", dpid_name(dpid));
        self.fs.ensure_dir(&path)?;
        for (name, v) in [
            ("capabilities", f.capabilities.to_string()),
            ("n_buffers", f.n_buffers.to_string()),
            ("n_tables", f.n_tables.to_string()),
            ("status", "connected".to_string()),
        ] {
            self.fs.write(&format!("{path}/{name}"), v.as_bytes())?;
        }
        let mut fresh = BTreeMap::new();
        for p in &f.ports {
            fresh.insert(p.port_no, p.config & PORT_CONFIG_DOWN != 0);
            self.write_port(dpid, &path, p)?;
        }
        if !self.switches.contains_key(&dpid) {
            let ctx = SwitchCtx {
                flows: self.fs.watch(&format!("{path}/flows"), true, WATCH_CAPACITY)?,
                ports: self.fs.watch(&format!("{path}/ports"), true, WATCH_CAPACITY)?,
                packets_out: self.fs.watch(&format!("{path}/packets_out"), true, WATCH_CAPACITY)?,
                path,
                session: None,
                image: BTreeMap::new(),
                port_down: fresh,
                hw_addr: f.ports.iter().map(|p| (p.port_no, p.hw_addr)).collect(),
            };
            self.switches.insert(dpid, ctx);
        }
        let s = self.sessions.get_mut(&id).expect("live session");
        s.dpid = Some(dpid);
        s.state = SessionState::Ready;
        self.switches.get_mut(&dpid).expect("registered switch").session = Some(id);
        info!("switch {dpid:#018x}: ready on session {id} with {} ports", f.ports.len());
        self.reconcile(dpid)
    }

    fn on_port_status(&mut self, id: u64, ps: PortStatus) -> FsResult<()> {
        let dpid = self.sessions[&id].dpid.expect("ready session has dpid");
        let path = self.switches[&dpid].path.clone();
        match ps.reason {
            PortStatusReason::Delete => {
                match self.fs.remove(&port_path(&path, ps.port.port_no), true) {
                    Err(FsError::NotFound(_)) | Ok(()) => {}
                    Err(e) => return Err(e),
                }
                Ok(())
            }
            _ => self.write_port(dpid, &path, &ps.port),
        }
    }

    /// Wipes the switch table and replays every committed flow.
    fn reconcile(&mut self, dpid: u64) -> FsResult<()> {
        let Some(id) = self.switches[&dpid].session else {
            return Ok(());
        };
        let flows_dir = format!("{}/flows", self.switches[&dpid].path);
        self.switches.get_mut(&dpid).expect("registered switch").image.clear();
        self.send(id, OfBody::FlowMod(flow_mod_all_delete()));
        let mut names = self.fs.list(&flows_dir)?;
        names.sort();
        let mut added = 0;
        for name in names {
            let spec = match read_committed(self.fs.as_ref(), &flow_path(&self.switches[&dpid].path, &name)) {
                Ok(Some(s)) if s.version > 0 => s,
                Ok(_) | Err(FsError::NotFound(_)) => continue,
                Err(e) => {
                    warn!("switch {dpid:#018x}: flow {name}: {e}");
                    continue;
                }
            };
            self.send(id, OfBody::FlowMod(spec.flow_mod(FlowModCommand::Add)));
            self.switches.get_mut(&dpid).expect("registered switch").image.insert(name, spec);
            added += 1;
        }
        debug!("switch {dpid:#018x}: reconciled {added} flows");
        Ok(())
    }

    fn push(&mut self, dpid: u64, body: OfBody) {
        if let Some(id) = self.switches[&dpid].session {
            self.send(id, body);
        }
    }

    /// Brings the switch in line with the committed image of one flow.
    /// With `reset` the previously pushed entry is withdrawn first.
    fn sync_flow(&mut self, dpid: u64, name: &str, reset: bool) {
        let ctx = &self.switches[&dpid];
        let dir = flow_path(&ctx.path, name);
        if reset {
            if let Some(p) = self.switches.get_mut(&dpid).expect("registered switch").image.remove(name) {
                self.push(dpid, OfBody::FlowMod(p.flow_mod(FlowModCommand::DeleteStrict)));
            }
        }
        let current = match read_committed(self.fs.as_ref(), &dir) {
            Ok(c) => c.filter(|c| c.version > 0),
            Err(FsError::NotFound(_)) => None,
            Err(e) => {
                warn!("switch {dpid:#018x}: flow {name}: unreadable image: {e}");
                return;
            }
        };
        let pushed = self.switches[&dpid].image.get(name).cloned();
        let mods = match (&current, &pushed) {
            (None, Some(p)) => vec![p.flow_mod(FlowModCommand::DeleteStrict)],
            (Some(c), None) => vec![c.flow_mod(FlowModCommand::Add)],
            (Some(c), Some(p)) if c.version > p.version && c.same_slot(p) => {
                vec![c.flow_mod(FlowModCommand::ModifyStrict)]
            }
            (Some(c), Some(p)) if c.version > p.version => vec![p.flow_mod(FlowModCommand::DeleteStrict), c.flow_mod(FlowModCommand::Add)],
            _ => return,
        };
        let img = &mut self.switches.get_mut(&dpid).expect("registered switch").image;
        match current {
            Some(c) => img.insert(name.to_string(), c),
            None => img.remove(name),
        };
        for fm in mods {
            self.push(dpid, OfBody::FlowMod(fm));
        }
    }

    fn drain_watches(&mut self, dpid: u64) -> bool {
        let (ready, path) = {
            let ctx = &self.switches[&dpid];
            (ctx.session.is_some(), ctx.path.clone())
        };
        let ctx = self.switches.get_mut(&dpid).expect("registered switch");
        let flow_evs = ctx.flows.drain();
        let port_evs = ctx.ports.drain();
        let po_evs = ctx.packets_out.drain();
        let busy = !(flow_evs.is_empty() && port_evs.is_empty() && po_evs.is_empty());

        let flows_dir = format!("{path}/flows");
        for ev in flow_evs {
            if !ready {
                continue;
            }
            if ev.kind == EventKind::Overflow {
                if let Err(e) = self.reconcile(dpid) {
                    warn!("switch {dpid:#018x}: reconcile failed: {e}");
                }
                continue;
            }
            match (ev.kind, rel(&ev.path, &flows_dir).as_deref()) {
                (EventKind::Modified | EventKind::Created, Some([flow, "version"])) => self.sync_flow(dpid, flow, false),
                (EventKind::Removed, Some([flow])) => self.sync_flow(dpid, flow, true),
                (EventKind::Renamed, Some([flow])) => {
                    if let Some(old) = ev.old_path.as_deref().and_then(|o| rel(o, &flows_dir)) {
                        if let [old] = old.as_slice() {
                            self.sync_flow(dpid, old, true);
                        }
                    }
                    self.sync_flow(dpid, flow, true);
                }
                _ => {}
            }
        }

        let ports_dir = format!("{path}/ports");
        for ev in port_evs {
            if !ready || !matches!(ev.kind, EventKind::Modified | EventKind::Created) {
                continue;
            }
            if let Some([p, "config.port_down"]) = rel(&ev.path, &ports_dir).as_deref() {
                if let Err(e) = self.apply_port_config(dpid, p, &ev.path) {
                    warn!("switch {dpid:#018x}: port {p}: {e}");
                }
            }
        }

        let po_dir = format!("{path}/packets_out");
        for ev in po_evs {
            if !matches!(ev.kind, EventKind::Modified | EventKind::Created) {
                continue;
            }
            if let Some([rec, "send"]) = rel(&ev.path, &po_dir).as_deref() {
                if let Err(e) = self.send_packet_out(dpid, &po_dir, rec) {
                    debug!("switch {dpid:#018x}: packet-out {rec}: {e}");
                }
            }
        }
        busy
    }

    fn apply_port_config(&mut self, dpid: u64, p: &str, file: &str) -> FsResult<()> {
        let port_no = parse_port_name(p)?;
        let down = parse_bool("config.port_down", &self.fs.read_text(file)?)?;
        let ctx = self.switches.get_mut(&dpid).expect("registered switch");
        if ctx.port_down.get(&port_no) == Some(&down) {
            return Ok(());
        }
        ctx.port_down.insert(port_no, down);
        let hw_addr = ctx.hw_addr.get(&port_no).copied().unwrap_or_default();
        self.push(
            dpid,
            OfBody::PortMod(PortMod {
                port_no,
                hw_addr,
                config: if down { PORT_CONFIG_DOWN } else { 0 },
                mask: PORT_CONFIG_DOWN,
                advertise: 0,
            }),
        );
        Ok(())
    }

    fn send_packet_out(&mut self, dpid: u64, po_dir: &str, rec: &str) -> FsResult<()> {
        let rec_path = format!("{po_dir}/{rec}");
        if self.fs.read_text(&format!("{rec_path}/send"))? != "1" {
            return Ok(());
        }
        let mut files = Vec::new();
        for name in self.fs.list(&rec_path)? {
            files.push((name.clone(), self.fs.read(&format!("{rec_path}/{name}"))?));
        }
        let get = |n: &str| files.iter().find(|(k, _)| k == n).map(|(_, v)| v.as_slice());
        let built = (|| -> FsResult<PacketOut> {
            let in_port = match get("in_port") {
                Some(raw) => parse_packet_out_in_port(codec::translate::payload_text("in_port", raw)?)?,
                None => port::NONE,
            };
            Ok(PacketOut {
                buffer_id: NO_BUFFER,
                in_port,
                actions: packet_out_actions(files.iter().map(|(k, v)| (k.as_str(), v.as_slice())))?,
                data: get("data").unwrap_or_default().to_vec(),
            })
        })();
        self.fs.remove(&rec_path, true)?;
        let err_file = format!("{po_dir}/{ERROR_FILE}");
        match (built, self.switches[&dpid].session) {
            (Err(e), _) => self.fs.write(&err_file, format!("{rec}: {e}").as_bytes()),
            (Ok(_), None) => self.fs.write(&err_file, b"disconnected"),
            (Ok(po), Some(_)) => {
                self.push(dpid, OfBody::PacketOut(po));
                Ok(())
            }
        }
    }
}
