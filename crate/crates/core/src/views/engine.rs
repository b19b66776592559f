//! Keeps every defined view's mirror, flows and packet-ins in step with its
//! parent. Nested views compose: a child's parent is a mirror maintained
//! by the same engine.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::{debug, warn};

use crate::api::{EventSource, FsApi};
use crate::codec::packet::flow_key;
use crate::codec::OfMatch;
use crate::error::{FsError, FsResult};
use crate::schema::fields::{check_prerequisites, ERROR_FILE};
use crate::schema::layout::{classify, flow_path, Place, SLICE_DIR};
use crate::schema::{read_committed, FlowSpec, COMMITTED_FILE, VERSION_FILE};
use crate::store::{ChangeEvent, EventKind, NodeKind};

use super::{list_views, ViewDef, FLOWSPACE_PREFIX, FLOW_SEPARATOR, MEMBERS_FILE, SLICE_BUFFER_PREFIX};
use crate::apps::{pending_records, Daemon};

const WATCH_CAPACITY: usize = 65_536;

struct Member {
    parent_sw: String,
    mirror: String,
    parent_files: Box<dyn EventSource>,
    parent_ports: Box<dyn EventSource>,
    mirror_flows: Box<dyn EventSource>,
    mirror_po: Box<dyn EventSource>,
}

struct ViewState {
    def: ViewDef,
    /// Raw control files, to notice redefinition.
    raw: BTreeMap<String, Vec<u8>>,
    parent_switches: Box<dyn EventSource>,
    members: BTreeMap<String, Member>,
}

impl ViewState {
    fn name(&self) -> &str {
        self.def.name()
    }

    fn buffer(&self) -> String {
        format!("{SLICE_BUFFER_PREFIX}{}", self.name())
    }
}

pub struct ViewsEngine {
    fs: Arc<dyn FsApi>,
    views: BTreeMap<String, ViewState>,
    /// Definitions whose setup failed; retried once the control files change.
    failed: BTreeMap<String, BTreeMap<String, Vec<u8>>>,
}

fn rel<'a>(path: &'a str, dir: &str) -> Option<Vec<&'a str>> {
    let rest = path.strip_prefix(dir)?.strip_prefix('/')?;
    Some(rest.split('/').collect())
}

fn ignore_missing(r: FsResult<()>) -> FsResult<()> {
    match r {
        Err(FsError::NotFound(_)) => Ok(()),
        other => other,
    }
}

/// Committed image of a flow, `None` if the flow is gone or never committed.
fn committed(fs: &dyn FsApi, flow: &str) -> FsResult<Option<FlowSpec>> {
    match read_committed(fs, flow) {
        Err(FsError::NotFound(_)) => Ok(None),
        other => other,
    }
}

fn is_file(fs: &dyn FsApi, p: &str) -> bool {
    fs.stat(p, false).is_ok_and(|i| i.kind == NodeKind::File)
}

/// Writes only on change so mirrors do not generate spurious events.
fn copy_if_changed(fs: &dyn FsApi, from: &str, to: &str) -> FsResult<()> {
    let v = fs.read(from)?;
    if fs.read(to).ok().as_deref() != Some(v.as_slice()) {
        fs.write(to, &v)?;
    }
    Ok(())
}

fn read_raw(fs: &dyn FsApi, view: &str) -> BTreeMap<String, Vec<u8>> {
    let dir = format!("{view}/{SLICE_DIR}");
    let mut out = BTreeMap::new();
    for n in fs.list(&dir).unwrap_or_default() {
        if n == MEMBERS_FILE || n.starts_with(FLOWSPACE_PREFIX) {
            if let Ok(v) = fs.read(&format!("{dir}/{n}")) {
                out.insert(n, v);
            }
        }
    }
    out
}

/// Flowspace test for a frame; unparseable frames only fit an unconstrained space.
fn admits(space: &OfMatch, data: &[u8], in_port: u16) -> bool {
    match flow_key(data, in_port) {
        Some(k) => space.matches(&k),
        None => *space == OfMatch::all(),
    }
}

fn spec_eq(a: &FlowSpec, b: &FlowSpec) -> bool {
    a.of_match == b.of_match
        && a.priority == b.priority
        && a.actions == b.actions
        && a.idle_timeout == b.idle_timeout
        && a.hard_timeout == b.hard_timeout
}

impl ViewsEngine {
    /// `fs` should carry the identity allowed to create `<view>,<flow>` names.
    pub fn new(fs: Arc<dyn FsApi>) -> ViewsEngine {
        ViewsEngine {
            fs,
            views: BTreeMap::new(),
            failed: BTreeMap::new(),
        }
    }

    pub fn active_views(&self) -> Vec<String> {
        self.views.keys().cloned().collect()
    }

    fn fs(&self) -> &dyn FsApi {
        self.fs.as_ref()
    }

    fn setup(&self, def: ViewDef, raw: BTreeMap<String, Vec<u8>>) -> FsResult<ViewState> {
        let fs = self.fs();
        let parent_switches = fs.watch(&format!("{}/switches", def.parent), false, WATCH_CAPACITY)?;
        let mut st = ViewState {
            def,
            raw,
            parent_switches,
            members: BTreeMap::new(),
        };
        // drop mirrors left from an earlier definition
        let mirrors = format!("{}/switches", st.def.path);
        for m in fs.list(&mirrors)? {
            if !st.def.members.contains(&m) {
                ignore_missing(fs.remove(&format!("{mirrors}/{m}"), true))?;
            }
        }
        for m in st.def.members.clone() {
            self.attach_member(&mut st, &m)?;
        }
        for m in st.def.members.clone() {
            if st.members.contains_key(&m) {
                self.sync_mirror(&st, &m)?;
                self.full_flow_sync(&st, &m)?;
            }
        }
        Ok(st)
    }

    /// Creates the mirror and subscriptions for a member whose parent
    /// switch exists; a no-op otherwise.
    fn attach_member(&self, st: &mut ViewState, m: &str) -> FsResult<()> {
        let fs = self.fs();
        let parent_sw = format!("{}/switches/{m}", st.def.parent);
        if !fs.is_dir(&parent_sw) {
            return Ok(());
        }
        let mirror = format!("{}/switches/{m}", st.def.path);
        fs.ensure_dir(&mirror)?;
        fs.open_event_buffer(&parent_sw, &st.buffer())?;
        let member = Member {
            parent_files: fs.watch(&parent_sw, false, WATCH_CAPACITY)?,
            parent_ports: fs.watch(&format!("{parent_sw}/ports"), true, WATCH_CAPACITY)?,
            mirror_flows: fs.watch(&format!("{mirror}/flows"), true, WATCH_CAPACITY)?,
            mirror_po: fs.watch(&format!("{mirror}/packets_out"), true, WATCH_CAPACITY)?,
            parent_sw,
            mirror,
        };
        st.members.insert(m.to_string(), member);
        Ok(())
    }

    /// Copies switch and port state into the mirror. Peer links are kept
    /// only when both ends are members.
    fn sync_mirror(&self, st: &ViewState, m: &str) -> FsResult<()> {
        let fs = self.fs();
        let Some(mem) = st.members.get(m) else {
            return Ok(());
        };
        for f in fs.list(&mem.parent_sw)? {
            let src = format!("{}/{f}", mem.parent_sw);
            if is_file(fs, &src) {
                ignore_missing(copy_if_changed(fs, &src, &format!("{}/{f}", mem.mirror)))?;
            }
        }
        let pports = format!("{}/ports", mem.parent_sw);
        let mports = format!("{}/ports", mem.mirror);
        let wanted: BTreeSet<String> = fs.list(&pports)?.into_iter().collect();
        for p in fs.list(&mports)? {
            if !wanted.contains(&p) {
                ignore_missing(fs.remove(&format!("{mports}/{p}"), true))?;
            }
        }
        for p in &wanted {
            let (src, dst) = (format!("{pports}/{p}"), format!("{mports}/{p}"));
            fs.ensure_dir(&dst)?;
            for f in fs.list(&src)? {
                let sf = format!("{src}/{f}");
                if is_file(fs, &sf) {
                    ignore_missing(copy_if_changed(fs, &sf, &format!("{dst}/{f}")))?;
                }
            }
            let peer = match fs.readlink(&format!("{src}/peer")) {
                Ok(t) => match classify(&t) {
                    Place::Port { sw, port } if sw.view == st.def.parent && st.def.members.contains(&sw.name) => {
                        Some(format!("{}/switches/{}/ports/{port}", st.def.path, sw.name))
                    }
                    _ => None,
                },
                Err(_) => None,
            };
            let mpeer = format!("{dst}/peer");
            let current = fs.readlink(&mpeer).ok();
            if current != peer {
                if current.is_some() {
                    ignore_missing(fs.remove(&mpeer, false))?;
                }
                if let Some(t) = peer {
                    fs.symlink(&mpeer, &t)?;
                }
            }
        }
        Ok(())
    }

    fn parent_flow_dir(st: &ViewState, m: &str, flow: &str) -> String {
        flow_path(
            &format!("{}/switches/{m}", st.def.parent),
            &format!("{}{FLOW_SEPARATOR}{flow}", st.name()),
        )
    }

    /// Installs a committed mirror flow in the parent, narrowed to the flowspace.
    fn translate(&self, st: &ViewState, m: &str, flow: &str) -> FsResult<bool> {
        let fs = self.fs();
        let Some(mem) = st.members.get(m) else {
            return Ok(false);
        };
        let mdir = flow_path(&mem.mirror, flow);
        let Some(spec) = committed(fs, &mdir)? else {
            return Ok(false);
        };
        let narrowed = spec
            .of_match
            .intersect(&st.def.flowspace)
            .map_err(|f| format!("match.{f}: disjoint from the view's flowspace"))
            .and_then(|m| check_prerequisites(&m).map(|_| m).map_err(|e| format!("{e}")));
        let err_file = format!("{mdir}/{ERROR_FILE}");
        let of_match = match narrowed {
            Ok(x) => x,
            Err(reason) => {
                debug!("{mdir}: rejected: {reason}");
                fs.write(&err_file, reason.as_bytes())?;
                return Ok(true);
            }
        };
        if fs.exists(&err_file) {
            ignore_missing(fs.remove(&err_file, false))?;
        }
        let want = FlowSpec { of_match, ..spec };
        let pdir = Self::parent_flow_dir(st, m, flow);
        if let Some(have) = committed(fs, &pdir)? {
            if spec_eq(&have, &want) {
                return Ok(false);
            }
        }
        fs.ensure_dir(&pdir)?;
        let files = want.to_files();
        for old in fs.list(&pdir)? {
            let staged = old != VERSION_FILE && old != COMMITTED_FILE && old != ERROR_FILE && !old.starts_with("stats.");
            if staged && !files.contains_key(&old) {
                fs.remove(&format!("{pdir}/{old}"), false)?;
            }
        }
        for (k, v) in &files {
            let p = format!("{pdir}/{k}");
            if fs.read_text(&p).ok().as_deref() != Some(v.as_str()) {
                fs.write(&p, v.as_bytes())?;
            }
        }
        fs.commit_flow(&pdir)?;
        Ok(true)
    }

    fn untranslate(&self, st: &ViewState, m: &str, flow: &str) -> FsResult<bool> {
        let Some(mem) = st.members.get(m) else {
            return Ok(false);
        };
        if self.fs().exists(&flow_path(&mem.mirror, flow)) {
            return Ok(false);
        }
        let pdir = Self::parent_flow_dir(st, m, flow);
        if !self.fs().exists(&pdir) {
            return Ok(false);
        }
        ignore_missing(self.fs().remove(&pdir, true))?;
        Ok(true)
    }

    fn full_flow_sync(&self, st: &ViewState, m: &str) -> FsResult<()> {
        let fs = self.fs();
        let Some(mem) = st.members.get(m) else {
            return Ok(());
        };
        for f in fs.list(&format!("{}/flows", mem.mirror))? {
            self.translate(st, m, &f)?;
        }
        let prefix = format!("{}{FLOW_SEPARATOR}", st.name());
        for pf in fs.list(&format!("{}/flows", mem.parent_sw))? {
            if let Some(f) = pf.strip_prefix(&prefix) {
                self.untranslate(st, m, f)?;
            }
        }
        Ok(())
    }

    /// Relays a view packet-out to the parent switch if the frame lies in
    /// the flowspace; the mirror record is consumed either way.
    fn forward_packet_out(&self, st: &ViewState, m: &str, rec: &str) -> FsResult<()> {
        let fs = self.fs();
        let mem = &st.members[m];
        let dir = format!("{}/packets_out/{rec}", mem.mirror);
        if fs.read_text(&format!("{dir}/send"))? != "1" {
            return Ok(());
        }
        let data = fs.read(&format!("{dir}/data")).unwrap_or_default();
        let in_port = fs.read_text(&format!("{dir}/in_port")).ok();
        let port = in_port.as_deref().and_then(|p| p.parse().ok()).unwrap_or(crate::codec::port::NONE);
        let result = if admits(&st.def.flowspace, &data, port) {
            let out = format!("{}/packets_out/{}.{rec}", mem.parent_sw, st.buffer());
            fs.mkdir(&out)?;
            for f in fs.list(&dir)? {
                if f != "send" {
                    copy_if_changed(fs, &format!("{dir}/{f}"), &format!("{out}/{f}"))?;
                }
            }
            fs.write(&format!("{out}/send"), b"1")
        } else {
            let msg = format!("{rec}: outside the view's flowspace");
            fs.write(&format!("{}/packets_out/error", mem.mirror), msg.as_bytes())
        };
        ignore_missing(fs.remove(&dir, true))?;
        result
    }

    /// Moves admitted packet-ins from the parent's slice buffer into the mirror.
    fn deliver(&self, st: &ViewState, m: &str) -> FsResult<bool> {
        let fs = self.fs();
        let mem = &st.members[m];
        let buf = format!("{}/events/{}", mem.parent_sw, st.buffer());
        let recs = match pending_records(fs, &buf) {
            Ok(r) => r,
            Err(FsError::NotFound(_)) => {
                fs.open_event_buffer(&mem.parent_sw, &st.buffer())?;
                return Ok(true);
            }
            Err(e) => return Err(e),
        };
        let busy = !recs.is_empty();
        for (path, r) in recs {
            if admits(&st.def.flowspace, &r.data, r.in_port) {
                fs.enqueue_event(&mem.mirror, &r)?;
            }
            fs.ack_event(&path)?;
        }
        Ok(busy)
    }

    fn process(&self, st: &mut ViewState) -> FsResult<bool> {
        let mut busy = false;
        let parent_sw_dir = format!("{}/switches", st.def.parent);
        for ev in st.parent_switches.drain() {
            busy = true;
            let Some(&[m]) = rel(&ev.path, &parent_sw_dir).as_deref() else {
                continue;
            };
            if !st.def.members.iter().any(|x| x == m) {
                continue;
            }
            let present = self.fs().is_dir(&ev.path);
            if present && !st.members.contains_key(m) {
                self.attach_member(st, m)?;
                self.sync_mirror(st, m)?;
                self.full_flow_sync(st, m)?;
            } else if !present && st.members.contains_key(m) {
                st.members.remove(m);
                ignore_missing(self.fs().remove(&format!("{}/switches/{m}", st.def.path), true))?;
            }
        }

        let names: Vec<String> = st.members.keys().cloned().collect();
        let mut resync_links = false;
        for m in &names {
            let (files, ports, flows, pos) = {
                let mem = st.members.get_mut(m).expect("member");
                (
                    mem.parent_files.drain(),
                    mem.parent_ports.drain(),
                    mem.mirror_flows.drain(),
                    mem.mirror_po.drain(),
                )
            };
            if !files.is_empty() || !ports.is_empty() {
                busy = true;
                resync_links |= ports
                    .iter()
                    .any(|e: &ChangeEvent| e.path.ends_with("/peer") || e.kind == EventKind::Overflow);
                if self.fs().is_dir(&st.members[m].parent_sw) {
                    self.sync_mirror(st, m)?;
                }
            }
            let flows_dir = format!("{}/flows", st.members[m].mirror);
            for ev in flows {
                busy = true;
                match (ev.kind, rel(&ev.path, &flows_dir).as_deref()) {
                    (EventKind::Overflow, _) => self.full_flow_sync(st, m)?,
                    (EventKind::Modified | EventKind::Created, Some([f, "version"])) => {
                        self.translate(st, m, f)?;
                    }
                    (EventKind::Removed, Some([f])) => {
                        self.untranslate(st, m, f)?;
                    }
                    (EventKind::Renamed, Some([f])) => {
                        if let Some(old) = ev.old_path.as_deref().and_then(|o| rel(o, &flows_dir)) {
                            if let [old] = old.as_slice() {
                                self.untranslate(st, m, old)?;
                            }
                        }
                        self.translate(st, m, f)?;
                    }
                    _ => {}
                }
            }
            let po_dir = format!("{}/packets_out", st.members[m].mirror);
            for ev in pos {
                if !matches!(ev.kind, EventKind::Modified | EventKind::Created) {
                    continue;
                }
                if let Some([rec, "send"]) = rel(&ev.path, &po_dir).as_deref() {
                    busy = true;
                    if let Err(e) = self.forward_packet_out(st, m, rec) {
                        debug!("{po_dir}/{rec}: {e}");
                    }
                }
            }
            busy |= self.deliver(st, m)?;
        }
        // a link change on one member can add or drop the peer on another
        if resync_links {
            for m in &names {
                self.sync_mirror(st, m)?;
            }
        }
        Ok(busy)
    }
}

impl Daemon for ViewsEngine {
    fn step(&mut self) -> FsResult<bool> {
        let mut busy = false;
        let defs: BTreeMap<String, ViewDef> = list_views(self.fs()).into_iter().map(|d| (d.path.clone(), d)).collect();
        self.failed.retain(|k, _| defs.contains_key(k));
        let gone: Vec<String> = self.views.keys().filter(|k| !defs.contains_key(*k)).cloned().collect();
        for k in gone {
            self.views.remove(&k);
            busy = true;
        }
        // parents first, so a child's parent mirror exists before the child
        let mut order: Vec<&ViewDef> = defs.values().collect();
        order.sort_by_key(|d| d.path.matches('/').count());
        for def in order {
            let raw = read_raw(self.fs(), &def.path);
            if self.views.get(&def.path).is_some_and(|s| s.raw == raw) || self.failed.get(&def.path) == Some(&raw) {
                continue;
            }
            busy = true;
            self.views.remove(&def.path);
            match self.setup(def.clone(), raw.clone()) {
                Ok(st) => {
                    self.failed.remove(&def.path);
                    self.views.insert(def.path.clone(), st);
                }
                Err(e) => {
                    warn!("{}: setup failed: {e}", def.path);
                    self.failed.insert(def.path.clone(), raw);
                }
            }
        }
        let keys: Vec<String> = self.views.keys().cloned().collect();
        for k in keys {
            let mut st = self.views.remove(&k).expect("view state");
            match self.process(&mut st) {
                Ok(b) => busy |= b,
                // usually a teardown racing this step; the next scan settles it
                Err(FsError::NotFound(p)) => debug!("{k}: {p} vanished"),
                Err(e) => warn!("{k}: {e}"),
            }
            self.views.insert(k, st);
        }
        Ok(busy)
    }
}
