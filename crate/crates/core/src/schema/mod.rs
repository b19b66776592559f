//! The `/net` schema over the raw store.
//!
//! [`NetFs`] classifies every path it is handed (see [`layout`]) and
//! enforces the semantics of that point: `mkdir` builds whole objects,
//! removal of an object is always recursive, field files are validated on
//! write, and a write to a flow's `version` file commits the flow.
//!
//! Committing snapshots the staged field set into a schema-owned
//! `.committed` image inside the same store mutation that bumps `version`,
//! so a reader reacting to the version event sees exactly the committed
//! fields no matter what has been staged since.

pub mod fields;
pub mod layout;

use std::time::Duration;

pub use fields::{format_cidr, parse_cidr, EventRecord, FlowSpec, COMMITTED_FILE, VERSION_FILE};
pub use layout::{classify, dpid_name, parse_dpid_name, Place, NET_ROOT};

use crate::api::{EventSource, FsApi};
use crate::error::{FsError, FsResult};
use crate::store::{path, NodeInfo, NodeKind, Store, Tx, WatchHandle, DEFAULT_DIR_MODE, DEFAULT_FILE_MODE};

/// Records kept per event buffer before the oldest is dropped.
pub const BUFFER_CAPACITY: usize = 1024;
pub const OVERFLOWED_FILE: &str = "overflowed";
/// The one identity allowed to create flow names containing a comma.
pub const VIEWS_IDENTITY: &str = "views";

#[derive(Clone, Debug)]
pub struct NetFs {
    store: Store,
}

fn lexical_canon(tx: &Tx<'_>, p: &str) -> FsResult<String> {
    let segs = path::split(p)?;
    if segs.is_empty() {
        return Ok("/".into());
    }
    let (parent, name) = path::parent_of(p)?;
    Ok(path::child(&tx.canonical(&parent)?, &name))
}

/// Canonical path with the final component followed when it exists.
fn followed_canon(tx: &Tx<'_>, p: &str) -> FsResult<String> {
    match tx.canonical(p) {
        Ok(c) => Ok(c),
        Err(FsError::NotFound(_) | FsError::DanglingLink(_)) => lexical_canon(tx, p),
        Err(e) => Err(e),
    }
}

fn to_validation(flow: &str, e: FsError) -> FsError {
    match e {
        FsError::ValidationFailed { path, reason } => FsError::ValidationFailed {
            path: format!("{flow}/{path}"),
            reason,
        },
        FsError::ParseError { field, reason } | FsError::RangeError { field, reason } => FsError::ValidationFailed {
            path: format!("{flow}/{field}"),
            reason,
        },
        FsError::UnknownField(f) => FsError::ValidationFailed {
            path: format!("{flow}/{f}"),
            reason: "unknown field".into(),
        },
        other => other,
    }
}

fn check_flow_name(tx: &Tx<'_>, name: &str) -> FsResult<()> {
    if name.contains(',') && tx.identity() != VIEWS_IDENTITY {
        return Err(FsError::InvalidName(format!("{name}: ',' is reserved for view-owned flows")));
    }
    Ok(())
}

fn put_file(tx: &mut Tx<'_>, p: &str, bytes: &[u8]) -> FsResult<()> {
    if tx.exists(p) {
        tx.write(p, bytes)
    } else {
        tx.create_file(p, DEFAULT_FILE_MODE, bytes).map(drop)
    }
}

fn mk_semantic_tx(tx: &mut Tx<'_>, canon: &str) -> FsResult<()> {
    let dir = |tx: &mut Tx<'_>, p: &str| tx.create(p, NodeKind::Directory, DEFAULT_DIR_MODE).map(drop);
    let file = |tx: &mut Tx<'_>, p: &str, v: &str| tx.create_file(p, DEFAULT_FILE_MODE, v.as_bytes()).map(drop);
    match classify(canon) {
        Place::Outside | Place::Hosts { .. } => dir(tx, canon),
        Place::View { .. } => {
            if path::basename(canon) == layout::SLICE_DIR {
                return Err(FsError::InvalidName(canon.into()));
            }
            dir(tx, canon)?;
            for c in layout::VIEW_CHILDREN {
                dir(tx, &path::child(canon, c))?;
            }
            Ok(())
        }
        Place::Switch { sw } => {
            layout::parse_dpid_name(&sw.name)?;
            dir(tx, canon)?;
            for c in layout::SWITCH_CHILDREN {
                dir(tx, &path::child(canon, c))?;
            }
            Ok(())
        }
        Place::Port { port, .. } => {
            layout::parse_port_name(&port)?;
            dir(tx, canon)?;
            for (f, v) in [
                ("config.port_down", "0"),
                ("config.port_status", "up"),
                ("hw_addr", "00:00:00:00:00:00"),
                ("stats.rx_packets", "0"),
                ("stats.tx_packets", "0"),
            ] {
                file(tx, &path::child(canon, f), v)?;
            }
            Ok(())
        }
        Place::Flow { flow, .. } => {
            check_flow_name(tx, &flow)?;
            dir(tx, canon)?;
            file(tx, &path::child(canon, VERSION_FILE), "0")?;
            tx.create_file(&path::child(canon, COMMITTED_FILE), 0o444, b"").map(drop)
        }
        Place::Buffer { .. } | Place::PacketOut { .. } | Place::Slice { .. } => dir(tx, canon),
        Place::ViewDir { .. } | Place::SwitchDir { .. } if tx.exists(canon) => Err(FsError::AlreadyExists(canon.into())),
        _ => Err(FsError::NotASchemaPoint(canon.into())),
    }
}

fn commit_tx(tx: &mut Tx<'_>, flow: &str) -> FsResult<u64> {
    if !matches!(classify(flow), Place::Flow { .. }) {
        return Err(FsError::NotASchemaPoint(flow.into()));
    }
    let mut files = Vec::new();
    for name in tx.list(flow)? {
        let p = path::child(flow, &name);
        if let Ok(b) = tx.read(&p) {
            files.push((name, b));
        }
    }
    let mut spec = FlowSpec::from_files(files.iter().map(|(n, b)| (n.as_str(), b.as_slice()))).map_err(|e| to_validation(flow, e))?;
    let vpath = path::child(flow, VERSION_FILE);
    if tx.exists(&vpath) {
        tx.check_writable(&vpath)?;
    }
    let prev = files
        .iter()
        .find(|(n, _)| n == VERSION_FILE)
        .and_then(|(_, b)| std::str::from_utf8(b).ok()?.trim().parse::<u64>().ok())
        .unwrap_or(0);
    spec.version = prev + 1;
    let image = serde_json::to_vec(&spec).expect("flow spec serializes");
    let cpath = path::child(flow, COMMITTED_FILE);
    if tx.exists(&cpath) {
        tx.write_internal(&cpath, &image)?;
    } else {
        tx.create_file(&cpath, 0o444, &image)?;
    }
    if tx.exists(&vpath) {
        tx.write_internal(&vpath, spec.version.to_string().as_bytes())?;
    } else {
        tx.create_file(&vpath, DEFAULT_FILE_MODE, spec.version.to_string().as_bytes())?;
    }
    Ok(spec.version)
}

fn validate_write(tx: &Tx<'_>, place: &Place, canon: &str, data: &[u8]) -> FsResult<()> {
    use fields::*;
    match place {
        Place::Outside | Place::Hosts { .. } => Ok(()),
        Place::FlowFile { name, .. } if name == COMMITTED_FILE => Err(FsError::PermissionDenied(canon.into())),
        Place::FlowFile { name, .. } => validate_flow_field(name, data),
        Place::PortFile { name, .. } if name == "peer" => Err(FsError::InvalidArgument(format!("{canon}: peer is a symbolic link"))),
        Place::PortFile { name, .. } => validate_port_file(name, data),
        Place::SwitchFile { name, .. } => validate_switch_file(name, data),
        Place::BufferFile { name, .. } if name == OVERFLOWED_FILE => Ok(()),
        Place::BufferFile { name, .. } => Err(FsError::UnknownField(name.clone())),
        Place::RecordFile { name, .. } => validate_record_file(name, data),
        Place::PacketOutFile { name, .. } => validate_packet_out_file(name, data),
        Place::PacketsOutFile { .. } => Ok(()),
        Place::SliceFile { name, .. } => validate_slice_file(name, data),
        _ if tx.exists(canon) => Err(FsError::IsADirectory(canon.into())),
        _ => Err(FsError::NotASchemaPoint(canon.into())),
    }
}

fn enqueue_tx(tx: &mut Tx<'_>, switch: &str, rec: &EventRecord) -> FsResult<usize> {
    if !matches!(classify(switch), Place::Switch { .. }) {
        return Err(FsError::NotASchemaPoint(switch.into()));
    }
    let events = path::child(switch, "events");
    let buffers = tx.list(&events)?;
    let name = layout::record_name(tx.clock() + 1);
    let files = rec.to_files();
    let mut n = 0;
    for b in buffers {
        let bpath = path::child(&events, &b);
        if tx.stat(&bpath, false).map(|i| i.kind) != Ok(NodeKind::Directory) {
            continue;
        }
        let rpath = path::child(&bpath, &name);
        tx.create(&rpath, NodeKind::Directory, DEFAULT_DIR_MODE)?;
        for (f, v) in &files {
            tx.create_file(&path::child(&rpath, f), DEFAULT_FILE_MODE, v)?;
        }
        let records: Vec<String> = tx.list(&bpath)?.into_iter().filter(|r| layout::is_record_name(r)).collect();
        if records.len() > BUFFER_CAPACITY {
            for old in &records[..records.len() - BUFFER_CAPACITY] {
                tx.remove(&path::child(&bpath, old), true)?;
            }
            let marker = path::child(&bpath, OVERFLOWED_FILE);
            if !tx.exists(&marker) {
                tx.create_file(&marker, DEFAULT_FILE_MODE, b"1")?;
            }
        }
        n += 1;
    }
    Ok(n)
}

impl NetFs {
    /// Wraps `store`, creating the `/net` skeleton if it is missing.
    pub fn new(store: Store) -> NetFs {
        let fs = NetFs { store };
        let _ = fs.store.mutate(|tx| {
            if !tx.exists(NET_ROOT) {
                mk_semantic_tx(tx, NET_ROOT)?;
            }
            Ok(())
        });
        fs
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Same tree, acting as `identity`.
    pub fn with_identity(&self, identity: &str) -> NetFs {
        NetFs {
            store: self.store.with_identity(identity),
        }
    }

    pub fn mk_semantic(&self, p: &str) -> FsResult<()> {
        self.store.mutate(|tx| {
            let canon = lexical_canon(tx, p)?;
            if classify(&canon) == Place::Outside {
                return Err(FsError::NotASchemaPoint(canon));
            }
            mk_semantic_tx(tx, &canon)
        })
    }

    pub fn rm_semantic(&self, p: &str) -> FsResult<()> {
        self.store.mutate(|tx| {
            let canon = lexical_canon(tx, p)?;
            if !classify(&canon).is_object() {
                return Err(FsError::NotASchemaPoint(canon));
            }
            tx.remove(&canon, true)
        })
    }

    /// Stages one field of a flow; nothing downstream sees it until commit.
    pub fn write_flow_field(&self, flow: &str, field: &str, text: &str) -> FsResult<()> {
        if field == VERSION_FILE || field == COMMITTED_FILE {
            return Err(FsError::InvalidArgument(format!("{field} is not a stageable field")));
        }
        self.write(&path::child(flow, field), text.as_bytes())
    }

    /// The last committed image of a flow; `None` before the first commit.
    pub fn committed_flow(&self, flow: &str) -> FsResult<Option<FlowSpec>> {
        read_committed(self, flow)
    }

    pub fn watch_handle(&self, p: &str, recursive: bool, capacity: usize) -> FsResult<WatchHandle> {
        self.store.watch(p, recursive, capacity)
    }
}

/// Reads a flow's committed image through any [`FsApi`].
pub fn read_committed(fs: &dyn FsApi, flow: &str) -> FsResult<Option<FlowSpec>> {
    let raw = fs.read(&path::child(flow, COMMITTED_FILE))?;
    if raw.is_empty() {
        return Ok(None);
    }
    serde_json::from_slice(&raw)
        .map(Some)
        .map_err(|e| FsError::parse(COMMITTED_FILE, e.to_string()))
}

impl FsApi for NetFs {
    fn identity(&self) -> String {
        self.store.identity().to_string()
    }

    fn mkdir(&self, p: &str) -> FsResult<()> {
        self.store.mutate(|tx| {
            let canon = lexical_canon(tx, p)?;
            mk_semantic_tx(tx, &canon)
        })
    }

    fn read(&self, p: &str) -> FsResult<Vec<u8>> {
        self.store.read(p)
    }

    fn write(&self, p: &str, data: &[u8]) -> FsResult<()> {
        self.store.mutate(|tx| {
            let canon = followed_canon(tx, p)?;
            let place = classify(&canon);
            if let Place::FlowFile { sw, flow, name } = &place {
                if name == VERSION_FILE {
                    return commit_tx(tx, &layout::flow_path(&sw.path(), flow)).map(drop);
                }
            }
            validate_write(tx, &place, &canon, data)?;
            put_file(tx, &canon, data)
        })
    }

    fn remove(&self, p: &str, recursive: bool) -> FsResult<()> {
        self.store.mutate(|tx| {
            let canon = lexical_canon(tx, p)?;
            let place = classify(&canon);
            match place {
                _ if place.is_object() && canon != NET_ROOT => tx.remove(&canon, true),
                Place::View { .. } | Place::ViewDir { .. } | Place::SwitchDir { .. } => {
                    Err(FsError::InvalidArgument(format!("{canon} is part of the schema skeleton")))
                }
                _ => tx.remove(&canon, recursive),
            }
        })
    }

    fn rename(&self, from: &str, to: &str) -> FsResult<()> {
        self.store.mutate(|tx| {
            let a = lexical_canon(tx, from)?;
            let b = lexical_canon(tx, to)?;
            match (classify(&a), classify(&b)) {
                (Place::Outside, Place::Outside) => {}
                (Place::Hosts { view: v1 }, Place::Hosts { view: v2 }) if v1 == v2 => {}
                (Place::Flow { sw: s1, .. }, Place::Flow { sw: s2, flow }) if s1 == s2 => check_flow_name(tx, &flow)?,
                _ => {
                    return Err(FsError::InvalidArgument(format!(
                        "{a} -> {b}: only flows and host entries can be renamed under /net"
                    )))
                }
            }
            tx.rename(&a, &b)
        })
    }

    fn symlink(&self, p: &str, target: &str) -> FsResult<()> {
        self.store.mutate(|tx| {
            let canon = lexical_canon(tx, p)?;
            match classify(&canon) {
                Place::Outside | Place::Hosts { .. } => {}
                Place::PortFile { name, .. } if name == "peer" => {
                    if !layout::is_port_path(target) {
                        return Err(FsError::InvalidArgument(format!("{target} is not a port directory")));
                    }
                }
                _ => return Err(FsError::NotASchemaPoint(canon)),
            }
            tx.symlink(&canon, target)
        })
    }

    fn readlink(&self, p: &str) -> FsResult<String> {
        self.store.readlink(p)
    }

    fn list(&self, p: &str) -> FsResult<Vec<String>> {
        self.store.list(p)
    }

    fn stat(&self, p: &str, follow: bool) -> FsResult<NodeInfo> {
        if follow {
            self.store.stat(p)
        } else {
            self.store.lstat(p)
        }
    }

    fn set_mode(&self, p: &str, mode: u32) -> FsResult<()> {
        self.store.set_mode(p, mode)
    }

    fn watch(&self, p: &str, recursive: bool, capacity: usize) -> FsResult<Box<dyn EventSource>> {
        Ok(Box::new(self.store.watch(p, recursive, capacity)?))
    }

    fn commit_flow(&self, flow: &str) -> FsResult<u64> {
        self.store.mutate(|tx| {
            let canon = tx.canonical(flow)?;
            commit_tx(tx, &canon)
        })
    }

    fn enqueue_event(&self, switch: &str, rec: &EventRecord) -> FsResult<usize> {
        self.store.mutate(|tx| {
            let canon = tx.canonical(switch)?;
            enqueue_tx(tx, &canon, rec)
        })
    }
}

/// Blocks until `src` yields an event for which `pred` holds, or `timeout`.
pub fn wait_for(src: &mut dyn EventSource, timeout: Duration, mut pred: impl FnMut(&crate::store::ChangeEvent) -> bool) -> bool {
    let deadline = std::time::Instant::now() + timeout;
    loop {
        let now = std::time::Instant::now();
        if now >= deadline {
            return false;
        }
        match src.next_event(deadline - now) {
            Some(ev) if pred(&ev) => return true,
            Some(_) => {}
            None => return false,
        }
    }
}
