//! The file API over TCP: one JSON object per line in each direction.
//!
//! Requests carry an `id` echoed in the reply. Watch events arrive unsolicited
//! as `{"watch": w, "event": {...}}`; watch ids are chosen by the client so
//! no event can precede its registration.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::api::{EventSource, FsApi};
use crate::error::{FsError, FsResult};
use crate::schema::{EventRecord, NetFs};
use crate::store::{ChangeEvent, NodeInfo};

/// How long a client waits for any single reply.
pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);
const WATCH_POLL: Duration = Duration::from_millis(50);

mod b64 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&B64.encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        B64.decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Hello {
        identity: String,
    },
    Mkdir {
        path: String,
    },
    Read {
        path: String,
    },
    Write {
        path: String,
        #[serde(with = "b64")]
        data: Vec<u8>,
    },
    Remove {
        path: String,
        recursive: bool,
    },
    Rename {
        from: String,
        to: String,
    },
    Symlink {
        path: String,
        target: String,
    },
    Readlink {
        path: String,
    },
    List {
        path: String,
    },
    Stat {
        path: String,
        follow: bool,
    },
    SetMode {
        path: String,
        mode: u32,
    },
    Watch {
        watch: u64,
        path: String,
        recursive: bool,
        capacity: usize,
    },
    Unwatch {
        watch: u64,
    },
    CommitFlow {
        path: String,
    },
    EnqueueEvent {
        switch: String,
        record: EventRecord,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Unit,
    Bytes {
        #[serde(with = "b64")]
        data: Vec<u8>,
    },
    Text {
        text: String,
    },
    Names {
        names: Vec<String>,
    },
    Info {
        info: NodeInfo,
    },
    Count {
        count: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClientFrame {
    id: u64,
    #[serde(flatten)]
    req: Request,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ServerFrame {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ok: Option<Reply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    err: Option<FsError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    watch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event: Option<ChangeEvent>,
}

fn send_line<T: Serialize>(w: &Mutex<TcpStream>, v: &T) -> io::Result<()> {
    let mut line = serde_json::to_vec(v).map_err(io::Error::other)?;
    line.push(b'\n');
    let mut s = w.lock().unwrap_or_else(|e| e.into_inner());
    s.write_all(&line)
}

// ---------------------------------------------------------------- server

/// A running store server; dropping it stops accepting connections.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl Server {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Serves `fs` on `addr`. Each connection starts with the server's identity
/// until it sends `hello`.
pub fn serve(fs: NetFs, addr: impl ToSocketAddrs) -> io::Result<Server> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop2 = stop.clone();
    let acceptor = thread::Builder::new().name("yanc-accept".into()).spawn(move || {
        for conn in listener.incoming() {
            if stop2.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(s) => {
                    let fs = fs.clone();
                    let stop = stop2.clone();
                    if let Err(e) = thread::Builder::new()
                        .name("yanc-conn".into())
                        .spawn(move || serve_conn(fs, s, stop))
                    {
                        warn!("spawn: {e}");
                    }
                }
                Err(e) => warn!("accept: {e}"),
            }
        }
    })?;
    Ok(Server {
        addr,
        stop,
        acceptor: Some(acceptor),
    })
}

fn serve_conn(base: NetFs, stream: TcpStream, server_stop: Arc<AtomicBool>) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    let Ok(wr) = stream.try_clone() else { return };
    let writer = Arc::new(Mutex::new(wr));
    let closed = Arc::new(AtomicBool::new(false));
    let mut fs = base.clone();
    let mut watches: HashMap<u64, Arc<AtomicBool>> = HashMap::new();
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if server_stop.load(Ordering::SeqCst) {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let frame: ClientFrame = match serde_json::from_str(&line) {
            Ok(f) => f,
            Err(e) => {
                let reply = ServerFrame {
                    err: Some(FsError::Protocol(e.to_string())),
                    ..Default::default()
                };
                if send_line(&writer, &reply).is_err() {
                    break;
                }
                continue;
            }
        };
        let result = match frame.req {
            Request::Hello { identity } => {
                fs = base.with_identity(&identity);
                Ok(Reply::Unit)
            }
            Request::Watch {
                watch,
                path,
                recursive,
                capacity,
            } => match fs.watch_handle(&path, recursive, capacity) {
                Ok(h) => {
                    let stop = Arc::new(AtomicBool::new(false));
                    if let Some(old) = watches.insert(watch, stop.clone()) {
                        old.store(true, Ordering::SeqCst);
                    }
                    let (writer, closed) = (writer.clone(), closed.clone());
                    // reply first so the client sees it before any event
                    let _ = send_line(
                        &writer,
                        &ServerFrame {
                            id: Some(frame.id),
                            ok: Some(Reply::Unit),
                            ..Default::default()
                        },
                    );
                    let _ = thread::Builder::new().name("yanc-watch".into()).spawn(move || {
                        while !stop.load(Ordering::SeqCst) && !closed.load(Ordering::SeqCst) {
                            if let Some(ev) = h.next_event(WATCH_POLL) {
                                let f = ServerFrame {
                                    watch: Some(watch),
                                    event: Some(ev),
                                    ..Default::default()
                                };
                                if send_line(&writer, &f).is_err() {
                                    break;
                                }
                            }
                        }
                    });
                    continue;
                }
                Err(e) => Err(e),
            },
            Request::Unwatch { watch } => {
                if let Some(s) = watches.remove(&watch) {
                    s.store(true, Ordering::SeqCst);
                }
                Ok(Reply::Unit)
            }
            req => dispatch(&fs, req),
        };
        let reply = match result {
            Ok(r) => ServerFrame {
                id: Some(frame.id),
                ok: Some(r),
                ..Default::default()
            },
            Err(e) => ServerFrame {
                id: Some(frame.id),
                err: Some(e),
                ..Default::default()
            },
        };
        if send_line(&writer, &reply).is_err() {
            break;
        }
    }
    closed.store(true, Ordering::SeqCst);
    debug!("connection {peer} closed");
}

fn dispatch(fs: &NetFs, req: Request) -> FsResult<Reply> {
    let unit = |r: FsResult<()>| r.map(|_| Reply::Unit);
    match req {
        Request::Mkdir { path } => unit(fs.mkdir(&path)),
        Request::Read { path } => fs.read(&path).map(|data| Reply::Bytes { data }),
        Request::Write { path, data } => unit(fs.write(&path, &data)),
        Request::Remove { path, recursive } => unit(fs.remove(&path, recursive)),
        Request::Rename { from, to } => unit(fs.rename(&from, &to)),
        Request::Symlink { path, target } => unit(fs.symlink(&path, &target)),
        Request::Readlink { path } => fs.readlink(&path).map(|text| Reply::Text { text }),
        Request::List { path } => fs.list(&path).map(|names| Reply::Names { names }),
        Request::Stat { path, follow } => fs.stat(&path, follow).map(|info| Reply::Info { info }),
        Request::SetMode { path, mode } => unit(fs.set_mode(&path, mode)),
        Request::CommitFlow { path } => fs.commit_flow(&path).map(|count| Reply::Count { count }),
        Request::EnqueueEvent { switch, record } => fs.enqueue_event(&switch, &record).map(|n| Reply::Count { count: n as u64 }),
        Request::Hello { .. } | Request::Watch { .. } | Request::Unwatch { .. } => {
            Err(FsError::Protocol("handled by the connection".into()))
        }
    }
}

// ---------------------------------------------------------------- client

type Pending = Arc<Mutex<HashMap<u64, Sender<FsResult<Reply>>>>>;
type Watches = Arc<Mutex<HashMap<u64, Sender<ChangeEvent>>>>;

struct Conn {
    writer: Mutex<TcpStream>,
    pending: Pending,
    watches: Watches,
    next_id: AtomicU64,
    dead: Arc<AtomicBool>,
    addr: String,
}

impl Conn {
    fn call(&self, req: Request) -> FsResult<Reply> {
        let unreachable = || FsError::Unreachable(self.addr.clone());
        if self.dead.load(Ordering::SeqCst) {
            return Err(unreachable());
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().expect("pending map").insert(id, tx);
        if send_line(&self.writer, &ClientFrame { id, req }).is_err() {
            self.pending.lock().expect("pending map").remove(&id);
            self.dead.store(true, Ordering::SeqCst);
            return Err(unreachable());
        }
        match rx.recv_timeout(REQUEST_TIMEOUT) {
            Ok(r) => r,
            Err(_) => {
                self.pending.lock().expect("pending map").remove(&id);
                Err(unreachable())
            }
        }
    }
}

impl Drop for Conn {
    fn drop(&mut self) {
        if let Ok(s) = self.writer.lock() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

/// A store reached over TCP. Cheap to clone; clones share the connection.
#[derive(Clone)]
pub struct RemoteFs {
    conn: Arc<Conn>,
    identity: String,
}

fn reader_loop(stream: TcpStream, pending: Pending, watches: Watches, dead: Arc<AtomicBool>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        let f: ServerFrame = match serde_json::from_str(&line) {
            Ok(f) => f,
            Err(e) => {
                warn!("bad frame from server: {e}");
                continue;
            }
        };
        if let (Some(w), Some(ev)) = (f.watch, f.event) {
            let mut map = watches.lock().expect("watch map");
            if map.get(&w).is_some_and(|tx| tx.send(ev).is_err()) {
                map.remove(&w);
            }
            continue;
        }
        let Some(id) = f.id else {
            if let Some(e) = f.err {
                warn!("server: {e}");
            }
            continue;
        };
        let r = match (f.ok, f.err) {
            (_, Some(e)) => Err(e),
            (Some(ok), None) => Ok(ok),
            (None, None) => Err(FsError::Protocol("empty reply".into())),
        };
        if let Some(tx) = pending.lock().expect("pending map").remove(&id) {
            let _ = tx.send(r);
        }
    }
    dead.store(true, Ordering::SeqCst);
    // wake every waiter; their senders drop with the map entries
    pending.lock().expect("pending map").clear();
    watches.lock().expect("watch map").clear();
}

impl RemoteFs {
    pub fn connect(addr: impl ToSocketAddrs, identity: &str) -> FsResult<RemoteFs> {
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs().map_err(|e| FsError::Unreachable(e.to_string()))?.collect();
        let label = addrs.first().map(|a| a.to_string()).unwrap_or_default();
        let stream = TcpStream::connect(&addrs[..]).map_err(|e| FsError::Unreachable(format!("{label}: {e}")))?;
        let _ = stream.set_nodelay(true);
        let rd = stream.try_clone().map_err(|e| FsError::Unreachable(e.to_string()))?;
        let pending: Pending = Arc::default();
        let watches: Watches = Arc::default();
        let dead = Arc::new(AtomicBool::new(false));
        {
            let (p, w, d) = (pending.clone(), watches.clone(), dead.clone());
            thread::Builder::new()
                .name("yanc-client".into())
                .spawn(move || reader_loop(rd, p, w, d))
                .map_err(|e| FsError::Unreachable(e.to_string()))?;
        }
        let fs = RemoteFs {
            conn: Arc::new(Conn {
                writer: Mutex::new(stream),
                pending,
                watches,
                next_id: AtomicU64::new(1),
                dead,
                addr: label,
            }),
            identity: identity.to_string(),
        };
        fs.conn.call(Request::Hello {
            identity: identity.to_string(),
        })?;
        Ok(fs)
    }

    fn call(&self, req: Request) -> FsResult<Reply> {
        self.conn.call(req)
    }

    fn unit(&self, req: Request) -> FsResult<()> {
        self.call(req).map(drop)
    }
}

fn unexpected(r: Reply) -> FsError {
    FsError::Protocol(format!("unexpected reply {r:?}"))
}

/// Events for one remote subscription.
pub struct RemoteWatch {
    id: u64,
    rx: Receiver<ChangeEvent>,
    conn: Arc<Conn>,
}

impl EventSource for RemoteWatch {
    fn next_event(&mut self, timeout: Duration) -> Option<ChangeEvent> {
        self.rx.recv_timeout(timeout).ok()
    }

    fn try_next(&mut self) -> Option<ChangeEvent> {
        self.rx.try_recv().ok()
    }
}

impl Drop for RemoteWatch {
    fn drop(&mut self) {
        self.conn.watches.lock().expect("watch map").remove(&self.id);
        if !self.conn.dead.load(Ordering::SeqCst) {
            let id = self.conn.next_id.fetch_add(1, Ordering::Relaxed);
            // fire and forget; the reply is discarded by the reader
            let _ = send_line(
                &self.conn.writer,
                &ClientFrame {
                    id,
                    req: Request::Unwatch { watch: self.id },
                },
            );
        }
    }
}

impl FsApi for RemoteFs {
    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn mkdir(&self, path: &str) -> FsResult<()> {
        self.unit(Request::Mkdir { path: path.into() })
    }

    fn read(&self, path: &str) -> FsResult<Vec<u8>> {
        match self.call(Request::Read { path: path.into() })? {
            Reply::Bytes { data } => Ok(data),
            r => Err(unexpected(r)),
        }
    }

    fn write(&self, path: &str, data: &[u8]) -> FsResult<()> {
        self.unit(Request::Write {
            path: path.into(),
            data: data.to_vec(),
        })
    }

    fn remove(&self, path: &str, recursive: bool) -> FsResult<()> {
        self.unit(Request::Remove {
            path: path.into(),
            recursive,
        })
    }

    fn rename(&self, from: &str, to: &str) -> FsResult<()> {
        self.unit(Request::Rename {
            from: from.into(),
            to: to.into(),
        })
    }

    fn symlink(&self, path: &str, target: &str) -> FsResult<()> {
        self.unit(Request::Symlink {
            path: path.into(),
            target: target.into(),
        })
    }

    fn readlink(&self, path: &str) -> FsResult<String> {
        match self.call(Request::Readlink { path: path.into() })? {
            Reply::Text { text } => Ok(text),
            r => Err(unexpected(r)),
        }
    }

    fn list(&self, path: &str) -> FsResult<Vec<String>> {
        match self.call(Request::List { path: path.into() })? {
            Reply::Names { names } => Ok(names),
            r => Err(unexpected(r)),
        }
    }

    fn stat(&self, path: &str, follow: bool) -> FsResult<NodeInfo> {
        match self.call(Request::Stat { path: path.into(), follow })? {
            Reply::Info { info } => Ok(info),
            r => Err(unexpected(r)),
        }
    }

    fn set_mode(&self, path: &str, mode: u32) -> FsResult<()> {
        self.unit(Request::SetMode { path: path.into(), mode })
    }

    fn watch(&self, path: &str, recursive: bool, capacity: usize) -> FsResult<Box<dyn EventSource>> {
        let id = self.conn.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        self.conn.watches.lock().expect("watch map").insert(id, tx);
        let r = self.call(Request::Watch {
            watch: id,
            path: path.into(),
            recursive,
            capacity,
        });
        if let Err(e) = r {
            self.conn.watches.lock().expect("watch map").remove(&id);
            return Err(e);
        }
        Ok(Box::new(RemoteWatch {
            id,
            rx,
            conn: self.conn.clone(),
        }))
    }

    fn commit_flow(&self, flow_path: &str) -> FsResult<u64> {
        match self.call(Request::CommitFlow { path: flow_path.into() })? {
            Reply::Count { count } => Ok(count),
            r => Err(unexpected(r)),
        }
    }

    fn enqueue_event(&self, switch_path: &str, record: &EventRecord) -> FsResult<usize> {
        match self.call(Request::EnqueueEvent {
            switch: switch_path.into(),
            record: record.clone(),
        })? {
            Reply::Count { count } => Ok(count as usize),
            r => Err(unexpected(r)),
        }
    }
}
