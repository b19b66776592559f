//! The file-operation surface applications program against.
//!
//! Implemented in-process by [`crate::schema::NetFs`] and over TCP by
//! [`crate::remote::RemoteFs`]; daemons are written against the trait and
//! do not care which one they hold.

use std::time::Duration;

use crate::error::{FsError, FsResult};
use crate::schema::EventRecord;
use crate::store::{ChangeEvent, NodeInfo, NodeKind, WatchHandle};

/// A stream of change events from one subscription.
pub trait EventSource: Send {
    /// Blocks up to `timeout`; `None` on timeout.
    fn next_event(&mut self, timeout: Duration) -> Option<ChangeEvent>;

    fn try_next(&mut self) -> Option<ChangeEvent> {
        self.next_event(Duration::ZERO)
    }

    fn drain(&mut self) -> Vec<ChangeEvent> {
        std::iter::from_fn(|| self.try_next()).collect()
    }
}

impl EventSource for WatchHandle {
    fn next_event(&mut self, timeout: Duration) -> Option<ChangeEvent> {
        WatchHandle::next_event(self, timeout)
    }

    fn try_next(&mut self) -> Option<ChangeEvent> {
        self.try_next_event()
    }

    fn drain(&mut self) -> Vec<ChangeEvent> {
        WatchHandle::drain(self)
    }
}

pub trait FsApi: Send + Sync {
    /// Caller identity used for permission checks.
    fn identity(&self) -> String;

    /// `mkdir`; at schema points this creates the object with its mandated children.
    fn mkdir(&self, path: &str) -> FsResult<()>;

    fn read(&self, path: &str) -> FsResult<Vec<u8>>;

    /// Replaces (or creates) a file. Schema files are validated first; a
    /// write to a flow's `version` commits the flow.
    fn write(&self, path: &str, data: &[u8]) -> FsResult<()>;

    /// Schema objects are always removed with their whole subtree.
    fn remove(&self, path: &str, recursive: bool) -> FsResult<()>;

    fn rename(&self, from: &str, to: &str) -> FsResult<()>;

    fn symlink(&self, path: &str, target: &str) -> FsResult<()>;

    fn readlink(&self, path: &str) -> FsResult<String>;

    fn list(&self, path: &str) -> FsResult<Vec<String>>;

    fn stat(&self, path: &str, follow: bool) -> FsResult<NodeInfo>;

    fn set_mode(&self, path: &str, mode: u32) -> FsResult<()>;

    fn watch(&self, path: &str, recursive: bool, capacity: usize) -> FsResult<Box<dyn EventSource>>;

    /// Validates and commits a flow, returning its new version.
    fn commit_flow(&self, flow_path: &str) -> FsResult<u64>;

    /// Fans one packet-in record into every buffer under `switch_path/events`.
    /// Returns the number of buffers written.
    fn enqueue_event(&self, switch_path: &str, record: &EventRecord) -> FsResult<usize>;

    fn exists(&self, path: &str) -> bool {
        self.stat(path, false).is_ok()
    }

    fn is_dir(&self, path: &str) -> bool {
        self.stat(path, true).is_ok_and(|i| i.kind == NodeKind::Directory)
    }

    /// Reads a file as text with one trailing newline removed.
    fn read_text(&self, path: &str) -> FsResult<String> {
        let raw = self.read(path)?;
        let raw = raw.strip_suffix(b"\n").unwrap_or(&raw);
        String::from_utf8(raw.to_vec()).map_err(|_| FsError::parse(path, "not UTF-8"))
    }

    /// `mkdir` that tolerates an existing directory.
    fn ensure_dir(&self, path: &str) -> FsResult<()> {
        match self.mkdir(path) {
            Err(FsError::AlreadyExists(_)) if self.is_dir(path) => Ok(()),
            r => r,
        }
    }

    /// Creates `switch_path/events/<app>` if needed and returns its path.
    fn open_event_buffer(&self, switch_path: &str, app: &str) -> FsResult<String> {
        let p = format!("{switch_path}/events/{app}");
        self.ensure_dir(&p)?;
        Ok(p)
    }

    fn ack_event(&self, record_path: &str) -> FsResult<()> {
        self.remove(record_path, true)
    }
}
