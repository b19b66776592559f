//! Change notification queues.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::path::is_within;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Created,
    Modified,
    Removed,
    Renamed,
    LinkChanged,
    Overflow,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Created => "created",
            EventKind::Modified => "modified",
            EventKind::Removed => "removed",
            EventKind::Renamed => "renamed",
            EventKind::LinkChanged => "link_changed",
            EventKind::Overflow => "overflow",
        }
    }
}

/// One delivered change.
///
/// `seq` is local to the subscription and gap-free except across an
/// `Overflow` event. `stamp` is the store-wide mutation clock value of the
/// change, which orders events across different subscriptions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub seq: u64,
    pub stamp: u64,
    pub path: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
}

#[derive(Debug)]
struct QueueState {
    queue: VecDeque<ChangeEvent>,
    next_seq: u64,
    overflow_queued: bool,
}

#[derive(Debug)]
pub(crate) struct WatchShared {
    pub(crate) id: u64,
    root: String,
    recursive: bool,
    capacity: usize,
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl WatchShared {
    pub(crate) fn new(id: u64, root: String, recursive: bool, capacity: usize) -> Self {
        WatchShared {
            id,
            root,
            recursive,
            capacity: capacity.max(1),
            state: Mutex::new(QueueState {
                queue: VecDeque::new(),
                next_seq: 1,
                overflow_queued: false,
            }),
            ready: Condvar::new(),
        }
    }

    fn covers(&self, path: &str) -> bool {
        if self.recursive {
            return is_within(path, &self.root);
        }
        if path == self.root {
            return true;
        }
        match path.rfind('/') {
            Some(0) => self.root == "/",
            Some(i) => path[..i] == self.root,
            None => false,
        }
    }

    pub(crate) fn matches(&self, path: &str, old_path: Option<&str>) -> bool {
        self.covers(path) || old_path.is_some_and(|p| self.covers(p))
    }

    /// Enqueues under the drop-oldest policy.
    ///
    /// On the first overflow the oldest events are discarded so that a single
    /// `Overflow` marker can sit at the head of the retained events followed
    /// by the new one. While that marker is still queued, later overflows drop
    /// the oldest ordinary event silently.
    pub(crate) fn push(&self, stamp: u64, path: &str, kind: EventKind, old_path: Option<&str>) {
        let mut st = self.state.lock().unwrap();
        let seq = st.next_seq;
        st.next_seq += 1;
        let ev = ChangeEvent {
            seq,
            stamp,
            path: path.to_string(),
            kind,
            old_path: old_path.map(str::to_string),
        };
        if st.queue.len() < self.capacity {
            st.queue.push_back(ev);
        } else if st.overflow_queued {
            // with capacity 1 the marker is all that fits
            if let Some(i) = st.queue.iter().position(|e| e.kind != EventKind::Overflow) {
                st.queue.remove(i);
                st.queue.push_back(ev);
            }
        } else {
            let keep = self.capacity.saturating_sub(2);
            let mut last_dropped = 0;
            while st.queue.len() > keep {
                last_dropped = st.queue.pop_front().map(|e| e.seq).unwrap_or(last_dropped);
            }
            st.queue.push_front(ChangeEvent {
                seq: last_dropped,
                stamp,
                path: self.root.clone(),
                kind: EventKind::Overflow,
                old_path: None,
            });
            st.overflow_queued = true;
            if st.queue.len() < self.capacity {
                st.queue.push_back(ev);
            }
        }
        drop(st);
        self.ready.notify_all();
    }

    fn pop(st: &mut QueueState) -> Option<ChangeEvent> {
        let ev = st.queue.pop_front()?;
        if ev.kind == EventKind::Overflow {
            st.overflow_queued = false;
        }
        Some(ev)
    }

    pub(crate) fn try_next(&self) -> Option<ChangeEvent> {
        Self::pop(&mut self.state.lock().unwrap())
    }

    pub(crate) fn next(&self, timeout: Duration) -> Option<ChangeEvent> {
        let deadline = Instant::now() + timeout;
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(ev) = Self::pop(&mut st) {
                return Some(ev);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            st = self.ready.wait_timeout(st, deadline - now).unwrap().0;
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.state.lock().unwrap().queue.len()
    }
}

/// Registry of live subscriptions.
#[derive(Debug, Default)]
pub(crate) struct WatchRegistry {
    pub(crate) watches: Mutex<Vec<Arc<WatchShared>>>,
}

impl WatchRegistry {
    pub(crate) fn emit(&self, stamp: u64, path: &str, kind: EventKind, old_path: Option<&str>) {
        for w in self.watches.lock().unwrap().iter() {
            if w.matches(path, old_path) {
                w.push(stamp, path, kind, old_path);
            }
        }
    }

    /// Delivers an `Overflow` to every subscription (used when the whole tree is replaced).
    pub(crate) fn invalidate_all(&self, stamp: u64) {
        for w in self.watches.lock().unwrap().iter() {
            let mut st = w.state.lock().unwrap();
            if st.overflow_queued {
                continue;
            }
            let seq = st.next_seq;
            st.next_seq += 1;
            let root = w.root.clone();
            st.queue.clear();
            st.queue.push_back(ChangeEvent {
                seq,
                stamp,
                path: root,
                kind: EventKind::Overflow,
                old_path: None,
            });
            st.overflow_queued = true;
            drop(st);
            w.ready.notify_all();
        }
    }

    fn remove(&self, id: u64) {
        self.watches.lock().unwrap().retain(|w| w.id != id);
    }
}

/// A subscription to changes at and below a path.
///
/// Dropping the handle unregisters it.
#[derive(Debug)]
pub struct WatchHandle {
    pub(crate) shared: Arc<WatchShared>,
    pub(crate) registry: Weak<WatchRegistry>,
}

impl WatchHandle {
    pub fn id(&self) -> u64 {
        self.shared.id
    }

    pub fn root_path(&self) -> &str {
        &self.shared.root
    }

    pub fn recursive(&self) -> bool {
        self.shared.recursive
    }

    pub fn capacity(&self) -> usize {
        self.shared.capacity
    }

    /// Number of queued, undelivered events.
    pub fn pending(&self) -> usize {
        self.shared.len()
    }

    /// Blocks up to `timeout`; `None` means the timeout elapsed.
    pub fn next_event(&self, timeout: Duration) -> Option<ChangeEvent> {
        self.shared.next(timeout)
    }

    pub fn try_next_event(&self) -> Option<ChangeEvent> {
        self.shared.try_next()
    }

    /// Drains everything currently queued.
    pub fn drain(&self) -> Vec<ChangeEvent> {
        let mut st = self.shared.state.lock().unwrap();
        let mut out = Vec::with_capacity(st.queue.len());
        while let Some(ev) = WatchShared::pop(&mut st) {
            out.push(ev);
        }
        out
    }
}

impl Drop for WatchHandle {
    fn drop(&mut self) {
        if let Some(reg) = self.registry.upgrade() {
            reg.remove(self.shared.id);
        }
    }
}
