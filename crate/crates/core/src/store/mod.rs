//! Hierarchical node store with file-style operations and change notification.
//!
//! All mutations take one store-wide write lock and enqueue their change
//! events into matching subscriptions before releasing it, so an event is
//! always visible by the time the mutating call returns.

pub mod path;
mod snapshot;
mod tree;
mod watch;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{FsError, FsResult};
use tree::{Body, Tree};
pub use tree::{NodeId, NodeKind, NodeMeta, MAX_LINK_HOPS};
pub use watch::{ChangeEvent, EventKind, WatchHandle};
use watch::{WatchRegistry, WatchShared};

pub const ROOT_IDENTITY: &str = "root";
pub const DEFAULT_DIR_MODE: u32 = 0o777;
pub const DEFAULT_FILE_MODE: u32 = 0o666;

/// Result of `stat`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub id: NodeId,
    pub kind: NodeKind,
    pub meta: NodeMeta,
    /// Bytes for files, entries for directories, target length for links.
    pub size: u64,
}

struct Inner {
    tree: RwLock<Tree>,
    watches: Arc<WatchRegistry>,
    next_watch: AtomicU64,
}

/// Shared handle to a store, bound to a caller identity.
///
/// Cloning is cheap; clones and [`Store::with_identity`] views all operate on
/// the same tree.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
    identity: Arc<str>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("identity", &self.identity).finish()
    }
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

impl Store {
    pub fn new() -> Self {
        Store {
            inner: Arc::new(Inner {
                tree: RwLock::new(Tree::new(DEFAULT_DIR_MODE)),
                watches: Arc::new(WatchRegistry::default()),
                next_watch: AtomicU64::new(1),
            }),
            identity: Arc::from(ROOT_IDENTITY),
        }
    }

    /// Same store, different caller identity.
    pub fn with_identity(&self, identity: &str) -> Store {
        Store {
            inner: self.inner.clone(),
            identity: Arc::from(identity),
        }
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    /// Runs `f` as one mutation: no other writer interleaves and every event it
    /// produces is queued before this returns. There is no rollback; callers
    /// validate before mutating.
    pub fn mutate<T>(&self, f: impl FnOnce(&mut Tx<'_>) -> FsResult<T>) -> FsResult<T> {
        let mut tree = self.inner.tree.write().unwrap();
        let mut tx = Tx {
            tree: &mut tree,
            watches: &self.inner.watches,
            identity: &self.identity,
        };
        f(&mut tx)
    }

    /// Runs `f` against a consistent read-only view.
    pub fn read_view<T>(&self, f: impl FnOnce(&View<'_>) -> FsResult<T>) -> FsResult<T> {
        let tree = self.inner.tree.read().unwrap();
        f(&View { tree: &tree })
    }

    pub fn create(&self, path: &str, kind: NodeKind, mode: u32) -> FsResult<NodeId> {
        self.mutate(|tx| tx.create(path, kind, mode))
    }

    pub fn read(&self, path: &str) -> FsResult<Vec<u8>> {
        self.read_view(|v| v.read(path))
    }

    pub fn write(&self, path: &str, bytes: &[u8]) -> FsResult<()> {
        self.mutate(|tx| tx.write(path, bytes))
    }

    pub fn remove(&self, path: &str, recursive: bool) -> FsResult<()> {
        self.mutate(|tx| tx.remove(path, recursive))
    }

    pub fn rename(&self, old_path: &str, new_path: &str) -> FsResult<()> {
        self.mutate(|tx| tx.rename(old_path, new_path))
    }

    pub fn symlink(&self, path: &str, target: &str) -> FsResult<()> {
        self.mutate(|tx| tx.symlink(path, target))
    }

    pub fn readlink(&self, path: &str) -> FsResult<String> {
        self.read_view(|v| v.readlink(path))
    }

    pub fn list(&self, path: &str) -> FsResult<Vec<String>> {
        self.read_view(|v| v.list(path))
    }

    pub fn stat(&self, path: &str) -> FsResult<NodeInfo> {
        self.read_view(|v| v.stat(path, true))
    }

    pub fn lstat(&self, path: &str) -> FsResult<NodeInfo> {
        self.read_view(|v| v.stat(path, false))
    }

    pub fn exists(&self, path: &str) -> bool {
        self.lstat(path).is_ok()
    }

    pub fn set_mode(&self, path: &str, mode: u32) -> FsResult<()> {
        self.mutate(|tx| tx.set_mode(path, mode))
    }

    /// Subscribes to changes at `path` (and below it when `recursive`).
    pub fn watch(&self, path: &str, recursive: bool, capacity: usize) -> FsResult<WatchHandle> {
        let tree = self.inner.tree.read().unwrap();
        let segs = path::split(path)?;
        let resolved = tree.resolve(path, &segs, true)?;
        let id = self.inner.next_watch.fetch_add(1, Ordering::Relaxed);
        let shared = Arc::new(WatchShared::new(id, resolved.path(), recursive, capacity));
        // registered while the tree lock is held so no mutation slips between
        // the existence check and registration
        self.inner.watches.watches.lock().unwrap().push(shared.clone());
        drop(tree);
        Ok(WatchHandle {
            shared,
            registry: Arc::downgrade(&self.inner.watches),
        })
    }

    /// Canonical text serialization of the whole tree.
    pub fn snapshot(&self) -> String {
        let tree = self.inner.tree.read().unwrap();
        snapshot::serialize(&tree)
    }

    /// Replaces the whole tree. Every subscription receives an `Overflow`
    /// event since it can no longer be caught up incrementally.
    pub fn restore(&self, text: &str) -> FsResult<()> {
        let mut fresh = snapshot::parse(text)?;
        let mut tree = self.inner.tree.write().unwrap();
        fresh.clock = tree.clock;
        *tree = fresh;
        let stamp = tree.tick();
        self.inner.watches.invalidate_all(stamp);
        Ok(())
    }
}

/// Read-only operations shared by [`View`] and [`Tx`].
macro_rules! read_ops {
    () => {
        pub fn read(&self, path: &str) -> FsResult<Vec<u8>> {
            let segs = path::split(path)?;
            let r = self.tree.resolve(path, &segs, true)?;
            match &self.tree.node(r.id).body {
                Body::File(b) => Ok(b.clone()),
                Body::Dir(_) => Err(FsError::IsADirectory(path.to_string())),
                Body::Link(_) => Err(FsError::DanglingLink(path.to_string())),
            }
        }

        pub fn readlink(&self, path: &str) -> FsResult<String> {
            let segs = path::split(path)?;
            let r = self.tree.resolve(path, &segs, false)?;
            match &self.tree.node(r.id).body {
                Body::Link(t) => Ok(t.clone()),
                _ => Err(FsError::NotALink(path.to_string())),
            }
        }

        pub fn list(&self, path: &str) -> FsResult<Vec<String>> {
            let segs = path::split(path)?;
            let r = self.tree.resolve(path, &segs, true)?;
            match self.tree.children(r.id) {
                Some(c) => Ok(c.keys().cloned().collect()),
                None => Err(FsError::NotADirectory(path.to_string())),
            }
        }

        pub fn stat(&self, path: &str, follow: bool) -> FsResult<NodeInfo> {
            let segs = path::split(path)?;
            let r = self.tree.resolve(path, &segs, follow)?;
            let node = self.tree.node(r.id);
            let size = match &node.body {
                Body::Dir(c) => c.len() as u64,
                Body::File(b) => b.len() as u64,
                Body::Link(t) => t.len() as u64,
            };
            Ok(NodeInfo {
                id: r.id,
                kind: node.kind(),
                meta: node.meta.clone(),
                size,
            })
        }

        pub fn exists(&self, path: &str) -> bool {
            self.stat(path, false).is_ok()
        }

        /// Canonical path with all symlinks resolved.
        pub fn canonical(&self, path: &str) -> FsResult<String> {
            let segs = path::split(path)?;
            Ok(self.tree.resolve(path, &segs, true)?.path())
        }
    };
}

/// Consistent read-only view of the tree.
pub struct View<'a> {
    tree: &'a Tree,
}

impl View<'_> {
    read_ops!();
}

/// One in-progress mutation. See [`Store::mutate`].
pub struct Tx<'a> {
    tree: &'a mut Tree,
    watches: &'a WatchRegistry,
    identity: &'a str,
}

impl Tx<'_> {
    read_ops!();

    pub fn identity(&self) -> &str {
        self.identity
    }

    fn emit(&self, stamp: u64, path: &str, kind: EventKind, old: Option<&str>) {
        self.watches.emit(stamp, path, kind, old);
    }

    pub fn create(&mut self, path: &str, kind: NodeKind, mode: u32) -> FsResult<NodeId> {
        let body = match kind {
            NodeKind::Directory => Body::Dir(BTreeMap::new()),
            NodeKind::File => Body::File(Vec::new()),
            NodeKind::Symlink => return Err(FsError::InvalidArgument(format!("{path}: symlinks are created with symlink()"))),
        };
        self.create_node(path, body, mode)
    }

    /// Creates a file holding `bytes`; one `created` event, no `modified`.
    pub fn create_file(&mut self, path: &str, mode: u32, bytes: &[u8]) -> FsResult<NodeId> {
        self.create_node(path, Body::File(bytes.to_vec()), mode)
    }

    fn create_node(&mut self, path: &str, body: Body, mode: u32) -> FsResult<NodeId> {
        let segs = path::split(path)?;
        if segs.is_empty() {
            return Err(FsError::AlreadyExists(path.to_string()));
        }
        let (parent, name) = self.tree.resolve_parent(path, &segs)?;
        if self.tree.children(parent.id).is_some_and(|c| c.contains_key(name)) {
            return Err(FsError::AlreadyExists(path.to_string()));
        }
        let stamp = self.tree.tick();
        let meta = NodeMeta {
            mode: mode & 0o777,
            owner: self.identity.to_string(),
            mtime: stamp,
        };
        let id = self.tree.insert(parent.id, name, meta, body);
        self.tree.touch(parent.id, stamp);
        let full = path::child(&parent.path(), name);
        self.emit(stamp, &full, EventKind::Created, None);
        Ok(id)
    }

    fn may_write(&self, meta: &NodeMeta) -> bool {
        let bits = if meta.owner == self.identity { 0o200 } else { 0o002 };
        meta.mode & bits != 0
    }

    /// Current value of the store-wide mutation clock.
    pub fn clock(&self) -> u64 {
        self.tree.clock
    }

    /// Fails with `PermissionDenied` if `write(path, ..)` would.
    pub fn check_writable(&self, path: &str) -> FsResult<()> {
        let segs = path::split(path)?;
        let r = self.tree.resolve(path, &segs, true)?;
        if !self.may_write(&self.tree.node(r.id).meta) {
            return Err(FsError::PermissionDenied(path.to_string()));
        }
        Ok(())
    }

    pub fn write(&mut self, path: &str, bytes: &[u8]) -> FsResult<()> {
        let segs = path::split(path)?;
        let r = self.tree.resolve(path, &segs, true)?;
        let node = self.tree.node(r.id);
        match node.body {
            Body::File(_) => {}
            Body::Dir(_) => return Err(FsError::IsADirectory(path.to_string())),
            Body::Link(_) => return Err(FsError::DanglingLink(path.to_string())),
        }
        if !self.may_write(&node.meta) {
            return Err(FsError::PermissionDenied(path.to_string()));
        }
        self.write_unchecked(&r.path(), r.id, bytes);
        Ok(())
    }

    /// Writes without a permission check; for schema-maintained files.
    pub fn write_internal(&mut self, path: &str, bytes: &[u8]) -> FsResult<()> {
        let segs = path::split(path)?;
        let r = self.tree.resolve(path, &segs, true)?;
        match self.tree.node(r.id).body {
            Body::File(_) => {}
            Body::Dir(_) => return Err(FsError::IsADirectory(path.to_string())),
            Body::Link(_) => return Err(FsError::DanglingLink(path.to_string())),
        }
        self.write_unchecked(&r.path(), r.id, bytes);
        Ok(())
    }

    fn write_unchecked(&mut self, canon: &str, id: NodeId, bytes: &[u8]) {
        let stamp = self.tree.tick();
        let node = self.tree.node_mut(id);
        node.body = Body::File(bytes.to_vec());
        node.meta.mtime = stamp;
        self.emit(stamp, canon, EventKind::Modified, None);
    }

    pub fn remove(&mut self, path: &str, recursive: bool) -> FsResult<()> {
        let segs = path::split(path)?;
        if segs.is_empty() {
            return Err(FsError::InvalidArgument("cannot remove the root".into()));
        }
        let r = self.tree.resolve(path, &segs, false)?;
        if let Some(c) = self.tree.children(r.id) {
            if !c.is_empty() && !recursive {
                return Err(FsError::DirectoryNotEmpty(path.to_string()));
            }
        }
        let parent = self.tree.node(r.id).parent.expect("non-root has a parent");
        let doomed = self.tree.subtree_post_order(r.id, &r.path());
        for (id, p) in doomed {
            self.tree.detach(id);
            let stamp = self.tree.tick();
            self.emit(stamp, &p, EventKind::Removed, None);
        }
        let stamp = self.tree.clock;
        self.tree.touch(parent, stamp);
        Ok(())
    }

    pub fn rename(&mut self, old_path: &str, new_path: &str) -> FsResult<()> {
        let old_segs = path::split(old_path)?;
        let new_segs = path::split(new_path)?;
        if old_segs.is_empty() || new_segs.is_empty() {
            return Err(FsError::InvalidArgument("cannot rename the root".into()));
        }
        let src = self.tree.resolve(old_path, &old_segs, false)?;
        let (dst_parent, new_name) = self.tree.resolve_parent(new_path, &new_segs)?;
        if self.tree.children(dst_parent.id).is_some_and(|c| c.contains_key(new_name)) {
            return Err(FsError::AlreadyExists(new_path.to_string()));
        }
        if self.tree.is_ancestor(src.id, dst_parent.id) {
            return Err(FsError::InvalidArgument(format!("{new_path} lies inside {old_path}")));
        }
        let old_parent = self.tree.node(src.id).parent.expect("non-root has a parent");
        let old_name = self.tree.node(src.id).name.clone();
        if let Body::Dir(c) = &mut self.tree.node_mut(old_parent).body {
            c.remove(&old_name);
        }
        if let Body::Dir(c) = &mut self.tree.node_mut(dst_parent.id).body {
            c.insert(new_name.to_string(), src.id);
        }
        let stamp = self.tree.tick();
        {
            let n = self.tree.node_mut(src.id);
            n.name = new_name.to_string();
            n.parent = Some(dst_parent.id);
            n.meta.mtime = stamp;
        }
        self.tree.touch(old_parent, stamp);
        self.tree.touch(dst_parent.id, stamp);
        let new_full = path::child(&dst_parent.path(), new_name);
        self.emit(stamp, &new_full, EventKind::Renamed, Some(&src.path()));
        Ok(())
    }

    /// Creates a symlink, or retargets an existing one. Dangling targets are allowed.
    pub fn symlink(&mut self, path: &str, target: &str) -> FsResult<()> {
        path::split(target).map_err(|_| FsError::InvalidArgument(format!("link target must be absolute: {target}")))?;
        let segs = path::split(path)?;
        if segs.is_empty() {
            return Err(FsError::AlreadyExists("/".into()));
        }
        let (parent, name) = self.tree.resolve_parent(path, &segs)?;
        let full = path::child(&parent.path(), name);
        let existing = self.tree.children(parent.id).and_then(|c| c.get(name).copied());
        let stamp = self.tree.tick();
        match existing {
            Some(id) => match &mut self.tree.node_mut(id).body {
                Body::Link(t) => {
                    *t = target.to_string();
                    self.tree.touch(id, stamp);
                }
                _ => return Err(FsError::AlreadyExists(path.to_string())),
            },
            None => {
                let meta = NodeMeta {
                    mode: 0o777,
                    owner: self.identity.to_string(),
                    mtime: stamp,
                };
                self.tree.insert(parent.id, name, meta, Body::Link(target.to_string()));
                self.tree.touch(parent.id, stamp);
            }
        }
        self.emit(stamp, &full, EventKind::LinkChanged, None);
        Ok(())
    }

    pub fn set_mode(&mut self, path: &str, mode: u32) -> FsResult<()> {
        let segs = path::split(path)?;
        let r = self.tree.resolve(path, &segs, true)?;
        let owner = &self.tree.node(r.id).meta.owner;
        if owner != self.identity && self.identity != ROOT_IDENTITY {
            return Err(FsError::PermissionDenied(path.to_string()));
        }
        let stamp = self.tree.tick();
        let n = self.tree.node_mut(r.id);
        n.meta.mode = mode & 0o777;
        n.meta.mtime = stamp;
        self.emit(stamp, &r.path(), EventKind::Modified, None);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn store() -> Store {
        let s = Store::new();
        s.create("/net", NodeKind::Directory, 0o755).unwrap();
        s.create("/net/switches", NodeKind::Directory, 0o755).unwrap();
        s
    }

    #[test]
    fn create_read_write() {
        let s = store();
        s.create("/net/x", NodeKind::File, 0o644).unwrap();
        assert_eq!(s.read("/net/x").unwrap(), b"");
        s.write("/net/x", b"22").unwrap();
        assert_eq!(s.read("/net/x").unwrap(), b"22");
        assert_eq!(s.read("/net/switches"), Err(FsError::IsADirectory("/net/switches".into())));
    }

    #[test]
    fn create_errors() {
        let s = store();
        assert!(matches!(
            s.create("/net/switches/s1/missing/x", NodeKind::File, 0o644),
            Err(FsError::NotFound(_))
        ));
        s.create("/net/a", NodeKind::Directory, 0o755).unwrap();
        assert!(matches!(
            s.create("/net/a", NodeKind::Directory, 0o755),
            Err(FsError::AlreadyExists(_))
        ));
        s.create("/net/f", NodeKind::File, 0o644).unwrap();
        assert!(matches!(
            s.create("/net/f/x", NodeKind::File, 0o644),
            Err(FsError::NotADirectory(_))
        ));
        assert!(matches!(s.create("/net/a/..", NodeKind::File, 0o644), Err(FsError::InvalidName(_))));
    }

    #[test]
    fn permission_checks_writes_only() {
        let s = store();
        s.create("/net/ro", NodeKind::File, 0o444).unwrap();
        assert!(matches!(s.write("/net/ro", b"1"), Err(FsError::PermissionDenied(_))));
        assert!(s.read("/net/ro").is_ok());
        s.create("/net/mine", NodeKind::File, 0o644).unwrap();
        let other = s.with_identity("app");
        assert!(matches!(other.write("/net/mine", b"1"), Err(FsError::PermissionDenied(_))));
        s.write("/net/mine", b"1").unwrap();
    }

    #[test]
    fn mtime_strictly_increases() {
        let s = store();
        s.create("/net/f", NodeKind::File, 0o644).unwrap();
        let mut last = s.stat("/net/f").unwrap().meta.mtime;
        for i in 0..5 {
            s.write("/net/f", format!("{i}").as_bytes()).unwrap();
            let now = s.stat("/net/f").unwrap().meta.mtime;
            assert!(now > last);
            last = now;
        }
    }

    #[test]
    fn symlinks_verbatim_and_dangling() {
        let s = store();
        s.create("/net/p", NodeKind::Directory, 0o755).unwrap();
        s.create("/net/f", NodeKind::File, 0o644).unwrap();
        s.symlink("/net/p/peer", "/net/switches/s2/ports/3").unwrap();
        assert_eq!(s.readlink("/net/p/peer").unwrap(), "/net/switches/s2/ports/3");
        assert!(matches!(s.readlink("/net/f"), Err(FsError::NotALink(_))));
        assert!(matches!(s.read("/net/p/peer"), Err(FsError::DanglingLink(_))));
        assert!(s.symlink("/net/p/rel", "relative/path").is_err());
        // retarget
        s.symlink("/net/p/peer", "/net/f").unwrap();
        s.write("/net/f", b"via").unwrap();
        assert_eq!(s.read("/net/p/peer").unwrap(), b"via");
    }

    #[test]
    fn link_loops_are_detected() {
        let s = store();
        s.symlink("/net/a", "/net/b").unwrap();
        s.symlink("/net/b", "/net/a").unwrap();
        assert!(matches!(s.read("/net/a"), Err(FsError::LoopDetected(_))));
        // a chain of exactly 16 hops resolves, 17 does not
        s.create("/net/end", NodeKind::File, 0o644).unwrap();
        s.symlink("/net/l0", "/net/end").unwrap();
        for i in 1..17 {
            s.symlink(&format!("/net/l{i}"), &format!("/net/l{}", i - 1)).unwrap();
        }
        assert!(s.read("/net/l15").is_ok());
        assert!(matches!(s.read("/net/l16"), Err(FsError::LoopDetected(_))));
    }

    #[test]
    fn list_is_sorted() {
        let s = store();
        for n in ["b", "a", "c"] {
            s.create(&format!("/net/switches/{n}"), NodeKind::Directory, 0o755).unwrap();
        }
        assert_eq!(s.list("/net/switches").unwrap(), vec!["a", "b", "c"]);
        assert!(matches!(s.list("/nope"), Err(FsError::NotFound(_))));
    }

    #[test]
    fn remove_emits_deepest_first() {
        let s = store();
        s.create("/net/switches/s1", NodeKind::Directory, 0o755).unwrap();
        s.create("/net/switches/s1/a", NodeKind::Directory, 0o755).unwrap();
        s.create("/net/switches/s1/a/f", NodeKind::File, 0o644).unwrap();
        s.create("/net/switches/s1/b", NodeKind::File, 0o644).unwrap();
        let w = s.watch("/net", true, 64).unwrap();
        assert!(matches!(s.remove("/net/switches/s1", false), Err(FsError::DirectoryNotEmpty(_))));
        s.remove("/net/switches/s1", true).unwrap();
        let paths: Vec<String> = w.drain().into_iter().map(|e| e.path).collect();
        assert_eq!(
            paths,
            vec![
                "/net/switches/s1/a/f",
                "/net/switches/s1/a",
                "/net/switches/s1/b",
                "/net/switches/s1"
            ]
        );
        assert!(matches!(s.remove("/net/switches/s1", true), Err(FsError::NotFound(_))));
    }

    #[test]
    fn rename_moves_subtree_single_event() {
        let s = store();
        s.create("/net/switches/s1", NodeKind::Directory, 0o755).unwrap();
        s.create("/net/switches/s1/f", NodeKind::File, 0o644).unwrap();
        let w = s.watch("/net/switches", true, 64).unwrap();
        s.rename("/net/switches/s1", "/net/switches/s2").unwrap();
        assert!(s.exists("/net/switches/s2/f"));
        assert!(!s.exists("/net/switches/s1"));
        let evs = w.drain();
        assert_eq!(evs.len(), 1);
        assert_eq!(evs[0].kind, EventKind::Renamed);
        assert_eq!(evs[0].old_path.as_deref(), Some("/net/switches/s1"));
        s.create("/net/switches/s3", NodeKind::Directory, 0o755).unwrap();
        assert!(matches!(
            s.rename("/net/switches/s2", "/net/switches/s3"),
            Err(FsError::AlreadyExists(_))
        ));
        assert!(s.rename("/net/switches/s2", "/net/switches/s2/inner").is_err());
    }

    #[test]
    fn watch_new_switch() {
        let s = store();
        let w = s.watch("/net/switches", false, 16).unwrap();
        s.create("/net/switches/s9", NodeKind::Directory, 0o755).unwrap();
        let ev = w.next_event(Duration::from_millis(10)).unwrap();
        assert_eq!(ev.kind, EventKind::Created);
        assert_eq!(ev.path, "/net/switches/s9");
        assert!(w.next_event(Duration::from_millis(1)).is_none());
    }

    #[test]
    fn watch_via_symlink_path_reports_canonical() {
        let s = store();
        s.create("/net/real", NodeKind::File, 0o666).unwrap();
        s.symlink("/net/alias", "/net/real").unwrap();
        let w = s.watch("/net/real", false, 4).unwrap();
        s.write("/net/alias", b"x").unwrap();
        assert_eq!(w.try_next_event().unwrap().path, "/net/real");
    }

    #[test]
    fn dropped_watch_unregisters() {
        let s = store();
        let w = s.watch("/net", true, 4).unwrap();
        drop(w);
        assert!(s.inner.watches.watches.lock().unwrap().is_empty());
    }
}
