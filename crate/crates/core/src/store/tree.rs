use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::path::join;
use crate::error::{FsError, FsResult};

/// Symlink hops allowed during one resolution.
pub const MAX_LINK_HOPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub(crate) u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Directory,
    File,
    Symlink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMeta {
    /// Permission bits, owner/group/other x rwx.
    pub mode: u32,
    pub owner: String,
    /// Logical change counter; strictly increases on every mutation of the node.
    pub mtime: u64,
}

#[derive(Debug, Clone)]
pub(crate) enum Body {
    Dir(BTreeMap<String, NodeId>),
    File(Vec<u8>),
    Link(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) name: String,
    pub(crate) parent: Option<NodeId>,
    pub(crate) meta: NodeMeta,
    pub(crate) body: Body,
}

impl Node {
    pub(crate) fn kind(&self) -> NodeKind {
        match self.body {
            Body::Dir(_) => NodeKind::Directory,
            Body::File(_) => NodeKind::File,
            Body::Link(_) => NodeKind::Symlink,
        }
    }
}

/// A resolved node plus its canonical (symlink-free) path.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub(crate) id: NodeId,
    pub(crate) segs: Vec<String>,
}

impl Resolved {
    pub(crate) fn path(&self) -> String {
        join(&self.segs)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Tree {
    pub(crate) nodes: HashMap<NodeId, Node>,
    pub(crate) root: NodeId,
    next_id: u64,
    pub(crate) clock: u64,
}

impl Tree {
    pub(crate) fn new(root_mode: u32) -> Self {
        let root = NodeId(0);
        let mut nodes = HashMap::new();
        nodes.insert(
            root,
            Node {
                name: String::new(),
                parent: None,
                meta: NodeMeta {
                    mode: root_mode,
                    owner: "root".into(),
                    mtime: 0,
                },
                body: Body::Dir(BTreeMap::new()),
            },
        );
        Tree {
            nodes,
            root,
            next_id: 1,
            clock: 0,
        }
    }

    pub(crate) fn node(&self, id: NodeId) -> &Node {
        &self.nodes[&id]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes.get_mut(&id).expect("live node id")
    }

    pub(crate) fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub(crate) fn touch(&mut self, id: NodeId, stamp: u64) {
        self.node_mut(id).meta.mtime = stamp;
    }

    /// Walks `segs` from the root, following symlinks on intermediate
    /// components and, when `follow_last` is set, on the final one.
    pub(crate) fn resolve(&self, display: &str, segs: &[&str], follow_last: bool) -> FsResult<Resolved> {
        let mut pending: Vec<String> = segs.iter().rev().map(|s| s.to_string()).collect();
        let mut cur = self.root;
        let mut canon: Vec<String> = Vec::new();
        let mut hops = 0usize;
        while let Some(seg) = pending.pop() {
            let children = match &self.node(cur).body {
                Body::Dir(c) => c,
                _ => return Err(FsError::NotADirectory(display.to_string())),
            };
            let Some(&child) = children.get(&seg) else {
                return Err(if hops > 0 {
                    FsError::DanglingLink(display.to_string())
                } else {
                    FsError::NotFound(display.to_string())
                });
            };
            let is_last = pending.is_empty();
            match &self.node(child).body {
                Body::Link(target) if !is_last || follow_last => {
                    hops += 1;
                    if hops > MAX_LINK_HOPS {
                        return Err(FsError::LoopDetected(display.to_string()));
                    }
                    let tsegs = super::path::split(target).map_err(|_| FsError::DanglingLink(display.to_string()))?;
                    for s in tsegs.iter().rev() {
                        pending.push(s.to_string());
                    }
                    cur = self.root;
                    canon.clear();
                }
                _ => {
                    cur = child;
                    canon.push(seg);
                }
            }
        }
        Ok(Resolved { id: cur, segs: canon })
    }

    /// Resolves the parent directory of `segs` (following links) and returns it with the final name.
    pub(crate) fn resolve_parent<'a>(&self, display: &str, segs: &[&'a str]) -> FsResult<(Resolved, &'a str)> {
        let (last, init) = segs.split_last().ok_or_else(|| FsError::AlreadyExists("/".into()))?;
        let parent = self.resolve(display, init, true)?;
        match self.node(parent.id).body {
            Body::Dir(_) => Ok((parent, last)),
            _ => Err(FsError::NotADirectory(display.to_string())),
        }
    }

    pub(crate) fn children(&self, id: NodeId) -> Option<&BTreeMap<String, NodeId>> {
        match &self.node(id).body {
            Body::Dir(c) => Some(c),
            _ => None,
        }
    }

    pub(crate) fn insert(&mut self, parent: NodeId, name: &str, meta: NodeMeta, body: Body) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                name: name.to_string(),
                parent: Some(parent),
                meta,
                body,
            },
        );
        if let Body::Dir(c) = &mut self.node_mut(parent).body {
            c.insert(name.to_string(), id);
        }
        id
    }

    /// Post-order (deepest first, siblings in name order) list of `(id, path)` under `id`.
    pub(crate) fn subtree_post_order(&self, id: NodeId, path: &str) -> Vec<(NodeId, String)> {
        let mut out = Vec::new();
        self.post_order(id, path.to_string(), &mut out);
        out
    }

    fn post_order(&self, id: NodeId, path: String, out: &mut Vec<(NodeId, String)>) {
        if let Some(children) = self.children(id) {
            for (name, &cid) in children {
                self.post_order(cid, super::path::child(&path, name), out);
            }
        }
        out.push((id, path));
    }

    /// Pre-order walk with paths, used by snapshots.
    pub(crate) fn walk(&self, mut f: impl FnMut(&str, &Node)) {
        fn go(t: &Tree, id: NodeId, path: String, f: &mut dyn FnMut(&str, &Node)) {
            let node = t.node(id);
            f(&path, node);
            if let Body::Dir(c) = &node.body {
                for (name, &cid) in c {
                    go(t, cid, super::path::child(&path, name), f);
                }
            }
        }
        go(self, self.root, "/".to_string(), &mut f);
    }

    pub(crate) fn detach(&mut self, id: NodeId) {
        let node = self.nodes.remove(&id).expect("live node id");
        if let Some(p) = node.parent {
            if let Some(pn) = self.nodes.get_mut(&p) {
                if let Body::Dir(c) = &mut pn.body {
                    c.remove(&node.name);
                }
            }
        }
    }

    pub(crate) fn is_ancestor(&self, anc: NodeId, mut id: NodeId) -> bool {
        loop {
            if id == anc {
                return true;
            }
            match self.node(id).parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }
}
