//! Canonical snapshot format.
//!
//! One line per node, sorted by path:
//!
//! ```text
//! KIND<TAB>PATH<TAB>MODE<TAB>payload
//! ```
//!
//! `KIND` is `dir`, `file` or `link`; `MODE` is three octal digits; the
//! payload is base64 for files, the target path for links and empty for
//! directories. Owners are not recorded and restore as `root`.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::path;
use super::tree::{Body, NodeMeta, Tree};
use crate::error::{FsError, FsResult};

pub(crate) fn serialize(tree: &Tree) -> String {
    let mut lines: Vec<(String, String)> = Vec::new();
    tree.walk(|p, node| {
        let (kind, payload) = match &node.body {
            Body::Dir(_) => ("dir", String::new()),
            Body::File(b) => ("file", STANDARD.encode(b)),
            Body::Link(t) => ("link", t.clone()),
        };
        lines.push((p.to_string(), format!("{kind}\t{p}\t{:03o}\t{payload}\n", node.meta.mode & 0o777)));
    });
    lines.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    lines.into_iter().map(|(_, l)| l).collect()
}

pub(crate) fn parse(text: &str) -> FsResult<Tree> {
    let bad = |line: usize, reason: &str| FsError::MalformedSnapshot {
        line,
        reason: reason.to_string(),
    };
    let mut entries: BTreeMap<String, (usize, &str, u32, &str)> = BTreeMap::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let lineno = i + 1;
        let mut cols = line.splitn(4, '\t');
        let (Some(kind), Some(p), Some(mode), Some(payload)) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad(lineno, "expected four tab-separated columns"));
        };
        if !matches!(kind, "dir" | "file" | "link") {
            return Err(bad(lineno, "unknown node kind"));
        }
        path::split(p).map_err(|_| bad(lineno, "invalid path"))?;
        if mode.len() != 3 {
            return Err(bad(lineno, "mode must be three octal digits"));
        }
        let mode = u32::from_str_radix(mode, 8).map_err(|_| bad(lineno, "mode must be octal"))?;
        if entries.insert(p.to_string(), (lineno, kind, mode, payload)).is_some() {
            return Err(bad(lineno, "duplicate path"));
        }
    }
    let root_mode = match entries.get("/") {
        Some(&(lineno, kind, mode, _)) => {
            if kind != "dir" {
                return Err(bad(lineno, "root must be a directory"));
            }
            mode
        }
        None => super::DEFAULT_DIR_MODE,
    };
    let mut tree = Tree::new(root_mode);
    let mut ids = std::collections::HashMap::new();
    ids.insert("/".to_string(), tree.root);
    for (p, &(lineno, kind, mode, payload)) in &entries {
        if p == "/" {
            continue;
        }
        let (parent, name) = path::parent_of(p).map_err(|_| bad(lineno, "invalid path"))?;
        let Some(&pid) = ids.get(&parent) else {
            return Err(bad(lineno, "parent directory missing"));
        };
        if tree.children(pid).is_none() {
            return Err(bad(lineno, "parent is not a directory"));
        }
        let body = match kind {
            "dir" => {
                if !payload.is_empty() {
                    return Err(bad(lineno, "directory payload must be empty"));
                }
                Body::Dir(BTreeMap::new())
            }
            "file" => Body::File(STANDARD.decode(payload).map_err(|_| bad(lineno, "invalid base64"))?),
            _ => {
                path::split(payload).map_err(|_| bad(lineno, "link target must be absolute"))?;
                Body::Link(payload.to_string())
            }
        };
        let meta = NodeMeta {
            mode,
            owner: super::ROOT_IDENTITY.to_string(),
            mtime: 0,
        };
        let id = tree.insert(pid, &name, meta, body);
        ids.insert(p.clone(), id);
    }
    Ok(tree)
}
