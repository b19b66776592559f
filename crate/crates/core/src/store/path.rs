//! Absolute tree paths.
//!
//! Paths are `/`-separated UTF-8 strings rooted at `/`. A single trailing
//! slash is tolerated; empty inner segments, `.` and `..` are rejected.

use crate::error::{FsError, FsResult};

/// Checks that `name` is usable as a single path segment.
///
/// Control characters are refused as well because the snapshot format is
/// tab- and line-delimited.
pub fn validate_name(name: &str) -> FsResult<()> {
    if name.is_empty() || name == "." || name == ".." || name.contains('/') || name.chars().any(char::is_control) {
        return Err(FsError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// Splits an absolute path into validated segments. `/` yields no segments.
pub fn split(path: &str) -> FsResult<Vec<&str>> {
    let rest = path.strip_prefix('/').ok_or_else(|| FsError::InvalidName(path.to_string()))?;
    let rest = rest.strip_suffix('/').unwrap_or(rest);
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let segs: Vec<&str> = rest.split('/').collect();
    for s in &segs {
        validate_name(s).map_err(|_| FsError::InvalidName(path.to_string()))?;
    }
    Ok(segs)
}

pub fn join<S: AsRef<str>>(segs: &[S]) -> String {
    if segs.is_empty() {
        return "/".to_string();
    }
    let mut out = String::new();
    for s in segs {
        out.push('/');
        out.push_str(s.as_ref());
    }
    out
}

/// Appends one segment to an absolute path.
pub fn child(parent: &str, name: &str) -> String {
    if parent == "/" {
        format!("/{name}")
    } else {
        format!("{}/{}", parent.trim_end_matches('/'), name)
    }
}

/// Splits `path` into its parent path and final segment.
pub fn parent_of(path: &str) -> FsResult<(String, String)> {
    let segs = split(path)?;
    match segs.split_last() {
        Some((last, init)) => Ok((join(init), last.to_string())),
        None => Err(FsError::InvalidArgument("the root has no parent".into())),
    }
}

/// Returns the last segment of a path, or `/` for the root.
pub fn basename(path: &str) -> &str {
    let p = path.trim_end_matches('/');
    match p.rfind('/') {
        Some(i) => &p[i + 1..],
        None => "/",
    }
}

/// True if `path` equals `root` or lies below it.
pub fn is_within(path: &str, root: &str) -> bool {
    if root == "/" {
        return true;
    }
    let root = root.trim_end_matches('/');
    path == root || (path.starts_with(root) && path.as_bytes().get(root.len()) == Some(&b'/'))
}

/// Re-roots `path` from `from` onto `to`; `None` when `path` is not within `from`.
pub fn rebase(path: &str, from: &str, to: &str) -> Option<String> {
    if !is_within(path, from) {
        return None;
    }
    let tail = if from == "/" {
        path
    } else {
        &path[from.trim_end_matches('/').len()..]
    };
    if tail.is_empty() {
        Some(to.to_string())
    } else if to == "/" {
        Some(tail.to_string())
    } else {
        Some(format!("{}{}", to.trim_end_matches('/'), tail))
    }
}
