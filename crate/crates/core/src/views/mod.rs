//! Slices: a subset of switches plus a flowspace, presented as a mirror
//! of the parent network under the view's own `switches/`.
//!
//! A view is defined by its `.slice/` control files. `members` lists switch
//! names, one per line; `flowspace.match.<field>` files constrain header
//! space with the flow field grammar. `members` is written last and its
//! presence marks the view as defined.
//!
//! Flows committed inside a view are intersected with the flowspace and
//! committed in the parent as `<view>,<flow>`. Packet-ins on member
//! switches reach the view's buffers only when they fall in the flowspace.

pub mod engine;

use std::collections::BTreeMap;

use crate::api::FsApi;
use crate::codec::translate::{match_from_schema, match_to_schema};
use crate::codec::OfMatch;
use crate::error::FsError;
use crate::schema::layout::{classify, Place, NET_ROOT, SLICE_DIR};

pub use engine::ViewsEngine;

pub const MEMBERS_FILE: &str = "members";
pub const FLOWSPACE_PREFIX: &str = "flowspace.";
pub const SLICE_BUFFER_PREFIX: &str = "slice.";
/// Separates the view name from the flow name in parent flows.
pub const FLOW_SEPARATOR: char = ',';

#[derive(Debug, thiserror::Error)]
pub enum ViewError {
    #[error("member {0} is not a switch of the parent view")]
    MemberUnknown(String),
    #[error("flowspace field {0} is not contained in the parent's flowspace")]
    FlowspaceNotContained(String),
    #[error("{0} is not a view path")]
    NotAView(String),
    #[error("view {0} is already defined")]
    AlreadyDefined(String),
    #[error(transparent)]
    Fs(#[from] FsError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDef {
    pub path: String,
    pub parent: String,
    pub members: Vec<String>,
    pub flowspace: OfMatch,
}

impl ViewDef {
    pub fn name(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or_default()
    }
}

/// `(parent, name)` of a view path other than the root.
pub fn split_view_path(path: &str) -> Option<(String, String)> {
    match classify(path) {
        Place::View { view } if view != NET_ROOT => {
            let (parent, name) = view.rsplit_once("/views/")?;
            Some((parent.to_string(), name.to_string()))
        }
        _ => None,
    }
}

/// A bare name is taken as a top-level view.
pub fn resolve_view(arg: &str) -> String {
    if arg.starts_with('/') {
        arg.trim_end_matches('/').to_string()
    } else {
        format!("{NET_ROOT}/views/{arg}")
    }
}

pub fn parse_members(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// Flowspace of a view; the root's is everything.
pub fn read_flowspace(fs: &dyn FsApi, view: &str) -> Result<OfMatch, FsError> {
    if view == NET_ROOT {
        return Ok(OfMatch::all());
    }
    let dir = format!("{view}/{SLICE_DIR}");
    let mut pairs = Vec::new();
    for name in fs.list(&dir)? {
        if let Some(field) = name.strip_prefix(FLOWSPACE_PREFIX) {
            pairs.push((field.to_string(), fs.read_text(&format!("{dir}/{name}"))?));
        }
    }
    match_from_schema(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

pub fn read_view(fs: &dyn FsApi, path: &str) -> Result<ViewDef, ViewError> {
    let (parent, _) = split_view_path(path).ok_or_else(|| ViewError::NotAView(path.to_string()))?;
    let members = parse_members(&fs.read_text(&format!("{path}/{SLICE_DIR}/{MEMBERS_FILE}"))?);
    Ok(ViewDef {
        path: path.to_string(),
        parent,
        members,
        flowspace: read_flowspace(fs, path)?,
    })
}

/// First `match.*` field of `inner` not contained in `outer`.
pub fn uncovered_field(outer: &OfMatch, inner: &OfMatch) -> Option<String> {
    let o = match_to_schema(outer);
    let i = match_to_schema(inner);
    for (k, v) in &o {
        let of = match_from_schema([(k.as_str(), v.as_str())]).expect("round-trip of a valid match");
        let inf = match_from_schema(i.get(k).map(|iv| (k.as_str(), iv.as_str()))).expect("round-trip of a valid match");
        if !of.covers(&inf) {
            return Some(k.clone());
        }
    }
    None
}

/// Defined views directly below `view`.
pub fn child_views(fs: &dyn FsApi, view: &str) -> Vec<String> {
    let Ok(names) = fs.list(&format!("{view}/views")) else {
        return Vec::new();
    };
    names
        .into_iter()
        .map(|n| format!("{view}/views/{n}"))
        .filter(|p| fs.exists(&format!("{p}/{SLICE_DIR}/{MEMBERS_FILE}")))
        .collect()
}

/// Every defined view, parents before children.
pub fn list_views(fs: &dyn FsApi) -> Vec<ViewDef> {
    let mut out = Vec::new();
    let mut stack = vec![NET_ROOT.to_string()];
    while let Some(v) = stack.pop() {
        let mut kids = child_views(fs, &v);
        kids.sort();
        for k in kids.iter().rev() {
            stack.push(k.clone());
        }
        if v != NET_ROOT {
            if let Ok(d) = read_view(fs, &v) {
                out.push(d);
            }
        }
    }
    out
}

/// Creates a view over `members` restricted to `flowspace`
/// (`match.<field>`, value pairs).
pub fn define_view(fs: &dyn FsApi, path: &str, members: &[String], flowspace: &[(String, String)]) -> Result<ViewDef, ViewError> {
    let (parent, _) = split_view_path(path).ok_or_else(|| ViewError::NotAView(path.to_string()))?;
    if fs.exists(&format!("{path}/{SLICE_DIR}/{MEMBERS_FILE}")) {
        return Err(ViewError::AlreadyDefined(path.to_string()));
    }
    for m in members {
        if !fs.is_dir(&format!("{parent}/switches/{m}")) {
            return Err(ViewError::MemberUnknown(m.clone()));
        }
    }
    let fs_match = match_from_schema(flowspace.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let outer = read_flowspace(fs, &parent)?;
    if let Some(field) = uncovered_field(&outer, &fs_match) {
        return Err(ViewError::FlowspaceNotContained(field));
    }
    fs.ensure_dir(path)?;
    let slice = format!("{path}/{SLICE_DIR}");
    fs.ensure_dir(&slice)?;
    for (k, v) in match_to_schema(&fs_match) {
        fs.write(&format!("{slice}/{FLOWSPACE_PREFIX}{k}"), v.as_bytes())?;
    }
    let mut text = members.join("\n");
    text.push('\n');
    fs.write(&format!("{slice}/{MEMBERS_FILE}"), text.as_bytes())?;
    Ok(ViewDef {
        path: path.to_string(),
        parent,
        members: members.to_vec(),
        flowspace: fs_match,
    })
}

/// Removes a view, its nested views and every parent flow it created.
/// Returns the number of parent flows removed.
pub fn teardown_view(fs: &dyn FsApi, path: &str) -> Result<usize, ViewError> {
    let (parent, name) = split_view_path(path).ok_or_else(|| ViewError::NotAView(path.to_string()))?;
    if !fs.exists(path) {
        return Err(FsError::NotFound(path.to_string()).into());
    }
    let mut removed = 0;
    for child in child_views(fs, path) {
        removed += teardown_view(fs, &child)?;
    }
    let prefix = format!("{name}{FLOW_SEPARATOR}");
    for (_, sw) in crate::apps::switches(fs, &parent)? {
        for f in fs.list(&format!("{sw}/flows"))? {
            if f.starts_with(&prefix) {
                match fs.remove(&format!("{sw}/flows/{f}"), true) {
                    Ok(()) => removed += 1,
                    Err(FsError::NotFound(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let buf = format!("{sw}/events/{SLICE_BUFFER_PREFIX}{name}");
        if fs.exists(&buf) {
            fs.remove(&buf, true)?;
        }
    }
    fs.remove(path, true)?;
    Ok(removed)
}

pub fn viewctl(fs: &dyn FsApi, args: &[String]) -> crate::apps::Outcome {
    use crate::apps::Outcome;
    let usage = || {
        Outcome::fail(
            2,
            "usage: viewctl define <view> --members a,b [match.F=V]... | teardown <view> | list\n".into(),
        )
    };
    let fail = |e: ViewError| {
        let code = match &e {
            ViewError::MemberUnknown(_) | ViewError::NotAView(_) | ViewError::Fs(FsError::NotFound(_)) => 1,
            ViewError::Fs(FsError::Unreachable(_)) => 3,
            _ => 2,
        };
        Outcome::fail(code, format!("viewctl: {e}\n"))
    };
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    match a.as_slice() {
        ["define", view, rest @ ..] => {
            let mut members = Vec::new();
            let mut space = Vec::new();
            let mut it = rest.iter();
            while let Some(arg) = it.next() {
                if *arg == "--members" {
                    let Some(list) = it.next() else { return usage() };
                    members.extend(list.split(',').filter(|s| !s.is_empty()).map(|s| {
                        let hex = s.strip_prefix("0x").unwrap_or(s);
                        u64::from_str_radix(hex, 16).map_or(s.to_string(), crate::schema::layout::dpid_name)
                    }));
                } else if let Some((k, v)) = arg.split_once('=') {
                    space.push((k.to_string(), v.to_string()));
                } else {
                    return usage();
                }
            }
            match define_view(fs, &resolve_view(view), &members, &space) {
                Ok(d) => Outcome::ok(format!("{}\n", d.path)),
                Err(e) => fail(e),
            }
        }
        ["teardown", view] => match teardown_view(fs, &resolve_view(view)) {
            Ok(n) => Outcome::ok(format!("{n} flows removed\n")),
            Err(e) => fail(e),
        },
        ["list"] => {
            let mut out = String::new();
            for v in list_views(fs) {
                let space: BTreeMap<String, String> = match_to_schema(&v.flowspace);
                let space = if space.is_empty() {
                    "*".to_string()
                } else {
                    space.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
                };
                out.push_str(&format!("{}\t{}\t{space}\n", v.path, v.members.join(",")));
            }
            Outcome::ok(out)
        }
        _ => usage(),
    }
}
