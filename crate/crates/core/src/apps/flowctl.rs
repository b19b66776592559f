//! Static flow pusher.
//!
//! ```text
//! flowctl add <switch> <name> [match.F=V]... [action.N.T=V]... [priority=P]
//! flowctl del <switch> <name>
//! flowctl list [<switch>]
//! ```
//!
//! Exit codes: 0 ok, 1 unknown switch or flow, 2 invalid flow or usage,
//! 3 store unreachable.

use crate::api::FsApi;
use crate::codec::translate::match_to_schema;
use crate::codec::Action;
use crate::error::FsError;
use crate::schema::fields::{format_output_port, validate_flow_field, COMMITTED_FILE, VERSION_FILE};
use crate::schema::layout::{dpid_name, flow_path, NET_ROOT};
use crate::schema::{read_committed, FlowSpec};

use super::{switches, Outcome};

pub const EXIT_UNKNOWN: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;

const USAGE: &str = "usage: flowctl add <switch> <name> [field=value]... | del <switch> <name> | list [<switch>]";

/// Accepts a switch path, a 16-digit switch name, or a shorter hex dpid.
pub fn resolve_switch(arg: &str) -> Option<String> {
    if arg.starts_with('/') {
        return Some(arg.trim_end_matches('/').to_string());
    }
    let hex = arg.strip_prefix("0x").unwrap_or(arg);
    let d = u64::from_str_radix(hex, 16).ok()?;
    Some(format!("{NET_ROOT}/switches/{}", dpid_name(d)))
}

fn fs_failure(e: FsError) -> Outcome {
    let code = match e {
        FsError::Unreachable(_) => EXIT_UNREACHABLE,
        ref e if e.is_validation() => EXIT_INVALID,
        FsError::NotFound(_) => EXIT_UNKNOWN,
        _ => EXIT_INVALID,
    };
    Outcome::fail(code, format!("flowctl: {e}\n"))
}

fn check_switch(fs: &dyn FsApi, arg: &str) -> Result<String, Outcome> {
    let sw = resolve_switch(arg).ok_or_else(|| Outcome::fail(EXIT_UNKNOWN, format!("flowctl: bad switch {arg:?}\n")))?;
    match fs.stat(&sw, true) {
        Ok(_) => Ok(sw),
        Err(FsError::NotFound(_)) => Err(Outcome::fail(EXIT_UNKNOWN, format!("flowctl: unknown switch {arg}\n"))),
        Err(e) => Err(fs_failure(e)),
    }
}

fn add(fs: &dyn FsApi, sw: &str, name: &str, fields: &[String]) -> Outcome {
    let mut pairs = Vec::new();
    for f in fields {
        let Some((k, v)) = f.split_once('=') else {
            return Outcome::fail(EXIT_INVALID, format!("flowctl: expected field=value, got {f:?}\n"));
        };
        if k == VERSION_FILE || k == COMMITTED_FILE {
            return Outcome::fail(EXIT_INVALID, format!("flowctl: {k}: not a flow field\n"));
        }
        if let Err(e) = validate_flow_field(k, v.as_bytes()) {
            return Outcome::fail(EXIT_INVALID, format!("flowctl: {k}: {e}\n"));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    if let Err(e) = FlowSpec::from_files(pairs.iter().map(|(k, v)| (k.as_str(), v.as_bytes()))) {
        let field = match &e {
            FsError::ValidationFailed { path, .. } => path.clone(),
            other => other.kind().to_string(),
        };
        return Outcome::fail(EXIT_INVALID, format!("flowctl: {field}: {e}\n"));
    }
    let dir = flow_path(sw, name);
    let run = || -> Result<u64, FsError> {
        fs.ensure_dir(&dir)?;
        // replacing a flow drops fields the new definition leaves out
        for old in fs.list(&dir)? {
            let staged = old != VERSION_FILE && old != COMMITTED_FILE && !old.starts_with("stats.");
            if staged && !pairs.iter().any(|(k, _)| *k == old) {
                fs.remove(&format!("{dir}/{old}"), false)?;
            }
        }
        for (k, v) in &pairs {
            fs.write(&format!("{dir}/{k}"), v.as_bytes())?;
        }
        fs.commit_flow(&dir)
    };
    match run() {
        Ok(v) => Outcome::ok(format!("{name}\tversion {v}\n")),
        Err(e) => fs_failure(e),
    }
}

fn del(fs: &dyn FsApi, sw: &str, name: &str) -> Outcome {
    match fs.remove(&flow_path(sw, name), true) {
        Ok(()) => Outcome::ok(String::new()),
        Err(FsError::NotFound(_)) => Outcome::fail(EXIT_UNKNOWN, format!("flowctl: no flow {name}\n")),
        Err(e) => fs_failure(e),
    }
}

/// `match.a=1,match.b=2` style summary; `*` when fully wildcarded.
pub fn format_match(spec: &FlowSpec) -> String {
    let m = match_to_schema(&spec.of_match);
    if m.is_empty() {
        return "*".into();
    }
    m.iter()
        .map(|(k, v)| format!("{}={v}", k.trim_start_matches("match.")))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn format_actions(spec: &FlowSpec) -> String {
    if spec.actions.is_empty() {
        return "drop".into();
    }
    spec.actions
        .iter()
        .map(|a| match a {
            Action::Output { port, .. } => format!("output:{}", format_output_port(*port)),
            Action::SetDlSrc(m) => format!("set_dl_src:{m}"),
            Action::SetDlDst(m) => format!("set_dl_dst:{m}"),
            Action::Unknown { action_type, .. } => format!("unknown:{action_type}"),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn list(fs: &dyn FsApi, only: Option<String>) -> Outcome {
    let sws = match only {
        Some(s) => vec![s],
        None => match switches(fs, NET_ROOT) {
            Ok(v) => v.into_iter().map(|(_, p)| p).collect(),
            Err(e) => return fs_failure(e),
        },
    };
    let mut out = String::new();
    for sw in sws {
        let short = sw.rsplit('/').next().unwrap_or_default().to_string();
        let mut names = match fs.list(&format!("{sw}/flows")) {
            Ok(n) => n,
            Err(e) => return fs_failure(e),
        };
        names.sort();
        for name in names {
            let Ok(Some(spec)) = read_committed(fs, &flow_path(&sw, &name)) else {
                continue;
            };
            out.push_str(&format!(
                "{short}\t{name}\t{}\t{}\t{}\t{}\n",
                spec.version,
                spec.priority,
                format_match(&spec),
                format_actions(&spec)
            ));
        }
    }
    Outcome::ok(out)
}

pub fn flowctl(fs: &dyn FsApi, args: &[String]) -> Outcome {
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    match a.as_slice() {
        ["add", sw, name, fields @ ..] => match check_switch(fs, sw) {
            Ok(sw) => add(fs, &sw, name, &args[3..3 + fields.len()]),
            Err(o) => o,
        },
        ["del", sw, name] => match check_switch(fs, sw) {
            Ok(sw) => del(fs, &sw, name),
            Err(o) => o,
        },
        ["list"] => list(fs, None),
        ["list", sw] => match check_switch(fs, sw) {
            Ok(sw) => list(fs, Some(sw)),
            Err(o) => o,
        },
        _ => Outcome::fail(EXIT_INVALID, format!("{USAGE}\n")),
    }
}
