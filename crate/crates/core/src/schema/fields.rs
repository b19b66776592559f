//! File payload grammars, the committed flow image and event records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::translate::{self, parse_mac, parse_uint, payload_text};
use crate::codec::{port, Action, FlowMod, FlowModCommand, OfMatch, PacketInReason, NO_BUFFER};
use crate::error::{FsError, FsResult};

pub use crate::codec::translate::{match_from_schema, match_to_schema};

pub const DEFAULT_PRIORITY: u16 = 32768;
pub const VERSION_FILE: &str = "version";
/// Schema-maintained image of the last commit, read by drivers.
pub const COMMITTED_FILE: &str = ".committed";
pub const ERROR_FILE: &str = "error";

/// Parses `a.b.c.d/len` (or a bare address, meaning `/32`) into `(address, prefix_len)`.
pub fn parse_cidr(text: &str) -> FsResult<(u32, u8)> {
    let c = translate::parse_cidr("cidr", text)?;
    Ok((c.addr(), c.prefix_len()))
}

pub fn format_cidr(addr: u32, prefix_len: u8) -> String {
    crate::addr::Ipv4Cidr::new(addr, prefix_len).to_string()
}

pub fn parse_bool(field: &str, text: &str) -> FsResult<bool> {
    match text {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(FsError::parse(field, format!("expected 0 or 1, got {text:?}"))),
    }
}

/// Output port: a number up to the last physical port, or a symbolic name.
pub fn parse_output_port(field: &str, text: &str) -> FsResult<u16> {
    match text {
        "controller" => Ok(port::CONTROLLER),
        "flood" => Ok(port::FLOOD),
        "all" => Ok(port::ALL),
        _ => {
            let v = parse_uint(field, text, 0xffff)? as u16;
            if v == 0 || v > port::MAX {
                return Err(FsError::range(field, format!("port {v} is not a physical port")));
            }
            Ok(v)
        }
    }
}

pub fn format_output_port(p: u16) -> String {
    match p {
        port::CONTROLLER => "controller".into(),
        port::FLOOD => "flood".into(),
        port::ALL => "all".into(),
        port::IN_PORT => "in_port".into(),
        n => n.to_string(),
    }
}

/// `action.<N>.<type>` split into `(N, type)`.
pub fn split_action_field(name: &str) -> Option<(u32, &str)> {
    let rest = name.strip_prefix("action.")?;
    let (idx, ty) = rest.split_once('.')?;
    if idx.is_empty() || !idx.bytes().all(|c| c.is_ascii_digit()) || (idx.len() > 1 && idx.starts_with('0')) {
        return None;
    }
    Some((idx.parse().ok()?, ty))
}

fn parse_action(field: &str, ty: &str, text: &str) -> FsResult<Action> {
    match ty {
        "output" => Ok(Action::output(parse_output_port(field, text)?)),
        "set_dl_src" => Ok(Action::SetDlSrc(parse_mac(field, text)?)),
        "set_dl_dst" => Ok(Action::SetDlDst(parse_mac(field, text)?)),
        _ => Err(FsError::UnknownField(field.to_string())),
    }
}

/// Validates one flow file. `version`, `error` and stats files accept their
/// own grammars; everything else must be a match, action or parameter field.
pub fn validate_flow_field(name: &str, raw: &[u8]) -> FsResult<()> {
    if name == ERROR_FILE {
        return Ok(());
    }
    let text = payload_text(name, raw)?;
    if let Some(m) = name.strip_prefix("match.") {
        return translate::set_match_field(&mut OfMatch::all(), m, text);
    }
    if let Some((_, ty)) = split_action_field(name) {
        return parse_action(name, ty, text).map(drop);
    }
    match name {
        "priority" | "idle_timeout" | "hard_timeout" => parse_uint(name, text, 0xffff).map(drop),
        "stats.packet_count" | "stats.byte_count" => parse_uint(name, text, u64::MAX).map(drop),
        VERSION_FILE => Ok(()),
        _ => Err(FsError::UnknownField(name.to_string())),
    }
}

/// A committed flow entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub of_match: OfMatch,
    pub priority: u16,
    pub idle_timeout: u16,
    pub hard_timeout: u16,
    /// In ascending action index order. Empty means drop.
    pub actions: Vec<Action>,
    pub version: u64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            of_match: OfMatch::all(),
            priority: DEFAULT_PRIORITY,
            idle_timeout: 0,
            hard_timeout: 0,
            actions: Vec::new(),
            version: 0,
        }
    }
}

impl FlowSpec {
    /// Builds a spec from the files of a flow directory, validating the set
    /// as a whole. Bookkeeping files (`version`, `error`, stats, the image)
    /// are ignored. The error names the offending field.
    pub fn from_files<'a>(files: impl IntoIterator<Item = (&'a str, &'a [u8])>) -> FsResult<FlowSpec> {
        let mut spec = FlowSpec::default();
        let mut actions: BTreeMap<u32, (String, Action)> = BTreeMap::new();
        for (name, raw) in files {
            if matches!(name, VERSION_FILE | ERROR_FILE | COMMITTED_FILE) || name.starts_with("stats.") {
                continue;
            }
            let text = payload_text(name, raw)?;
            if let Some(m) = name.strip_prefix("match.") {
                translate::set_match_field(&mut spec.of_match, m, text)?;
            } else if let Some((idx, ty)) = split_action_field(name) {
                let a = parse_action(name, ty, text)?;
                if let Some((prev, _)) = actions.insert(idx, (name.to_string(), a)) {
                    return Err(FsError::ValidationFailed {
                        path: name.to_string(),
                        reason: format!("action index {idx} already given by {prev}"),
                    });
                }
            } else {
                match name {
                    "priority" => spec.priority = parse_uint(name, text, 0xffff)? as u16,
                    "idle_timeout" => spec.idle_timeout = parse_uint(name, text, 0xffff)? as u16,
                    "hard_timeout" => spec.hard_timeout = parse_uint(name, text, 0xffff)? as u16,
                    _ => return Err(FsError::UnknownField(name.to_string())),
                }
            }
        }
        spec.actions = actions.into_values().map(|(_, a)| a).collect();
        check_prerequisites(&spec.of_match)?;
        Ok(spec)
    }

    /// Field files that reproduce this spec (without `version`).
    pub fn to_files(&self) -> BTreeMap<String, String> {
        let mut out = match_to_schema(&self.of_match);
        if self.priority != DEFAULT_PRIORITY {
            out.insert("priority".into(), self.priority.to_string());
        }
        if self.idle_timeout != 0 {
            out.insert("idle_timeout".into(), self.idle_timeout.to_string());
        }
        if self.hard_timeout != 0 {
            out.insert("hard_timeout".into(), self.hard_timeout.to_string());
        }
        for (i, a) in self.actions.iter().enumerate() {
            let (ty, v) = match a {
                Action::Output { port, .. } => ("output", format_output_port(*port)),
                Action::SetDlSrc(m) => ("set_dl_src", m.to_string()),
                Action::SetDlDst(m) => ("set_dl_dst", m.to_string()),
                Action::Unknown { .. } => continue,
            };
            out.insert(format!("action.{i}.{ty}"), v);
        }
        out
    }

    pub fn flow_mod(&self, command: FlowModCommand) -> FlowMod {
        FlowMod {
            of_match: self.of_match,
            cookie: 0,
            command,
            idle_timeout: self.idle_timeout,
            hard_timeout: self.hard_timeout,
            priority: self.priority,
            buffer_id: NO_BUFFER,
            out_port: port::NONE,
            flags: 0,
            actions: if matches!(command, FlowModCommand::Delete | FlowModCommand::DeleteStrict) {
                Vec::new()
            } else {
                self.actions.clone()
            },
        }
    }

    /// True when two specs would occupy the same table slot.
    pub fn same_slot(&self, other: &FlowSpec) -> bool {
        self.of_match == other.of_match && self.priority == other.priority
    }
}

/// Transport fields need an IPv4 TCP/UDP context, network fields an IPv4 or
/// ARP context, unless the context field is itself wildcarded.
pub fn check_prerequisites(m: &OfMatch) -> FsResult<()> {
    let fail = |field: &str, reason: String| {
        Err(FsError::ValidationFailed {
            path: format!("match.{field}"),
            reason,
        })
    };
    let has_tp = m.tp_src.is_some() || m.tp_dst.is_some();
    let tp_field = if m.tp_src.is_some() { "tp_src" } else { "tp_dst" };
    if has_tp {
        if let Some(t) = m.dl_type.filter(|&t| t != 0x0800) {
            return fail(tp_field, format!("requires dl_type 0x0800, flow has {t:#06x}"));
        }
        if let Some(p) = m.nw_proto.filter(|&p| p != 6 && p != 17) {
            return fail(tp_field, format!("requires nw_proto 6 or 17, flow has {p}"));
        }
    }
    let nw = [
        ("nw_src", m.nw_src.is_some()),
        ("nw_dst", m.nw_dst.is_some()),
        ("nw_proto", m.nw_proto.is_some()),
        ("nw_tos", m.nw_tos.is_some()),
    ];
    if let Some((f, _)) = nw.iter().find(|(_, present)| *present) {
        if let Some(t) = m.dl_type.filter(|&t| t != 0x0800 && t != 0x0806) {
            return fail(f, format!("requires dl_type 0x0800 or 0x0806, flow has {t:#06x}"));
        }
    }
    Ok(())
}

/// One packet-in as stored in an event buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub buffer_id: Option<u32>,
    pub in_port: u16,
    pub reason: PacketInReason,
    pub total_len: u16,
    pub data: Vec<u8>,
}

impl EventRecord {
    pub fn from_packet_in(p: &crate::codec::PacketIn) -> EventRecord {
        EventRecord {
            buffer_id: (p.buffer_id != NO_BUFFER).then_some(p.buffer_id),
            in_port: p.in_port,
            reason: p.reason,
            total_len: p.total_len,
            data: p.data.clone(),
        }
    }

    pub fn to_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let reason = match self.reason {
            PacketInReason::NoMatch => "no_match",
            _ => "action",
        };
        vec![
            (
                "buffer_id",
                self.buffer_id.map_or("none".to_string(), |b| b.to_string()).into_bytes(),
            ),
            ("data", self.data.clone()),
            ("in_port", self.in_port.to_string().into_bytes()),
            ("reason", reason.as_bytes().to_vec()),
            ("total_len", self.total_len.to_string().into_bytes()),
        ]
    }

    /// Reassembles a record from its files.
    pub fn from_files(mut get: impl FnMut(&str) -> FsResult<Vec<u8>>) -> FsResult<EventRecord> {
        let text = |name: &str, raw: Vec<u8>| -> FsResult<String> { Ok(payload_text(name, &raw)?.to_string()) };
        let buffer_id = match text("buffer_id", get("buffer_id")?)?.as_str() {
            "none" => None,
            t => Some(parse_uint("buffer_id", t, u64::from(u32::MAX))? as u32),
        };
        let in_port = parse_uint("in_port", &text("in_port", get("in_port")?)?, 0xffff)? as u16;
        let reason = match text("reason", get("reason")?)?.as_str() {
            "no_match" => PacketInReason::NoMatch,
            "action" => PacketInReason::Action,
            t => return Err(FsError::parse("reason", format!("unknown reason {t:?}"))),
        };
        let total_len = parse_uint("total_len", &text("total_len", get("total_len")?)?, 0xffff)? as u16;
        Ok(EventRecord {
            buffer_id,
            in_port,
            reason,
            total_len,
            data: get("data")?,
        })
    }
}

pub fn validate_record_file(name: &str, raw: &[u8]) -> FsResult<()> {
    if name == "data" {
        return Ok(());
    }
    let text = payload_text(name, raw)?;
    match name {
        "buffer_id" if text == "none" => Ok(()),
        "buffer_id" => parse_uint(name, text, u64::from(u32::MAX)).map(drop),
        "in_port" | "total_len" => parse_uint(name, text, 0xffff).map(drop),
        "reason" if matches!(text, "no_match" | "action") => Ok(()),
        "reason" => Err(FsError::parse(name, "expected no_match or action")),
        _ => Err(FsError::UnknownField(name.to_string())),
    }
}

pub fn validate_port_file(name: &str, raw: &[u8]) -> FsResult<()> {
    let text = payload_text(name, raw)?;
    match name {
        "hw_addr" => parse_mac(name, text).map(drop),
        "config.port_down" => parse_bool(name, text).map(drop),
        "config.port_status" if matches!(text, "up" | "down") => Ok(()),
        "config.port_status" => Err(FsError::parse(name, "expected up or down")),
        "stats.rx_packets" | "stats.tx_packets" => parse_uint(name, text, u64::MAX).map(drop),
        "name" => Ok(()),
        _ => Err(FsError::UnknownField(name.to_string())),
    }
}

pub fn validate_switch_file(name: &str, raw: &[u8]) -> FsResult<()> {
    let text = payload_text(name, raw)?;
    match name {
        "capabilities" => parse_uint(name, text, u64::from(u32::MAX)).map(drop),
        "n_buffers" => parse_uint(name, text, u64::from(u32::MAX)).map(drop),
        "n_tables" => parse_uint(name, text, 0xff).map(drop),
        "status" if matches!(text, "connected" | "disconnected") => Ok(()),
        "status" => Err(FsError::parse(name, "expected connected or disconnected")),
        _ => Err(FsError::UnknownField(name.to_string())),
    }
}

/// `in_port` of a packet-out record: a port number, `none` or `controller`.
pub fn parse_packet_out_in_port(text: &str) -> FsResult<u16> {
    match text {
        "none" => Ok(port::NONE),
        "controller" => Ok(port::CONTROLLER),
        t => parse_uint("in_port", t, 0xffff).map(|v| v as u16),
    }
}

pub fn validate_packet_out_file(name: &str, raw: &[u8]) -> FsResult<()> {
    if matches!(name, "data" | ERROR_FILE) {
        return Ok(());
    }
    let text = payload_text(name, raw)?;
    if let Some((_, ty)) = split_action_field(name) {
        return parse_action(name, ty, text).map(drop);
    }
    match name {
        "in_port" => parse_packet_out_in_port(text).map(drop),
        "send" => parse_bool(name, text).map(drop),
        _ => Err(FsError::UnknownField(name.to_string())),
    }
}

/// Parses the actions of a packet-out record from its files.
pub fn packet_out_actions<'a>(files: impl IntoIterator<Item = (&'a str, &'a [u8])>) -> FsResult<Vec<Action>> {
    let mut actions = BTreeMap::new();
    for (name, raw) in files {
        if let Some((idx, ty)) = split_action_field(name) {
            actions.insert(idx, parse_action(name, ty, payload_text(name, raw)?)?);
        }
    }
    Ok(actions.into_values().collect())
}

pub fn validate_slice_file(name: &str, raw: &[u8]) -> FsResult<()> {
    let text = payload_text(name, raw)?;
    if name == "members" {
        for line in text.lines().filter(|l| !l.is_empty()) {
            crate::schema::layout::parse_dpid_name(line).map_err(|_| FsError::parse(name, format!("{line:?} is not a switch name")))?;
        }
        return Ok(());
    }
    if let Some(m) = name.strip_prefix("flowspace.match.") {
        return translate::set_match_field(&mut OfMatch::all(), m, text);
    }
    Err(FsError::UnknownField(name.to_string()))
}
