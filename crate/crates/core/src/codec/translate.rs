//! Translation between `match.*` text fields and [`OfMatch`].

use std::collections::BTreeMap;

use crate::addr::{Ipv4Cidr, MacAddr};
use crate::error::{FsError, FsResult};

use super::ofmatch::{OfMatch, VLAN_NONE};

/// Match field names in wire order, without the `match.` prefix.
pub const MATCH_FIELDS: [&str; 12] = [
    "in_port",
    "dl_src",
    "dl_dst",
    "dl_vlan",
    "dl_vlan_pcp",
    "dl_type",
    "nw_tos",
    "nw_proto",
    "nw_src",
    "nw_dst",
    "tp_src",
    "tp_dst",
];

/// Strips one optional trailing newline and requires UTF-8.
pub fn payload_text<'a>(field: &str, raw: &'a [u8]) -> FsResult<&'a str> {
    let raw = raw.strip_suffix(b"\n").unwrap_or(raw);
    std::str::from_utf8(raw).map_err(|_| FsError::parse(field, "not UTF-8"))
}

/// Unsigned integer in decimal or `0x` hex, bounded by `max`.
pub fn parse_uint(field: &str, text: &str, max: u64) -> FsResult<u64> {
    let (digits, radix) = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(h) => (h, 16),
        None => (text, 10),
    };
    if digits.is_empty() || !digits.chars().all(|c| c.is_digit(radix)) {
        return Err(FsError::parse(field, format!("expected an unsigned integer, got {text:?}")));
    }
    let v = u64::from_str_radix(digits, radix).map_err(|_| FsError::range(field, format!("{text} is out of range")))?;
    if v > max {
        return Err(FsError::range(field, format!("{text} exceeds {max}")));
    }
    Ok(v)
}

pub fn parse_mac(field: &str, text: &str) -> FsResult<MacAddr> {
    text.parse().map_err(|e: crate::addr::AddrParseError| FsError::parse(field, e.0))
}

pub fn parse_cidr(field: &str, text: &str) -> FsResult<Ipv4Cidr> {
    text.parse().map_err(|e: crate::addr::AddrParseError| FsError::parse(field, e.0))
}

/// Parses `text` into the match field `name` (no `match.` prefix).
pub fn set_match_field(m: &mut OfMatch, name: &str, text: &str) -> FsResult<()> {
    let full = format!("match.{name}");
    let f = full.as_str();
    match name {
        "in_port" => m.in_port = Some(parse_uint(f, text, 0xffff)? as u16),
        "dl_src" => m.dl_src = Some(parse_mac(f, text)?),
        "dl_dst" => m.dl_dst = Some(parse_mac(f, text)?),
        "dl_vlan" => {
            let v = parse_uint(f, text, 0xffff)? as u16;
            if v > 0x0fff && v != VLAN_NONE {
                return Err(FsError::range(f, "VLAN id must be 0..4095 or 65535 (untagged)"));
            }
            m.dl_vlan = Some(v);
        }
        "dl_vlan_pcp" => m.dl_vlan_pcp = Some(parse_uint(f, text, 7)? as u8),
        "dl_type" => m.dl_type = Some(parse_uint(f, text, 0xffff)? as u16),
        "nw_tos" => {
            let v = parse_uint(f, text, 0xff)? as u8;
            if v & 0x03 != 0 {
                return Err(FsError::range(f, "only the six DSCP bits may be set"));
            }
            m.nw_tos = Some(v);
        }
        "nw_proto" => m.nw_proto = Some(parse_uint(f, text, 0xff)? as u8),
        "nw_src" => m.nw_src = Some(parse_cidr(f, text)?).filter(|c| c.prefix_len() > 0),
        "nw_dst" => m.nw_dst = Some(parse_cidr(f, text)?).filter(|c| c.prefix_len() > 0),
        "tp_src" => m.tp_src = Some(parse_uint(f, text, 0xffff)? as u16),
        "tp_dst" => m.tp_dst = Some(parse_uint(f, text, 0xffff)? as u16),
        _ => return Err(FsError::UnknownField(full)),
    }
    Ok(())
}

/// Canonical text of one field, `None` when wildcarded.
pub fn match_field_text(m: &OfMatch, name: &str) -> Option<String> {
    match name {
        "in_port" => m.in_port.map(|v| v.to_string()),
        "dl_src" => m.dl_src.map(|v| v.to_string()),
        "dl_dst" => m.dl_dst.map(|v| v.to_string()),
        "dl_vlan" => m.dl_vlan.map(|v| v.to_string()),
        "dl_vlan_pcp" => m.dl_vlan_pcp.map(|v| v.to_string()),
        "dl_type" => m.dl_type.map(|v| format!("{v:#06x}")),
        "nw_tos" => m.nw_tos.map(|v| v.to_string()),
        "nw_proto" => m.nw_proto.map(|v| v.to_string()),
        "nw_src" => m.nw_src.map(|v| v.to_string()),
        "nw_dst" => m.nw_dst.map(|v| v.to_string()),
        "tp_src" => m.tp_src.map(|v| v.to_string()),
        "tp_dst" => m.tp_dst.map(|v| v.to_string()),
        _ => None,
    }
}

/// Builds a match from `match.<field>` entries; absent fields are wildcards.
/// Keys without the `match.` prefix are ignored.
pub fn match_from_schema<'a>(fields: impl IntoIterator<Item = (&'a str, &'a str)>) -> FsResult<OfMatch> {
    let mut m = OfMatch::all();
    for (k, v) in fields {
        if let Some(name) = k.strip_prefix("match.") {
            set_match_field(&mut m, name, v)?;
        }
    }
    Ok(m)
}

/// Inverse of [`match_from_schema`]: one `match.<field>` entry per constrained field.
pub fn match_to_schema(m: &OfMatch) -> BTreeMap<String, String> {
    MATCH_FIELDS
        .iter()
        .filter_map(|f| match_field_text(m, f).map(|t| (format!("match.{f}"), t)))
        .collect()
}
