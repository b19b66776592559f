//! Lexical classification of paths under `/net`.
//!
//! ```text
//! VIEW      := /net | VIEW/views/<name>
//! VIEW/hosts/...            free-form
//! VIEW/.slice/<file>        slice control files
//! VIEW/switches/<dpid>      SWITCH
//! SWITCH/ports/<n>          port, with fields and a `peer` link
//! SWITCH/flows/<name>       flow, with fields
//! SWITCH/events/<app>       event buffer of records
//! SWITCH/packets_out/<rec>  outgoing packet record
//! ```

use crate::error::{FsError, FsResult};
use crate::store::path;

pub const NET_ROOT: &str = "/net";
pub const SLICE_DIR: &str = ".slice";
pub const VIEW_CHILDREN: [&str; 3] = ["hosts", "switches", "views"];
pub const SWITCH_CHILDREN: [&str; 4] = ["events", "flows", "packets_out", "ports"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewDir {
    Hosts,
    Switches,
    Views,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchDir {
    Ports,
    Flows,
    Events,
    PacketsOut,
}

impl SwitchDir {
    fn from_name(s: &str) -> Option<SwitchDir> {
        match s {
            "ports" => Some(SwitchDir::Ports),
            "flows" => Some(SwitchDir::Flows),
            "events" => Some(SwitchDir::Events),
            "packets_out" => Some(SwitchDir::PacketsOut),
            _ => None,
        }
    }
}

/// A switch directory inside some view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchRef {
    pub view: String,
    pub name: String,
}

impl SwitchRef {
    pub fn path(&self) -> String {
        format!("{}/switches/{}", self.view, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    /// Not under `/net`; the schema imposes nothing.
    Outside,
    View {
        view: String,
    },
    ViewDir {
        view: String,
        dir: ViewDir,
    },
    /// Anything below a view's `hosts/`.
    Hosts {
        view: String,
    },
    Slice {
        view: String,
    },
    SliceFile {
        view: String,
        name: String,
    },
    Switch {
        sw: SwitchRef,
    },
    SwitchDir {
        sw: SwitchRef,
        dir: SwitchDir,
    },
    SwitchFile {
        sw: SwitchRef,
        name: String,
    },
    Port {
        sw: SwitchRef,
        port: String,
    },
    PortFile {
        sw: SwitchRef,
        port: String,
        name: String,
    },
    Flow {
        sw: SwitchRef,
        flow: String,
    },
    FlowFile {
        sw: SwitchRef,
        flow: String,
        name: String,
    },
    Buffer {
        sw: SwitchRef,
        buffer: String,
    },
    BufferFile {
        sw: SwitchRef,
        buffer: String,
        name: String,
    },
    Record {
        sw: SwitchRef,
        buffer: String,
        record: String,
    },
    RecordFile {
        sw: SwitchRef,
        buffer: String,
        record: String,
        name: String,
    },
    PacketsOutFile {
        sw: SwitchRef,
        name: String,
    },
    PacketOut {
        sw: SwitchRef,
        record: String,
    },
    PacketOutFile {
        sw: SwitchRef,
        record: String,
        name: String,
    },
    /// Under `/net` but at no schema point.
    Invalid,
}

impl Place {
    /// Directories that `mkdir` creates with schema-mandated children, and
    /// that removal always takes down recursively.
    pub fn is_object(&self) -> bool {
        matches!(
            self,
            Place::View { .. }
                | Place::Slice { .. }
                | Place::Switch { .. }
                | Place::Port { .. }
                | Place::Flow { .. }
                | Place::Buffer { .. }
                | Place::Record { .. }
                | Place::PacketOut { .. }
        )
    }
}

/// Classifies a canonical absolute path.
pub fn classify(p: &str) -> Place {
    let Ok(segs) = path::split(p) else {
        return Place::Invalid;
    };
    classify_segs(&segs)
}

pub fn classify_segs(segs: &[&str]) -> Place {
    if segs.first() != Some(&"net") {
        return Place::Outside;
    }
    let mut view = NET_ROOT.to_string();
    let mut i = 1;
    loop {
        let rest = &segs[i..];
        match rest {
            [] => return Place::View { view },
            ["views"] => return Place::ViewDir { view, dir: ViewDir::Views },
            ["views", name, ..] => {
                view = format!("{view}/views/{name}");
                i += 2;
            }
            ["hosts"] => return Place::ViewDir { view, dir: ViewDir::Hosts },
            ["hosts", ..] => return Place::Hosts { view },
            [SLICE_DIR] => return Place::Slice { view },
            [SLICE_DIR, name] => {
                return Place::SliceFile {
                    view,
                    name: name.to_string(),
                }
            }
            ["switches"] => {
                return Place::ViewDir {
                    view,
                    dir: ViewDir::Switches,
                }
            }
            ["switches", name, tail @ ..] => {
                let sw = SwitchRef {
                    view,
                    name: name.to_string(),
                };
                return classify_switch(sw, tail);
            }
            _ => return Place::Invalid,
        }
    }
}

fn classify_switch(sw: SwitchRef, tail: &[&str]) -> Place {
    let s = |x: &str| x.to_string();
    let Some(first) = tail.first() else {
        return Place::Switch { sw };
    };
    let Some(dir) = SwitchDir::from_name(first) else {
        return if tail.len() == 1 {
            Place::SwitchFile { sw, name: s(first) }
        } else {
            Place::Invalid
        };
    };
    match (dir, &tail[1..]) {
        (_, []) => Place::SwitchDir { sw, dir },
        (SwitchDir::Ports, [p]) => Place::Port { sw, port: s(p) },
        (SwitchDir::Ports, [p, f]) => Place::PortFile {
            sw,
            port: s(p),
            name: s(f),
        },
        (SwitchDir::Flows, [f]) => Place::Flow { sw, flow: s(f) },
        (SwitchDir::Flows, [f, n]) => Place::FlowFile {
            sw,
            flow: s(f),
            name: s(n),
        },
        (SwitchDir::Events, [b]) => Place::Buffer { sw, buffer: s(b) },
        (SwitchDir::Events, [b, r]) if is_record_name(r) => Place::Record {
            sw,
            buffer: s(b),
            record: s(r),
        },
        (SwitchDir::Events, [b, n]) => Place::BufferFile {
            sw,
            buffer: s(b),
            name: s(n),
        },
        (SwitchDir::Events, [b, r, n]) => Place::RecordFile {
            sw,
            buffer: s(b),
            record: s(r),
            name: s(n),
        },
        (SwitchDir::PacketsOut, ["error"]) => Place::PacketsOutFile { sw, name: s("error") },
        (SwitchDir::PacketsOut, [r]) => Place::PacketOut { sw, record: s(r) },
        (SwitchDir::PacketsOut, [r, n]) => Place::PacketOutFile {
            sw,
            record: s(r),
            name: s(n),
        },
        _ => Place::Invalid,
    }
}

pub const RECORD_NAME_LEN: usize = 20;

pub fn record_name(seq: u64) -> String {
    format!("{seq:020}")
}

pub fn is_record_name(s: &str) -> bool {
    s.len() == RECORD_NAME_LEN && s.bytes().all(|c| c.is_ascii_digit())
}

/// Switch directory names are the 64-bit datapath id in 16 lowercase hex digits.
pub fn dpid_name(dpid: u64) -> String {
    format!("{dpid:016x}")
}

pub fn parse_dpid_name(name: &str) -> FsResult<u64> {
    if name.len() != 16 || !name.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(FsError::InvalidName(format!("{name}: switch names are 16 lowercase hex digits")));
    }
    Ok(u64::from_str_radix(name, 16).expect("validated hex"))
}

/// Port directory names are canonical decimal port numbers 1..=65535.
pub fn parse_port_name(name: &str) -> FsResult<u16> {
    let bad = || FsError::InvalidName(format!("{name}: port names are decimal port numbers"));
    if name.is_empty() || name.starts_with('0') || !name.bytes().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    name.parse::<u16>().map_err(|_| bad())
}

pub fn switch_path(dpid: u64) -> String {
    format!("{NET_ROOT}/switches/{}", dpid_name(dpid))
}

pub fn port_path(switch: &str, port: u16) -> String {
    format!("{switch}/ports/{port}")
}

pub fn flow_path(switch: &str, flow: &str) -> String {
    format!("{switch}/flows/{flow}")
}

/// True if `target` names a port directory lexically.
pub fn is_port_path(target: &str) -> bool {
    match classify(target) {
        Place::Port { sw, port } => parse_dpid_name(&sw.name).is_ok() && parse_port_name(&port).is_ok(),
        _ => false,
    }
}
