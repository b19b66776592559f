//! OpenFlow 1.0 wire codec.
//!
//! Every multi-byte field is big-endian. `serialize` fills in the header
//! length and zeroes wildcarded match bytes, so two equal messages always
//! serialize to the same bytes.

pub mod ofmatch;
pub mod packet;
pub mod translate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::addr::MacAddr;
pub use ofmatch::{wire_matches, FlowKey, OfMatch, MATCH_LEN, VLAN_NONE};

pub const OFP_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const PHY_PORT_LEN: usize = 48;
pub const FEATURES_REPLY_LEN: usize = 32;
pub const PACKET_IN_LEN: usize = 18;
pub const PACKET_OUT_LEN: usize = 16;
pub const FLOW_MOD_LEN: usize = 72;
pub const PORT_MOD_LEN: usize = 32;
pub const PORT_STATUS_LEN: usize = 64;
pub const MAX_PORT_NAME_LEN: usize = 16;
/// `buffer_id` meaning the frame is carried inline.
pub const NO_BUFFER: u32 = 0xffff_ffff;

pub mod msg_type {
    pub const HELLO: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const ECHO_REQUEST: u8 = 2;
    pub const ECHO_REPLY: u8 = 3;
    pub const VENDOR: u8 = 4;
    pub const FEATURES_REQUEST: u8 = 5;
    pub const FEATURES_REPLY: u8 = 6;
    pub const PACKET_IN: u8 = 10;
    pub const PORT_STATUS: u8 = 12;
    pub const PACKET_OUT: u8 = 13;
    pub const FLOW_MOD: u8 = 14;
    pub const PORT_MOD: u8 = 15;
}

/// Reserved port numbers.
pub mod port {
    pub const MAX: u16 = 0xff00;
    pub const IN_PORT: u16 = 0xfff8;
    pub const TABLE: u16 = 0xfff9;
    pub const NORMAL: u16 = 0xfffa;
    pub const FLOOD: u16 = 0xfffb;
    pub const ALL: u16 = 0xfffc;
    pub const CONTROLLER: u16 = 0xfffd;
    pub const LOCAL: u16 = 0xfffe;
    pub const NONE: u16 = 0xffff;
}

pub const PORT_CONFIG_DOWN: u32 = 1 << 0;
pub const PORT_STATE_LINK_DOWN: u32 = 1 << 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported protocol version {0:#04x}")]
    BadVersion(u8),
    #[error("malformed {msg} body: {reason}")]
    MalformedBody { msg: &'static str, reason: String },
    #[error("message of {0} bytes exceeds the 16-bit length field")]
    Oversize(usize),
    #[error("inconsistent message: {0}")]
    Inconsistent(String),
}

fn malformed(msg: &'static str, reason: impl Into<String>) -> CodecError {
    CodecError::MalformedBody {
        msg,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Output {
        port: u16,
        max_len: u16,
    },
    SetDlSrc(MacAddr),
    SetDlDst(MacAddr),
    /// Any other action, carried as its raw body (everything after the
    /// 4-byte type/length header).
    Unknown {
        action_type: u16,
        body: Vec<u8>,
    },
}

impl Action {
    pub fn output(port: u16) -> Action {
        Action::Output { port, max_len: 0xffff }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhyPort {
    pub port_no: u16,
    pub hw_addr: MacAddr,
    /// At most 15 bytes; the wire field is NUL-padded to 16.
    pub name: String,
    pub config: u32,
    pub state: u32,
    pub curr: u32,
    pub advertised: u32,
    pub supported: u32,
    pub peer: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturesReply {
    pub datapath_id: u64,
    pub n_buffers: u32,
    pub n_tables: u8,
    pub capabilities: u32,
    pub actions: u32,
    pub ports: Vec<PhyPort>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketInReason {
    NoMatch,
    Action,
    Other(u8),
}

impl PacketInReason {
    fn code(self) -> u8 {
        match self {
            PacketInReason::NoMatch => 0,
            PacketInReason::Action => 1,
            PacketInReason::Other(c) => c,
        }
    }

    fn from_code(c: u8) -> Self {
        match c {
            0 => PacketInReason::NoMatch,
            1 => PacketInReason::Action,
            c => PacketInReason::Other(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketIn {
    pub buffer_id: u32,
    pub total_len: u16,
    pub in_port: u16,
    pub reason: PacketInReason,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketOut {
    pub buffer_id: u32,
    pub in_port: u16,
    pub actions: Vec<Action>,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowModCommand {
    Add,
    Modify,
    ModifyStrict,
    Delete,
    DeleteStrict,
    Other(u16),
}

impl FlowModCommand {
    fn code(self) -> u16 {
        match self {
            FlowModCommand::Add => 0,
            FlowModCommand::Modify => 1,
            FlowModCommand::ModifyStrict => 2,
            FlowModCommand::Delete => 3,
            FlowModCommand::DeleteStrict => 4,
            FlowModCommand::Other(c) => c,
        }
    }

    fn from_code(c: u16) -> Self {
        match c {
            0 => FlowModCommand::Add,
            1 => FlowModCommand::Modify,
            2 => FlowModCommand::ModifyStrict,
            3 => FlowModCommand::Delete,
            4 => FlowModCommand::DeleteStrict,
            c => FlowModCommand::Other(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMod {
    pub of_match: OfMatch,
    pub cookie: u64,
    pub command: FlowModCommand,
    pub idle_timeout: u16,
    pub hard_timeout: u16,
    pub priority: u16,
    pub buffer_id: u32,
    pub out_port: u16,
    pub flags: u16,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortMod {
    pub port_no: u16,
    pub hw_addr: MacAddr,
    pub config: u32,
    pub mask: u32,
    pub advertise: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortStatusReason {
    Add,
    Delete,
    Modify,
    Other(u8),
}

impl PortStatusReason {
    fn code(self) -> u8 {
        match self {
            PortStatusReason::Add => 0,
            PortStatusReason::Delete => 1,
            PortStatusReason::Modify => 2,
            PortStatusReason::Other(c) => c,
        }
    }

    fn from_code(c: u8) -> Self {
        match c {
            0 => PortStatusReason::Add,
            1 => PortStatusReason::Delete,
            2 => PortStatusReason::Modify,
            c => PortStatusReason::Other(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortStatus {
    pub reason: PortStatusReason,
    pub port: PhyPort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OfBody {
    Hello,
    EchoRequest(Vec<u8>),
    EchoReply(Vec<u8>),
    FeaturesRequest,
    FeaturesReply(FeaturesReply),
    PacketIn(PacketIn),
    PacketOut(PacketOut),
    FlowMod(FlowMod),
    PortMod(PortMod),
    PortStatus(PortStatus),
    /// A message type this codec does not interpret.
    Unknown {
        msg_type: u8,
        body: Vec<u8>,
    },
}

impl OfBody {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            OfBody::Hello => HELLO,
            OfBody::EchoRequest(_) => ECHO_REQUEST,
            OfBody::EchoReply(_) => ECHO_REPLY,
            OfBody::FeaturesRequest => FEATURES_REQUEST,
            OfBody::FeaturesReply(_) => FEATURES_REPLY,
            OfBody::PacketIn(_) => PACKET_IN,
            OfBody::PacketOut(_) => PACKET_OUT,
            OfBody::FlowMod(_) => FLOW_MOD,
            OfBody::PortMod(_) => PORT_MOD,
            OfBody::PortStatus(_) => PORT_STATUS,
            OfBody::Unknown { msg_type, .. } => *msg_type,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OfBody::Hello => "hello",
            OfBody::EchoRequest(_) => "echo_request",
            OfBody::EchoReply(_) => "echo_reply",
            OfBody::FeaturesRequest => "features_request",
            OfBody::FeaturesReply(_) => "features_reply",
            OfBody::PacketIn(_) => "packet_in",
            OfBody::PacketOut(_) => "packet_out",
            OfBody::FlowMod(_) => "flow_mod",
            OfBody::PortMod(_) => "port_mod",
            OfBody::PortStatus(_) => "port_status",
            OfBody::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfMessage {
    pub xid: u32,
    pub body: OfBody,
}

impl OfMessage {
    pub fn new(xid: u32, body: OfBody) -> Self {
        OfMessage { xid, body }
    }
}

// ---- serialization ----

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_actions(out: &mut Vec<u8>, actions: &[Action]) -> Result<(), CodecError> {
    for a in actions {
        match a {
            Action::Output { port, max_len } => {
                put_u16(out, 0);
                put_u16(out, 8);
                put_u16(out, *port);
                put_u16(out, *max_len);
            }
            Action::SetDlSrc(m) | Action::SetDlDst(m) => {
                put_u16(out, if matches!(a, Action::SetDlSrc(_)) { 4 } else { 5 });
                put_u16(out, 16);
                out.extend_from_slice(&m.0);
                out.extend_from_slice(&[0; 6]);
            }
            Action::Unknown { action_type, body } => {
                let len = 4 + body.len();
                if len % 8 != 0 || len > u16::MAX as usize {
                    return Err(CodecError::Inconsistent(format!(
                        "action type {action_type} length {len} is not a multiple of 8"
                    )));
                }
                if matches!(action_type, 0 | 4 | 5) {
                    return Err(CodecError::Inconsistent(format!(
                        "action type {action_type} has a typed representation"
                    )));
                }
                put_u16(out, *action_type);
                put_u16(out, len as u16);
                out.extend_from_slice(body);
            }
        }
    }
    Ok(())
}

fn put_phy_port(out: &mut Vec<u8>, p: &PhyPort) -> Result<(), CodecError> {
    put_u16(out, p.port_no);
    out.extend_from_slice(&p.hw_addr.0);
    let name = p.name.as_bytes();
    if name.len() >= MAX_PORT_NAME_LEN || name.contains(&0) {
        return Err(CodecError::Inconsistent(format!("port name {:?} does not fit", p.name)));
    }
    let mut buf = [0u8; MAX_PORT_NAME_LEN];
    buf[..name.len()].copy_from_slice(name);
    out.extend_from_slice(&buf);
    for v in [p.config, p.state, p.curr, p.advertised, p.supported, p.peer] {
        put_u32(out, v);
    }
    Ok(())
}

/// Serializes one message, header included.
pub fn serialize(msg: &OfMessage) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(64);
    out.push(OFP_VERSION);
    out.push(msg.body.msg_type());
    put_u16(&mut out, 0);
    put_u32(&mut out, msg.xid);
    match &msg.body {
        OfBody::Hello | OfBody::FeaturesRequest => {}
        OfBody::EchoRequest(d) | OfBody::EchoReply(d) => out.extend_from_slice(d),
        OfBody::FeaturesReply(f) => {
            out.extend_from_slice(&f.datapath_id.to_be_bytes());
            put_u32(&mut out, f.n_buffers);
            out.push(f.n_tables);
            out.extend_from_slice(&[0; 3]);
            put_u32(&mut out, f.capabilities);
            put_u32(&mut out, f.actions);
            for p in &f.ports {
                put_phy_port(&mut out, p)?;
            }
        }
        OfBody::PacketIn(p) => {
            put_u32(&mut out, p.buffer_id);
            put_u16(&mut out, p.total_len);
            put_u16(&mut out, p.in_port);
            out.push(p.reason.code());
            out.push(0);
            out.extend_from_slice(&p.data);
        }
        OfBody::PacketOut(p) => {
            put_u32(&mut out, p.buffer_id);
            put_u16(&mut out, p.in_port);
            let at = out.len();
            put_u16(&mut out, 0);
            put_actions(&mut out, &p.actions)?;
            let alen = out.len() - at - 2;
            if alen > u16::MAX as usize {
                return Err(CodecError::Oversize(alen));
            }
            out[at..at + 2].copy_from_slice(&(alen as u16).to_be_bytes());
            out.extend_from_slice(&p.data);
        }
        OfBody::FlowMod(f) => {
            f.of_match.encode(&mut out);
            out.extend_from_slice(&f.cookie.to_be_bytes());
            put_u16(&mut out, f.command.code());
            put_u16(&mut out, f.idle_timeout);
            put_u16(&mut out, f.hard_timeout);
            put_u16(&mut out, f.priority);
            put_u32(&mut out, f.buffer_id);
            put_u16(&mut out, f.out_port);
            put_u16(&mut out, f.flags);
            put_actions(&mut out, &f.actions)?;
        }
        OfBody::PortMod(p) => {
            put_u16(&mut out, p.port_no);
            out.extend_from_slice(&p.hw_addr.0);
            put_u32(&mut out, p.config);
            put_u32(&mut out, p.mask);
            put_u32(&mut out, p.advertise);
            out.extend_from_slice(&[0; 4]);
        }
        OfBody::PortStatus(p) => {
            out.push(p.reason.code());
            out.extend_from_slice(&[0; 7]);
            put_phy_port(&mut out, &p.port)?;
        }
        OfBody::Unknown { body, .. } => out.extend_from_slice(body),
    }
    if out.len() > u16::MAX as usize {
        return Err(CodecError::Oversize(out.len()));
    }
    let len = out.len() as u16;
    out[2..4].copy_from_slice(&len.to_be_bytes());
    Ok(out)
}

// ---- parsing ----

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
    msg: &'static str,
}

impl<'a> Reader<'a> {
    fn new(b: &'a [u8], msg: &'static str) -> Self {
        Reader { b, pos: 0, msg }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.b.len() - self.pos < n {
            return Err(malformed(self.msg, format!("needs {} more bytes", n - (self.b.len() - self.pos))));
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let s = self.take(2)?;
        Ok(u16::from_be_bytes([s[0], s[1]]))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let s = self.take(4)?;
        Ok(u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        let s = self.take(8)?;
        Ok(u64::from_be_bytes(s.try_into().unwrap()))
    }

    fn mac(&mut self) -> Result<MacAddr, CodecError> {
        Ok(MacAddr(self.take(6)?.try_into().unwrap()))
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.b[self.pos..];
        self.pos = self.b.len();
        s
    }

    fn remaining(&self) -> usize {
        self.b.len() - self.pos
    }

    fn finish(&self) -> Result<(), CodecError> {
        if self.remaining() != 0 {
            return Err(malformed(self.msg, format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

fn parse_actions(b: &[u8], msg: &'static str) -> Result<Vec<Action>, CodecError> {
    let mut r = Reader::new(b, msg);
    let mut out = Vec::new();
    while r.remaining() > 0 {
        let t = r.u16()?;
        let len = r.u16()? as usize;
        if len < 8 || !len.is_multiple_of(8) {
            return Err(malformed(msg, format!("action length {len}")));
        }
        let body = r.take(len - 4)?;
        let mut br = Reader::new(body, msg);
        let a = match (t, len) {
            (0, 8) => Action::Output {
                port: br.u16()?,
                max_len: br.u16()?,
            },
            (4, 16) => Action::SetDlSrc(br.mac()?),
            (5, 16) => Action::SetDlDst(br.mac()?),
            (0 | 4 | 5, _) => return Err(malformed(msg, format!("action type {t} with length {len}"))),
            _ => Action::Unknown {
                action_type: t,
                body: body.to_vec(),
            },
        };
        out.push(a);
    }
    Ok(out)
}

fn parse_phy_port(r: &mut Reader<'_>) -> Result<PhyPort, CodecError> {
    let port_no = r.u16()?;
    let hw_addr = r.mac()?;
    let raw = r.take(MAX_PORT_NAME_LEN)?;
    let end = raw.iter().position(|&c| c == 0).unwrap_or(raw.len());
    let name = String::from_utf8_lossy(&raw[..end]).into_owned();
    Ok(PhyPort {
        port_no,
        hw_addr,
        name,
        config: r.u32()?,
        state: r.u32()?,
        curr: r.u32()?,
        advertised: r.u32()?,
        supported: r.u32()?,
        peer: r.u32()?,
    })
}

/// Reads the 8-byte header: `(msg_type, length, xid)`.
pub fn peek_header(bytes: &[u8]) -> Result<(u8, usize, u32), CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if bytes[0] != OFP_VERSION {
        return Err(CodecError::BadVersion(bytes[0]));
    }
    let len = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
    if len < HEADER_LEN {
        return Err(malformed("header", format!("length {len} below header size")));
    }
    let xid = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    Ok((bytes[1], len, xid))
}

/// Parses one message from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn parse(bytes: &[u8]) -> Result<(OfMessage, usize), CodecError> {
    let (t, len, xid) = peek_header(bytes)?;
    if bytes.len() < len {
        return Err(CodecError::Truncated {
            needed: len,
            available: bytes.len(),
        });
    }
    let body = &bytes[HEADER_LEN..len];
    use msg_type::*;
    let body = match t {
        HELLO => OfBody::Hello,
        ECHO_REQUEST => OfBody::EchoRequest(body.to_vec()),
        ECHO_REPLY => OfBody::EchoReply(body.to_vec()),
        FEATURES_REQUEST => {
            if !body.is_empty() {
                return Err(malformed("features_request", "unexpected body"));
            }
            OfBody::FeaturesRequest
        }
        FEATURES_REPLY => {
            let mut r = Reader::new(body, "features_reply");
            let datapath_id = r.u64()?;
            let n_buffers = r.u32()?;
            let n_tables = r.u8()?;
            r.take(3)?;
            let capabilities = r.u32()?;
            let actions = r.u32()?;
            if !r.remaining().is_multiple_of(PHY_PORT_LEN) {
                return Err(malformed("features_reply", "port list is not a whole number of ports"));
            }
            let mut ports = Vec::new();
            while r.remaining() > 0 {
                ports.push(parse_phy_port(&mut r)?);
            }
            OfBody::FeaturesReply(FeaturesReply {
                datapath_id,
                n_buffers,
                n_tables,
                capabilities,
                actions,
                ports,
            })
        }
        PACKET_IN => {
            let mut r = Reader::new(body, "packet_in");
            let buffer_id = r.u32()?;
            let total_len = r.u16()?;
            let in_port = r.u16()?;
            let reason = PacketInReason::from_code(r.u8()?);
            r.take(1)?;
            OfBody::PacketIn(PacketIn {
                buffer_id,
                total_len,
                in_port,
                reason,
                data: r.rest().to_vec(),
            })
        }
        PACKET_OUT => {
            let mut r = Reader::new(body, "packet_out");
            let buffer_id = r.u32()?;
            let in_port = r.u16()?;
            let alen = r.u16()? as usize;
            let actions = parse_actions(r.take(alen)?, "packet_out")?;
            OfBody::PacketOut(PacketOut {
                buffer_id,
                in_port,
                actions,
                data: r.rest().to_vec(),
            })
        }
        FLOW_MOD => {
            let mut r = Reader::new(body, "flow_mod");
            let m: &[u8; MATCH_LEN] = r.take(MATCH_LEN)?.try_into().unwrap();
            let of_match = OfMatch::decode(m);
            let cookie = r.u64()?;
            let command = FlowModCommand::from_code(r.u16()?);
            let idle_timeout = r.u16()?;
            let hard_timeout = r.u16()?;
            let priority = r.u16()?;
            let buffer_id = r.u32()?;
            let out_port = r.u16()?;
            let flags = r.u16()?;
            let actions = parse_actions(r.rest(), "flow_mod")?;
            OfBody::FlowMod(FlowMod {
                of_match,
                cookie,
                command,
                idle_timeout,
                hard_timeout,
                priority,
                buffer_id,
                out_port,
                flags,
                actions,
            })
        }
        PORT_MOD => {
            let mut r = Reader::new(body, "port_mod");
            let pm = PortMod {
                port_no: r.u16()?,
                hw_addr: r.mac()?,
                config: r.u32()?,
                mask: r.u32()?,
                advertise: r.u32()?,
            };
            r.take(4)?;
            r.finish()?;
            OfBody::PortMod(pm)
        }
        PORT_STATUS => {
            let mut r = Reader::new(body, "port_status");
            let reason = PortStatusReason::from_code(r.u8()?);
            r.take(7)?;
            let port = parse_phy_port(&mut r)?;
            r.finish()?;
            OfBody::PortStatus(PortStatus { reason, port })
        }
        other => OfBody::Unknown {
            msg_type: other,
            body: body.to_vec(),
        },
    };
    Ok((OfMessage { xid, body }, len))
}

/// Incremental parser over a byte stream with arbitrary chunk boundaries.
#[derive(Debug, Default)]
pub struct Decoder {
    buf: Vec<u8>,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete message, `Ok(None)` when more bytes are needed.
    ///
    /// A malformed message is consumed (its header length is trusted) and
    /// reported; a bad version poisons the stream and is reported each call.
    pub fn next_message(&mut self) -> Result<Option<OfMessage>, CodecError> {
        let (_, len, _) = match peek_header(&self.buf) {
            Ok(h) => h,
            Err(CodecError::Truncated { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        if self.buf.len() < len {
            return Ok(None);
        }
        let res = parse(&self.buf[..len]);
        self.buf.drain(..len);
        res.map(|(m, _)| Some(m))
    }
}
