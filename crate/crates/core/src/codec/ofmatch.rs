//! The OpenFlow 1.0 `ofp_match` structure and match algebra.

use serde::{Deserialize, Serialize};

use crate::addr::{Ipv4Cidr, MacAddr};

pub const MATCH_LEN: usize = 40;

pub mod wildcard {
    pub const IN_PORT: u32 = 1 << 0;
    pub const DL_VLAN: u32 = 1 << 1;
    pub const DL_SRC: u32 = 1 << 2;
    pub const DL_DST: u32 = 1 << 3;
    pub const DL_TYPE: u32 = 1 << 4;
    pub const NW_PROTO: u32 = 1 << 5;
    pub const TP_SRC: u32 = 1 << 6;
    pub const TP_DST: u32 = 1 << 7;
    pub const NW_SRC_SHIFT: u32 = 8;
    pub const NW_SRC_MASK: u32 = 0x3f << NW_SRC_SHIFT;
    pub const NW_DST_SHIFT: u32 = 14;
    pub const NW_DST_MASK: u32 = 0x3f << NW_DST_SHIFT;
    pub const DL_VLAN_PCP: u32 = 1 << 20;
    pub const NW_TOS: u32 = 1 << 21;
    pub const ALL: u32 = (1 << 22) - 1;
}

/// `dl_vlan` value meaning "no 802.1Q tag".
pub const VLAN_NONE: u16 = 0xffff;

/// Header values of one packet, in the match's field order. Absent layers
/// read as zero, an untagged frame has `dl_vlan == VLAN_NONE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FlowKey {
    pub in_port: u16,
    pub dl_src: MacAddr,
    pub dl_dst: MacAddr,
    pub dl_vlan: u16,
    pub dl_vlan_pcp: u8,
    pub dl_type: u16,
    pub nw_tos: u8,
    pub nw_proto: u8,
    pub nw_src: u32,
    pub nw_dst: u32,
    pub tp_src: u16,
    pub tp_dst: u16,
}

/// A match with every field optional; `None` is a wildcard.
///
/// Prefixes of length zero are normalised to `None` so that equal
/// predicates compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct OfMatch {
    pub in_port: Option<u16>,
    pub dl_src: Option<MacAddr>,
    pub dl_dst: Option<MacAddr>,
    pub dl_vlan: Option<u16>,
    pub dl_vlan_pcp: Option<u8>,
    pub dl_type: Option<u16>,
    pub nw_tos: Option<u8>,
    pub nw_proto: Option<u8>,
    pub nw_src: Option<Ipv4Cidr>,
    pub nw_dst: Option<Ipv4Cidr>,
    pub tp_src: Option<u16>,
    pub tp_dst: Option<u16>,
}

fn cmp_opt<T: PartialEq>(m: &Option<T>, v: &T) -> bool {
    m.as_ref().is_none_or(|x| x == v)
}

fn meet<T: PartialEq + Copy>(a: Option<T>, b: Option<T>) -> Result<Option<T>, ()> {
    match (a, b) {
        (None, x) | (x, None) => Ok(x),
        (Some(x), Some(y)) if x == y => Ok(Some(x)),
        _ => Err(()),
    }
}

fn covers_opt<T: PartialEq>(outer: &Option<T>, inner: &Option<T>) -> bool {
    match (outer, inner) {
        (None, _) => true,
        (Some(a), Some(b)) => a == b,
        (Some(_), None) => false,
    }
}

fn covers_cidr(outer: &Option<Ipv4Cidr>, inner: &Option<Ipv4Cidr>) -> bool {
    match (outer, inner) {
        (None, _) => true,
        (Some(a), Some(b)) => a.covers(b),
        (Some(_), None) => false,
    }
}

impl OfMatch {
    pub fn all() -> OfMatch {
        OfMatch::default()
    }

    /// Exact match on every field of `key`.
    pub fn exact(key: &FlowKey) -> OfMatch {
        OfMatch {
            in_port: Some(key.in_port),
            dl_src: Some(key.dl_src),
            dl_dst: Some(key.dl_dst),
            dl_vlan: Some(key.dl_vlan),
            dl_vlan_pcp: Some(key.dl_vlan_pcp),
            dl_type: Some(key.dl_type),
            nw_tos: Some(key.nw_tos),
            nw_proto: Some(key.nw_proto),
            nw_src: Some(Ipv4Cidr::host(key.nw_src)),
            nw_dst: Some(Ipv4Cidr::host(key.nw_dst)),
            tp_src: Some(key.tp_src),
            tp_dst: Some(key.tp_dst),
        }
    }

    /// Drops zero-length prefixes.
    pub fn normalized(mut self) -> OfMatch {
        if self.nw_src.is_some_and(|c| c.prefix_len() == 0) {
            self.nw_src = None;
        }
        if self.nw_dst.is_some_and(|c| c.prefix_len() == 0) {
            self.nw_dst = None;
        }
        self
    }

    /// True when no wildcard bit would be set on the wire.
    pub fn is_exact(&self) -> bool {
        self.wildcards() == 0
    }

    /// The exact key this match pins down, when [`OfMatch::is_exact`].
    pub fn exact_key(&self) -> Option<FlowKey> {
        if !self.is_exact() {
            return None;
        }
        Some(FlowKey {
            in_port: self.in_port?,
            dl_src: self.dl_src?,
            dl_dst: self.dl_dst?,
            dl_vlan: self.dl_vlan?,
            dl_vlan_pcp: self.dl_vlan_pcp?,
            dl_type: self.dl_type?,
            nw_tos: self.nw_tos?,
            nw_proto: self.nw_proto?,
            nw_src: self.nw_src?.addr(),
            nw_dst: self.nw_dst?.addr(),
            tp_src: self.tp_src?,
            tp_dst: self.tp_dst?,
        })
    }

    pub fn wildcards(&self) -> u32 {
        use wildcard::*;
        let mut w = 0;
        let flag = |present: bool, bit: u32| if present { 0 } else { bit };
        w |= flag(self.in_port.is_some(), IN_PORT);
        w |= flag(self.dl_vlan.is_some(), DL_VLAN);
        w |= flag(self.dl_src.is_some(), DL_SRC);
        w |= flag(self.dl_dst.is_some(), DL_DST);
        w |= flag(self.dl_type.is_some(), DL_TYPE);
        w |= flag(self.nw_proto.is_some(), NW_PROTO);
        w |= flag(self.tp_src.is_some(), TP_SRC);
        w |= flag(self.tp_dst.is_some(), TP_DST);
        w |= flag(self.dl_vlan_pcp.is_some(), DL_VLAN_PCP);
        w |= flag(self.nw_tos.is_some(), NW_TOS);
        let ignored = |c: Option<Ipv4Cidr>| 32 - u32::from(c.map_or(0, |c| c.prefix_len()));
        w |= ignored(self.nw_src) << NW_SRC_SHIFT;
        w |= ignored(self.nw_dst) << NW_DST_SHIFT;
        w
    }

    pub fn matches(&self, k: &FlowKey) -> bool {
        cmp_opt(&self.in_port, &k.in_port)
            && cmp_opt(&self.dl_src, &k.dl_src)
            && cmp_opt(&self.dl_dst, &k.dl_dst)
            && cmp_opt(&self.dl_vlan, &k.dl_vlan)
            && cmp_opt(&self.dl_vlan_pcp, &k.dl_vlan_pcp)
            && cmp_opt(&self.dl_type, &k.dl_type)
            && cmp_opt(&self.nw_tos, &k.nw_tos)
            && cmp_opt(&self.nw_proto, &k.nw_proto)
            && self.nw_src.is_none_or(|c| c.contains(k.nw_src))
            && self.nw_dst.is_none_or(|c| c.contains(k.nw_dst))
            && cmp_opt(&self.tp_src, &k.tp_src)
            && cmp_opt(&self.tp_dst, &k.tp_dst)
    }

    /// True if every packet matched by `other` is matched by `self`.
    pub fn covers(&self, other: &OfMatch) -> bool {
        covers_opt(&self.in_port, &other.in_port)
            && covers_opt(&self.dl_src, &other.dl_src)
            && covers_opt(&self.dl_dst, &other.dl_dst)
            && covers_opt(&self.dl_vlan, &other.dl_vlan)
            && covers_opt(&self.dl_vlan_pcp, &other.dl_vlan_pcp)
            && covers_opt(&self.dl_type, &other.dl_type)
            && covers_opt(&self.nw_tos, &other.nw_tos)
            && covers_opt(&self.nw_proto, &other.nw_proto)
            && covers_cidr(&self.nw_src, &other.nw_src)
            && covers_cidr(&self.nw_dst, &other.nw_dst)
            && covers_opt(&self.tp_src, &other.tp_src)
            && covers_opt(&self.tp_dst, &other.tp_dst)
    }

    /// Field-wise intersection. On disjointness returns the first field
    /// whose constraints conflict.
    pub fn intersect(&self, other: &OfMatch) -> Result<OfMatch, &'static str> {
        let cidr = |a: Option<Ipv4Cidr>, b: Option<Ipv4Cidr>, f: &'static str| match (a, b) {
            (None, x) | (x, None) => Ok(x),
            (Some(x), Some(y)) => x.intersect(&y).map(Some).ok_or(f),
        };
        Ok(OfMatch {
            in_port: meet(self.in_port, other.in_port).map_err(|_| "in_port")?,
            dl_src: meet(self.dl_src, other.dl_src).map_err(|_| "dl_src")?,
            dl_dst: meet(self.dl_dst, other.dl_dst).map_err(|_| "dl_dst")?,
            dl_vlan: meet(self.dl_vlan, other.dl_vlan).map_err(|_| "dl_vlan")?,
            dl_vlan_pcp: meet(self.dl_vlan_pcp, other.dl_vlan_pcp).map_err(|_| "dl_vlan_pcp")?,
            dl_type: meet(self.dl_type, other.dl_type).map_err(|_| "dl_type")?,
            nw_tos: meet(self.nw_tos, other.nw_tos).map_err(|_| "nw_tos")?,
            nw_proto: meet(self.nw_proto, other.nw_proto).map_err(|_| "nw_proto")?,
            nw_src: cidr(self.nw_src, other.nw_src, "nw_src")?,
            nw_dst: cidr(self.nw_dst, other.nw_dst, "nw_dst")?,
            tp_src: meet(self.tp_src, other.tp_src).map_err(|_| "tp_src")?,
            tp_dst: meet(self.tp_dst, other.tp_dst).map_err(|_| "tp_dst")?,
        })
    }

    /// Writes the 40-byte wire form, zeroing wildcarded fields.
    pub fn encode(&self, out: &mut Vec<u8>) {
        let start = out.len();
        out.extend_from_slice(&self.wildcards().to_be_bytes());
        out.extend_from_slice(&self.in_port.unwrap_or(0).to_be_bytes());
        out.extend_from_slice(&self.dl_src.unwrap_or_default().0);
        out.extend_from_slice(&self.dl_dst.unwrap_or_default().0);
        out.extend_from_slice(&self.dl_vlan.unwrap_or(0).to_be_bytes());
        out.push(self.dl_vlan_pcp.unwrap_or(0));
        out.push(0);
        out.extend_from_slice(&self.dl_type.unwrap_or(0).to_be_bytes());
        out.push(self.nw_tos.unwrap_or(0));
        out.push(self.nw_proto.unwrap_or(0));
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.nw_src.map_or(0, |c| c.addr()).to_be_bytes());
        out.extend_from_slice(&self.nw_dst.map_or(0, |c| c.addr()).to_be_bytes());
        out.extend_from_slice(&self.tp_src.unwrap_or(0).to_be_bytes());
        out.extend_from_slice(&self.tp_dst.unwrap_or(0).to_be_bytes());
        debug_assert_eq!(out.len() - start, MATCH_LEN);
    }

    /// Reads the wire form. Bytes of wildcarded fields are ignored and the
    /// prefix length is `32 - min(ignored_bits, 32)`.
    pub fn decode(b: &[u8; MATCH_LEN]) -> OfMatch {
        use wildcard::*;
        let w = u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
        let u16at = |i: usize| u16::from_be_bytes([b[i], b[i + 1]]);
        let u32at = |i: usize| u32::from_be_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        let mac = |i: usize| MacAddr([b[i], b[i + 1], b[i + 2], b[i + 3], b[i + 4], b[i + 5]]);
        let keep = |bit: u32| w & bit == 0;
        let prefix = |shift: u32, addr: u32| {
            let ignored = ((w >> shift) & 0x3f).min(32);
            let len = (32 - ignored) as u8;
            (len > 0).then(|| Ipv4Cidr::new(addr, len))
        };
        OfMatch {
            in_port: keep(IN_PORT).then(|| u16at(4)),
            dl_src: keep(DL_SRC).then(|| mac(6)),
            dl_dst: keep(DL_DST).then(|| mac(12)),
            dl_vlan: keep(DL_VLAN).then(|| u16at(18)),
            dl_vlan_pcp: keep(DL_VLAN_PCP).then_some(b[20]),
            dl_type: keep(DL_TYPE).then(|| u16at(22)),
            nw_tos: keep(NW_TOS).then_some(b[24]),
            nw_proto: keep(NW_PROTO).then_some(b[25]),
            nw_src: prefix(NW_SRC_SHIFT, u32at(28)),
            nw_dst: prefix(NW_DST_SHIFT, u32at(32)),
            tp_src: keep(TP_SRC).then(|| u16at(36)),
            tp_dst: keep(TP_DST).then(|| u16at(38)),
        }
    }
}

/// Evaluates a raw 40-byte match against a key using only wildcard bits and
/// masked comparison, without building an [`OfMatch`].
pub fn wire_matches(b: &[u8; MATCH_LEN], k: &FlowKey) -> bool {
    use wildcard::*;
    let w = u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
    let eq16 = |bit: u32, i: usize, v: u16| w & bit != 0 || b[i..i + 2] == v.to_be_bytes();
    let eq8 = |bit: u32, i: usize, v: u8| w & bit != 0 || b[i] == v;
    let eqmac = |bit: u32, i: usize, v: MacAddr| w & bit != 0 || b[i..i + 6] == v.0;
    let masked = |shift: u32, i: usize, v: u32| {
        let ignored = (w >> shift) & 0x3f;
        let mask: u32 = if ignored >= 32 { 0 } else { u32::MAX << ignored };
        let field = u32::from_be_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        (field ^ v) & mask == 0
    };
    eq16(IN_PORT, 4, k.in_port)
        && eqmac(DL_SRC, 6, k.dl_src)
        && eqmac(DL_DST, 12, k.dl_dst)
        && eq16(DL_VLAN, 18, k.dl_vlan)
        && eq8(DL_VLAN_PCP, 20, k.dl_vlan_pcp)
        && eq16(DL_TYPE, 22, k.dl_type)
        && eq8(NW_TOS, 24, k.nw_tos)
        && eq8(NW_PROTO, 25, k.nw_proto)
        && masked(NW_SRC_SHIFT, 28, k.nw_src)
        && masked(NW_DST_SHIFT, 32, k.nw_dst)
        && eq16(TP_SRC, 36, k.tp_src)
        && eq16(TP_DST, 38, k.tp_dst)
}
