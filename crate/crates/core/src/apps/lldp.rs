//! LLDP probes carrying the sender's datapath id and port.

use crate::addr::MacAddr;
use crate::codec::packet::{ethernet, ETH_LLDP};

/// Nearest-bridge group address; not forwarded by standard bridges.
pub const LLDP_DST: MacAddr = MacAddr([0x01, 0x80, 0xc2, 0x00, 0x00, 0x0e]);
pub const DEFAULT_TTL: u16 = 120;

const TLV_END: u8 = 0;
const TLV_CHASSIS_ID: u8 = 1;
const TLV_PORT_ID: u8 = 2;
const TLV_TTL: u8 = 3;
/// "Locally assigned" subtype for both chassis and port ids.
const SUBTYPE_LOCAL: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LldpProbe {
    pub dpid: u64,
    pub port: u16,
    pub ttl: u16,
}

fn tlv(out: &mut Vec<u8>, ty: u8, value: &[u8]) {
    let header = (u16::from(ty) << 9) | value.len() as u16;
    out.extend_from_slice(&header.to_be_bytes());
    out.extend_from_slice(value);
}

impl LldpProbe {
    pub fn new(dpid: u64, port: u16) -> LldpProbe {
        LldpProbe {
            dpid,
            port,
            ttl: DEFAULT_TTL,
        }
    }

    pub fn encode(&self, src: MacAddr) -> Vec<u8> {
        let mut p = Vec::new();
        let mut chassis = vec![SUBTYPE_LOCAL];
        chassis.extend_from_slice(format!("{:016x}", self.dpid).as_bytes());
        tlv(&mut p, TLV_CHASSIS_ID, &chassis);
        let mut port = vec![SUBTYPE_LOCAL];
        port.extend_from_slice(self.port.to_string().as_bytes());
        tlv(&mut p, TLV_PORT_ID, &port);
        tlv(&mut p, TLV_TTL, &self.ttl.to_be_bytes());
        tlv(&mut p, TLV_END, &[]);
        ethernet(LLDP_DST, src, ETH_LLDP, &p)
    }

    /// `None` for anything that is not one of our probes.
    pub fn decode(frame: &[u8]) -> Option<LldpProbe> {
        if frame.len() < 14 || u16::from_be_bytes([frame[12], frame[13]]) != ETH_LLDP {
            return None;
        }
        let mut rest = &frame[14..];
        let (mut dpid, mut port, mut ttl) = (None, None, None);
        while rest.len() >= 2 {
            let h = u16::from_be_bytes([rest[0], rest[1]]);
            let (ty, len) = ((h >> 9) as u8, usize::from(h & 0x1ff));
            let value = rest.get(2..2 + len)?;
            rest = &rest[2 + len..];
            match ty {
                TLV_END => break,
                TLV_CHASSIS_ID => {
                    let (&sub, id) = value.split_first()?;
                    let id = std::str::from_utf8(id).ok()?;
                    if sub != SUBTYPE_LOCAL || id.len() != 16 || !id.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')) {
                        return None;
                    }
                    dpid = u64::from_str_radix(id, 16).ok();
                }
                TLV_PORT_ID => {
                    let (&sub, id) = value.split_first()?;
                    if sub != SUBTYPE_LOCAL {
                        return None;
                    }
                    port = std::str::from_utf8(id).ok()?.parse().ok();
                }
                TLV_TTL if len == 2 => ttl = Some(u16::from_be_bytes([value[0], value[1]])),
                _ => {}
            }
        }
        Some(LldpProbe {
            dpid: dpid?,
            port: port?,
            ttl: ttl?,
        })
    }
}
