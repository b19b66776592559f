//! Ethernet/IPv4/TCP/UDP header parsing and frame builders.

use crate::addr::MacAddr;

use super::ofmatch::{FlowKey, VLAN_NONE};

pub const ETH_IPV4: u16 = 0x0800;
pub const ETH_ARP: u16 = 0x0806;
pub const ETH_VLAN: u16 = 0x8100;
pub const ETH_LLDP: u16 = 0x88cc;
pub const IP_TCP: u8 = 6;
pub const IP_UDP: u8 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv4Header {
    pub src: u32,
    pub dst: u32,
    pub proto: u8,
    pub tos: u8,
}

/// Parsed view over a raw frame. Layers past the end of the buffer are
/// simply absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub dl_dst: MacAddr,
    pub dl_src: MacAddr,
    pub dl_type: u16,
    /// (vid, pcp)
    pub vlan: Option<(u16, u8)>,
    pub ip: Option<Ipv4Header>,
    pub tp: Option<(u16, u16)>,
    /// Offset of the L3 payload.
    pub l3_offset: usize,
}

fn be16(b: &[u8], i: usize) -> Option<u16> {
    Some(u16::from_be_bytes([*b.get(i)?, *b.get(i + 1)?]))
}

fn be32(b: &[u8], i: usize) -> Option<u32> {
    Some(u32::from_be_bytes([*b.get(i)?, *b.get(i + 1)?, *b.get(i + 2)?, *b.get(i + 3)?]))
}

impl PacketHeader {
    /// `None` if the frame is shorter than an Ethernet header.
    pub fn parse(frame: &[u8]) -> Option<PacketHeader> {
        if frame.len() < 14 {
            return None;
        }
        let dl_dst = MacAddr(frame[0..6].try_into().unwrap());
        let dl_src = MacAddr(frame[6..12].try_into().unwrap());
        let mut dl_type = be16(frame, 12)?;
        let mut off = 14;
        let mut vlan = None;
        if dl_type == ETH_VLAN {
            if let (Some(tci), Some(inner)) = (be16(frame, 14), be16(frame, 16)) {
                vlan = Some((tci & 0x0fff, (tci >> 13) as u8));
                dl_type = inner;
                off = 18;
            }
        }
        let mut hdr = PacketHeader {
            dl_dst,
            dl_src,
            dl_type,
            vlan,
            ip: None,
            tp: None,
            l3_offset: off,
        };
        match dl_type {
            ETH_IPV4 => {
                let l3 = &frame[off.min(frame.len())..];
                if l3.len() >= 20 && l3[0] >> 4 == 4 {
                    let ihl = usize::from(l3[0] & 0x0f) * 4;
                    let ip = Ipv4Header {
                        tos: l3[1],
                        proto: l3[9],
                        src: be32(l3, 12)?,
                        dst: be32(l3, 16)?,
                    };
                    hdr.ip = Some(ip);
                    let frag_off = be16(l3, 6)? & 0x1fff;
                    if ihl >= 20 && frag_off == 0 && matches!(ip.proto, IP_TCP | IP_UDP) {
                        if let (Some(s), Some(d)) = (be16(l3, ihl), be16(l3, ihl + 2)) {
                            hdr.tp = Some((s, d));
                        }
                    }
                }
            }
            ETH_ARP => {
                // ARP opcode and protocol addresses stand in for nw_proto/nw_src/nw_dst
                let l3 = &frame[off.min(frame.len())..];
                if l3.len() >= 28 {
                    hdr.ip = Some(Ipv4Header {
                        tos: 0,
                        proto: (be16(l3, 6)? & 0xff) as u8,
                        src: be32(l3, 14)?,
                        dst: be32(l3, 24)?,
                    });
                }
            }
            _ => {}
        }
        Some(hdr)
    }

    /// The 12-tuple seen by a switch receiving this frame on `in_port`.
    pub fn flow_key(&self, in_port: u16) -> FlowKey {
        let (vid, pcp) = self.vlan.unwrap_or((VLAN_NONE, 0));
        let ip = self.ip.unwrap_or(Ipv4Header {
            src: 0,
            dst: 0,
            proto: 0,
            tos: 0,
        });
        let (tp_src, tp_dst) = self.tp.unwrap_or((0, 0));
        FlowKey {
            in_port,
            dl_src: self.dl_src,
            dl_dst: self.dl_dst,
            dl_vlan: vid,
            dl_vlan_pcp: pcp,
            dl_type: self.dl_type,
            nw_tos: ip.tos & 0xfc,
            nw_proto: ip.proto,
            nw_src: ip.src,
            nw_dst: ip.dst,
            tp_src,
            tp_dst,
        }
    }
}

/// Key of a frame, or `None` when it is not even an Ethernet frame.
pub fn flow_key(frame: &[u8], in_port: u16) -> Option<FlowKey> {
    PacketHeader::parse(frame).map(|h| h.flow_key(in_port))
}

fn ipv4_checksum(hdr: &[u8]) -> u16 {
    let mut sum: u32 = hdr
        .chunks(2)
        .map(|c| u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)])))
        .sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

pub fn ethernet(dst: MacAddr, src: MacAddr, ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + payload.len());
    f.extend_from_slice(&dst.0);
    f.extend_from_slice(&src.0);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(payload);
    f
}

/// Fields for [`ipv4_frame`].
#[derive(Debug, Clone, Copy)]
pub struct Ipv4Spec {
    pub dl_src: MacAddr,
    pub dl_dst: MacAddr,
    pub src: u32,
    pub dst: u32,
    pub proto: u8,
    pub tos: u8,
    pub tp_src: u16,
    pub tp_dst: u16,
}

/// An IPv4 frame with a minimal TCP or UDP header (other protocols get no
/// L4 header) followed by `payload`.
pub fn ipv4_frame(s: &Ipv4Spec, payload: &[u8]) -> Vec<u8> {
    let mut l4 = Vec::new();
    match s.proto {
        IP_TCP => {
            l4.extend_from_slice(&s.tp_src.to_be_bytes());
            l4.extend_from_slice(&s.tp_dst.to_be_bytes());
            l4.extend_from_slice(&[0; 8]);
            l4.extend_from_slice(&[0x50, 0x02, 0xff, 0xff, 0, 0, 0, 0]);
        }
        IP_UDP => {
            l4.extend_from_slice(&s.tp_src.to_be_bytes());
            l4.extend_from_slice(&s.tp_dst.to_be_bytes());
            l4.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
            l4.extend_from_slice(&[0, 0]);
        }
        _ => {}
    }
    l4.extend_from_slice(payload);
    let total = (20 + l4.len()) as u16;
    let mut ip = vec![0x45, s.tos];
    ip.extend_from_slice(&total.to_be_bytes());
    ip.extend_from_slice(&[0, 0, 0x40, 0, 64, s.proto, 0, 0]);
    ip.extend_from_slice(&s.src.to_be_bytes());
    ip.extend_from_slice(&s.dst.to_be_bytes());
    let ck = ipv4_checksum(&ip);
    ip[10..12].copy_from_slice(&ck.to_be_bytes());
    ip.extend_from_slice(&l4);
    ethernet(s.dl_dst, s.dl_src, ETH_IPV4, &ip)
}

pub fn tcp_frame(dl_src: MacAddr, dl_dst: MacAddr, src: u32, dst: u32, tp_src: u16, tp_dst: u16) -> Vec<u8> {
    ipv4_frame(
        &Ipv4Spec {
            dl_src,
            dl_dst,
            src,
            dst,
            proto: IP_TCP,
            tos: 0,
            tp_src,
            tp_dst,
        },
        &[],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tcp_key() {
        let a = MacAddr([2, 0, 0, 0, 0, 1]);
        let b = MacAddr([2, 0, 0, 0, 0, 2]);
        let f = tcp_frame(a, b, 0x0a000001, 0x0a000002, 40000, 22);
        let k = flow_key(&f, 3).unwrap();
        assert_eq!((k.in_port, k.dl_src, k.dl_dst, k.dl_type), (3, a, b, ETH_IPV4));
        assert_eq!(
            (k.nw_proto, k.nw_src, k.nw_dst, k.tp_src, k.tp_dst),
            (6, 0x0a000001, 0x0a000002, 40000, 22)
        );
        assert_eq!(k.dl_vlan, VLAN_NONE);
        // header checksum verifies to zero
        assert_eq!(ipv4_checksum(&f[14..34]), 0);
    }

    #[test]
    fn truncated_frames() {
        assert!(flow_key(&[0; 13], 1).is_none());
        let a = MacAddr([2, 0, 0, 0, 0, 1]);
        let mut f = tcp_frame(a, a, 1, 2, 3, 4);
        f.truncate(30);
        let k = flow_key(&f, 1).unwrap();
        assert_eq!((k.dl_type, k.nw_src, k.tp_dst), (ETH_IPV4, 0, 0));
    }

    #[test]
    fn vlan_tag() {
        let a = MacAddr([2, 0, 0, 0, 0, 1]);
        let mut payload = vec![0xa0, 0x07];
        payload.extend_from_slice(&0x1234u16.to_be_bytes());
        let f = ethernet(a, a, ETH_VLAN, &payload);
        let k = flow_key(&f, 1).unwrap();
        assert_eq!((k.dl_vlan, k.dl_vlan_pcp, k.dl_type), (7, 5, 0x1234));
    }
}
