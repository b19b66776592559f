//! MAC and IPv4 prefix value types with their text grammars.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const BROADCAST: MacAddr = MacAddr([0xff; 6]);

    pub fn is_multicast(&self) -> bool {
        self.0[0] & 1 == 1
    }

    pub fn from_u64(v: u64) -> MacAddr {
        let b = v.to_be_bytes();
        MacAddr([b[2], b[3], b[4], b[5], b[6], b[7]])
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", a[0], a[1], a[2], a[3], a[4], a[5])
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddrParseError(pub String);

impl fmt::Display for AddrParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AddrParseError {}

impl FromStr for MacAddr {
    type Err = AddrParseError;

    /// Colon-separated, two hex digits per octet.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AddrParseError(format!("expected xx:xx:xx:xx:xx:xx, got {s:?}"));
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for b in out.iter_mut() {
            let p = parts.next().ok_or_else(err)?;
            if p.len() != 2 || !p.bytes().all(|c| c.is_ascii_hexdigit()) {
                return Err(err());
            }
            *b = u8::from_str_radix(p, 16).map_err(|_| err())?;
        }
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(MacAddr(out))
    }
}

/// An IPv4 prefix. The address is kept with host bits cleared.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ipv4Cidr {
    addr: u32,
    prefix_len: u8,
}

impl Ipv4Cidr {
    /// Builds a prefix, clearing host bits. `prefix_len` is clamped to 32.
    pub fn new(addr: u32, prefix_len: u8) -> Ipv4Cidr {
        let prefix_len = prefix_len.min(32);
        Ipv4Cidr {
            addr: addr & Self::mask_for(prefix_len),
            prefix_len,
        }
    }

    pub fn host(addr: u32) -> Ipv4Cidr {
        Ipv4Cidr::new(addr, 32)
    }

    pub fn mask_for(prefix_len: u8) -> u32 {
        if prefix_len == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(prefix_len.min(32)))
        }
    }

    pub fn addr(&self) -> u32 {
        self.addr
    }

    pub fn prefix_len(&self) -> u8 {
        self.prefix_len
    }

    pub fn mask(&self) -> u32 {
        Self::mask_for(self.prefix_len)
    }

    pub fn contains(&self, ip: u32) -> bool {
        ip & self.mask() == self.addr
    }

    /// True if every address of `other` is in `self`.
    pub fn covers(&self, other: &Ipv4Cidr) -> bool {
        other.prefix_len >= self.prefix_len && self.contains(other.addr)
    }

    /// The narrower of two nested prefixes, or `None` when they are disjoint.
    pub fn intersect(&self, other: &Ipv4Cidr) -> Option<Ipv4Cidr> {
        if self.covers(other) {
            Some(*other)
        } else if other.covers(self) {
            Some(*self)
        } else {
            None
        }
    }
}

impl fmt::Display for Ipv4Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.addr), self.prefix_len)
    }
}

impl fmt::Debug for Ipv4Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Ipv4Cidr {
    type Err = AddrParseError;

    /// `a.b.c.d/len` with `0 <= len <= 32`, or a bare address meaning `/32`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ip, len) = match s.split_once('/') {
            Some((ip, len)) => {
                if len.is_empty() || len.len() > 2 || !len.bytes().all(|c| c.is_ascii_digit()) {
                    return Err(AddrParseError(format!("bad prefix length in {s:?}")));
                }
                let len: u8 = len.parse().map_err(|_| AddrParseError(format!("bad prefix length in {s:?}")))?;
                if len > 32 {
                    return Err(AddrParseError(format!("prefix length {len} exceeds 32")));
                }
                (ip, len)
            }
            None => (s, 32),
        };
        let ip: Ipv4Addr = ip.parse().map_err(|_| AddrParseError(format!("bad IPv4 address {ip:?}")))?;
        Ok(Ipv4Cidr::new(u32::from(ip), len))
    }
}
