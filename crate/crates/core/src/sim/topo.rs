//! Fabric descriptions.
//!
//! Text form, one declaration per line, `#` starts a comment:
//!
//! ```text
//! switch 1 ports=3
//! switch 2 ports=3
//! link 1:2 2:1
//! ```
//!
//! The builders share one port convention for chain-like fabrics: port 1
//! faces the previous switch, port 2 the next, port 3 is the host port.

use std::fmt;
use std::str::FromStr;

use super::fabric::{Fabric, SimError};

pub const HOST_PORT: u16 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    /// `(dpid, number of ports)`
    pub switches: Vec<(u64, u16)>,
    pub links: Vec<((u64, u16), (u64, u16))>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct TopoParseError {
    pub line: usize,
    pub reason: String,
}

impl Topology {
    /// `1 - 2 - ... - n`.
    pub fn linear(n: u64) -> Topology {
        let switches = (1..=n).map(|d| (d, 3)).collect();
        let links = (1..n).map(|d| ((d, 2), (d + 1, 1))).collect();
        Topology { switches, links }
    }

    /// A linear chain with the ends joined: `n:2 - 1:1`.
    pub fn ring(n: u64) -> Topology {
        let mut t = Topology::linear(n);
        if n > 2 {
            t.links.push(((1, 1), (n, 2)));
        }
        t
    }

    /// Hub `1` with port `k` facing leaf `k + 1`; leaves use port 1 as
    /// uplink and [`HOST_PORT`] for hosts. The hub's host port is `n`.
    pub fn star(n: u64) -> Topology {
        let hub_ports = n.max(2) as u16;
        let mut switches = vec![(1, hub_ports)];
        let mut links = Vec::new();
        for leaf in 2..=n {
            switches.push((leaf, 3));
            links.push(((1, (leaf - 1) as u16), (leaf, 1)));
        }
        Topology { switches, links }
    }

    pub fn build(&self) -> Result<Fabric, SimError> {
        let mut f = Fabric::new();
        for &(d, n) in &self.switches {
            f.add_switch(d, n);
        }
        for &((a, pa), (b, pb)) in &self.links {
            f.link(a, pa, b, pb)?;
        }
        Ok(f)
    }

    /// Links with the lower endpoint first, sorted; comparable with [`Fabric::links`].
    pub fn canonical_links(&self) -> Vec<((u64, u16), (u64, u16))> {
        let mut v: Vec<_> = self.links.iter().map(|&(a, b)| if a <= b { (a, b) } else { (b, a) }).collect();
        v.sort();
        v
    }
}

fn parse_endpoint(s: &str) -> Option<(u64, u16)> {
    let (d, p) = s.split_once(':')?;
    Some((parse_dpid(d)?, p.parse().ok()?))
}

fn parse_dpid(s: &str) -> Option<u64> {
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

impl FromStr for Topology {
    type Err = TopoParseError;

    fn from_str(text: &str) -> Result<Topology, TopoParseError> {
        let mut t = Topology::default();
        for (i, raw) in text.lines().enumerate() {
            let err = |reason: &str| TopoParseError {
                line: i + 1,
                reason: reason.to_string(),
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                [] => {}
                ["switch", d, ports] => {
                    let d = parse_dpid(d).ok_or_else(|| err("bad dpid"))?;
                    let n = ports
                        .strip_prefix("ports=")
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| err("expected ports=<n>"))?;
                    t.switches.push((d, n));
                }
                ["link", a, b] => {
                    let a = parse_endpoint(a).ok_or_else(|| err("bad endpoint"))?;
                    let b = parse_endpoint(b).ok_or_else(|| err("bad endpoint"))?;
                    t.links.push((a, b));
                }
                _ => return Err(err("expected `switch <dpid> ports=<n>` or `link <dpid>:<port> <dpid>:<port>`")),
            }
        }
        Ok(t)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (d, n) in &self.switches {
            writeln!(f, "switch {d} ports={n}")?;
        }
        for ((a, pa), (b, pb)) in &self.links {
            writeln!(f, "link {a}:{pa} {b}:{pb}")?;
        }
        Ok(())
    }
}
