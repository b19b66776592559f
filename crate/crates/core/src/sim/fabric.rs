//! Simulated OpenFlow 1.0 switches joined by virtual links.
//!
//! The fabric only advances when driven: [`Fabric::inject`] runs a frame to
//! quiescence and [`Fabric::poll`] services controller connections.

use std::collections::{BTreeMap, VecDeque};

use log::{debug, warn};

use crate::addr::MacAddr;
use crate::codec::packet::flow_key;
use crate::codec::{
    self, port, Action, Decoder, FeaturesReply, FlowKey, OfBody, OfMessage, PacketIn, PacketInReason, PhyPort, PortStatus,
    PortStatusReason, NO_BUFFER, PORT_CONFIG_DOWN, PORT_STATE_LINK_DOWN, VLAN_NONE,
};
use crate::driver::transport::{MemPipe, Recv, Transport};

use super::table::FlowTable;

/// Switches a frame may traverse before it is declared looping.
pub const HOP_LIMIT: u32 = 64;
/// Total per-injection processing steps; bounds flood fan-out in cyclic fabrics.
pub const STEP_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("unknown switch {0:#x}")]
    UnknownSwitch(u64),
    #[error("switch {0:#x} has no port {1}")]
    UnknownPort(u64, u16),
    #[error("port {1} on switch {0:#x} is administratively down")]
    PortDown(u64, u16),
    #[error("port {1} on switch {0:#x} is already linked")]
    PortInUse(u64, u16),
    #[error("hop limit exceeded (forwarding loop)")]
    HopLimitExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub dpid: u64,
    pub port: u16,
    pub frame: Vec<u8>,
    /// True when the port leads to another switch rather than an edge.
    pub to_link: bool,
    /// Switches the frame had traversed when it left through this port.
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimPacketIn {
    pub dpid: u64,
    pub in_port: u16,
    pub reason: PacketInReason,
    pub frame: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeliveryReport {
    pub emissions: Vec<Emission>,
    pub packet_ins: Vec<SimPacketIn>,
}

impl DeliveryReport {
    /// Frames that left the fabric.
    pub fn edge_emissions(&self) -> impl Iterator<Item = &Emission> {
        self.emissions.iter().filter(|e| !e.to_link)
    }

    fn extend(&mut self, other: &DeliveryReport) {
        self.emissions.extend(other.emissions.iter().cloned());
        self.packet_ins.extend(other.packet_ins.iter().cloned());
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimPort {
    pub port_no: u16,
    pub hw_addr: MacAddr,
    pub link: Option<(u64, u16)>,
    pub admin_down: bool,
    pub link_up: bool,
    pub rx_packets: u64,
    pub tx_packets: u64,
}

impl SimPort {
    fn phy(&self) -> PhyPort {
        PhyPort {
            port_no: self.port_no,
            hw_addr: self.hw_addr,
            name: format!("eth{}", self.port_no),
            config: if self.admin_down { PORT_CONFIG_DOWN } else { 0 },
            state: if self.link_up { 0 } else { PORT_STATE_LINK_DOWN },
            curr: 0,
            advertised: 0,
            supported: 0,
            peer: 0,
        }
    }
}

struct Controller {
    transport: Box<dyn Transport>,
    decoder: Decoder,
}

pub struct SimSwitch {
    pub dpid: u64,
    pub ports: BTreeMap<u16, SimPort>,
    pub table: FlowTable,
    /// Messages received from the controller, in arrival order.
    pub log: Vec<OfMessage>,
    /// Frames that reached this switch's pipeline.
    pub received: u64,
    pub table_misses: u64,
    pub packet_ins: u64,
    ctl: Option<Controller>,
    next_xid: u32,
}

impl SimSwitch {
    fn new(dpid: u64, ports: &[u16]) -> SimSwitch {
        let ports = ports
            .iter()
            .map(|&p| {
                // locally administered unicast: 02:<dpid low 24 bits>:<port>
                let mac = (0x02u64 << 40) | ((dpid & 0xff_ffff) << 16) | u64::from(p);
                let sp = SimPort {
                    port_no: p,
                    hw_addr: MacAddr::from_u64(mac),
                    link: None,
                    admin_down: false,
                    link_up: true,
                    rx_packets: 0,
                    tx_packets: 0,
                };
                (p, sp)
            })
            .collect();
        SimSwitch {
            dpid,
            ports,
            table: FlowTable::new(),
            log: Vec::new(),
            received: 0,
            table_misses: 0,
            packet_ins: 0,
            ctl: None,
            next_xid: 1,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.ctl.is_some()
    }

    pub fn features(&self) -> FeaturesReply {
        FeaturesReply {
            datapath_id: self.dpid,
            n_buffers: 0,
            n_tables: 1,
            capabilities: 0,
            actions: (1 << 0) | (1 << 4) | (1 << 5),
            ports: self.ports.values().map(SimPort::phy).collect(),
        }
    }

    fn send(&mut self, xid: Option<u32>, body: OfBody) {
        let Some(ctl) = self.ctl.as_mut() else {
            return;
        };
        let xid = xid.unwrap_or_else(|| {
            let x = self.next_xid;
            self.next_xid = self.next_xid.wrapping_add(1);
            x
        });
        let bytes = codec::serialize(&OfMessage::new(xid, body)).expect("sim messages serialize");
        if ctl.transport.send(&bytes).is_err() {
            self.ctl = None;
        }
    }
}

pub struct Fabric {
    switches: BTreeMap<u64, SimSwitch>,
    report: DeliveryReport,
    /// Errors raised while executing controller packet-outs.
    pub errors: Vec<SimError>,
}

impl Default for Fabric {
    fn default() -> Self {
        Fabric::new()
    }
}

struct Work {
    dpid: u64,
    in_port: u16,
    frame: Vec<u8>,
    hops: u32,
}

impl Fabric {
    pub fn new() -> Fabric {
        Fabric {
            switches: BTreeMap::new(),
            report: DeliveryReport::default(),
            errors: Vec::new(),
        }
    }

    /// Adds a switch with ports `1..=n_ports`.
    pub fn add_switch(&mut self, dpid: u64, n_ports: u16) {
        let ports: Vec<u16> = (1..=n_ports).collect();
        self.add_switch_with_ports(dpid, &ports);
    }

    pub fn add_switch_with_ports(&mut self, dpid: u64, ports: &[u16]) {
        self.switches.insert(dpid, SimSwitch::new(dpid, ports));
    }

    pub fn dpids(&self) -> Vec<u64> {
        self.switches.keys().copied().collect()
    }

    pub fn switch(&self, dpid: u64) -> Option<&SimSwitch> {
        self.switches.get(&dpid)
    }

    pub fn switch_mut(&mut self, dpid: u64) -> Option<&mut SimSwitch> {
        self.switches.get_mut(&dpid)
    }

    fn port_mut(&mut self, dpid: u64, p: u16) -> Result<&mut SimPort, SimError> {
        self.switches
            .get_mut(&dpid)
            .ok_or(SimError::UnknownSwitch(dpid))?
            .ports
            .get_mut(&p)
            .ok_or(SimError::UnknownPort(dpid, p))
    }

    fn port_status(&mut self, dpid: u64, p: u16) {
        let sw = self.switches.get_mut(&dpid).expect("checked switch");
        let port = sw.ports[&p].phy();
        sw.send(
            None,
            OfBody::PortStatus(PortStatus {
                reason: PortStatusReason::Modify,
                port,
            }),
        );
    }

    pub fn link(&mut self, a: u64, pa: u16, b: u64, pb: u16) -> Result<(), SimError> {
        for (d, p) in [(a, pa), (b, pb)] {
            if self.port_mut(d, p)?.link.is_some() {
                return Err(SimError::PortInUse(d, p));
            }
        }
        if (a, pa) == (b, pb) {
            return Err(SimError::PortInUse(a, pa));
        }
        for ((d, p), peer) in [((a, pa), (b, pb)), ((b, pb), (a, pa))] {
            let port = self.port_mut(d, p)?;
            port.link = Some(peer);
            port.link_up = true;
            self.port_status(d, p);
        }
        Ok(())
    }

    /// Cuts the link on `(dpid, port)`; both ends report link-down.
    pub fn unlink(&mut self, dpid: u64, p: u16) -> Result<bool, SimError> {
        let Some((d2, p2)) = self.port_mut(dpid, p)?.link else {
            return Ok(false);
        };
        for (d, p) in [(dpid, p), (d2, p2)] {
            let port = self.port_mut(d, p)?;
            port.link = None;
            port.link_up = false;
            self.port_status(d, p);
        }
        Ok(true)
    }

    /// Each link once, lower endpoint first, sorted.
    pub fn links(&self) -> Vec<((u64, u16), (u64, u16))> {
        let mut out = Vec::new();
        for sw in self.switches.values() {
            for p in sw.ports.values() {
                if let Some(peer) = p.link {
                    let me = (sw.dpid, p.port_no);
                    if me < peer {
                        out.push((me, peer));
                    }
                }
            }
        }
        out.sort();
        out
    }

    pub fn set_admin_down(&mut self, dpid: u64, p: u16, down: bool) -> Result<(), SimError> {
        self.port_mut(dpid, p)?.admin_down = down;
        Ok(())
    }

    /// Opens a controller connection for `dpid` and returns the controller's end.
    pub fn connect(&mut self, dpid: u64) -> Result<MemPipe, SimError> {
        let (ours, theirs) = MemPipe::pair();
        self.attach(dpid, Box::new(ours))?;
        Ok(theirs)
    }

    /// Uses `transport` as the switch's controller channel and sends Hello.
    pub fn attach(&mut self, dpid: u64, transport: Box<dyn Transport>) -> Result<(), SimError> {
        let sw = self.switches.get_mut(&dpid).ok_or(SimError::UnknownSwitch(dpid))?;
        sw.ctl = Some(Controller {
            transport,
            decoder: Decoder::new(),
        });
        sw.send(None, OfBody::Hello);
        Ok(())
    }

    pub fn disconnect(&mut self, dpid: u64) {
        if let Some(mut c) = self.switches.get_mut(&dpid).and_then(|s| s.ctl.take()) {
            c.transport.close();
        }
    }

    /// Everything emitted or punted since the last call.
    pub fn take_report(&mut self) -> DeliveryReport {
        std::mem::take(&mut self.report)
    }

    /// Injects a frame arriving from outside on `(dpid, port)`.
    pub fn inject(&mut self, dpid: u64, p: u16, frame: &[u8]) -> Result<DeliveryReport, SimError> {
        if self.port_mut(dpid, p)?.admin_down {
            return Err(SimError::PortDown(dpid, p));
        }
        let mut q = VecDeque::from([Work {
            dpid,
            in_port: p,
            frame: frame.to_vec(),
            hops: 1,
        }]);
        self.run(&mut q)
    }

    fn run(&mut self, q: &mut VecDeque<Work>) -> Result<DeliveryReport, SimError> {
        let mut report = DeliveryReport::default();
        let mut steps = 0;
        let res = loop {
            let Some(w) = q.pop_front() else {
                break Ok(());
            };
            steps += 1;
            if steps > STEP_LIMIT {
                break Err(SimError::HopLimitExceeded);
            }
            if let Err(e) = self.process(w, q, &mut report) {
                break Err(e);
            }
        };
        self.report.extend(&report);
        res.map(|_| report)
    }

    fn process(&mut self, w: Work, q: &mut VecDeque<Work>, report: &mut DeliveryReport) -> Result<(), SimError> {
        let sw = self.switches.get_mut(&w.dpid).ok_or(SimError::UnknownSwitch(w.dpid))?;
        match sw.ports.get_mut(&w.in_port) {
            Some(p) if !p.admin_down => p.rx_packets += 1,
            _ => return Ok(()),
        }
        sw.received += 1;
        let key = flow_key(&w.frame, w.in_port).unwrap_or(FlowKey {
            in_port: w.in_port,
            dl_vlan: VLAN_NONE,
            ..FlowKey::default()
        });
        let actions = match sw.table.hit(&key, w.frame.len()) {
            Some(e) => e.actions.clone(),
            None => {
                sw.table_misses += 1;
                self.packet_in(w.dpid, w.in_port, PacketInReason::NoMatch, w.frame, report);
                return Ok(());
            }
        };
        self.execute(w.dpid, w.in_port, w.frame, &actions, w.hops, q, report)
    }

    fn packet_in(&mut self, dpid: u64, in_port: u16, reason: PacketInReason, frame: Vec<u8>, report: &mut DeliveryReport) {
        let sw = self.switches.get_mut(&dpid).expect("checked switch");
        sw.packet_ins += 1;
        sw.send(
            None,
            OfBody::PacketIn(PacketIn {
                buffer_id: NO_BUFFER,
                total_len: frame.len().min(usize::from(u16::MAX)) as u16,
                in_port,
                reason,
                data: frame.clone(),
            }),
        );
        report.packet_ins.push(SimPacketIn {
            dpid,
            in_port,
            reason,
            frame,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn execute(
        &mut self,
        dpid: u64,
        in_port: u16,
        mut frame: Vec<u8>,
        actions: &[Action],
        hops: u32,
        q: &mut VecDeque<Work>,
        report: &mut DeliveryReport,
    ) -> Result<(), SimError> {
        for a in actions {
            match a {
                Action::SetDlDst(m) if frame.len() >= 12 => frame[0..6].copy_from_slice(&m.0),
                Action::SetDlSrc(m) if frame.len() >= 12 => frame[6..12].copy_from_slice(&m.0),
                Action::Output { port: p, .. } => match *p {
                    port::CONTROLLER => self.packet_in(dpid, in_port, PacketInReason::Action, frame.clone(), report),
                    port::FLOOD | port::ALL => {
                        let sw = &self.switches[&dpid];
                        let outs: Vec<u16> = sw
                            .ports
                            .values()
                            .filter(|sp| sp.port_no != in_port && !sp.admin_down)
                            .map(|sp| sp.port_no)
                            .collect();
                        for o in outs {
                            self.emit(dpid, o, &frame, hops, q, report)?;
                        }
                    }
                    port::IN_PORT => self.emit(dpid, in_port, &frame, hops, q, report)?,
                    port::TABLE => q.push_back(Work {
                        dpid,
                        in_port,
                        frame: frame.clone(),
                        hops,
                    }),
                    p if p <= port::MAX => self.emit(dpid, p, &frame, hops, q, report)?,
                    _ => {}
                },
                _ => {}
            }
        }
        Ok(())
    }

    fn emit(
        &mut self,
        dpid: u64,
        p: u16,
        frame: &[u8],
        hops: u32,
        q: &mut VecDeque<Work>,
        report: &mut DeliveryReport,
    ) -> Result<(), SimError> {
        let Some(sp) = self.switches.get_mut(&dpid).and_then(|s| s.ports.get_mut(&p)) else {
            return Ok(());
        };
        if sp.admin_down {
            return Ok(());
        }
        sp.tx_packets += 1;
        report.emissions.push(Emission {
            dpid,
            port: p,
            frame: frame.to_vec(),
            to_link: sp.link.is_some(),
            hops,
        });
        if let Some((d2, p2)) = sp.link {
            if hops >= HOP_LIMIT {
                return Err(SimError::HopLimitExceeded);
            }
            q.push_back(Work {
                dpid: d2,
                in_port: p2,
                frame: frame.to_vec(),
                hops: hops + 1,
            });
        }
        Ok(())
    }

    /// Services every controller connection once. Returns the number of
    /// messages handled.
    pub fn poll(&mut self) -> usize {
        let mut handled = 0;
        let dpids = self.dpids();
        for dpid in dpids {
            let msgs = self.read_controller(dpid);
            handled += msgs.len();
            for m in msgs {
                self.handle(dpid, m);
            }
        }
        handled
    }

    fn read_controller(&mut self, dpid: u64) -> Vec<OfMessage> {
        let sw = self.switches.get_mut(&dpid).expect("listed switch");
        let Some(ctl) = sw.ctl.as_mut() else {
            return Vec::new();
        };
        let mut closed = false;
        loop {
            match ctl.transport.recv() {
                Recv::Data(d) => ctl.decoder.feed(&d),
                Recv::Empty => break,
                Recv::Closed => {
                    closed = true;
                    break;
                }
            }
        }
        let mut out = Vec::new();
        loop {
            match ctl.decoder.next_message() {
                Ok(Some(m)) => out.push(m),
                Ok(None) => break,
                Err(e) => {
                    warn!("switch {dpid:#x}: controller stream error: {e}");
                    closed = true;
                    break;
                }
            }
        }
        if closed {
            sw.ctl = None;
        }
        out
    }

    fn handle(&mut self, dpid: u64, m: OfMessage) {
        let sw = self.switches.get_mut(&dpid).expect("listed switch");
        sw.log.push(m.clone());
        match m.body {
            OfBody::EchoRequest(d) => sw.send(Some(m.xid), OfBody::EchoReply(d)),
            OfBody::FeaturesRequest => {
                let f = sw.features();
                sw.send(Some(m.xid), OfBody::FeaturesReply(f));
            }
            OfBody::FlowMod(fm) => sw.table.apply(&fm),
            OfBody::PortMod(pm) => {
                if pm.mask & PORT_CONFIG_DOWN != 0 {
                    if let Some(p) = sw.ports.get_mut(&pm.port_no) {
                        p.admin_down = pm.config & PORT_CONFIG_DOWN != 0;
                    }
                }
            }
            OfBody::PacketOut(po) => {
                let mut q = VecDeque::new();
                let mut report = DeliveryReport::default();
                let r = self.execute(dpid, po.in_port, po.data, &po.actions, 1, &mut q, &mut report);
                self.report.extend(&report);
                if let Err(e) = r.and_then(|_| self.run(&mut q).map(drop)) {
                    self.errors.push(e);
                }
            }
            other => debug!("switch {dpid:#x}: ignoring {}", other.name()),
        }
    }
}
