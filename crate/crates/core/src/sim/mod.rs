//! Software OpenFlow 1.0 switches and the fabric that connects them.

pub mod fabric;
pub mod table;
pub mod topo;

pub use fabric::{DeliveryReport, Emission, Fabric, SimError, SimPacketIn, SimPort, SimSwitch, HOP_LIMIT};
pub use table::{FlowEntry, FlowTable};
pub use topo::{Topology, HOST_PORT};
