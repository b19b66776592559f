//! Switch-facing side of the controller: sessions over byte-stream transports.

pub mod session;
pub mod transport;

pub use session::{Driver, SessionState, WATCH_CAPACITY};
pub use transport::{MemPipe, Recv, TcpTransport, Transport};
