//! Network state as a file tree: store, schema, OpenFlow 1.0 driver,
//! switch simulator, views and the applications built on them.

pub mod addr;
pub mod api;
pub mod apps;
pub mod codec;
pub mod driver;
pub mod error;
pub mod remote;
pub mod schema;
pub mod sim;
pub mod store;
pub mod testbed;
pub mod views;

pub use addr::{Ipv4Cidr, MacAddr};
pub use api::{EventSource, FsApi};
pub use error::{FsError, FsResult};
pub use remote::RemoteFs;
pub use schema::NetFs;
pub use store::Store;
