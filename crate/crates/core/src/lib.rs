//! Resilience metrics for multi-commodity flow networks.
//!
//! Flows between hierarchical regions (state, division, region) are held in a
//! typed knowledge-graph store ([`store::GraphStore`]). The [`metrics`] module
//! scores every node on value, partner and commodity diversity, transport
//! mileage and geographic adjacency, and [`query`] exposes ranked and
//! cross-year views of those scores.

pub mod adjacency;
pub mod cli;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod query;
pub mod store;
pub mod workspace;

mod error;

pub use error::{Error, Result};
pub use metrics::{AtmMode, ResilienceParams, SelfFlowBeta};
pub use model::{CommodityCode, CommodityFlow, Direction, FlowValue, Level, RegionNode};
pub use store::{GraphStore, NetworkView};
pub use workspace::Workspace;
