//! Slotted simulator of a vehicular platoon line network with mixed
//! half-duplex and full-duplex vehicles.
//!
//! Three schedulers are compared on end-to-end packet latency: flow-based
//! TDMA, queue-based TDMA and back-pressure. Entry points:
//!
//! * [`sim::run`] executes one configuration and returns raw [`sim::Metrics`],
//! * [`sim::summarize`] turns them into latency statistics,
//! * [`sweep::run_sweep`] runs a grid of configurations and renders CSV/JSON tables,
//! * [`config::parse_config`] reads the TOML configuration format.

pub mod channel;
pub mod config;
pub mod error;
pub mod queueing;
pub mod schedulers;
pub mod sim;
pub mod sweep;
pub mod topology;

pub use error::{Error, Result};
pub use schedulers::SchedulerKind;
pub use sim::{run, summarize, Metrics, Report, SimConfig};
pub use topology::Topology;
