//! Discrete-event MANET simulator with trust-based secure routing.
//!
//! * [`model`]: identifiers, time, packets and scenario configuration
//! * [`crypto`]: CTR-mode link encryption, MACs, signatures and key derivation
//! * [`mobility`]: random waypoint movement and radio connectivity
//! * [`routing`]: route discovery, the counter table and per-node behavior
//! * [`adversary`]: blackhole, flooding and wormhole attackers
//! * [`engine`]: event loop, link model and metrics
//! * [`cli`]: the `anct-sim` command line

pub mod adversary;
pub mod cli;
pub mod crypto;
pub mod engine;
pub mod mobility;
pub mod model;
pub mod routing;

pub use engine::{run, run_full, Metrics, RunOutput, Simulation};
pub use model::{validate_config, ConfigError, ScenarioConfig, ValidatedConfig};
