//! Deterministic packet-level simulator for data-center fabrics with
//! telemetry-driven congestion control.
//!
//! Two control loops share one sender algorithm. In FNCC mode switches stamp
//! request-path port telemetry into ACKs on their way back and the receiver
//! reports how many flows it is serving, so a sender can jump straight to
//! the fair share when the last hop congests. HPCC mode appends telemetry to
//! data packets instead and never jumps.
//!
//! ```no_run
//! use fncc_core::scenario::{load_scenario, run_scenario};
//!
//! let sc = load_scenario("micro_dumbbell_100g", &["cc.mode=HPCC".into()]).unwrap();
//! let run = run_scenario(&sc, None).unwrap();
//! println!("peak queue {} B", run.summary.peak_queue_bytes);
//! ```

// `!(x > 0.0)` also rejects NaN. Packets travel inline in events to avoid
// an allocation per hop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod engine;
pub mod error;
pub mod metrics;
pub mod network;
pub mod packet;
pub mod scenario;
pub mod switch;
pub mod topology;
pub mod transport;
pub mod workload;

pub use engine::{seeded_rng, RandomStream, RunSummary, Scheduler, SimTime};
pub use error::{ConfigError, SimError, TopologyError, TransportError, WorkloadError};
pub use metrics::{FlowRecord, Series, SlowdownStats};
pub use network::{NetConfig, Network, RunOutcome, WindowPoint};
pub use packet::{AckPacket, DataPacket, Packet};
pub use switch::{IntRecord, PfcConfig};
pub use topology::{FiveTuple, LinkSpec, Topology};
pub use transport::{CcMode, CcParams, FlowSenderState, LhcsBandwidth};
pub use workload::{FlowSizeCdf, FlowSpec};
