//! Shared fixtures for the simulator benchmarks.

use fncc_core::scenario::runner::load_scenario;
use fncc_core::scenario::Scenario;
use fncc_core::transport::{CcMode, CcParams, FlowSenderState, HopState};
use fncc_core::{IntRecord, SimTime};

/// A preset cut down to `end`, with file output and window traces off.
pub fn short_scenario(preset: &str, mode: &str, end: &str) -> Scenario {
    let ov = [
        format!("cc.mode=\"{mode}\""),
        format!("end_time=\"{end}\""),
        "metrics.trace_windows=false".to_string(),
    ];
    load_scenario(preset, &ov).unwrap_or_else(|e| panic!("{preset}: {e}"))
}

/// 100G parameters with the dumbbell's base RTT.
pub fn params(mode: CcMode) -> CcParams {
    CcParams::new(mode, 100_000_000_000, SimTime::from_ns(12_507), 1000)
}

/// Sender state primed with `hops` identical idle hops.
pub fn primed_state(params: &CcParams, hops: usize) -> FlowSenderState {
    let mut s = FlowSenderState::new(params);
    s.hops = vec![
        HopState {
            last: IntRecord {
                bandwidth_bps: params.line_rate_bps,
                ..IntRecord::default()
            },
            ..HopState::default()
        };
        hops
    ];
    s
}
