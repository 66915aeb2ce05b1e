//! Host-side protocol.
//!
//! The sender runs one window machine for every mode. Modes differ only in
//! where telemetry comes from (ACK path or data path) and whether the
//! last-hop speedup may overwrite the reference window.
//!
//! Per ACK: normalized in-flight bytes are measured per hop from the
//! difference between the ACK's telemetry and the previous sample, the
//! maximum is EWMA-filtered, and the window is recomputed from the
//! reference window `Wc`. `Wc` itself only moves once per round trip, when
//! an ACK covers the first byte sent after the last synchronization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::error::TransportError;
use crate::packet::{AckPacket, DataPacket, FlowId, IntList, DATA_HEADER_BYTES};
use crate::switch::{IntPlacement, IntRecord};
use crate::topology::FiveTuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CcMode {
    #[serde(rename = "FNCC")]
    Fncc,
    #[serde(rename = "FNCC_no_LHCS")]
    FnccNoLhcs,
    #[serde(rename = "HPCC")]
    Hpcc,
}

impl CcMode {
    pub fn lhcs(self) -> bool {
        self == CcMode::Fncc
    }

    pub fn int_placement(self) -> IntPlacement {
        match self {
            CcMode::Fncc | CcMode::FnccNoLhcs => IntPlacement::AckPath,
            CcMode::Hpcc => IntPlacement::DataPath,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CcMode::Fncc => "FNCC",
            CcMode::FnccNoLhcs => "FNCC_no_LHCS",
            CcMode::Hpcc => "HPCC",
        }
    }
}

impl std::str::FromStr for CcMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "FNCC" => Ok(CcMode::Fncc),
            "FNCC_no_LHCS" => Ok(CcMode::FnccNoLhcs),
            "HPCC" => Ok(CcMode::Hpcc),
            other => Err(format!("unknown cc mode {other:?}")),
        }
    }
}

/// Which telemetry entry supplies the bandwidth for the last-hop jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LhcsBandwidth {
    /// The last hop of the request path.
    LastHop,
    /// The first entry of the ACK's telemetry list as carried on the wire.
    FirstEntry,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcParams {
    pub mode: CcMode,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Additive increase step, bytes.
    pub w_ai: f64,
    pub max_stage: u32,
    /// Base round-trip time `T`.
    pub base_rtt: SimTime,
    /// Receiver sends one cumulative ACK per this many packets.
    pub ack_every: u32,
    pub lhcs_bandwidth: LhcsBandwidth,
    pub line_rate_bps: u64,
    pub w_min: f64,
    pub w_max: f64,
}

impl CcParams {
    /// Defaults: eta 0.95, alpha 1.05, beta 0.9, maxStage 5, per-packet
    /// ACKs, `W_AI = ceil(BDP (1 - eta) / 64)`, window clamped to
    /// `[MTU, 16 BDP]`.
    pub fn new(mode: CcMode, line_rate_bps: u64, base_rtt: SimTime, mtu: u32) -> Self {
        let mut p = CcParams {
            mode,
            eta: 0.95,
            alpha: 1.05,
            beta: 0.9,
            w_ai: 0.0,
            max_stage: 5,
            base_rtt,
            ack_every: 1,
            lhcs_bandwidth: LhcsBandwidth::LastHop,
            line_rate_bps,
            w_min: f64::from(mtu),
            w_max: 0.0,
        };
        p.w_ai = p.default_w_ai();
        p.w_max = 16.0 * p.bdp();
        p
    }

    pub fn default_w_ai(&self) -> f64 {
        (self.bdp() * (1.0 - self.eta) / 64.0).ceil()
    }

    /// Line rate times base RTT, in bytes.
    pub fn bdp(&self) -> f64 {
        bytes_in(self.line_rate_bps, self.base_rtt)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(format!("0 < eta < 1 required, got {}", self.eta));
        }
        if !(self.alpha > 1.0) {
            return Err(format!("alpha > 1 required, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(format!("0 < beta < 1 required, got {}", self.beta));
        }
        if !(self.w_ai >= 0.0) {
            return Err(format!("w_ai >= 0 required, got {}", self.w_ai));
        }
        if self.max_stage < 1 {
            return Err("max_stage >= 1 required".into());
        }
        if self.ack_every < 1 {
            return Err("ack_every >= 1 required".into());
        }
        if self.base_rtt == SimTime::ZERO {
            return Err("base RTT must be positive".into());
        }
        if !(self.w_min > 0.0 && self.w_min <= self.w_max) {
            return Err(format!("window bounds [{}, {}] invalid", self.w_min, self.w_max));
        }
        Ok(())
    }
}

/// Bytes carried at `rate_bps` during `dt`.
fn bytes_in(rate_bps: u64, dt: SimTime) -> f64 {
    rate_bps as f64 * dt.as_ns() as f64 / 8e9
}

/// Last telemetry seen for one request-path hop.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HopState {
    pub last: IntRecord,
    pub tx_rate_bps: f64,
    /// Most recent raw normalized in-flight bytes of this hop.
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSenderState {
    /// Current window `W`, bytes.
    pub window: f64,
    /// Reference window `Wc`, bytes.
    pub ref_window: f64,
    pub last_update_seq: u64,
    pub inc_stage: u32,
    /// EWMA-filtered normalized in-flight bytes `U`.
    pub utilization: f64,
    /// Per-hop state `L`, in request-path order.
    pub hops: Vec<HopState>,
    pub snd_nxt: u64,
    pub snd_una: u64,
    /// Pacing rate `R = W / T`.
    pub rate_bps: f64,
    pub duplicate_acks: u64,
    /// Last (U_max, hop) pair seen by hop detection, for reporting.
    pub last_detection: (f64, usize),
}

impl FlowSenderState {
    /// One BDP window at line rate.
    pub fn new(params: &CcParams) -> Self {
        let bdp = params.bdp().clamp(params.w_min, params.w_max);
        FlowSenderState {
            window: bdp,
            ref_window: bdp,
            last_update_seq: 0,
            inc_stage: 0,
            utilization: 1.0,
            hops: Vec::new(),
            snd_nxt: 0,
            snd_una: 0,
            rate_bps: params.line_rate_bps as f64,
            duplicate_acks: 0,
            last_detection: (0.0, 0),
        }
    }

    pub fn inflight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }
}

/// Telemetry of `ack` in request-path order (hop 0 nearest the sender).
///
/// ACK-path telemetry is appended as the ACK walks back, so the last hop of
/// the request path is written first.
pub fn request_path_hops(ack: &AckPacket, mode: CcMode) -> IntList {
    match mode.int_placement() {
        IntPlacement::AckPath => ack.int.iter().rev().copied().collect(),
        IntPlacement::DataPath => ack.int.clone(),
    }
}

/// Measures normalized in-flight bytes for every hop and folds the largest
/// into the EWMA. Per-hop raw values are left in `state.hops[i].u`.
///
/// `hops` must be in request-path order and match `state.hops` in length.
pub fn measure_inflight(hops: &[IntRecord], state: &mut FlowSenderState, params: &CcParams) -> f64 {
    debug_assert_eq!(hops.len(), state.hops.len());
    let t_ns = params.base_rtt.as_ns() as f64;
    let mut u = 0.0;
    let mut tau = 0.0;
    for (new, hop) in hops.iter().zip(state.hops.iter_mut()) {
        let dts = new.ts.as_ns().saturating_sub(hop.last.ts.as_ns());
        if dts > 0 {
            let dtx = new.tx_bytes.saturating_sub(hop.last.tx_bytes);
            hop.tx_rate_bps = dtx as f64 * 8.0 * 1e9 / dts as f64;
        }
        let b = new.bandwidth_bps as f64;
        let q = new.q_len.min(hop.last.q_len) as f64;
        let u_hop = q * 8e9 / (b * t_ns) + hop.tx_rate_bps / b;
        hop.u = u_hop;
        if u_hop > u {
            u = u_hop;
            tau = (dts as f64).min(t_ns);
        }
    }
    state.utilization = (1.0 - tau / t_ns) * state.utilization + (tau / t_ns) * u;
    state.utilization
}

/// Most congested hop by raw per-hop value. Strict comparison: the earliest
/// hop wins ties. Returns `(0.0, 0)` when every hop reads zero.
pub fn hop_detection(state: &mut FlowSenderState) -> (f64, usize) {
    let mut u_max = 0.0;
    let mut hop = 0;
    for (j, h) in state.hops.iter().enumerate() {
        if h.u > u_max {
            u_max = h.u;
            hop = j;
        }
    }
    state.last_detection = (u_max, hop);
    (u_max, hop)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhcsTrigger {
    pub ref_window: f64,
    pub n: u16,
    pub bandwidth_bps: u64,
    pub u_max: f64,
}

/// Last-hop congestion speedup: when the last request-path hop is the most
/// congested and exceeds `alpha`, jump `Wc` to that hop's fair share
/// `B * T * beta / N`.
pub fn update_wc_lhcs(
    ack: &AckPacket,
    hops: &[IntRecord],
    state: &mut FlowSenderState,
    params: &CcParams,
) -> Result<Option<LhcsTrigger>, TransportError> {
    if ack.n == 0 {
        return Err(TransportError::ZeroConcurrency);
    }
    let (u_max, hop) = hop_detection(state);
    if state.hops.is_empty() || hop != state.hops.len() - 1 || u_max <= params.alpha {
        return Ok(None);
    }
    let bandwidth_bps = match params.lhcs_bandwidth {
        LhcsBandwidth::LastHop => hops[hop].bandwidth_bps,
        LhcsBandwidth::FirstEntry => ack.int[0].bandwidth_bps,
    };
    state.ref_window = lhcs_window(bandwidth_bps, params.base_rtt, params.beta, ack.n);
    Ok(Some(LhcsTrigger {
        ref_window: state.ref_window,
        n: ack.n,
        bandwidth_bps,
        u_max,
    }))
}

/// `B * T * beta / N` in bytes.
pub fn lhcs_window(bandwidth_bps: u64, base_rtt: SimTime, beta: f64, n: u16) -> f64 {
    bytes_in(bandwidth_bps, base_rtt) * beta / f64::from(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowUpdate {
    pub window: f64,
    pub lhcs: Option<LhcsTrigger>,
    /// True when the multiplicative branch ran.
    pub multiplicative: bool,
}

/// Window computation for one ACK. Runs the last-hop speedup first when the
/// mode enables it, then either scales `Wc` by `eta / U` or adds `W_AI`.
pub fn compute_wind(
    u: f64,
    update_wc: bool,
    ack: &AckPacket,
    hops: &[IntRecord],
    state: &mut FlowSenderState,
    params: &CcParams,
) -> Result<WindowUpdate, TransportError> {
    let lhcs = if params.mode.lhcs() {
        update_wc_lhcs(ack, hops, state, params)?
    } else {
        None
    };
    let (window, multiplicative) = window_rule(u, update_wc, state, params)?;
    Ok(WindowUpdate {
        window,
        lhcs,
        multiplicative,
    })
}

/// The MI/MD and staged AI rule, without the last-hop speedup.
pub fn window_rule(
    u: f64,
    update_wc: bool,
    state: &mut FlowSenderState,
    params: &CcParams,
) -> Result<(f64, bool), TransportError> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(TransportError::BadUtilization(u));
    }
    let multiplicative = u >= params.eta || state.inc_stage >= params.max_stage;
    let raw = if multiplicative {
        state.ref_window / (u / params.eta) + params.w_ai
    } else {
        state.ref_window + params.w_ai
    };
    let w = raw.clamp(params.w_min, params.w_max);
    if update_wc {
        state.inc_stage = if multiplicative { 0 } else { state.inc_stage + 1 };
        state.ref_window = w;
    }
    Ok((w, multiplicative))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AckOutcome {
    Duplicate,
    /// First telemetry for this path: stored, no window change.
    Initialized,
    Updated {
        window: f64,
        rate_bps: f64,
        utilization: f64,
        update_wc: bool,
        lhcs: Option<LhcsTrigger>,
    },
}

/// Full per-ACK procedure: measure, recompute the window, resync `Wc` once
/// per round trip, set the pacing rate and remember the telemetry.
pub fn on_new_ack(
    ack: &AckPacket,
    state: &mut FlowSenderState,
    params: &CcParams,
) -> Result<AckOutcome, TransportError> {
    if ack.ack_seq <= state.snd_una {
        state.duplicate_acks += 1;
        return Ok(AckOutcome::Duplicate);
    }
    state.snd_una = ack.ack_seq;
    let hops = request_path_hops(ack, params.mode);
    if hops.is_empty() {
        return Ok(AckOutcome::Initialized);
    }
    if state.hops.len() != hops.len() {
        state.hops = hops
            .iter()
            .map(|&last| HopState {
                last,
                ..HopState::default()
            })
            .collect();
        return Ok(AckOutcome::Initialized);
    }
    let u = measure_inflight(&hops, state, params);
    let update_wc = ack.ack_seq > state.last_update_seq;
    let upd = compute_wind(u, update_wc, ack, &hops, state, params)?;
    if !params.mode.lhcs() {
        hop_detection(state);
    }
    state.window = upd.window;
    if update_wc {
        state.last_update_seq = state.snd_nxt;
    }
    state.rate_bps = state.window * 8e9 / params.base_rtt.as_ns() as f64;
    for (h, rec) in state.hops.iter_mut().zip(hops.iter()) {
        h.last = *rec;
    }
    Ok(AckOutcome::Updated {
        window: state.window,
        rate_bps: state.rate_bps,
        utilization: u,
        update_wc,
        lhcs: upd.lhcs,
    })
}

#[derive(Debug)]
pub enum SendDecision {
    Send(DataPacket),
    WindowBlocked,
    /// Pacing gate closed until this many picoseconds.
    PacedUntil(u64),
    Done,
}

/// One outbound flow at a sender host.
#[derive(Debug, Clone)]
pub struct SenderFlow {
    pub id: FlowId,
    pub tuple: FiveTuple,
    pub size: u64,
    pub payload_per_packet: u32,
    pub cc: FlowSenderState,
    /// Earliest departure of the next packet, picoseconds.
    pub next_send_ps: u64,
}

impl SenderFlow {
    pub fn new(
        id: FlowId,
        tuple: FiveTuple,
        size: u64,
        payload_per_packet: u32,
        params: &CcParams,
    ) -> Self {
        SenderFlow {
            id,
            tuple,
            size,
            payload_per_packet,
            cc: FlowSenderState::new(params),
            next_send_ps: 0,
        }
    }

    pub fn all_sent(&self) -> bool {
        self.cc.snd_nxt >= self.size
    }

    pub fn all_acked(&self) -> bool {
        self.cc.snd_una >= self.size
    }

    /// Stops the flow after at most one more packet; the truncated size is
    /// returned. That packet carries the final-packet flag.
    pub fn truncate(&mut self) -> u64 {
        if !self.all_sent() {
            let next = u64::from(self.payload_per_packet).min(self.size - self.cc.snd_nxt);
            self.size = self.cc.snd_nxt + next;
        }
        self.size
    }

    /// Emits the next packet if the window has room for it and the pacing
    /// gap since the previous departure has elapsed. `now_ps` is the instant
    /// the packet would start serializing.
    pub fn try_send(&mut self, now_ps: u64, params: &CcParams) -> SendDecision {
        if self.all_sent() {
            return SendDecision::Done;
        }
        let payload = u64::from(self.payload_per_packet).min(self.size - self.cc.snd_nxt);
        if (self.cc.inflight() + payload) as f64 > self.cc.window {
            return SendDecision::WindowBlocked;
        }
        if now_ps < self.next_send_ps {
            return SendDecision::PacedUntil(self.next_send_ps);
        }
        let size = payload as u32 + DATA_HEADER_BYTES;
        let rate = self.cc.rate_bps.min(params.line_rate_bps as f64);
        self.next_send_ps = self.next_send_ps.max(now_ps) + pacing_gap_ps(size, rate);
        let seq = self.cc.snd_nxt;
        self.cc.snd_nxt += payload;
        SendDecision::Send(DataPacket {
            flow: self.id,
            tuple: self.tuple,
            seq,
            payload: payload as u32,
            size,
            last: self.cc.snd_nxt >= self.size,
            int: IntList::new(),
        })
    }
}

/// Inter-departure gap for `bytes` at `rate_bps`, picoseconds.
pub fn pacing_gap_ps(bytes: u32, rate_bps: f64) -> u64 {
    (f64::from(bytes) * 8e12 / rate_bps).round() as u64
}

#[derive(Debug, Clone, Default)]
struct RxFlow {
    rcv_nxt: u64,
    since_ack: u32,
}

/// Receive side of one host: cumulative ACKs and the concurrent-flow count.
#[derive(Debug, Clone, Default)]
pub struct ReceiverState {
    flows: HashMap<FlowId, RxFlow>,
    delivered_bytes: u64,
}

impl ReceiverState {
    /// Flows with unfinished inbound data.
    pub fn active_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_bytes
    }

    /// Registers an inbound connection so it counts towards `N` from now on.
    pub fn open(&mut self, flow: FlowId) {
        self.flows.entry(flow).or_default();
    }

    /// Accepts an in-order data packet; returns an ACK after every
    /// `ack_every`-th packet and after a flow's final packet.
    pub fn receiver_on_data(
        &mut self,
        pkt: &DataPacket,
        ack_every: u32,
        mode: CcMode,
    ) -> Result<Option<AckPacket>, TransportError> {
        let flow = self.flows.entry(pkt.flow).or_default();
        if pkt.seq != flow.rcv_nxt {
            return Err(TransportError::OutOfOrder {
                flow: pkt.flow,
                expected: flow.rcv_nxt,
                got: pkt.seq,
            });
        }
        flow.rcv_nxt += u64::from(pkt.payload);
        flow.since_ack += 1;
        self.delivered_bytes += u64::from(pkt.payload);
        if flow.since_ack < ack_every && !pkt.last {
            return Ok(None);
        }
        flow.since_ack = 0;
        let ack_seq = flow.rcv_nxt;
        let n = self.flows.len().min(usize::from(u16::MAX)) as u16;
        if pkt.last {
            self.flows.remove(&pkt.flow);
        }
        let carries_n = mode.int_placement() == IntPlacement::AckPath;
        Ok(Some(AckPacket {
            flow: pkt.flow,
            tuple: pkt.tuple.reverse(),
            ack_seq,
            n,
            carries_n,
            int: match mode.int_placement() {
                IntPlacement::AckPath => IntList::new(),
                IntPlacement::DataPath => pkt.int.clone(),
            },
            input_port: None,
        }))
    }
}
