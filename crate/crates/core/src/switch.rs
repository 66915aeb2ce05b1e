//! Switch egress ports, the per-switch telemetry table, PFC accounting, and
//! the two places telemetry can be written: into ACKs on the return path or
//! into data packets on the request path.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::error::SwitchError;
use crate::packet::{AckPacket, DataPacket, Packet, PfcKind, INT_ENTRY_BYTES};
use crate::topology::PortId;

/// One hop's telemetry sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRecord {
    pub bandwidth_bps: u64,
    pub ts: SimTime,
    /// Bytes the port has put on the wire since the start of the run.
    pub tx_bytes: u64,
    /// Bytes waiting in the port's queue.
    pub q_len: u64,
}

/// Line rates representable in the 4-bit bandwidth field; the code is the
/// index.
pub const WIRE_RATES_GBPS: [u64; 9] = [0, 10, 25, 40, 50, 100, 200, 400, 800];
/// txBytes is carried in 128-byte units, qLen in 80-byte units.
pub const WIRE_TX_UNIT: u64 = 128;
pub const WIRE_QLEN_UNIT: u64 = 80;

impl IntRecord {
    /// Packs into the 64-bit on-wire entry: 4 bits rate code, 24 bits
    /// timestamp (ns, wrapping), 20 bits txBytes (wrapping), 16 bits qLen
    /// (saturating).
    pub fn pack(&self) -> u64 {
        let gbps = self.bandwidth_bps / 1_000_000_000;
        let code = WIRE_RATES_GBPS
            .iter()
            .position(|&r| r == gbps)
            .unwrap_or(0) as u64;
        let ts = self.ts.as_ns() & 0xff_ffff;
        let tx = (self.tx_bytes / WIRE_TX_UNIT) & 0xf_ffff;
        let q = (self.q_len / WIRE_QLEN_UNIT).min(0xffff);
        (code << 60) | (ts << 36) | (tx << 16) | q
    }

    pub fn unpack(word: u64) -> IntRecord {
        let code = (word >> 60) as usize;
        IntRecord {
            bandwidth_bps: WIRE_RATES_GBPS.get(code).copied().unwrap_or(0) * 1_000_000_000,
            ts: SimTime((word >> 36) & 0xff_ffff),
            tx_bytes: ((word >> 16) & 0xf_ffff) * WIRE_TX_UNIT,
            q_len: (word & 0xffff) * WIRE_QLEN_UNIT,
        }
    }
}

/// Telemetry of every output port of one switch, indexed by port number.
///
/// With a non-zero refresh interval each entry holds the port's state as of
/// the most recent multiple of the interval. Snapshots are taken lazily:
/// [`AllIntTable::observe`] must run before every mutation of the port, which
/// reproduces periodic sampling without a timer event per port. An interval
/// of zero means entries are read live at lookup time.
#[derive(Debug, Clone)]
pub struct AllIntTable {
    interval: SimTime,
    entries: Vec<IntRecord>,
    epochs: Vec<u64>,
}

impl AllIntTable {
    pub fn new(ports: usize, interval: SimTime) -> Self {
        AllIntTable {
            interval,
            entries: vec![IntRecord::default(); ports],
            epochs: vec![0; ports],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn interval(&self) -> SimTime {
        self.interval
    }

    /// Size of the table in bits on the wire format.
    pub fn size_bits(&self) -> usize {
        self.entries.len() * 64
    }

    /// Snapshots `port` if a refresh boundary has passed since the last
    /// snapshot. `live(t)` must describe the port before any mutation
    /// happening at `now`; it is evaluated at the boundary time.
    pub fn observe(&mut self, port: PortId, now: SimTime, live: impl FnOnce(SimTime) -> IntRecord) {
        if self.interval == SimTime::ZERO {
            return;
        }
        let epoch = now.as_ns() / self.interval.as_ns() + 1;
        if epoch > self.epochs[port] {
            self.epochs[port] = epoch;
            let at = SimTime((epoch - 1) * self.interval.as_ns());
            self.entries[port] = IntRecord { ts: at, ..live(at) };
        }
    }

    /// Explicit refresh of every entry from live port state.
    pub fn refresh(&mut self, now: SimTime, live: impl Fn(PortId) -> IntRecord) {
        for port in 0..self.entries.len() {
            self.entries[port] = IntRecord { ts: now, ..live(port) };
            if self.interval > SimTime::ZERO {
                self.epochs[port] = now.as_ns() / self.interval.as_ns() + 1;
            }
        }
    }

    pub fn lookup(
        &mut self,
        port: PortId,
        now: SimTime,
        live: impl FnOnce(SimTime) -> IntRecord,
    ) -> Result<IntRecord, SwitchError> {
        if port >= self.entries.len() {
            return Err(SwitchError::PortOutOfRange {
                port,
                ports: self.entries.len(),
            });
        }
        if self.interval == SimTime::ZERO {
            return Ok(IntRecord { ts: now, ..live(now) });
        }
        self.observe(port, now, live);
        Ok(self.entries[port])
    }
}

/// An output port: FIFO queue plus transmitter state. Also used for host
/// NICs.
#[derive(Debug, Clone)]
pub struct EgressPort {
    pub rate_bps: u64,
    /// Queued packets with the ingress port they arrived on.
    pub queue: VecDeque<(Packet, PortId)>,
    pub queued_bytes: u64,
    pub tx_bytes: u64,
    /// Set while the downstream neighbour has us paused.
    pub paused: bool,
    pub busy: bool,
    /// End of the current (or last) transmission, in picoseconds.
    pub free_at_ps: u64,
    pub peak_queue: u64,
}

impl EgressPort {
    pub fn new(rate_bps: u64) -> Self {
        EgressPort {
            rate_bps,
            queue: VecDeque::new(),
            queued_bytes: 0,
            tx_bytes: 0,
            paused: false,
            busy: false,
            free_at_ps: 0,
            peak_queue: 0,
        }
    }

    /// Port state at `now`. The transmit counter excludes the part of the
    /// packet on the wire that has not been serialized yet, so it grows at
    /// line rate rather than one packet at a time.
    pub fn live_record(&self, now: SimTime) -> IntRecord {
        let pending_ps = self.free_at_ps.saturating_sub(now.as_ps());
        let pending = (u128::from(pending_ps) * u128::from(self.rate_bps) / 8_000_000_000_000) as u64;
        IntRecord {
            bandwidth_bps: self.rate_bps,
            ts: now,
            tx_bytes: self.tx_bytes.saturating_sub(pending),
            q_len: self.queued_bytes,
        }
    }

    pub fn push(&mut self, pkt: Packet, ingress: PortId) {
        self.queued_bytes += u64::from(pkt.size());
        self.peak_queue = self.peak_queue.max(self.queued_bytes);
        self.queue.push_back((pkt, ingress));
    }

    pub fn pop(&mut self) -> Option<(Packet, PortId)> {
        let (pkt, ingress) = self.queue.pop_front()?;
        self.queued_bytes -= u64::from(pkt.size());
        Some((pkt, ingress))
    }

    /// True when the port should be serializing but is not.
    pub fn can_start(&self) -> bool {
        !self.busy && !self.paused
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfcConfig {
    pub enabled: bool,
    pub pause_threshold: u64,
    pub resume_threshold: u64,
}

impl PfcConfig {
    pub fn with_threshold(pause_threshold: u64, resume_fraction: f64) -> Self {
        PfcConfig {
            enabled: true,
            pause_threshold,
            resume_threshold: (pause_threshold as f64 * resume_fraction) as u64,
        }
    }

    pub fn disabled() -> Self {
        PfcConfig {
            enabled: false,
            pause_threshold: u64::MAX,
            resume_threshold: u64::MAX,
        }
    }
}

/// Buffer occupancy attributed to one ingress port, and its PFC state.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngressAccount {
    pub occupancy: u64,
    pub pause_sent: bool,
    pub pause_frames_sent: u64,
}

impl IngressAccount {
    /// Applies an occupancy change and returns the PFC frame to send
    /// upstream, if the change crossed a threshold.
    pub fn pfc_update(&mut self, delta: i64, cfg: &PfcConfig) -> Option<PfcKind> {
        self.occupancy = self
            .occupancy
            .checked_add_signed(delta)
            .expect("ingress occupancy underflow");
        if !cfg.enabled {
            return None;
        }
        if !self.pause_sent && self.occupancy > cfg.pause_threshold {
            self.pause_sent = true;
            self.pause_frames_sent += 1;
            Some(PfcKind::Pause)
        } else if self.pause_sent && self.occupancy < cfg.resume_threshold {
            self.pause_sent = false;
            Some(PfcKind::Resume)
        } else {
            None
        }
    }
}

/// Where switches write telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntPlacement {
    /// Request-path port state written into ACKs on the return path.
    AckPath,
    /// Egress port state appended to every data packet.
    DataPath,
}

#[derive(Debug)]
pub enum Ingress {
    /// Hand to routing and then the chosen egress port.
    Forward(Packet),
    /// Flow-control frame for the egress port facing the sender of this
    /// frame; never routed.
    FlowControl(PfcKind),
}

/// Input-engine step: ACKs remember the port they entered on.
pub fn on_packet_ingress(pkt: Packet, input_port: PortId) -> Ingress {
    match pkt {
        Packet::Ack(mut ack) => {
            ack.input_port = Some(input_port);
            Ingress::Forward(Packet::Ack(ack))
        }
        Packet::Data(_) => Ingress::Forward(pkt),
        Packet::Pfc(kind) => Ingress::FlowControl(kind),
    }
}

/// Output-engine step for ACKs: append the telemetry of the port the ACK
/// came in on, which is the output port of the matching data packets.
pub fn on_ack_egress(
    mut ack: AckPacket,
    table: &mut AllIntTable,
    now: SimTime,
    live: impl Fn(PortId, SimTime) -> IntRecord,
) -> Result<AckPacket, SwitchError> {
    let port = ack.input_port.take().ok_or(SwitchError::PortOutOfRange {
        port: usize::MAX,
        ports: table.len(),
    })?;
    if port >= table.len() {
        return Err(SwitchError::PortOutOfRange {
            port,
            ports: table.len(),
        });
    }
    let rec = table.lookup(port, now, |t| live(port, t))?;
    ack.int.push(rec);
    Ok(ack)
}

/// Data-path telemetry: append the egress port's current state.
pub fn hpcc_data_egress(mut pkt: DataPacket, rec: IntRecord) -> DataPacket {
    pkt.int.push(rec);
    pkt.size += INT_ENTRY_BYTES;
    pkt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{IntList, DATA_HEADER_BYTES};
    use crate::topology::{FiveTuple, Protocol};
    use proptest::prelude::*;

    fn tuple() -> FiveTuple {
        FiveTuple {
            src_addr: 0,
            dst_addr: 1,
            src_port: 1000,
            dst_port: 4791,
            protocol: Protocol::Data,
        }
    }

    fn ack() -> AckPacket {
        AckPacket {
            flow: 0,
            tuple: tuple().reverse(),
            ack_seq: 1470,
            n: 1,
            carries_n: true,
            int: IntList::new(),
            input_port: None,
        }
    }

    fn data() -> DataPacket {
        DataPacket {
            flow: 0,
            tuple: tuple(),
            seq: 0,
            payload: 1470,
            size: 1470 + DATA_HEADER_BYTES,
            last: false,
            int: IntList::new(),
        }
    }

    fn rec(port: usize, now: SimTime) -> IntRecord {
        IntRecord {
            bandwidth_bps: 100_000_000_000,
            ts: now,
            tx_bytes: 1000 * port as u64,
            q_len: port as u64,
        }
    }

    #[test]
    fn ack_ingress_records_port() {
        let Ingress::Forward(Packet::Ack(a)) = on_packet_ingress(Packet::Ack(ack()), 3) else {
            panic!("ACK must be forwarded");
        };
        assert_eq!(a.input_port, Some(3));
    }

    #[test]
    fn data_ingress_untouched() {
        let Ingress::Forward(Packet::Data(d)) = on_packet_ingress(Packet::Data(data()), 3) else {
            panic!("data must be forwarded");
        };
        assert!(d.int.is_empty());
        assert_eq!(d.size, 1518);
    }

    #[test]
    fn pause_frame_is_consumed() {
        assert!(matches!(
            on_packet_ingress(Packet::Pfc(PfcKind::Pause), 1),
            Ingress::FlowControl(PfcKind::Pause)
        ));
    }

    #[test]
    fn ack_egress_appends_entry_of_input_port() {
        let mut table = AllIntTable::new(4, SimTime::ZERO);
        let mut a = ack();
        a.input_port = Some(2);
        let now = SimTime(500);
        let out = on_ack_egress(a, &mut table, now, |p, _| rec(p, now)).unwrap();
        assert_eq!(out.int.as_slice(), &[rec(2, now)]);
        assert_eq!(out.size(), 66 + 8);
    }

    #[test]
    fn ack_egress_out_of_range_port_is_an_error() {
        let mut table = AllIntTable::new(2, SimTime::ZERO);
        let mut a = ack();
        a.input_port = Some(5);
        let err = on_ack_egress(a, &mut table, SimTime(0), |p, _| rec(p, SimTime(0))).unwrap_err();
        assert_eq!(err, SwitchError::PortOutOfRange { port: 5, ports: 2 });
    }

    #[test]
    fn data_path_int_grows_packet() {
        let mut d = data();
        for hop in 0..3 {
            d = hpcc_data_egress(d, rec(hop, SimTime(hop as u64)));
        }
        assert_eq!(d.int.len(), 3);
        assert_eq!(d.size, 1518 + 24);
    }

    #[test]
    fn table_has_one_entry_per_port_and_fits_4kbit_for_64_ports() {
        let t = AllIntTable::new(64, SimTime(1_000));
        assert_eq!(t.len(), 64);
        assert_eq!(t.size_bits(), 4096);
    }

    #[test]
    fn periodic_table_holds_state_at_last_boundary() {
        let mut table = AllIntTable::new(1, SimTime(1_000));
        let mut port = EgressPort::new(100_000_000_000);
        // Mutations at 200ns and 1_300ns; a read at 1_700ns must see the
        // state as of 1_000ns (i.e. after the first mutation only).
        table.observe(0, SimTime(200), |t| port.live_record(t));
        port.tx_bytes += 1518;
        table.observe(0, SimTime(1_300), |t| port.live_record(t));
        port.tx_bytes += 1518;
        let got = table
            .lookup(0, SimTime(1_700), |t| port.live_record(t))
            .unwrap();
        assert_eq!(got.ts, SimTime(1_000));
        assert_eq!(got.tx_bytes, 1518);
        // Idle port across several intervals: tx unchanged, ts advances.
        let got = table
            .lookup(0, SimTime(5_100), |t| port.live_record(t))
            .unwrap();
        assert_eq!((got.ts, got.tx_bytes, got.q_len), (SimTime(5_000), 3036, 0));
    }

    #[test]
    fn zero_interval_samples_at_lookup() {
        let mut table = AllIntTable::new(1, SimTime::ZERO);
        let mut port = EgressPort::new(100_000_000_000);
        port.tx_bytes = 777;
        let got = table.lookup(0, SimTime(42), |t| port.live_record(t)).unwrap();
        assert_eq!((got.ts, got.tx_bytes), (SimTime(42), 777));
    }

    #[test]
    fn explicit_refresh_snapshots_every_port() {
        let mut table = AllIntTable::new(3, SimTime(1_000));
        table.refresh(SimTime(2_000), |p| rec(p, SimTime(0)));
        for p in 0..3 {
            let live = rec(p, SimTime(2_500));
            let got = table.lookup(p, SimTime(2_500), |_| IntRecord { tx_bytes: 9, ..live }).unwrap();
            assert_eq!(got.tx_bytes, 1000 * p as u64);
            assert_eq!(got.ts, SimTime(2_000));
        }
    }

    #[test]
    fn line_rate_tx_bytes_growth_matches_rate() {
        // Back-to-back 1518B packets at 100G; the counter read at any two
        // refresh boundaries differs by rate * dt / 8 up to rounding.
        let mut table = AllIntTable::new(1, SimTime(1_000));
        let mut port = EgressPort::new(100_000_000_000);
        let ser_ps = 121_440u64;
        let mut t_ps = 0u64;
        let mut seen = Vec::new();
        while t_ps < 40_000_000 {
            let now = SimTime(t_ps.div_ceil(1000));
            table.observe(0, now, |t| port.live_record(t));
            port.tx_bytes += 1518;
            port.free_at_ps = t_ps + ser_ps;
            t_ps += ser_ps;
            let e = table.lookup(0, now, |t| port.live_record(t)).unwrap();
            if seen.last().is_none_or(|l: &IntRecord| l.ts != e.ts) {
                seen.push(e);
            }
        }
        for w in seen.windows(2).skip(1) {
            let dt = (w[1].ts.as_ns() - w[0].ts.as_ns()) as f64;
            let expect = 100e9 * dt * 1e-9 / 8.0;
            let got = (w[1].tx_bytes - w[0].tx_bytes) as f64;
            assert!((got - expect).abs() <= 2.0, "got {got} expect {expect}");
        }
        assert!(seen.len() > 30);
    }

    #[test]
    fn live_counter_excludes_unserialized_bytes() {
        let mut port = EgressPort::new(100_000_000_000);
        port.tx_bytes = 1518;
        port.free_at_ps = 121_440;
        assert_eq!(port.live_record(SimTime(0)).tx_bytes, 0);
        assert_eq!(port.live_record(SimTime(60)).tx_bytes, 750);
        assert_eq!(port.live_record(SimTime(200)).tx_bytes, 1518);
    }

    #[test]
    fn pause_emitted_once_on_crossing() {
        let cfg = PfcConfig::with_threshold(500_000, 0.8);
        let mut acc = IngressAccount {
            occupancy: 499_000,
            ..Default::default()
        };
        assert_eq!(acc.pfc_update(2_000, &cfg), Some(PfcKind::Pause));
        assert_eq!(acc.pause_frames_sent, 1);
        assert_eq!(acc.pfc_update(10_000, &cfg), None);
        assert_eq!(acc.pfc_update(-100_000, &cfg), None);
        // 411_000 -> below 400_000 resumes.
        assert_eq!(acc.pfc_update(-12_000, &cfg), Some(PfcKind::Resume));
        assert_eq!(acc.pause_frames_sent, 1);
    }

    #[test]
    fn below_threshold_never_pauses() {
        let cfg = PfcConfig::with_threshold(500_000, 0.8);
        let mut acc = IngressAccount::default();
        for _ in 0..300 {
            assert_eq!(acc.pfc_update(1518, &cfg), None);
        }
        assert_eq!(acc.pause_frames_sent, 0);
    }

    #[test]
    fn disabled_pfc_is_silent() {
        let cfg = PfcConfig::disabled();
        let mut acc = IngressAccount::default();
        assert_eq!(acc.pfc_update(10_000_000, &cfg), None);
    }

    #[test]
    fn egress_queue_byte_accounting() {
        let mut port = EgressPort::new(1);
        port.push(Packet::Data(data()), 0);
        port.push(Packet::Ack(ack()), 1);
        assert_eq!(port.queued_bytes, 1518 + 66);
        port.pop();
        assert_eq!(port.queued_bytes, 66);
        assert_eq!(port.peak_queue, 1518 + 66);
    }

    proptest! {
        #[test]
        fn wire_pack_round_trips_within_quantization(
            code in 1usize..9,
            ts in 0u64..(1 << 24),
            tx in 0u64..(1u64 << 20) * WIRE_TX_UNIT,
            q in 0u64..0xffff * WIRE_QLEN_UNIT,
        ) {
            let r = IntRecord {
                bandwidth_bps: WIRE_RATES_GBPS[code] * 1_000_000_000,
                ts: SimTime(ts),
                tx_bytes: tx,
                q_len: q,
            };
            let back = IntRecord::unpack(r.pack());
            prop_assert_eq!(back.bandwidth_bps, r.bandwidth_bps);
            prop_assert_eq!(back.ts, r.ts);
            prop_assert!(r.tx_bytes - back.tx_bytes < WIRE_TX_UNIT);
            prop_assert!(r.q_len - back.q_len < WIRE_QLEN_UNIT);
        }
    }
}
