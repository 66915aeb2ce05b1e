//! Event-driven wiring of hosts, switches and links.
//!
//! Links are full duplex and store-and-forward. A port serializes one packet
//! at a time; transmit completion and far-end arrival are separate events.
//! Port clocks run in picoseconds so back-to-back packets keep exact line
//! rate while events fire on whole nanoseconds.

use std::collections::VecDeque;

use serde::Serialize;

use crate::engine::{RunSummary, Scheduler, SimTime};
use crate::error::SimError;
use crate::metrics::{ideal_fct, FlowRecord, Metric, Series};
use crate::packet::{AckPacket, Packet, PfcKind, PFC_FRAME_BYTES};
use crate::switch::{
    hpcc_data_egress, on_ack_egress, on_packet_ingress, AllIntTable, EgressPort, Ingress,
    IngressAccount, IntPlacement, PfcConfig,
};
use crate::topology::{LinkSpec, NodeId, NodeKind, PortId, Topology};
use crate::transport::{
    on_new_ack, AckOutcome, CcParams, ReceiverState, SendDecision, SenderFlow,
};
use crate::workload::FlowSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub cc: CcParams,
    pub mtu: u32,
    pub pfc: PfcConfig,
    /// All_INT_Table refresh period; zero samples live on lookup.
    pub int_refresh: SimTime,
    /// Period of queue and per-flow samples; zero disables them.
    pub sample_interval: SimTime,
    pub utilization_window: SimTime,
    pub port_series: bool,
    pub flow_series: bool,
    /// Keep every per-ACK window update in memory.
    pub trace_windows: bool,
}

#[derive(Debug)]
enum Ev {
    FlowStart(u32),
    FlowStop(u32),
    TxDone { port: PortId },
    Arrive { port: PortId, pkt: Packet },
    HostWake,
    Sample,
    UtilTick,
}

#[derive(Debug)]
struct SwitchState {
    ports: Vec<EgressPort>,
    ingress: Vec<IngressAccount>,
    table: AllIntTable,
}

#[derive(Debug)]
struct HostState {
    nic: EgressPort,
    acks: VecDeque<AckPacket>,
    active: Vec<u32>,
    rr: usize,
    rx: ReceiverState,
    wake_at: Option<SimTime>,
}

#[derive(Debug)]
enum NodeState {
    Switch(SwitchState),
    Host(HostState),
}

/// Per-ACK sender state, for reaction-time analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowPoint {
    pub t: SimTime,
    pub window: f64,
    pub ref_window: f64,
    pub rate_bps: f64,
    pub utilization: f64,
    pub update_wc: bool,
    /// Largest per-hop raw value and its request-path index.
    pub u_max: f64,
    pub hop: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LhcsEvent {
    pub t: SimTime,
    pub flow: u32,
    pub ref_window: f64,
    pub window: f64,
    pub rate_bps: f64,
    pub n: u16,
    pub bandwidth_bps: u64,
    pub u_max: f64,
}

#[derive(Debug)]
struct FlowRt {
    spec: FlowSpec,
    sender: SenderFlow,
    src_node: NodeId,
    dst_node: NodeId,
    links: Vec<LinkSpec>,
    label: u32,
    started: bool,
    finish: Option<SimTime>,
    rx_bytes: u64,
    trace: Vec<WindowPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortStats {
    pub node: NodeId,
    pub name: String,
    pub port: PortId,
    pub peer: String,
    pub rate_bps: u64,
    pub peak_queue_bytes: u64,
    pub tx_bytes: u64,
    /// Pause frames sent upstream through this port.
    pub pause_frames_sent: u64,
    pub mean_utilization: f64,
    /// Utilization of consecutive windows from time zero.
    #[serde(skip)]
    pub windows: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Counters {
    pub data_packets_sent: u64,
    pub data_packets_delivered: u64,
    pub acks_sent: u64,
    pub acks_delivered: u64,
    pub duplicate_acks: u64,
    pub pause_frames: u64,
    pub resume_frames: u64,
    pub pfc_frames_delivered: u64,
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub end_time: SimTime,
    pub flows: Vec<FlowRecord>,
    pub flows_started: usize,
    pub series: Series,
    /// Per-flow window traces, indexed by flow id (empty unless enabled).
    pub traces: Vec<Vec<WindowPoint>>,
    pub lhcs: Vec<LhcsEvent>,
    pub ports: Vec<PortStats>,
    pub counters: Counters,
    /// Bytes delivered per flow at the end of the run.
    pub delivered: Vec<u64>,
}

impl RunOutcome {
    /// Switch port with the largest peak queue (first on ties).
    pub fn congestion_point(&self) -> Option<&PortStats> {
        self.ports
            .iter()
            .fold(None, |best: Option<&PortStats>, p| match best {
                Some(b) if b.peak_queue_bytes >= p.peak_queue_bytes => Some(b),
                _ => Some(p),
            })
    }

    pub fn peak_queue(&self) -> u64 {
        self.congestion_point().map_or(0, |p| p.peak_queue_bytes)
    }

    pub fn port(&self, name: &str, port: PortId) -> Option<&PortStats> {
        self.ports.iter().find(|p| p.name == name && p.port == port)
    }
}

pub struct Network {
    topo: Topology,
    cfg: NetConfig,
    sched: Scheduler<Ev>,
    nodes: Vec<NodeState>,
    flows: Vec<FlowRt>,
    series: Series,
    node_labels: Vec<u32>,
    lhcs: Vec<LhcsEvent>,
    counters: Counters,
    /// Bytes received per (node, port), PFC frames excluded.
    rx_bytes: Vec<Vec<u64>>,
    /// Bytes serialized per (node, port) and not yet arrived.
    wire_bytes: Vec<Vec<u64>>,
    wire_data_packets: u64,
    util: Vec<Vec<Vec<f64>>>,
    util_last_tx: Vec<Vec<u64>>,
}

fn invariant(time: SimTime, msg: impl Into<String>) -> SimError {
    SimError::Invariant {
        time,
        msg: msg.into(),
    }
}

impl Network {
    pub fn new(topo: Topology, schedule: Vec<FlowSpec>, cfg: NetConfig) -> Result<Self, SimError> {
        cfg.cc
            .validate()
            .map_err(|m| invariant(SimTime::ZERO, format!("cc parameters: {m}")))?;
        let mut series = Series::default();
        let mut nodes = Vec::with_capacity(topo.nodes().len());
        let mut node_labels = Vec::new();
        for n in topo.nodes() {
            node_labels.push(series.intern(n.name.clone()));
            nodes.push(match n.kind {
                NodeKind::Switch { .. } => NodeState::Switch(SwitchState {
                    ports: n.ports.iter().map(|p| EgressPort::new(p.link.rate_bps)).collect(),
                    ingress: vec![IngressAccount::default(); n.ports.len()],
                    table: AllIntTable::new(n.ports.len(), cfg.int_refresh),
                }),
                NodeKind::Host { .. } => NodeState::Host(HostState {
                    nic: EgressPort::new(n.ports[0].link.rate_bps),
                    acks: VecDeque::new(),
                    active: Vec::new(),
                    rr: 0,
                    rx: ReceiverState::default(),
                    wake_at: None,
                }),
            });
        }
        let payload = crate::packet::payload_per_packet(cfg.mtu);
        let host_count = topo.hosts().len() as u32;
        let mut flows = Vec::with_capacity(schedule.len());
        for (id, spec) in schedule.into_iter().enumerate() {
            if spec.src >= host_count || spec.dst >= host_count {
                return Err(invariant(
                    SimTime::ZERO,
                    format!("flow {id}: host out of range ({} hosts)", host_count),
                ));
            }
            let path = topo.path(&spec.tuple())?;
            let links = path.hops.iter().map(|&h| topo.link_of(h)).collect();
            let label = if cfg.flow_series {
                series.intern(format!("flow{id}"))
            } else {
                0
            };
            flows.push(FlowRt {
                sender: SenderFlow::new(id as u32, spec.tuple(), spec.size, payload, &cfg.cc),
                src_node: topo.host_node(spec.src),
                dst_node: topo.host_node(spec.dst),
                links,
                label,
                started: false,
                finish: None,
                rx_bytes: 0,
                trace: Vec::new(),
                spec,
            });
        }
        let rx_bytes = topo.nodes().iter().map(|n| vec![0; n.ports.len()]).collect();
        let wire_bytes = topo.nodes().iter().map(|n| vec![0; n.ports.len()]).collect();
        let util = topo.nodes().iter().map(|n| vec![Vec::new(); n.ports.len()]).collect();
        let util_last_tx = topo.nodes().iter().map(|n| vec![0; n.ports.len()]).collect();
        let mut net = Network {
            topo,
            cfg,
            sched: Scheduler::new(),
            nodes,
            flows,
            series,
            node_labels,
            lhcs: Vec::new(),
            counters: Counters::default(),
            rx_bytes,
            wire_bytes,
            wire_data_packets: 0,
            util,
            util_last_tx,
        };
        for (id, f) in net.flows.iter().enumerate() {
            net.sched.schedule(f.spec.start, f.src_node, Ev::FlowStart(id as u32))?;
            if let Some(stop) = f.spec.stop {
                net.sched.schedule(stop, f.src_node, Ev::FlowStop(id as u32))?;
            }
        }
        if cfg.sample_interval > SimTime::ZERO && (cfg.port_series || cfg.flow_series) {
            net.sched.schedule(SimTime::ZERO, 0, Ev::Sample)?;
        }
        if cfg.utilization_window > SimTime::ZERO {
            net.sched.schedule(cfg.utilization_window, 0, Ev::UtilTick)?;
        }
        Ok(net)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Runs to `end` and checks the conservation invariants.
    pub fn run(mut self, end: SimTime) -> Result<RunOutcome, SimError> {
        let start = self.sched.processed();
        while let Some(ev) = self.sched.pop_until(end) {
            self.handle(ev.target, ev.payload)?;
        }
        let summary = RunSummary {
            events: self.sched.processed() - start,
            final_time: self.sched.now(),
        };
        self.check_invariants(end)?;
        Ok(self.finish(summary, end))
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn handle(&mut self, node: NodeId, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::FlowStart(id) => {
                let f = &mut self.flows[id as usize];
                f.started = true;
                if self.cfg.trace_windows {
                    let cc = &f.sender.cc;
                    f.trace.push(WindowPoint {
                        t: self.sched.now(),
                        window: cc.window,
                        ref_window: cc.ref_window,
                        rate_bps: cc.rate_bps,
                        utilization: cc.utilization,
                        update_wc: false,
                        u_max: 0.0,
                        hop: 0,
                    });
                }
                // The receiver's queue pair opens with the connection, before
                // any data arrives.
                let dst = f.dst_node;
                self.host_mut(dst).rx.open(id);
                self.host_mut(node).active.push(id);
                self.host_try_start(node)
            }
            Ev::FlowStop(id) => {
                self.flows[id as usize].sender.truncate();
                Ok(())
            }
            Ev::TxDone { port } => {
                match &mut self.nodes[node] {
                    NodeState::Switch(s) => s.ports[port].busy = false,
                    NodeState::Host(h) => h.nic.busy = false,
                }
                self.try_start(node, port)
            }
            Ev::Arrive { port, pkt } => self.arrive(node, port, pkt),
            Ev::HostWake => {
                let now = self.now();
                let h = self.host_mut(node);
                if h.wake_at != Some(now) {
                    return Ok(());
                }
                h.wake_at = None;
                self.host_try_start(node)
            }
            Ev::Sample => {
                self.sample();
                self.sched.schedule_in(self.cfg.sample_interval, 0, Ev::Sample);
                Ok(())
            }
            Ev::UtilTick => {
                self.util_tick();
                self.sched.schedule_in(self.cfg.utilization_window, 0, Ev::UtilTick);
                Ok(())
            }
        }
    }

    fn host_mut(&mut self, node: NodeId) -> &mut HostState {
        match &mut self.nodes[node] {
            NodeState::Host(h) => h,
            NodeState::Switch(_) => panic!("node {node} is not a host"),
        }
    }

    fn try_start(&mut self, node: NodeId, port: PortId) -> Result<(), SimError> {
        match self.nodes[node] {
            NodeState::Switch(_) => self.switch_try_start(node, port),
            NodeState::Host(_) => self.host_try_start(node),
        }
    }

    /// Puts `pkt` on the wire at (`node`, `port`).
    fn transmit(&mut self, node: NodeId, port: PortId, pkt: Packet) -> Result<(), SimError> {
        let now = self.now();
        let link = self.topo.node(node).ports[port].link;
        let peer = self.topo.node(node).ports[port];
        let size = u64::from(pkt.size());
        let egress = match &mut self.nodes[node] {
            NodeState::Switch(s) => &mut s.ports[port],
            NodeState::Host(h) => &mut h.nic,
        };
        let start = now.as_ps().max(egress.free_at_ps);
        let end = start + link.serialization_ps(size);
        egress.free_at_ps = end;
        egress.busy = true;
        egress.tx_bytes += size;
        self.wire_bytes[node][port] += size;
        match &pkt {
            Packet::Data(_) => self.wire_data_packets += 1,
            Packet::Ack(_) => self.counters.acks_sent += 1,
            Packet::Pfc(_) => {}
        }
        self.sched.schedule(SimTime::ceil_from_ps(end), node, Ev::TxDone { port })?;
        self.sched.schedule(
            SimTime::ceil_from_ps(end + link.delay.as_ps()),
            peer.peer,
            Ev::Arrive {
                port: peer.peer_port,
                pkt,
            },
        )?;
        Ok(())
    }

    /// PFC frames bypass the data queue but still take serialization and
    /// propagation time.
    fn send_pfc(&mut self, node: NodeId, port: PortId, kind: PfcKind) -> Result<(), SimError> {
        match kind {
            PfcKind::Pause => self.counters.pause_frames += 1,
            PfcKind::Resume => self.counters.resume_frames += 1,
        }
        let p = self.topo.node(node).ports[port];
        let delay = p.link.serialization_ps(u64::from(PFC_FRAME_BYTES)) + p.link.delay.as_ps();
        let at = SimTime::ceil_from_ps(self.now().as_ps() + delay);
        self.sched.schedule(
            at,
            p.peer,
            Ev::Arrive {
                port: p.peer_port,
                pkt: Packet::Pfc(kind),
            },
        )?;
        Ok(())
    }

    fn switch_try_start(&mut self, node: NodeId, port: PortId) -> Result<(), SimError> {
        let now = self.now();
        let placement = self.cfg.cc.mode.int_placement();
        let pfc = self.cfg.pfc;
        let NodeState::Switch(sw) = &mut self.nodes[node] else {
            unreachable!()
        };
        if !sw.ports[port].can_start() || sw.ports[port].queue.is_empty() {
            return Ok(());
        }
        let p = &sw.ports[port];
        sw.table.observe(port, now, |t| p.live_record(t));
        let (pkt, in_port) = sw.ports[port].pop().expect("non-empty");
        let frame = sw.ingress[in_port].pfc_update(-i64::from(pkt.size()), &pfc);
        let pkt = match pkt {
            Packet::Data(d) if placement == IntPlacement::DataPath => {
                Packet::Data(hpcc_data_egress(d, sw.ports[port].live_record(now)))
            }
            Packet::Ack(a) if placement == IntPlacement::AckPath => {
                let ports = &sw.ports;
                let a = on_ack_egress(a, &mut sw.table, now, |p, t| ports[p].live_record(t))
                    .map_err(|e| invariant(now, e.to_string()))?;
                Packet::Ack(a)
            }
            other => other,
        };
        if let Some(kind) = frame {
            self.send_pfc(node, in_port, kind)?;
        }
        self.transmit(node, port, pkt)
    }

    fn host_try_start(&mut self, node: NodeId) -> Result<(), SimError> {
        let now = self.now();
        let h = self.host_mut(node);
        if !h.nic.can_start() {
            return Ok(());
        }
        if let Some(ack) = h.acks.pop_front() {
            return self.transmit(node, 0, Packet::Ack(ack));
        }
        let start_ps = now.as_ps().max(h.nic.free_at_ps);
        let n = h.active.len();
        let rr = h.rr;
        let mut wake: Option<u64> = None;
        for k in 0..n {
            let idx = (rr + k) % n;
            let fid = self.host_mut(node).active[idx];
            let f = &mut self.flows[fid as usize];
            match f.sender.try_send(start_ps, &self.cfg.cc) {
                SendDecision::Send(d) => {
                    self.counters.data_packets_sent += 1;
                    self.host_mut(node).rr = idx + 1;
                    return self.transmit(node, 0, Packet::Data(d));
                }
                SendDecision::PacedUntil(ps) => wake = Some(wake.map_or(ps, |w| w.min(ps))),
                SendDecision::WindowBlocked | SendDecision::Done => {}
            }
        }
        if let Some(ps) = wake {
            let at = SimTime::ceil_from_ps(ps);
            let h = self.host_mut(node);
            if h.wake_at.is_none_or(|w| at < w) {
                h.wake_at = Some(at);
                self.sched.schedule(at, node, Ev::HostWake)?;
            }
        }
        Ok(())
    }

    fn arrive(&mut self, node: NodeId, port: PortId, pkt: Packet) -> Result<(), SimError> {
        if let Packet::Pfc(kind) = pkt {
            self.counters.pfc_frames_delivered += 1;
            let egress = match &mut self.nodes[node] {
                NodeState::Switch(s) => &mut s.ports[port],
                NodeState::Host(h) => &mut h.nic,
            };
            egress.paused = kind == PfcKind::Pause;
            return if kind == PfcKind::Resume {
                self.try_start(node, port)
            } else {
                Ok(())
            };
        }
        let size = u64::from(pkt.size());
        let up = self.topo.node(node).ports[port];
        self.wire_bytes[up.peer][up.peer_port] -= size;
        self.rx_bytes[node][port] += size;
        if let Packet::Data(_) = pkt {
            self.wire_data_packets -= 1;
        }
        match self.nodes[node] {
            NodeState::Switch(_) => self.switch_arrive(node, port, pkt),
            NodeState::Host(_) => self.host_arrive(node, pkt),
        }
    }

    fn switch_arrive(&mut self, node: NodeId, in_port: PortId, pkt: Packet) -> Result<(), SimError> {
        let now = self.now();
        let Ingress::Forward(pkt) = on_packet_ingress(pkt, in_port) else {
            unreachable!("flow control handled on arrival")
        };
        let tuple = match &pkt {
            Packet::Data(d) => d.tuple,
            Packet::Ack(a) => a.tuple,
            Packet::Pfc(_) => unreachable!(),
        };
        let out = self.topo.route(node, &tuple)?;
        let pfc = self.cfg.pfc;
        let NodeState::Switch(sw) = &mut self.nodes[node] else {
            unreachable!()
        };
        let p = &sw.ports[out];
        sw.table.observe(out, now, |t| p.live_record(t));
        let size = i64::from(pkt.size());
        sw.ports[out].push(pkt, in_port);
        if let Some(kind) = sw.ingress[in_port].pfc_update(size, &pfc) {
            self.send_pfc(node, in_port, kind)?;
        }
        self.switch_try_start(node, out)
    }

    fn host_arrive(&mut self, node: NodeId, pkt: Packet) -> Result<(), SimError> {
        let now = self.now();
        match pkt {
            Packet::Data(d) => {
                self.counters.data_packets_delivered += 1;
                let f = &mut self.flows[d.flow as usize];
                if f.dst_node != node {
                    return Err(invariant(now, format!("flow {} delivered to wrong host", d.flow)));
                }
                f.rx_bytes += u64::from(d.payload);
                let (m, mode) = (self.cfg.cc.ack_every, self.cfg.cc.mode);
                let h = self.host_mut(node);
                let ack = h
                    .rx
                    .receiver_on_data(&d, m, mode)
                    .map_err(|e| invariant(now, e.to_string()))?;
                if let Some(ack) = ack {
                    h.acks.push_back(ack);
                }
                self.host_try_start(node)
            }
            Packet::Ack(ack) => {
                self.counters.acks_delivered += 1;
                self.on_ack(node, ack)?;
                self.host_try_start(node)
            }
            Packet::Pfc(_) => unreachable!(),
        }
    }

    fn on_ack(&mut self, node: NodeId, ack: AckPacket) -> Result<(), SimError> {
        let now = self.now();
        let f = &mut self.flows[ack.flow as usize];
        if f.src_node != node {
            return Err(invariant(now, format!("ACK of flow {} at wrong host", ack.flow)));
        }
        if ack.int.len() != f.links.len() - 1 {
            return Err(invariant(
                now,
                format!("ACK of flow {} carries {} INT entries over {} switches", ack.flow, ack.int.len(), f.links.len() - 1),
            ));
        }
        let out = on_new_ack(&ack, &mut f.sender.cc, &self.cfg.cc)
            .map_err(|e| invariant(now, format!("flow {}: {e}", ack.flow)))?;
        match out {
            AckOutcome::Duplicate => self.counters.duplicate_acks += 1,
            AckOutcome::Initialized => {}
            AckOutcome::Updated {
                window,
                rate_bps,
                utilization,
                update_wc,
                lhcs,
            } => {
                let cc = &f.sender.cc;
                if self.cfg.trace_windows {
                    f.trace.push(WindowPoint {
                        t: now,
                        window,
                        ref_window: cc.ref_window,
                        rate_bps,
                        utilization,
                        update_wc,
                        u_max: cc.last_detection.0,
                        hop: cc.last_detection.1,
                    });
                }
                if let Some(t) = lhcs {
                    self.lhcs.push(LhcsEvent {
                        t: now,
                        flow: ack.flow,
                        ref_window: t.ref_window,
                        window,
                        rate_bps,
                        n: t.n,
                        bandwidth_bps: t.bandwidth_bps,
                        u_max: t.u_max,
                    });
                }
            }
        }
        if f.finish.is_none() && f.sender.all_acked() {
            f.finish = Some(now);
            let id = ack.flow;
            let h = self.host_mut(node);
            if let Some(pos) = h.active.iter().position(|&x| x == id) {
                h.active.remove(pos);
                if h.rr > pos {
                    h.rr -= 1;
                }
            }
        }
        Ok(())
    }

    fn sample(&mut self) {
        let now = self.now();
        if self.cfg.port_series {
            for (id, n) in self.nodes.iter().enumerate() {
                if let NodeState::Switch(sw) = n {
                    for (p, port) in sw.ports.iter().enumerate() {
                        let label = self.node_labels[id];
                        self.series.record(now, label, p as u32, Metric::QueueBytes, port.queued_bytes as f64);
                    }
                }
            }
        }
        if self.cfg.flow_series {
            for f in &self.flows {
                if !f.started || f.finish.is_some_and(|t| t < now) {
                    continue;
                }
                let cc = &f.sender.cc;
                self.series.record(now, f.label, 0, Metric::RateBps, cc.rate_bps);
                self.series.record(now, f.label, 0, Metric::WindowBytes, cc.window);
                self.series.record(now, f.label, 0, Metric::RxBytes, f.rx_bytes as f64);
            }
        }
    }

    fn util_tick(&mut self) {
        let now = self.now();
        let w = self.cfg.utilization_window;
        for (id, n) in self.nodes.iter().enumerate() {
            let NodeState::Switch(sw) = n else { continue };
            for (p, port) in sw.ports.iter().enumerate() {
                let delta = port.tx_bytes - self.util_last_tx[id][p];
                self.util_last_tx[id][p] = port.tx_bytes;
                let u = crate::metrics::utilization(delta, port.rate_bps, w);
                self.util[id][p].push(u);
                if self.cfg.port_series {
                    let label = self.node_labels[id];
                    self.series.record(now, label, p as u32, Metric::TxBytes, port.tx_bytes as f64);
                    let paused = sw.ingress[p].pause_frames_sent as f64;
                    self.series.record(now, label, p as u32, Metric::PauseFrames, paused);
                }
            }
        }
    }

    fn check_invariants(&self, end: SimTime) -> Result<(), SimError> {
        let queued_data: u64 = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                NodeState::Switch(s) => Some(s),
                NodeState::Host(_) => None,
            })
            .flat_map(|s| s.ports.iter())
            .map(|p| p.queue.iter().filter(|(pkt, _)| matches!(pkt, Packet::Data(_))).count() as u64)
            .sum();
        let c = &self.counters;
        if c.data_packets_sent != c.data_packets_delivered + queued_data + self.wire_data_packets {
            return Err(invariant(
                end,
                format!(
                    "packet loss: sent {} != delivered {} + queued {} + on wire {}",
                    c.data_packets_sent, c.data_packets_delivered, queued_data, self.wire_data_packets
                ),
            ));
        }
        for (id, n) in self.topo.nodes().iter().enumerate() {
            for (p, port) in n.ports.iter().enumerate() {
                let tx = match &self.nodes[id] {
                    NodeState::Switch(s) => s.ports[p].tx_bytes,
                    NodeState::Host(h) => h.nic.tx_bytes,
                };
                let rx = self.rx_bytes[port.peer][port.peer_port];
                if tx != rx + self.wire_bytes[id][p] {
                    return Err(invariant(
                        end,
                        format!(
                            "byte conservation at {} port {p}: tx {tx} != rx {rx} + wire {}",
                            n.name, self.wire_bytes[id][p]
                        ),
                    ));
                }
            }
        }
        let per_port: u64 = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                NodeState::Switch(s) => Some(s.ingress.iter().map(|i| i.pause_frames_sent).sum::<u64>()),
                NodeState::Host(_) => None,
            })
            .sum();
        if per_port != c.pause_frames {
            return Err(invariant(
                end,
                format!("pause tallies disagree: ports {per_port} vs emitted {}", c.pause_frames),
            ));
        }
        if c.pfc_frames_delivered > c.pause_frames + c.resume_frames {
            return Err(invariant(end, "more PFC frames delivered than emitted"));
        }
        for (id, f) in self.flows.iter().enumerate() {
            if f.finish.is_some() && f.rx_bytes != f.sender.size {
                return Err(invariant(
                    end,
                    format!("flow {id} completed with {} of {} bytes delivered", f.rx_bytes, f.sender.size),
                ));
            }
            if f.rx_bytes < f.sender.cc.snd_una {
                return Err(invariant(end, format!("flow {id} acknowledged undelivered bytes")));
            }
        }
        Ok(())
    }

    fn finish(self, summary: RunSummary, end: SimTime) -> RunOutcome {
        let mut flows = Vec::new();
        for (id, f) in self.flows.iter().enumerate() {
            if let Some(finish) = f.finish {
                flows.push(FlowRecord {
                    flow_id: id as u32,
                    src: f.spec.src,
                    dst: f.spec.dst,
                    size_bytes: f.sender.size,
                    start: f.spec.start,
                    finish,
                    ideal_fct: ideal_fct(f.sender.size, &f.links, self.cfg.mtu),
                });
            }
        }
        let mut ports = Vec::new();
        for (id, n) in self.topo.nodes().iter().enumerate() {
            let NodeState::Switch(sw) = &self.nodes[id] else { continue };
            for (p, port) in sw.ports.iter().enumerate() {
                let span = end.as_ns().max(1) as f64;
                ports.push(PortStats {
                    node: id,
                    name: n.name.clone(),
                    port: p,
                    peer: self.topo.node(n.ports[p].peer).name.clone(),
                    rate_bps: port.rate_bps,
                    peak_queue_bytes: port.peak_queue,
                    tx_bytes: port.tx_bytes,
                    pause_frames_sent: sw.ingress[p].pause_frames_sent,
                    mean_utilization: (port.tx_bytes as f64 * 8e9 / (port.rate_bps as f64 * span)).min(1.0),
                    windows: self.util[id][p].clone(),
                });
            }
        }
        let counters = self.counters.clone();
        RunOutcome {
            summary,
            end_time: end,
            flows,
            flows_started: self.flows.iter().filter(|f| f.started).count(),
            series: self.series,
            traces: self.flows.iter().map(|f| f.trace.clone()).collect(),
            lhcs: self.lhcs,
            ports,
            counters,
            delivered: self.flows.iter().map(|f| f.rx_bytes).collect(),
        }
    }
}
