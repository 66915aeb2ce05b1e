//! Builds a network from a scenario, runs it and writes the artifacts.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{seeded_rng, SimTime};
use crate::error::{ConfigError, SimError};
use crate::metrics::{slowdown_summary, write_flows_csv, write_json, BucketSummary};
use crate::network::{Counters, NetConfig, Network, PortStats, RunOutcome};
use crate::packet::ACK_BASE_BYTES;
use crate::scenario::config::{Scenario, ScenarioConfig, TopologyKind, WorkloadKind};
use crate::scenario::presets;
use crate::switch::PfcConfig;
use crate::topology::{LinkSpec, Topology};
use crate::transport::CcParams;
use crate::workload::{poisson_arrivals, script_flows, FlowSpec, DATA_DST_PORT};

/// Loads `source` as a file path, falling back to a preset name.
pub fn load_scenario(source: &str, overrides: &[String]) -> Result<Scenario, ConfigError> {
    let path = Path::new(source);
    if path.is_file() {
        return Scenario::from_file(path, overrides);
    }
    match presets::preset(source) {
        Some(text) => Scenario::parse(text, Path::new("."), overrides),
        None => Err(ConfigError::UnknownPreset(source.to_string())),
    }
}

pub fn build_topology(cfg: &ScenarioConfig) -> Result<Topology, SimError> {
    let t = &cfg.topology;
    let link = LinkSpec::new(t.rate, t.delay)?;
    let topo = match t.kind {
        TopologyKind::Dumbbell => {
            Topology::dumbbell(t.switches.unwrap_or(0), t.senders.unwrap_or(0), link)?
        }
        TopologyKind::Chain => Topology::chain(
            t.switches.unwrap_or(0),
            t.sender_switches.as_deref().unwrap_or(&[]),
            link,
        )?,
        TopologyKind::Fattree => Topology::fattree(t.k.unwrap_or(0), link)?,
    };
    Ok(topo)
}

/// Base RTT: configured, or the worst host pair's empty-network RTT.
pub fn base_rtt(cfg: &ScenarioConfig, topo: &Topology) -> SimTime {
    cfg.cc
        .base_rtt
        .unwrap_or_else(|| topo.max_base_rtt(u64::from(cfg.cc.mtu), u64::from(ACK_BASE_BYTES)))
}

pub fn cc_params(cfg: &ScenarioConfig, topo: &Topology) -> CcParams {
    let c = &cfg.cc;
    let mut p = CcParams::new(c.mode, cfg.topology.rate, base_rtt(cfg, topo), c.mtu);
    p.eta = c.eta;
    p.alpha = c.alpha;
    p.beta = c.beta;
    p.max_stage = c.max_stage;
    p.ack_every = c.ack_every;
    p.lhcs_bandwidth = c.lhcs_bandwidth;
    p.w_ai = c.w_ai.unwrap_or_else(|| p.default_w_ai());
    p
}

pub fn net_config(cfg: &ScenarioConfig, topo: &Topology) -> NetConfig {
    let m = &cfg.metrics;
    NetConfig {
        cc: cc_params(cfg, topo),
        mtu: cfg.cc.mtu,
        pfc: if cfg.pfc.enabled {
            PfcConfig::with_threshold(cfg.pfc.pause_threshold, cfg.pfc.resume_fraction)
        } else {
            PfcConfig::disabled()
        },
        int_refresh: cfg.switch.int_refresh,
        sample_interval: m.sample_interval,
        utilization_window: m.utilization_window,
        port_series: m.port_series,
        flow_series: m.flow_series,
        trace_windows: m.trace_windows,
    }
}

pub fn build_schedule(sc: &Scenario, topo: &Topology) -> Result<Vec<FlowSpec>, SimError> {
    let cfg = &sc.config;
    let w = &cfg.workload;
    let flows = match w.kind {
        WorkloadKind::Script => script_flows(
            w.flows
                .iter()
                .enumerate()
                .map(|(i, f)| FlowSpec {
                    src: f.src,
                    dst: f.dst,
                    size: f.size,
                    start: f.start,
                    stop: f.stop,
                    src_port: f.src_port.unwrap_or(10_000 + i as u16),
                    dst_port: DATA_DST_PORT,
                })
                .collect(),
        )?,
        WorkloadKind::Poisson => {
            let cdf = sc.cdf()?.expect("validated");
            let mut rng = seeded_rng(cfg.seed, "workload");
            poisson_arrivals(
                &cdf,
                w.load.expect("validated"),
                topo.hosts().len() as u32,
                cfg.topology.rate,
                w.duration.unwrap_or(cfg.end_time),
                &mut rng,
            )?
        }
    };
    Ok(flows)
}

/// Resolved configuration: derived base RTT and W_AI written out.
pub fn resolve(sc: &Scenario) -> Result<Scenario, SimError> {
    let topo = build_topology(&sc.config)?;
    let p = cc_params(&sc.config, &topo);
    let mut out = sc.clone();
    out.config.cc.base_rtt = Some(p.base_rtt);
    out.config.cc.w_ai = Some(p.w_ai);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CongestionPoint {
    pub node: String,
    pub port: usize,
    pub peer: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub seed: u64,
    pub end_time_ns: u64,
    pub base_rtt_ns: u64,
    pub events: u64,
    pub flows_scheduled: usize,
    pub flows_started: usize,
    pub flows_completed: usize,
    pub peak_queue_bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub congestion_point: Option<CongestionPoint>,
    pub pause_frames: u64,
    /// Mean utilization of the congestion-point port over the run.
    pub mean_utilization: f64,
    pub lhcs_triggers: usize,
    pub counters: Counters,
    pub slowdown: Vec<BucketSummary>,
    pub ports: Vec<PortStats>,
}

impl Summary {
    pub fn new(cfg: &ScenarioConfig, base_rtt: SimTime, scheduled: usize, out: &RunOutcome) -> Self {
        let cp = out.congestion_point();
        Summary {
            name: cfg.name.clone(),
            mode: cfg.cc.mode.as_str().to_string(),
            seed: cfg.seed,
            end_time_ns: cfg.end_time.as_ns(),
            base_rtt_ns: base_rtt.as_ns(),
            events: out.summary.events,
            flows_scheduled: scheduled,
            flows_started: out.flows_started,
            flows_completed: out.flows.len(),
            peak_queue_bytes: out.peak_queue(),
            congestion_point: cp.filter(|p| p.peak_queue_bytes > 0).map(|p| CongestionPoint {
                node: p.name.clone(),
                port: p.port,
                peer: p.peer.clone(),
            }),
            pause_frames: out.counters.pause_frames,
            mean_utilization: cp.map_or(0.0, |p| p.mean_utilization),
            lhcs_triggers: out.lhcs.len(),
            counters: out.counters.clone(),
            slowdown: slowdown_summary(&out.flows, &cfg.metrics.size_buckets),
            ports: out.ports.clone(),
        }
    }
}

/// A finished scenario run.
#[derive(Debug)]
pub struct ScenarioRun {
    pub resolved: Scenario,
    pub base_rtt: SimTime,
    pub outcome: RunOutcome,
    pub summary: Summary,
}

/// Runs the scenario to its end time. With `out_dir`, writes `series.csv`,
/// `flows.csv`, `summary.json` and the resolved `config.toml`.
pub fn run_scenario(sc: &Scenario, out_dir: Option<&Path>) -> Result<ScenarioRun, SimError> {
    let cfg = &sc.config;
    let topo = build_topology(cfg)?;
    let net_cfg = net_config(cfg, &topo);
    let schedule = build_schedule(sc, &topo)?;
    let scheduled = schedule.len();
    let outcome = Network::new(topo, schedule, net_cfg)?.run(cfg.end_time)?;
    let resolved = resolve(sc)?;
    let summary = Summary::new(cfg, net_cfg.cc.base_rtt, scheduled, &outcome);
    if let Some(dir) = out_dir {
        write_artifacts(dir, &resolved, &outcome, &summary)?;
    }
    Ok(ScenarioRun {
        resolved,
        base_rtt: net_cfg.cc.base_rtt,
        outcome,
        summary,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_artifacts(
    dir: &Path,
    resolved: &Scenario,
    out: &RunOutcome,
    summary: &Summary,
) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join("series.csv");
    out.series.write_csv(&p).map_err(io_err(&p))?;
    let p = dir.join("flows.csv");
    write_flows_csv(&out.flows, &p).map_err(io_err(&p))?;
    let p = dir.join("summary.json");
    write_json(summary, &p).map_err(io_err(&p))?;
    let p = dir.join("config.toml");
    std::fs::write(&p, resolved.to_toml()).map_err(io_err(&p))?;
    Ok(())
}

/// One row of the merged sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_queue_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pause_frames: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_utilization: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flows_completed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhcs_triggers: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn dir_name(axis: &str, value: &str) -> String {
    let clean: String = format!("{axis}={value}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "=._-".contains(c) { c } else { '_' })
        .collect();
    clean
}

/// Runs `source` once per value of `axis`, in parallel, each into its own
/// subdirectory of `out_dir`, and writes a merged `sweep_summary.json` and
/// `sweep_summary.csv`. Every value runs even if another fails.
pub fn run_sweep(
    source: &str,
    overrides: &[String],
    axis: &str,
    values: &[String],
    out_dir: &Path,
) -> Result<SweepReport, SimError> {
    // Validate the base scenario and the axis before spawning anything.
    load_scenario(source, overrides)?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|value| {
            let dir = dir_name(axis, value);
            let mut row = SweepRow {
                value: value.clone(),
                dir: dir.clone(),
                error: None,
                mode: None,
                peak_queue_bytes: None,
                pause_frames: None,
                mean_utilization: None,
                flows_completed: None,
                lhcs_triggers: None,
            };
            let mut ov = overrides.to_vec();
            ov.push(format!("{axis}={value}"));
            let result = load_scenario(source, &ov)
                .map_err(SimError::from)
                .and_then(|sc| run_scenario(&sc, Some(&out_dir.join(&dir))));
            match result {
                Ok(run) => {
                    let s = &run.summary;
                    row.mode = Some(s.mode.clone());
                    row.peak_queue_bytes = Some(s.peak_queue_bytes);
                    row.pause_frames = Some(s.pause_frames);
                    row.mean_utilization = Some(s.mean_utilization);
                    row.flows_completed = Some(s.flows_completed);
                    row.lhcs_triggers = Some(s.lhcs_triggers);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    let report = SweepReport {
        axis: axis.to_string(),
        rows,
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let p = out_dir.join("sweep_summary.json");
    write_json(&report, &p).map_err(io_err(&p))?;
    let p = out_dir.join("sweep_summary.csv");
    write_sweep_csv(&report, &p).map_err(io_err(&p))?;
    Ok(report)
}

fn write_sweep_csv(report: &SweepReport, path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        report.axis.as_str(),
        "mode",
        "peak_queue_bytes",
        "pause_frames",
        "mean_utilization",
        "flows_completed",
        "lhcs_triggers",
        "error",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.value.clone(),
            opt(r.mode.clone()),
            opt(r.peak_queue_bytes.map(|v| v.to_string())),
            opt(r.pause_frames.map(|v| v.to_string())),
            opt(r.mean_utilization.map(|v| v.to_string())),
            opt(r.flows_completed.map(|v| v.to_string())),
            opt(r.lhcs_triggers.map(|v| v.to_string())),
            opt(r.error.clone()),
        ])?;
    }
    w.flush()
}

/// Default output root: `$SIM_OUT`, else `./sim-out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("SIM_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("sim-out"))
}
