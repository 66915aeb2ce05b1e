//! Measurements: time series, per-flow completion records and the
//! summary statistics derived from them.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::engine::SimTime;
use crate::packet::{payload_per_packet, ACK_BASE_BYTES, DATA_HEADER_BYTES};
use crate::topology::{HostId, LinkSpec};

/// Completion record of one flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRecord {
    pub flow_id: u32,
    pub src: HostId,
    pub dst: HostId,
    pub size_bytes: u64,
    pub start: SimTime,
    pub finish: SimTime,
    pub ideal_fct: SimTime,
}

impl FlowRecord {
    pub fn fct(&self) -> SimTime {
        self.finish - self.start
    }

    pub fn slowdown(&self) -> f64 {
        self.fct().as_ns() as f64 / self.ideal_fct.as_ns() as f64
    }
}

/// Completion time of a flow alone on `links` (request path, source NIC
/// first): propagation, the whole flow serialized at the slowest link,
/// store-and-forward of the final packet at every later hop, and the final
/// ACK's return.
pub fn ideal_fct(size: u64, links: &[LinkSpec], mtu: u32) -> SimTime {
    let payload = u64::from(payload_per_packet(mtu));
    let packets = size.div_ceil(payload).max(1);
    let header = u64::from(DATA_HEADER_BYTES);
    let wire = size + packets * header;
    let last_wire = size - (packets - 1) * payload + header;
    let b_min = links.iter().map(|l| l.rate_bps).min().unwrap_or(1);
    let mut ps = (u128::from(wire) * 8_000_000_000_000 / u128::from(b_min)) as u64;
    for (i, l) in links.iter().enumerate() {
        ps += 2 * l.delay.as_ps();
        if i > 0 {
            ps += l.serialization_ps(last_wire);
        }
        ps += l.serialization_ps(u64::from(ACK_BASE_BYTES));
    }
    SimTime::ceil_from_ps(ps)
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowdownStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub p99: f64,
}

impl SlowdownStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(SlowdownStats {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: percentile(&v, 50.0)?,
            p95: percentile(&v, 95.0)?,
            p99: percentile(&v, 99.0)?,
        })
    }

    /// Field-wise mean across repeated runs.
    pub fn average(runs: &[SlowdownStats]) -> Option<Self> {
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let avg = |f: fn(&SlowdownStats) -> f64| runs.iter().map(f).sum::<f64>() / n;
        Some(SlowdownStats {
            count: runs.iter().map(|r| r.count).sum(),
            mean: avg(|r| r.mean),
            median: avg(|r| r.median),
            p95: avg(|r| r.p95),
            p99: avg(|r| r.p99),
        })
    }
}

/// Statistics for flows with `lo <= size < hi`. Empty buckets carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketSummary {
    pub lo: u64,
    pub hi: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<SlowdownStats>,
}

/// Slowdown statistics per size bucket. `bounds` are ascending upper
/// limits; a final open-ended bucket catches everything above the last one.
pub fn slowdown_summary(records: &[FlowRecord], bounds: &[u64]) -> Vec<BucketSummary> {
    let mut out = Vec::with_capacity(bounds.len() + 1);
    let mut lo = 0;
    for hi in bounds.iter().copied().map(Some).chain(std::iter::once(None)) {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| r.size_bytes >= lo && hi.is_none_or(|h| r.size_bytes < h))
            .map(FlowRecord::slowdown)
            .collect();
        out.push(BucketSummary {
            lo,
            hi,
            stats: SlowdownStats::from_values(&values),
        });
        lo = hi.unwrap_or(u64::MAX);
    }
    out
}

/// Fraction of `window` spent serializing `bytes` at `rate_bps`.
pub fn utilization(bytes: u64, rate_bps: u64, window: SimTime) -> f64 {
    assert!(window > SimTime::ZERO, "utilization window must be positive");
    (bytes as f64 * 8e9 / (rate_bps as f64 * window.as_ns() as f64)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    QueueBytes,
    TxBytes,
    PauseFrames,
    RateBps,
    WindowBytes,
    RxBytes,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::QueueBytes => "queue_bytes",
            Metric::TxBytes => "tx_bytes",
            Metric::PauseFrames => "pause_frames",
            Metric::RateBps => "rate_bps",
            Metric::WindowBytes => "window_bytes",
            Metric::RxBytes => "rx_bytes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample {
    pub t: SimTime,
    /// Index into [`Series::names`].
    pub node: u32,
    pub port: u32,
    pub metric: Metric,
    pub value: f64,
}

/// Append-only time series store.
#[derive(Debug, Clone, Default)]
pub struct Series {
    names: Vec<String>,
    samples: Vec<SeriesSample>,
}

impl Series {
    /// Registers a node or flow label and returns its handle.
    pub fn intern(&mut self, name: impl Into<String>) -> u32 {
        self.names.push(name.into());
        (self.names.len() - 1) as u32
    }

    pub fn record(&mut self, t: SimTime, node: u32, port: u32, metric: Metric, value: f64) {
        debug_assert!(self.samples.last().is_none_or(|s| s.t <= t));
        self.samples.push(SeriesSample {
            t,
            node,
            port,
            metric,
            value,
        });
    }

    pub fn samples(&self) -> &[SeriesSample] {
        &self.samples
    }

    pub fn name(&self, node: u32) -> &str {
        &self.names[node as usize]
    }

    /// Values of one key, in time order.
    pub fn key(&self, node: &str, port: u32, metric: Metric) -> Vec<(SimTime, f64)> {
        self.samples
            .iter()
            .filter(|s| s.port == port && s.metric == metric && self.name(s.node) == node)
            .map(|s| (s.t, s.value))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_ns", "node", "port", "metric", "value"])?;
        for s in &self.samples {
            w.write_record([
                s.t.as_ns().to_string(),
                self.name(s.node).to_string(),
                s.port.to_string(),
                s.metric.as_str().to_string(),
                s.value.to_string(),
            ])?;
        }
        w.flush()
    }
}

pub fn write_flows_csv(records: &[FlowRecord], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "flow_id",
        "src",
        "dst",
        "size_bytes",
        "start_ns",
        "finish_ns",
        "ideal_fct_ns",
        "slowdown",
    ])?;
    for r in records {
        w.write_record([
            r.flow_id.to_string(),
            r.src.to_string(),
            r.dst.to_string(),
            r.size_bytes.to_string(),
            r.start.as_ns().to_string(),
            r.finish.as_ns().to_string(),
            r.ideal_fct.as_ns().to_string(),
            r.slowdown().to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    f.write_all(b"\n")?;
    f.flush()
}
