//! Flow arrival schedules: scripted elephants and CDF-driven Poisson load.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::engine::{RandomStream, SimTime};
use crate::error::WorkloadError;
use crate::topology::{FiveTuple, HostId, Protocol};

/// Destination port used by every data flow.
pub const DATA_DST_PORT: u16 = 4791;

const HADOOP_LIKE: &str = include_str!("../cdf/hadoop-like.txt");
const WEBSEARCH_LIKE: &str = include_str!("../cdf/websearch-like.txt");

/// Piecewise flow-size distribution. Between knots the size is interpolated
/// linearly in log space; the first knot carries a point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSizeCdf {
    points: Vec<(u64, f64)>,
}

impl FlowSizeCdf {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self, WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InvalidCdf(m));
        if points.is_empty() {
            return bad("no points".into());
        }
        if points[0].0 == 0 {
            return bad("sizes must be at least one byte".into());
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad(format!("sizes not strictly increasing at {}", w[1].0));
            }
            if w[1].1 < w[0].1 {
                return bad(format!("probabilities decrease at size {}", w[1].0));
            }
        }
        if let Some(&(s, p)) = points.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return bad(format!("probability {p} at size {s} outside [0, 1]"));
        }
        if points.last().unwrap().1 != 1.0 {
            return bad("last probability must be 1.0".into());
        }
        Ok(FlowSizeCdf { points })
    }

    /// Two whitespace-separated columns per line: size in bytes and
    /// cumulative probability. `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self, WorkloadError> {
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| WorkloadError::CdfParse {
                path: origin.to_string(),
                line: i + 1,
                msg,
            };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(err(format!("expected 2 columns, found {}", cols.len())));
            }
            let size = cols[0]
                .parse::<u64>()
                .map_err(|e| err(format!("size {:?}: {e}", cols[0])))?;
            let p = cols[1]
                .parse::<f64>()
                .map_err(|e| err(format!("probability {:?}: {e}", cols[1])))?;
            points.push((size, p));
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self, WorkloadError> {
        let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Shipped stand-in distributions: `hadoop-like` and `websearch-like`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "hadoop-like" => HADOOP_LIKE,
            "websearch-like" => WEBSEARCH_LIKE,
            _ => return None,
        };
        Some(Self::parse(text, name).expect("shipped CDF is valid"))
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["hadoop-like", "websearch-like"]
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    /// Inverse transform of `u` in [0, 1].
    pub fn quantile(&self, u: f64) -> u64 {
        let (s0, p0) = self.points[0];
        if u <= p0 {
            return s0;
        }
        for w in self.points.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            if u <= pb && pb > pa {
                let f = (u - pa) / (pb - pa);
                let (la, lb) = ((a as f64).ln(), (b as f64).ln());
                let s = (la + f * (lb - la)).exp().round() as u64;
                return s.clamp(a, b);
            }
        }
        self.points.last().unwrap().0
    }

    pub fn sample_size(&self, rng: &mut RandomStream) -> u64 {
        self.quantile(rng.uniform())
    }

    /// Mean of the interpolated distribution, before rounding to bytes.
    pub fn mean(&self) -> f64 {
        let (s0, p0) = self.points[0];
        let mut m = p0 * s0 as f64;
        for w in self.points.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            let (a, b) = (a as f64, b as f64);
            m += (pb - pa) * (b - a) / (b / a).ln();
        }
        m
    }
}

/// One flow of the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub src: HostId,
    pub dst: HostId,
    pub size: u64,
    pub start: SimTime,
    /// Optional early exit: the sender stops after its next packet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<SimTime>,
    pub src_port: u16,
    pub dst_port: u16,
}

impl FlowSpec {
    pub fn tuple(&self) -> FiveTuple {
        FiveTuple {
            src_addr: self.src,
            dst_addr: self.dst,
            src_port: self.src_port,
            dst_port: self.dst_port,
            protocol: Protocol::Data,
        }
    }
}

/// Validates a hand-written schedule and orders it by start time.
pub fn script_flows(entries: Vec<FlowSpec>) -> Result<Vec<FlowSpec>, WorkloadError> {
    let mut seen: HashMap<[(HostId, u16); 2], usize> = HashMap::new();
    for (i, f) in entries.iter().enumerate() {
        if f.size == 0 {
            return Err(WorkloadError::InvalidFlow(format!("flow {i}: size must be >= 1 byte")));
        }
        if f.src == f.dst {
            return Err(WorkloadError::InvalidFlow(format!("flow {i}: src == dst == {}", f.src)));
        }
        if let Some(stop) = f.stop {
            if stop <= f.start {
                return Err(WorkloadError::InvalidFlow(format!("flow {i}: stop before start")));
            }
        }
        if let Some(&first) = seen.get(&f.tuple().canonical_key()) {
            return Err(WorkloadError::DuplicateTuple { first, second: i });
        }
        seen.insert(f.tuple().canonical_key(), i);
    }
    let mut flows = entries;
    flows.sort_by_key(|f| f.start);
    Ok(flows)
}

/// Per-host flow arrival rate for a target NIC load, flows per second.
pub fn arrival_rate(load: f64, link_rate_bps: u64, mean_size: f64) -> f64 {
    load * link_rate_bps as f64 / (8.0 * mean_size)
}

/// Independent Poisson arrivals at every host with destinations drawn
/// uniformly from the other hosts. Load is defined at host NICs.
pub fn poisson_arrivals(
    cdf: &FlowSizeCdf,
    load: f64,
    host_count: u32,
    link_rate_bps: u64,
    duration: SimTime,
    rng: &mut RandomStream,
) -> Result<Vec<FlowSpec>, WorkloadError> {
    if !(load > 0.0 && load < 1.0) {
        return Err(WorkloadError::InvalidFlow(format!("load must be in (0, 1), got {load}")));
    }
    if host_count < 2 {
        return Err(WorkloadError::InvalidFlow("need at least two hosts".into()));
    }
    let lambda_per_ns = arrival_rate(load, link_rate_bps, cdf.mean()) / 1e9;
    let gap = Exp::new(lambda_per_ns).map_err(|e| WorkloadError::InvalidFlow(e.to_string()))?;
    let mut flows = Vec::new();
    for src in 0..host_count {
        let port_base: u16 = rng.random_range(0..64_000);
        let mut t = 0.0f64;
        let mut n: u32 = 0;
        loop {
            t += gap.sample(rng);
            if t >= duration.as_ns() as f64 {
                break;
            }
            let mut dst = rng.random_range(0..host_count - 1);
            if dst >= src {
                dst += 1;
            }
            let size = cdf.sample_size(rng);
            flows.push(FlowSpec {
                src,
                dst,
                size,
                start: SimTime(t as u64),
                stop: None,
                src_port: 1024 + ((u32::from(port_base) + n) % 64_000) as u16,
                dst_port: DATA_DST_PORT,
            });
            n += 1;
        }
    }
    flows.sort_by_key(|f| (f.start, f.src));
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::seeded_rng;

    fn two_point() -> FlowSizeCdf {
        FlowSizeCdf::new(vec![(100, 0.5), (10_000, 1.0)]).unwrap()
    }

    #[test]
    fn point_mass() {
        let cdf = FlowSizeCdf::new(vec![(1000, 1.0)]).unwrap();
        let mut rng = seeded_rng(1, "t");
        assert!((0..1000).all(|_| cdf.sample_size(&mut rng) == 1000));
        assert_eq!(cdf.mean(), 1000.0);
    }

    #[test]
    fn below_first_knot_returns_first_size() {
        assert_eq!(two_point().quantile(0.25), 100);
        assert_eq!(two_point().quantile(0.5), 100);
        assert_eq!(two_point().quantile(1.0), 10_000);
        // Halfway through the log segment is the geometric mean.
        assert_eq!(two_point().quantile(0.75), 1000);
    }

    #[test]
    fn rejects_malformed_cdfs() {
        assert!(FlowSizeCdf::new(vec![]).is_err());
        assert!(FlowSizeCdf::new(vec![(10, 0.5), (10, 1.0)]).is_err());
        assert!(FlowSizeCdf::new(vec![(10, 0.6), (20, 0.5), (30, 1.0)]).is_err());
        assert!(FlowSizeCdf::new(vec![(10, 0.5), (20, 0.9)]).is_err());
        assert!(FlowSizeCdf::new(vec![(0, 1.0)]).is_err());
    }

    #[test]
    fn parse_reports_line() {
        let err = FlowSizeCdf::parse("# c\n100 0.5\n200 x\n", "f.txt").unwrap_err();
        match err {
            WorkloadError::CdfParse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn builtins_parse() {
        for name in FlowSizeCdf::builtin_names() {
            assert!(FlowSizeCdf::builtin(name).is_some());
        }
        assert!(FlowSizeCdf::builtin("nope").is_none());
        let h = FlowSizeCdf::builtin("hadoop-like").unwrap();
        assert_eq!(h.quantile(0.0), 100);
        assert_eq!(h.points().last().unwrap().0, 10_000_000);
    }

    /// Independent oracle: midpoint-rule integral of the quantile function.
    fn quadrature_mean(cdf: &FlowSizeCdf) -> f64 {
        let n = 2_000_000;
        let (s0, p0) = cdf.points()[0];
        let mut sum = p0 * s0 as f64;
        let pts = cdf.points();
        for w in pts.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            if pb <= pa {
                continue;
            }
            let k = ((pb - pa) * n as f64).ceil() as usize;
            let h = (pb - pa) / k as f64;
            for j in 0..k {
                let f = (j as f64 + 0.5) / k as f64;
                sum += h * (a as f64) * ((b as f64) / (a as f64)).powf(f);
            }
        }
        sum
    }

    #[test]
    fn analytic_mean_matches_quadrature() {
        for name in FlowSizeCdf::builtin_names() {
            let cdf = FlowSizeCdf::builtin(name).unwrap();
            let q = quadrature_mean(&cdf);
            assert!((cdf.mean() - q).abs() / q < 1e-6, "{name}: {} vs {q}", cdf.mean());
        }
    }

    #[test]
    fn sample_mean_within_two_percent() {
        // A light-tailed CDF so 1e5 draws pin the mean well inside 2%.
        let cdf = FlowSizeCdf::new(vec![(1000, 0.1), (5000, 0.5), (20_000, 0.9), (40_000, 1.0)]).unwrap();
        let mut rng = seeded_rng(7, "sizes");
        let n = 100_000;
        let mean = (0..n).map(|_| cdf.sample_size(&mut rng) as f64).sum::<f64>() / n as f64;
        let q = quadrature_mean(&cdf);
        assert!((mean - q).abs() / q < 0.02, "{mean} vs {q}");
    }

    #[test]
    fn segment_hit_rates_pass_chi_square() {
        let cdf = FlowSizeCdf::builtin("hadoop-like").unwrap();
        let pts = cdf.points();
        let n = 100_000;
        let mut counts = vec![0u64; pts.len()];
        let mut rng = seeded_rng(11, "chi");
        for _ in 0..n {
            let s = cdf.sample_size(&mut rng);
            // Bucket i holds sizes in (s_{i-1}, s_i]; bucket 0 is the point mass.
            let i = pts.iter().position(|&(k, _)| s <= k).unwrap();
            counts[i] += 1;
        }
        let mut chi2 = 0.0;
        let mut prev = 0.0;
        for (i, &(_, p)) in pts.iter().enumerate() {
            let expect = (p - prev) * n as f64;
            prev = p;
            chi2 += (counts[i] as f64 - expect).powi(2) / expect;
        }
        // 11 degrees of freedom; the 0.999 quantile is 31.26.
        assert!(chi2 < 31.26, "chi2 = {chi2}");
    }

    #[test]
    fn lambda_example() {
        assert_eq!(arrival_rate(0.5, 100_000_000_000, 62_500.0), 100_000.0);
    }

    #[test]
    fn offered_load_within_five_percent() {
        let cdf = FlowSizeCdf::builtin("hadoop-like").unwrap();
        let mut rng = seeded_rng(3, "workload");
        let hosts = 16;
        let rate = 100_000_000_000u64;
        let dur = SimTime::from_ms(100);
        let flows = poisson_arrivals(&cdf, 0.5, hosts, rate, dur, &mut rng).unwrap();
        let bits: f64 = flows.iter().map(|f| f.size as f64 * 8.0).sum();
        let offered = bits / (hosts as f64 * rate as f64 * dur.as_secs_f64());
        assert!((offered - 0.5).abs() / 0.5 < 0.05, "offered {offered}");
        assert!(flows.iter().all(|f| f.src != f.dst && f.start < dur));
        assert!(flows.windows(2).all(|w| w[0].start <= w[1].start));
    }

    #[test]
    fn tiny_load_short_horizon_is_empty() {
        let cdf = FlowSizeCdf::builtin("hadoop-like").unwrap();
        let mut rng = seeded_rng(3, "workload");
        let flows =
            poisson_arrivals(&cdf, 1e-9, 4, 100_000_000_000, SimTime::from_us(10), &mut rng).unwrap();
        assert!(flows.is_empty());
    }

    #[test]
    fn schedules_are_deterministic() {
        let cdf = FlowSizeCdf::builtin("websearch-like").unwrap();
        let gen = |seed| {
            let mut rng = seeded_rng(seed, "workload");
            poisson_arrivals(&cdf, 0.3, 8, 100_000_000_000, SimTime::from_ms(2), &mut rng).unwrap()
        };
        assert_eq!(gen(5), gen(5));
        assert_ne!(gen(5), gen(6));
    }

    #[test]
    fn load_out_of_range() {
        let cdf = two_point();
        let mut rng = seeded_rng(1, "w");
        assert!(poisson_arrivals(&cdf, 1.0, 4, 1, SimTime(1), &mut rng).is_err());
        assert!(poisson_arrivals(&cdf, 0.0, 4, 1, SimTime(1), &mut rng).is_err());
    }

    fn spec(src: HostId, dst: HostId, start: u64, port: u16) -> FlowSpec {
        FlowSpec {
            src,
            dst,
            size: 1_000_000,
            start: SimTime::from_us(start),
            stop: None,
            src_port: port,
            dst_port: DATA_DST_PORT,
        }
    }

    #[test]
    fn script_orders_by_start() {
        let flows = script_flows(vec![spec(1, 2, 300, 2), spec(0, 2, 0, 1)]).unwrap();
        assert_eq!(flows[0].src, 0);
        assert_eq!(flows[1].start, SimTime::from_us(300));
        assert!(script_flows(vec![]).unwrap().is_empty());
    }

    #[test]
    fn script_rejects_bad_entries() {
        assert!(matches!(
            script_flows(vec![spec(0, 2, 0, 1), spec(0, 2, 5, 1)]),
            Err(WorkloadError::DuplicateTuple { first: 0, second: 1 })
        ));
        // The reverse direction hashes to the same connection.
        let mut back = spec(2, 0, 5, DATA_DST_PORT);
        back.dst_port = 1;
        assert!(script_flows(vec![spec(0, 2, 0, 1), back]).is_err());
        assert!(script_flows(vec![spec(1, 1, 0, 1)]).is_err());
        let mut zero = spec(0, 1, 0, 1);
        zero.size = 0;
        assert!(script_flows(vec![zero]).is_err());
    }
}
