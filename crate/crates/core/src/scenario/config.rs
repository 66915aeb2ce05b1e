//! Scenario files: TOML with unit-bearing durations and rates.
//!
//! Durations are integer nanoseconds or strings such as `"1.5us"`; rates are
//! integer bits per second or strings such as `"100Gbps"`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::error::ConfigError;
use crate::transport::{CcMode, LhcsBandwidth};
use crate::workload::FlowSizeCdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(with = "time")]
    pub end_time: SimTime,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub cc: CcConfig,
    #[serde(default)]
    pub switch: SwitchConfig,
    #[serde(default)]
    pub pfc: PfcSection,
    #[serde(default)]
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Dumbbell,
    Chain,
    Fattree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    /// Dumbbell and chain: number of switches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switches: Option<usize>,
    /// Dumbbell: senders on the first switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub senders: Option<usize>,
    /// Chain: the switch each sender attaches to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_switches: Option<Vec<usize>>,
    /// Fat-tree arity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(with = "rate")]
    pub rate: u64,
    #[serde(with = "time")]
    pub delay: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CcConfig {
    pub mode: CcMode,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Additive step in bytes; derived from the BDP when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_ai: Option<f64>,
    pub max_stage: u32,
    pub ack_every: u32,
    pub mtu: u32,
    pub lhcs_bandwidth: LhcsBandwidth,
    /// Base RTT; derived from the topology when absent.
    #[serde(with = "opt_time", skip_serializing_if = "Option::is_none")]
    pub base_rtt: Option<SimTime>,
}

impl Default for CcConfig {
    fn default() -> Self {
        CcConfig {
            mode: CcMode::Fncc,
            eta: 0.95,
            alpha: 1.05,
            beta: 0.9,
            w_ai: None,
            max_stage: 5,
            ack_every: 1,
            mtu: 1518,
            lhcs_bandwidth: LhcsBandwidth::LastHop,
            base_rtt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchConfig {
    /// All_INT_Table refresh period; 0 reads port state at ACK time.
    #[serde(with = "time")]
    pub int_refresh: SimTime,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            int_refresh: SimTime::from_us(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfcSection {
    pub enabled: bool,
    pub pause_threshold: u64,
    pub resume_fraction: f64,
}

impl Default for PfcSection {
    fn default() -> Self {
        PfcSection {
            enabled: true,
            pause_threshold: 500_000,
            resume_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Script,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFlow {
    pub src: u32,
    pub dst: u32,
    pub size: u64,
    #[serde(with = "time")]
    pub start: SimTime,
    #[serde(default, with = "opt_time", skip_serializing_if = "Option::is_none")]
    pub stop: Option<SimTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<ScriptFlow>,
    /// `builtin:<name>` or a path relative to the scenario file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<f64>,
    /// Arrival horizon; defaults to the end time.
    #[serde(with = "opt_time", skip_serializing_if = "Option::is_none")]
    pub duration: Option<SimTime>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            kind: WorkloadKind::Script,
            flows: Vec::new(),
            cdf: None,
            load: None,
            duration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    #[serde(with = "time")]
    pub sample_interval: SimTime,
    #[serde(with = "time")]
    pub utilization_window: SimTime,
    /// Upper bounds of the slowdown size buckets.
    pub size_buckets: Vec<u64>,
    pub port_series: bool,
    pub flow_series: bool,
    pub trace_windows: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            sample_interval: SimTime::from_us(1),
            utilization_window: SimTime::from_us(10),
            size_buckets: vec![100_000],
            port_series: true,
            flow_series: true,
            trace_windows: false,
        }
    }
}

/// A validated scenario plus the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl Scenario {
    /// Parses `text`, applies `key=value` overrides and validates.
    pub fn parse(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = if overrides.is_empty() {
            text.to_string()
        } else {
            apply_overrides(text, overrides)?
        };
        let config: ScenarioConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let sc = Scenario {
            config,
            base_dir: base_dir.to_path_buf(),
        };
        sc.validate(&text)?;
        Ok(sc)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, &base, overrides)
    }

    /// The configuration as TOML; parses back to the same value.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.config).expect("config serializes")
    }

    pub fn cdf(&self) -> Result<Option<FlowSizeCdf>, ConfigError> {
        let Some(spec) = &self.config.workload.cdf else {
            return Ok(None);
        };
        if let Some(name) = spec.strip_prefix("builtin:") {
            return FlowSizeCdf::builtin(name)
                .map(Some)
                .ok_or_else(|| ConfigError::Syntax(format!("unknown builtin CDF {name:?}")));
        }
        FlowSizeCdf::load(&self.base_dir.join(spec))
            .map(Some)
            .map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let c = &self.config;
        let fail = |key: &str, msg: String| {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                line: line_of(text, key),
                msg,
            })
        };
        if c.end_time == SimTime::ZERO {
            return fail("end_time", "must be positive".into());
        }
        let t = &c.topology;
        if t.rate == 0 {
            return fail("topology.rate", "must be positive".into());
        }
        match t.kind {
            TopologyKind::Dumbbell => {
                if t.switches.unwrap_or(0) == 0 {
                    return fail("topology.switches", "dumbbell needs switches >= 1".into());
                }
                if t.senders.unwrap_or(0) == 0 {
                    return fail("topology.senders", "dumbbell needs senders >= 1".into());
                }
            }
            TopologyKind::Chain => {
                let m = t.switches.unwrap_or(0);
                if m == 0 {
                    return fail("topology.switches", "chain needs switches >= 1".into());
                }
                match &t.sender_switches {
                    Some(s) if !s.is_empty() && s.iter().all(|&i| i < m) => {}
                    _ => {
                        return fail(
                            "topology.sender_switches",
                            format!("need a non-empty list of switch indices below {m}"),
                        )
                    }
                }
            }
            TopologyKind::Fattree => match t.k {
                Some(k) if k >= 2 && k % 2 == 0 => {}
                _ => return fail("topology.k", "fat-tree arity must be even and >= 2".into()),
            },
        }
        let cc = &c.cc;
        if !(cc.eta > 0.0 && cc.eta < 1.0) {
            return fail("cc.eta", format!("0 < eta < 1 required, got {}", cc.eta));
        }
        if !(cc.alpha > 1.0) {
            return fail("cc.alpha", format!("alpha > 1 required, got {}", cc.alpha));
        }
        if !(cc.beta > 0.0 && cc.beta < 1.0) {
            return fail("cc.beta", format!("0 < beta < 1 required, got {}", cc.beta));
        }
        if cc.w_ai.is_some_and(|w| !(w >= 0.0)) {
            return fail("cc.w_ai", "W_AI >= 0 required".into());
        }
        if cc.max_stage < 1 {
            return fail("cc.max_stage", "maxStage >= 1 required".into());
        }
        if cc.ack_every < 1 {
            return fail("cc.ack_every", "m >= 1 required".into());
        }
        if cc.mtu <= crate::packet::DATA_HEADER_BYTES {
            return fail("cc.mtu", "MTU must exceed the data header".into());
        }
        if cc.base_rtt == Some(SimTime::ZERO) {
            return fail("cc.base_rtt", "must be positive".into());
        }
        let p = &c.pfc;
        if p.enabled && p.pause_threshold < u64::from(cc.mtu) {
            return fail("pfc.pause_threshold", "must be at least one MTU".into());
        }
        if !(p.resume_fraction > 0.0 && p.resume_fraction <= 1.0) {
            return fail("pfc.resume_fraction", "must be in (0, 1]".into());
        }
        let w = &c.workload;
        match w.kind {
            WorkloadKind::Script => {
                if w.cdf.is_some() || w.load.is_some() {
                    return fail("workload.kind", "cdf and load need kind = \"poisson\"".into());
                }
            }
            WorkloadKind::Poisson => {
                if !w.flows.is_empty() {
                    return fail("workload.flows", "scripted flows need kind = \"script\"".into());
                }
                match w.load {
                    Some(l) if l > 0.0 && l < 1.0 => {}
                    _ => return fail("workload.load", "0 < load < 1 required".into()),
                }
                if w.cdf.is_none() {
                    return fail("workload.cdf", "poisson workload needs a cdf".into());
                }
                if let Err(e) = self.cdf() {
                    return fail("workload.cdf", e.to_string());
                }
            }
        }
        let m = &c.metrics;
        if m.utilization_window == SimTime::ZERO {
            return fail("metrics.utilization_window", "must be positive".into());
        }
        if m.size_buckets.windows(2).any(|b| b[1] <= b[0]) {
            return fail("metrics.size_buckets", "must be strictly increasing".into());
        }
        Ok(())
    }
}

/// Line of `key` (dotted path) in `text`, or 0 when it cannot be located.
fn line_of(text: &str, key: &str) -> usize {
    let (section, leaf) = match key.rsplit_once('.') {
        Some((s, l)) => (s, l),
        None => ("", key),
    };
    let mut current = String::new();
    let mut section_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == section {
                section_line = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(leaf) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    section_line
}

/// Applies `a.b.c=value` assignments to the TOML document.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::BadOverride(o.clone()));
        }
        let value = parse_value(raw.trim());
        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().expect("non-empty");
        let mut table = &mut doc;
        for p in parts {
            table = table
                .entry(p)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| ConfigError::BadOverride(format!("{o}: {p} is not a table")))?;
        }
        table.insert(leaf.to_string(), value);
    }
    toml::to_string(&doc).map_err(|e| ConfigError::Syntax(e.to_string()))
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Parses `"1.5us"`, `"600us"`, `"20ms"`, `"1s"` or `"800ns"`.
pub fn parse_duration(s: &str) -> Result<SimTime, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .ok_or_else(|| format!("duration {s:?} needs a unit (ns, us, ms, s)"))?;
    let (num, unit) = s.split_at(split);
    let scale: u64 = match unit.trim() {
        "ns" => 1,
        "us" | "µs" => 1_000,
        "ms" => 1_000_000,
        "s" => 1_000_000_000,
        u => return Err(format!("unknown time unit {u:?}")),
    };
    scaled(num, scale).map(SimTime).ok_or_else(|| format!("bad duration {s:?}"))
}

/// Parses `"100Gbps"`, `"400G"`, `"25Mbps"` or a plain integer.
pub fn parse_rate(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let scale: u64 = match unit.trim().trim_end_matches("bps") {
        "" => 1,
        "K" | "k" => 1_000,
        "M" => 1_000_000,
        "G" => 1_000_000_000,
        "T" => 1_000_000_000_000,
        u => return Err(format!("unknown rate unit {u:?}")),
    };
    scaled(num, scale).ok_or_else(|| format!("bad rate {s:?}"))
}

/// Exact decimal scaling without going through floating point.
fn scaled(num: &str, scale: u64) -> Option<u64> {
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let mut v = if int.is_empty() { 0 } else { int.parse::<u64>().ok()? }.checked_mul(scale)?;
    let mut unit = scale;
    for d in frac.chars() {
        unit /= 10;
        let d = d.to_digit(10)? as u64;
        if unit == 0 {
            if d != 0 {
                return None;
            }
            continue;
        }
        v = v.checked_add(d * unit)?;
    }
    Some(v)
}

pub fn format_duration(t: SimTime) -> String {
    let ns = t.as_ns();
    for (unit, scale) in [("s", 1_000_000_000), ("ms", 1_000_000), ("us", 1_000)] {
        if ns != 0 && ns.is_multiple_of(scale) {
            return format!("{}{unit}", ns / scale);
        }
    }
    format!("{ns}ns")
}

pub fn format_rate(bps: u64) -> String {
    for (unit, scale) in [("Tbps", 1_000_000_000_000), ("Gbps", 1_000_000_000), ("Mbps", 1_000_000)] {
        if bps != 0 && bps.is_multiple_of(scale) {
            return format!("{}{unit}", bps / scale);
        }
    }
    format!("{bps}bps")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntOrStr {
    Int(u64),
    Str(String),
}

pub mod time {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &SimTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_duration(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SimTime, D::Error> {
        match IntOrStr::deserialize(d)? {
            IntOrStr::Int(ns) => Ok(SimTime(ns)),
            IntOrStr::Str(s) => parse_duration(&s).map_err(serde::de::Error::custom),
        }
    }
}

pub mod opt_time {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<SimTime>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(&format_duration(*t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SimTime>, D::Error> {
        super::time::deserialize(d).map(Some)
    }
}

pub mod rate {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rate(*r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match IntOrStr::deserialize(d)? {
            IntOrStr::Int(v) => Ok(v),
            IntOrStr::Str(s) => parse_rate(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "m"
end_time = "1ms"

[topology]
kind = "dumbbell"
switches = 3
senders = 2
rate = "100Gbps"
delay = "1.5us"
"#;

    fn parse(text: &str) -> Result<Scenario, ConfigError> {
        Scenario::parse(text, Path::new("."), &[])
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap().config;
        assert_eq!(c.cc.eta, 0.95);
        assert_eq!(c.cc.alpha, 1.05);
        assert_eq!(c.cc.beta, 0.9);
        assert_eq!(c.cc.max_stage, 5);
        assert_eq!(c.cc.ack_every, 1);
        assert_eq!(c.cc.mtu, 1518);
        assert_eq!(c.cc.mode, CcMode::Fncc);
        assert!(c.pfc.enabled);
        assert_eq!(c.pfc.pause_threshold, 500_000);
        assert_eq!(c.pfc.resume_fraction, 0.8);
        assert_eq!(c.switch.int_refresh, SimTime::from_us(1));
        assert_eq!(c.metrics.sample_interval, SimTime::from_us(1));
        assert_eq!(c.metrics.utilization_window, SimTime::from_us(10));
        assert_eq!(c.topology.rate, 100_000_000_000);
        assert_eq!(c.topology.delay, SimTime(1500));
        assert_eq!(c.end_time, SimTime::from_ms(1));
    }

    #[test]
    fn eta_out_of_range_reports_line() {
        let text = format!("{MINIMAL}\n[cc]\neta = 1.5\n");
        match parse(&text).unwrap_err() {
            ConfigError::Invalid { key, line, msg } => {
                assert_eq!(key, "cc.eta");
                assert_eq!(line, text.lines().position(|l| l.starts_with("eta")).unwrap() + 1);
                assert!(msg.contains("0 < eta < 1"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[cc]\netaa = 0.9\n");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("etaa"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn missing_cdf_file_is_an_error() {
        let text = MINIMAL.to_string()
            + "\n[workload]\nkind = \"poisson\"\ncdf = \"no/such/file.txt\"\nload = 0.5\n";
        match parse(&text).unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "workload.cdf"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn overrides_replace_and_insert() {
        let s = Scenario::parse(
            MINIMAL,
            Path::new("."),
            &["cc.mode=HPCC".into(), "topology.rate=400Gbps".into(), "seed=9".into()],
        )
        .unwrap();
        assert_eq!(s.config.cc.mode, CcMode::Hpcc);
        assert_eq!(s.config.topology.rate, 400_000_000_000);
        assert_eq!(s.config.seed, 9);
        assert!(Scenario::parse(MINIMAL, Path::new("."), &["novalue".into()]).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let s = parse(MINIMAL).unwrap();
        let again = parse(&s.to_toml()).unwrap();
        assert_eq!(s.config, again.config);
    }

    #[test]
    fn durations_and_rates() {
        assert_eq!(parse_duration("1.5us"), Ok(SimTime(1500)));
        assert_eq!(parse_duration("600us"), Ok(SimTime(600_000)));
        assert_eq!(parse_duration("20ms"), Ok(SimTime(20_000_000)));
        assert_eq!(parse_duration("7ns"), Ok(SimTime(7)));
        assert!(parse_duration("1.5ns").is_err());
        assert!(parse_duration("10").is_err());
        assert!(parse_duration("3 weeks").is_err());
        assert_eq!(parse_rate("100Gbps"), Ok(100_000_000_000));
        assert_eq!(parse_rate("2.5G"), Ok(2_500_000_000));
        assert_eq!(parse_rate("1000"), Ok(1000));
        assert!(parse_rate("fast").is_err());
        assert_eq!(format_duration(SimTime(1500)), "1500ns");
        assert_eq!(format_duration(SimTime(600_000)), "600us");
        assert_eq!(format_duration(SimTime::ZERO), "0ns");
        assert_eq!(format_rate(400_000_000_000), "400Gbps");
    }

    #[test]
    fn integer_times_are_nanoseconds() {
        let text = MINIMAL.replace("end_time = \"1ms\"", "end_time = 5000");
        assert_eq!(parse(&text).unwrap().config.end_time, SimTime(5000));
    }
}
