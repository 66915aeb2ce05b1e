use std::path::PathBuf;

use thiserror::Error;

use crate::engine::SimTime;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("event scheduled in the past: now={now}, fire_at={fire_at}")]
    ScheduledInPast { now: SimTime, fire_at: SimTime },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("invalid topology parameters: {0}")]
    Invalid(String),
    #[error("no route from switch {switch} to host {dst}")]
    Unreachable { switch: usize, dst: usize },
    #[error("node {0} is not a switch")]
    NotASwitch(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("ACK carries N = 0 concurrent flows")]
    ZeroConcurrency,
    #[error("utilization must be positive and finite, got {0}")]
    BadUtilization(f64),
    #[error("out-of-order data for flow {flow}: expected seq {expected}, got {got}")]
    OutOfOrder { flow: u32, expected: u64, got: u64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("INT table lookup for port {port} but the switch has {ports} ports")]
    PortOutOfRange { port: usize, ports: usize },
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid CDF: {0}")]
    InvalidCdf(String),
    #[error("{path}:{line}: {msg}")]
    CdfParse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error("duplicate five-tuple for flows {first} and {second}")]
    DuplicateTuple { first: usize, second: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {key}: {msg}")]
    Invalid {
        key: String,
        line: usize,
        msg: String,
    },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("bad override {0:?}: expected key=value")]
    BadOverride(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Failure inside a running simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invariant violated at t={time}: {msg}")]
    Invariant { time: SimTime, msg: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
