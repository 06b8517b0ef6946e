//! Benchmark harness for the srom library: two reference problems (a
//! parametric linear-static system with a spectral stiffness and a
//! synthetic free-free chain under an impulse), the full pipeline from
//! snapshots through trained prediction bands, and report, CSV, and SVG
//! emitters. The `srom-bench` binary drives everything from TOML configs.

pub mod config;
pub mod draws;
pub mod dynamic_bench;
pub mod plot;
pub mod report;
pub mod static_bench;

use std::fmt;

/// Benchmark failure, split by exit code: configuration problems exit
/// with 2, numerical or I/O failures during a run with 3.
#[derive(Debug)]
pub enum BenchError {
    /// Invalid or unreadable configuration.
    Config(String),
    /// Failure inside the numerical pipeline.
    Numeric(srom::Error),
    /// Failure writing results.
    Output(std::io::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Numeric(_) | BenchError::Output(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        BenchError::Config(msg.into())
    }
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Config(msg) => write!(f, "configuration error: {msg}"),
            BenchError::Numeric(e) => write!(f, "numerical failure: {e}"),
            BenchError::Output(e) => write!(f, "output failure: {e}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<srom::Error> for BenchError {
    fn from(e: srom::Error) -> Self {
        BenchError::Numeric(e)
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Output(e)
    }
}

pub type Result<V> = std::result::Result<V, BenchError>;
