use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sqlab::oracle::TranscriptEntry;

use crate::config::ExperimentConfig;

pub const VERSION: &str = concat!("sqlab ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub runs: Vec<Value>,
    /// Exact quantities, with rationals as `{"num", "den"}`.
    pub exact: BTreeMap<String, Value>,
    pub summary: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    /// Wall time; the only field that varies between identical runs.
    pub runtime_ms: u64,
}

impl Report {
    pub fn new(config: ExperimentConfig) -> Self {
        Report {
            version: VERSION,
            config,
            runs: vec![],
            exact: BTreeMap::new(),
            summary: BTreeMap::new(),
            assertions: vec![],
            passed: true,
            runtime_ms: 0,
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn exact(&mut self, key: &str, v: impl Serialize) {
        self.exact.insert(key.into(), serde_json::to_value(v).expect("serializable"));
    }

    pub fn summary(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(v).expect("serializable"));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A report plus the oracle transcripts of its runs, keyed by trial.
pub struct Outcome {
    pub report: Report,
    pub transcripts: Vec<(usize, Vec<TranscriptEntry>)>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome {
            report,
            transcripts: vec![],
        }
    }
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    trial: usize,
    #[serde(flatten)]
    entry: &'a TranscriptEntry,
}

/// One JSON object per query, tagged with its trial.
pub fn write_transcripts<W: std::io::Write>(t: &[(usize, Vec<TranscriptEntry>)], mut w: W) -> std::io::Result<()> {
    for (trial, entries) in t {
        for entry in entries {
            serde_json::to_writer(&mut w, &TranscriptLine { trial: *trial, entry })?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}
