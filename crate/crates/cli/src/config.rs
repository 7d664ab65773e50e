use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sqlab::oracle::{NoiseModel, ResponsePolicy};
use sqlab::pconcept::MeasurementDistribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VerifyLemmas,
    LearnProduct,
    Lpn,
    Sda,
    NoiseDemo,
}

impl ExperimentKind {
    pub fn default_n(self) -> usize {
        match self {
            ExperimentKind::VerifyLemmas | ExperimentKind::Sda => 2,
            ExperimentKind::LearnProduct => 8,
            ExperimentKind::Lpn => 16,
            ExperimentKind::NoiseDemo => 4,
        }
    }
}

/// How the simulated oracle picks answers inside its tolerance band. Seeds
/// are derived per trial from the experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    #[default]
    Exact,
    RandomWithinTau,
    Adversarial,
    Empirical {
        #[serde(default)]
        samples: Option<usize>,
        delta: f64,
    },
}

impl PolicySpec {
    pub fn build(self, seed: u64) -> ResponsePolicy {
        match self {
            PolicySpec::Exact => ResponsePolicy::Exact,
            PolicySpec::RandomWithinTau => ResponsePolicy::RandomWithinTau { seed },
            PolicySpec::Adversarial => ResponsePolicy::adversarial(),
            PolicySpec::Empirical { samples, delta } => ResponsePolicy::EmpiricalFromSamples { samples, delta, seed },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    #[default]
    Product,
    Basis,
}

/// Per-experiment knobs. Each experiment reads the ones it needs.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Per-query tolerance; overrides the one derived from `epsilon`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub target: TargetKind,
    /// Monte Carlo samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// LPN example count, or validation set size for the rate search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_upper: Option<f64>,
    /// Keep only the first k concepts of the class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_limit: Option<usize>,
}

fn default_trials() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<MeasurementDistribution>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub learner: LearnerParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            n: experiment.default_n(),
            distribution: None,
            noise: NoiseModel::None,
            policy: PolicySpec::Exact,
            learner: LearnerParams::default(),
            seed: 0,
            trials: default_trials(),
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            bail!("n must be positive");
        }
        if self.trials == 0 {
            bail!("trials must be positive");
        }
        self.noise.validate()?;
        if let Some(d) = &self.distribution {
            if d.n() != self.n {
                bail!("distribution acts on {} qubits, config has n = {}", d.n(), self.n);
            }
        }
        let l = &self.learner;
        if let Some(e) = l.epsilon {
            if !(e > 0.0 && e <= 4.0) {
                bail!("epsilon = {e} out of range");
            }
        }
        if let Some(t) = l.tau {
            if !(t > 0.0 && t.is_finite()) {
                bail!("tau = {t} must be positive");
            }
        }
        if let Some(u) = l.eta_upper {
            if !(0.0..1.0).contains(&u) {
                bail!("eta_upper = {u} not in [0, 1)");
            }
        }
        if l.samples == Some(0) || l.examples == Some(0) || l.class_limit == Some(0) {
            bail!("sample, example and class counts must be positive");
        }
        if let PolicySpec::Empirical { delta, .. } = self.policy {
            if !(delta > 0.0 && delta < 1.0) {
                bail!("empirical policy needs delta in (0, 1)");
            }
        }
        Ok(())
    }

    pub fn distribution_or(&self, default: MeasurementDistribution) -> MeasurementDistribution {
        self.distribution.clone().unwrap_or(default)
    }
}
