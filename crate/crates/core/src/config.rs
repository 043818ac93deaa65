//! Run configuration: the complete, serializable description of one
//! experiment. Unknown keys are errors, not warnings.

use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregatorKind, AggregatorSpec, ClipTau};
use crate::attack::{AttackKind, AttackSpec};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// Count of all agents, Byzantine included.
    pub n_agents: usize,
    /// Erdos-Renyi edge probability; 1.0 forces the complete graph.
    pub edge_prob: f64,
    #[serde(default)]
    pub n_byzantine: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Synthetic: class count.
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Synthetic: feature dimension.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Synthetic: class-mean separation.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Synthetic: norm of the common mean shift shared by all classes.
    #[serde(default)]
    pub offset: f64,
    /// Synthetic: per-coordinate noise scale around the class mean.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Synthetic: pool size to partition from.
    #[serde(default = "default_train_pool")]
    pub train_pool: usize,
    /// Synthetic: test-set size.
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// IDX: file names under BYZSIM_DATA_DIR (or absolute paths).
    #[serde(default)]
    pub train_images: Option<String>,
    #[serde(default)]
    pub train_labels: Option<String>,
    #[serde(default)]
    pub test_images: Option<String>,
    #[serde(default)]
    pub test_labels: Option<String>,
    /// Local samples per non-Byzantine agent.
    pub z_per_agent: usize,
    /// Dirichlet concentration.
    pub beta: f64,
}

fn default_classes() -> usize {
    10
}
fn default_dim() -> usize {
    16
}
fn default_separation() -> f64 {
    2.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_train_pool() -> usize {
    20_000
}
fn default_test_size() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// l2 regularization weight; also the strong-convexity constant.
    pub reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `alpha_k = 1 / (mu (k + k0))`
    TheoryK0,
    /// `alpha_k = 2 / (mu (k + k1))`
    TheoryK1,
    /// `alpha_k = a / (b k + 1)`
    Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    /// Offset k0 (or k1). Auto-derived as the smallest integer making
    /// `alpha_0 <= 1/(2L)` when absent.
    #[serde(default)]
    pub k_offset: Option<u64>,
    #[serde(default = "default_sched_a")]
    pub a: f64,
    #[serde(default = "default_sched_b")]
    pub b: f64,
}

fn default_sched_a() -> f64 {
    1.0
}
fn default_sched_b() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregatorConfig {
    pub kind: AggregatorKind,
    #[serde(default)]
    pub trim_b: usize,
    #[serde(default = "default_clip_tau")]
    pub clip_tau: ClipTau,
}

fn default_clip_tau() -> ClipTau {
    ClipTau::adaptive()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    #[serde(default = "default_alie_scale")]
    pub alie_scale: f64,
    /// Duplication target; seeded uniform choice among honest agents when
    /// absent.
    #[serde(default)]
    pub dup_target: Option<usize>,
}

fn default_alie_scale() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    pub master_seed: u64,
    /// Common initialization value for every parameter.
    #[serde(default)]
    pub init: f64,
    /// Record per-agent train accuracies into the summary.
    #[serde(default)]
    pub record_accuracy: bool,
    /// Gradient-norm tolerance for the empirical-minimizer reference point.
    #[serde(default = "default_minimizer_tol")]
    pub minimizer_tol: f64,
}

fn default_eval_every() -> u64 {
    50
}
fn default_minimizer_tol() -> f64 {
    1e-7
}

/// The complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologyConfig,
    pub data: DataConfig,
    pub loss: LossConfig,
    pub schedule: ScheduleConfig,
    pub aggregator: AggregatorConfig,
    pub attack: AttackConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.topology.n_agents < 1 {
            return Err(SimError::ConfigInvalid("need at least one agent".into()));
        }
        if !(self.topology.edge_prob > 0.0 && self.topology.edge_prob <= 1.0) {
            return Err(SimError::ConfigInvalid(format!(
                "edge_prob must be in (0, 1], got {}",
                self.topology.edge_prob
            )));
        }
        if self.topology.n_byzantine >= self.topology.n_agents {
            return Err(SimError::ConfigInvalid(
                "n_byzantine must leave at least one honest agent".into(),
            ));
        }
        if self.loss.reg <= 0.0 {
            return Err(SimError::ConfigInvalid("reg must be positive".into()));
        }
        if self.data.beta <= 0.0 {
            return Err(SimError::ConfigInvalid("beta must be positive".into()));
        }
        if self.data.z_per_agent == 0 {
            return Err(SimError::ConfigInvalid("z_per_agent must be positive".into()));
        }
        if self.data.source == DataSource::Idx {
            for (name, v) in [
                ("train_images", &self.data.train_images),
                ("train_labels", &self.data.train_labels),
                ("test_images", &self.data.test_images),
                ("test_labels", &self.data.test_labels),
            ] {
                if v.is_none() {
                    return Err(SimError::ConfigInvalid(format!(
                        "data.{name} is required when source = \"idx\""
                    )));
                }
            }
        }
        if self.schedule.kind == ScheduleKind::Experiment
            && (self.schedule.a <= 0.0 || self.schedule.b < 0.0)
        {
            return Err(SimError::ConfigInvalid(
                "experiment schedule needs a > 0 and b >= 0".into(),
            ));
        }
        self.aggregator.clip_tau.validate()?;
        if self.run.eval_every == 0 {
            return Err(SimError::ConfigInvalid("eval_every must be positive".into()));
        }
        if self.attack.kind != AttackKind::None && self.topology.n_byzantine == 0 {
            return Err(SimError::ConfigInvalid(
                "an attack requires n_byzantine > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn aggregator_spec(&self) -> AggregatorSpec {
        AggregatorSpec {
            kind: self.aggregator.kind,
            trim_b: self.aggregator.trim_b,
            clip_tau: self.aggregator.clip_tau.clone(),
        }
    }

    pub fn attack_spec(&self) -> AttackSpec {
        AttackSpec {
            kind: self.attack.kind,
            alie_scale: self.attack.alie_scale,
            dup_target: self.attack.dup_target,
        }
    }
}

/// A schedule with every constant pinned, ready to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSchedule {
    pub kind: ScheduleKind,
    pub mu: f64,
    pub k_offset: u64,
    pub a: f64,
    pub b: f64,
}

impl ResolvedSchedule {
    /// Pin the schedule against the task's curvature. Theory schedules
    /// derive the smallest offset with `alpha_0 <= 1/(2L)` unless one is
    /// given, and reject offsets that violate that cap.
    pub fn resolve(cfg: &ScheduleConfig, mu: f64, l_smooth: f64) -> Result<Self> {
        let cap = 1.0 / (2.0 * l_smooth);
        let k_offset = match cfg.kind {
            ScheduleKind::TheoryK0 => cfg
                .k_offset
                .unwrap_or_else(|| (2.0 * l_smooth / mu).ceil() as u64),
            ScheduleKind::TheoryK1 => cfg
                .k_offset
                .unwrap_or_else(|| (4.0 * l_smooth / mu).ceil() as u64),
            ScheduleKind::Experiment => cfg.k_offset.unwrap_or(0),
        };
        let resolved = ResolvedSchedule {
            kind: cfg.kind,
            mu,
            k_offset,
            a: cfg.a,
            b: cfg.b,
        };
        if matches!(cfg.kind, ScheduleKind::TheoryK0 | ScheduleKind::TheoryK1)
            && resolved.alpha(0) > cap * (1.0 + 1e-12)
        {
            return Err(SimError::ConfigInvalid(format!(
                "step size alpha_0 = {} exceeds 1/(2L) = {cap}; increase k_offset",
                resolved.alpha(0)
            )));
        }
        Ok(resolved)
    }

    pub fn alpha(&self, k: u64) -> f64 {
        match self.kind {
            ScheduleKind::TheoryK0 => 1.0 / (self.mu * (k + self.k_offset) as f64),
            ScheduleKind::TheoryK1 => 2.0 / (self.mu * (k + self.k_offset) as f64),
            ScheduleKind::Experiment => self.a / (self.b * k as f64 + 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_toml() -> &'static str {
        r#"
[topology]
n_agents = 10
edge_prob = 0.7
n_byzantine = 2

[data]
source = "synthetic"
classes = 5
dim = 8
separation = 2.0
train_pool = 4000
test_size = 2000
z_per_agent = 100
beta = 0.5

[loss]
reg = 0.01

[schedule]
kind = "experiment"
a = 1.0
b = 0.01

[aggregator]
kind = "ios"
trim_b = 2

[attack]
kind = "sign_flip"

[run]
steps = 500
eval_every = 50
master_seed = 7
"#
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::from_toml(sample_toml()).unwrap();
        let text = cfg.to_toml();
        let again = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, again);
        // and a second serialize is byte-stable
        assert_eq!(text, again.to_toml());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = sample_toml().replace("eval_every = 50", "eval_evry = 50");
        let err = RunConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("eval_evry"), "{err}");
    }

    #[test]
    fn attacks_need_byzantine_agents() {
        let bad = sample_toml().replace("n_byzantine = 2", "n_byzantine = 0");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn clip_tau_accepts_number_or_adaptive() {
        let with_fixed = sample_toml().replace(
            "kind = \"ios\"\ntrim_b = 2",
            "kind = \"scc\"\ntrim_b = 2\nclip_tau = 1.5",
        );
        let cfg = RunConfig::from_toml(&with_fixed).unwrap();
        assert_eq!(cfg.aggregator.clip_tau, ClipTau::Fixed(1.5));

        let with_adaptive = sample_toml().replace(
            "kind = \"ios\"\ntrim_b = 2",
            "kind = \"scc\"\ntrim_b = 2\nclip_tau = \"adaptive\"",
        );
        let cfg = RunConfig::from_toml(&with_adaptive).unwrap();
        assert!(matches!(cfg.aggregator.clip_tau, ClipTau::Adaptive(_)));

        let with_bad = sample_toml().replace(
            "kind = \"ios\"\ntrim_b = 2",
            "kind = \"scc\"\ntrim_b = 2\nclip_tau = \"sometimes\"",
        );
        assert!(RunConfig::from_toml(&with_bad).is_err());
    }

    #[test]
    fn theory_schedule_derives_offset() {
        let sched = ScheduleConfig {
            kind: ScheduleKind::TheoryK0,
            k_offset: None,
            a: 1.0,
            b: 0.01,
        };
        let r = ResolvedSchedule::resolve(&sched, 0.1, 3.6).unwrap();
        assert_eq!(r.k_offset, 72);
        assert!(r.alpha(0) <= 1.0 / 7.2 + 1e-15);

        let sched1 = ScheduleConfig {
            kind: ScheduleKind::TheoryK1,
            k_offset: None,
            a: 1.0,
            b: 0.01,
        };
        let r1 = ResolvedSchedule::resolve(&sched1, 0.1, 3.6).unwrap();
        assert_eq!(r1.k_offset, 144);

        let too_small = ScheduleConfig {
            kind: ScheduleKind::TheoryK0,
            k_offset: Some(3),
            a: 1.0,
            b: 0.01,
        };
        assert!(ResolvedSchedule::resolve(&too_small, 0.1, 3.6).is_err());
    }

    #[test]
    fn experiment_schedule_matches_formula() {
        let sched = ScheduleConfig {
            kind: ScheduleKind::Experiment,
            k_offset: None,
            a: 1.0,
            b: 0.01,
        };
        let r = ResolvedSchedule::resolve(&sched, 0.01, 10.0).unwrap();
        assert_eq!(r.alpha(0), 1.0);
        assert_eq!(r.alpha(100), 1.0 / 2.0);
    }
}
