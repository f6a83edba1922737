//! Experiment configuration: JSON schema, validation, and derivation
//! of the population, task and analysis inputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use semifed_core::analysis::ConvergenceConstants;
use semifed_core::bandwidth::BandwidthPolicy;
use semifed_core::engine::{Mode, Objective};
use semifed_core::learning::{
    ClassificationSpec, ClassificationTask, QuadraticSpec, QuadraticTask, Task,
};
use semifed_core::rng::{stream_rng, Domain};
use semifed_core::wireless::{
    rate_from_snr, rayleigh_draw, snr_hz, validate_population, ChannelParams, UEProfile,
};

/// Errors surfaced to the CLI with exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Semantic(String),
    #[error("invalid config: {0}")]
    Core(#[from] semifed_core::Error),
}

/// Channel block of the config (noise given in dBm/Hz as is customary).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub total_bandwidth_hz: f64,
    pub path_loss_exp: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub rayleigh_scale: f64,
}

/// A scalar that is fixed, spread linearly over the population, or
/// drawn uniformly per UE.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spread {
    Fixed(f64),
    Linspace([f64; 2]),
    Uniform([f64; 2]),
}

impl Spread {
    fn value(&self, index: usize, population: usize, seed: u64, tag: u64) -> f64 {
        match self {
            Spread::Fixed(v) => *v,
            Spread::Linspace([lo, hi]) => {
                if population == 1 {
                    *lo
                } else {
                    lo + (hi - lo) * index as f64 / (population - 1) as f64
                }
            }
            Spread::Uniform([lo, hi]) => {
                let mut rng = stream_rng(seed, Domain::EtaGen, tag, index as u64);
                lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng)
            }
        }
    }
}

/// How the relative participation frequencies are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// Every UE gets 1/n.
    Equal,
    /// Proportional to the expected achievable rate at an equal band
    /// split, i.e. nearer UEs participate more often.
    Distance,
}

/// Population block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub size: usize,
    pub transmit_power_w: f64,
    pub distance_m: Spread,
    pub cycles_per_sample: f64,
    pub cpu_hz: Spread,
    pub sample_count: u64,
    pub eta_mode: EtaMode,
}

/// Task selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Quadratic {
        dim: usize,
        eig_range: [f64; 2],
        center_spread: f64,
        #[serde(default)]
        grad_noise_sd: f64,
        #[serde(default)]
        hessian_noise_sd: f64,
        #[serde(default)]
        shared_curvature: bool,
    },
    Classification {
        classes: usize,
        features: usize,
        labels_per_ue: usize,
        train_size_range: [usize; 2],
        heldout_per_ue: usize,
        feature_sd: f64,
        class_mean_scale: f64,
    },
}

/// Batch sizes, either "full" or explicit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, rename_all = "snake_case")]
pub enum BatchConfig {
    Named(String),
    Sampled { inner: usize, outer: usize, hessian: usize },
}

/// Learning block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    pub task: TaskConfig,
    pub local_lr: f64,
    pub global_lr: f64,
    pub batch: BatchConfig,
    pub payload_units: f64,
}

/// Round horizon: an explicit count or "auto" sizing from the bound
/// calculus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoundsConfig {
    Auto(String),
    Fixed(usize),
}

/// Bandwidth allocation rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, rename_all = "snake_case")]
pub enum PolicyConfig {
    Named(String),
    Interpolated { interpolated: f64 },
}

/// Protocol block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub modes: Vec<String>,
    pub objective: String,
    pub participants: usize,
    pub staleness_bound: usize,
    pub rounds: RoundsConfig,
    pub epsilon: f64,
    pub bandwidth_policy: PolicyConfig,
    #[serde(default = "default_true")]
    pub redistribute_stale: bool,
    #[serde(default = "default_true")]
    pub abandon_on_redistribute: bool,
}

fn default_true() -> bool {
    true
}

/// Optional convergence-constant block for the `bound` command and
/// "auto" sizing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub grad_lipschitz: f64,
    pub grad_bound: f64,
    pub hessian_lipschitz: f64,
    pub grad_noise_sd: f64,
    pub hessian_noise_sd: f64,
    pub grad_diversity: f64,
    pub hessian_diversity: f64,
    pub initial_gap: f64,
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub channel: ChannelConfig,
    pub population: PopulationConfig,
    pub learning: LearningConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
}

/// Loads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let raw = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ExperimentConfig = serde_json::from_str(&raw)?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Semantic validation beyond the JSON schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let semantic = |msg: String| Err(ConfigError::Semantic(msg));
        if self.population.size == 0 {
            return semantic("population.size must be positive".into());
        }
        if self.protocol.modes.is_empty() {
            return semantic("protocol.modes must name at least one mode".into());
        }
        for mode in &self.protocol.modes {
            parse_mode(mode).map_err(ConfigError::Semantic)?;
        }
        parse_objective(&self.protocol.objective).map_err(ConfigError::Semantic)?;
        self.bandwidth_policy().map_err(ConfigError::Semantic)?;
        self.batch_spec().map_err(ConfigError::Semantic)?;
        if self.protocol.participants == 0 || self.protocol.participants > self.population.size {
            return semantic(format!(
                "protocol.participants must lie in 1..={}",
                self.population.size
            ));
        }
        if !(self.protocol.epsilon > 0.0) {
            return semantic("protocol.epsilon must be positive".into());
        }
        if matches!(self.protocol.rounds, RoundsConfig::Auto(ref s) if s != "auto") {
            return semantic("protocol.rounds must be a count or \"auto\"".into());
        }
        if matches!(self.protocol.rounds, RoundsConfig::Auto(_)) && self.analysis.is_none() {
            return semantic("protocol.rounds = \"auto\" requires the analysis block".into());
        }
        // Constructor-level checks (positivity etc.) run here so bad
        // configs fail before any run starts.
        self.channel_params()?;
        self.build_profiles()?;
        Ok(())
    }

    /// Channel parameters in SI units.
    pub fn channel_params(&self) -> Result<ChannelParams, ConfigError> {
        Ok(ChannelParams::from_dbm(
            self.channel.total_bandwidth_hz,
            self.channel.path_loss_exp,
            self.channel.noise_psd_dbm_per_hz,
            self.channel.rayleigh_scale,
        )?)
    }

    /// Builds the UE population with its participation frequencies.
    pub fn build_profiles(&self) -> Result<Vec<UEProfile>, ConfigError> {
        let n = self.population.size;
        let channel = self.channel_params()?;
        let mut bare: Vec<UEProfile> = Vec::with_capacity(n);
        for i in 0..n {
            bare.push(UEProfile::new(
                i,
                self.population.transmit_power_w,
                self.population.distance_m.value(i, n, self.seed, 1),
                self.population.cycles_per_sample,
                self.population.cpu_hz.value(i, n, self.seed, 2),
                self.population.sample_count,
                1.0 / n as f64,
            )?);
        }
        match self.population.eta_mode {
            EtaMode::Equal => {}
            EtaMode::Distance => {
                // eta proportional to the expected achievable rate at
                // an equal band split (Monte-Carlo over the fading
                // distribution with a dedicated stream).
                let share = channel.total_bandwidth_hz / n as f64;
                let draws = 4096;
                let mut weights = Vec::with_capacity(n);
                for (i, profile) in bare.iter().enumerate() {
                    let mut rng = stream_rng(self.seed, Domain::EtaGen, 0, i as u64);
                    let mut acc = 0.0;
                    for _ in 0..draws {
                        let h = rayleigh_draw(channel.rayleigh_scale, &mut rng);
                        acc += rate_from_snr(share, snr_hz(profile, h, &channel));
                    }
                    weights.push(acc / draws as f64);
                }
                let total: f64 = weights.iter().sum();
                for (profile, weight) in bare.iter_mut().zip(&weights) {
                    profile.eta = weight / total;
                }
            }
        }
        validate_population(&bare)?;
        Ok(bare)
    }

    /// Instantiates the task.
    pub fn build_task(&self) -> Result<Task, ConfigError> {
        let n = self.population.size;
        match &self.learning.task {
            TaskConfig::Quadratic {
                dim,
                eig_range,
                center_spread,
                grad_noise_sd,
                hessian_noise_sd,
                shared_curvature,
            } => {
                let spec = QuadraticSpec {
                    dim: *dim,
                    eig_range: (eig_range[0], eig_range[1]),
                    center_spread: *center_spread,
                    grad_noise_sd: *grad_noise_sd,
                    hessian_noise_sd: *hessian_noise_sd,
                    shared_curvature: *shared_curvature,
                };
                Ok(Task::Quadratic(QuadraticTask::generate(n, &spec, self.seed)?))
            }
            TaskConfig::Classification {
                classes,
                features,
                labels_per_ue,
                train_size_range,
                heldout_per_ue,
                feature_sd,
                class_mean_scale,
            } => {
                let spec = ClassificationSpec {
                    classes: *classes,
                    features: *features,
                    labels_per_ue: *labels_per_ue,
                    train_size_range: (train_size_range[0], train_size_range[1]),
                    heldout_per_ue: *heldout_per_ue,
                    feature_sd: *feature_sd,
                    class_mean_scale: *class_mean_scale,
                };
                Ok(Task::Classification(ClassificationTask::generate(
                    n, &spec, self.seed,
                )?))
            }
        }
    }

    /// Batch sizes for the stochastic gradients.
    pub fn batch_spec(&self) -> Result<semifed_core::learning::BatchSpec, String> {
        match &self.learning.batch {
            BatchConfig::Named(name) if name == "full" => {
                Ok(semifed_core::learning::BatchSpec::Full)
            }
            BatchConfig::Named(other) => {
                Err(format!("learning.batch must be \"full\" or sizes, got {other:?}"))
            }
            BatchConfig::Sampled { inner, outer, hessian } => {
                Ok(semifed_core::learning::BatchSpec::Sampled {
                    inner: *inner,
                    outer: *outer,
                    hessian: *hessian,
                })
            }
        }
    }

    /// Allocation rule requested by the config.
    pub fn bandwidth_policy(&self) -> Result<BandwidthPolicy, String> {
        match &self.protocol.bandwidth_policy {
            PolicyConfig::Named(name) => match name.as_str() {
                "active" => Ok(BandwidthPolicy::ActiveExtreme),
                "all" => Ok(BandwidthPolicy::AllShareExtreme),
                other => Err(format!(
                    "protocol.bandwidth_policy must be \"active\", \"all\" or {{\"interpolated\": theta}}, got {other:?}"
                )),
            },
            PolicyConfig::Interpolated { interpolated } => {
                Ok(BandwidthPolicy::Interpolated(*interpolated))
            }
        }
    }

    /// Convergence constants from the analysis block together with the
    /// protocol/learning parameters.
    pub fn convergence_constants(
        &self,
        rounds: usize,
    ) -> Result<ConvergenceConstants, ConfigError> {
        let block = self.analysis.as_ref().ok_or_else(|| {
            ConfigError::Semantic("this command needs the analysis block".into())
        })?;
        let (batch_inner, batch_outer, batch_hessian) =
            match self.batch_spec().map_err(ConfigError::Semantic)? {
                semifed_core::learning::BatchSpec::Full => (usize::MAX / 2, usize::MAX / 2, usize::MAX / 2),
                semifed_core::learning::BatchSpec::Sampled { inner, outer, hessian } => {
                    (inner, outer, hessian)
                }
            };
        Ok(ConvergenceConstants {
            grad_lipschitz: block.grad_lipschitz,
            grad_bound: block.grad_bound,
            hessian_lipschitz: block.hessian_lipschitz,
            grad_noise_sd: block.grad_noise_sd,
            hessian_noise_sd: block.hessian_noise_sd,
            grad_diversity: block.grad_diversity,
            hessian_diversity: block.hessian_diversity,
            local_lr: self.learning.local_lr,
            global_lr: self.learning.global_lr,
            staleness_bound: self.protocol.staleness_bound,
            participants: self.protocol.participants,
            rounds,
            batch_inner,
            batch_outer,
            batch_hessian,
            initial_gap: block.initial_gap,
        })
    }

    /// Resolves the round horizon, sizing it from the bound calculus
    /// when set to "auto".
    pub fn resolve_rounds(&self, eta_min: f64) -> Result<(usize, usize), ConfigError> {
        match &self.protocol.rounds {
            RoundsConfig::Fixed(k) => Ok((*k, self.protocol.participants)),
            RoundsConfig::Auto(_) => {
                let constants = self.convergence_constants(1)?;
                let size = semifed_core::analysis::estimate_run_size(
                    &constants,
                    self.protocol.epsilon,
                    eta_min,
                )?;
                Ok((
                    size.rounds,
                    size.participants.min(self.population.size).max(1),
                ))
            }
        }
    }
}

/// Parses a mode name from config or CLI.
pub fn parse_mode(name: &str) -> Result<Mode, String> {
    match name {
        "semi" => Ok(Mode::SemiSync),
        "sync" => Ok(Mode::Sync),
        "async" => Ok(Mode::Async),
        other => Err(format!("mode must be semi|sync|async, got {other:?}")),
    }
}

/// Parses an objective name from config or CLI.
pub fn parse_objective(name: &str) -> Result<Objective, String> {
    match name {
        "pfl" => Ok(Objective::Personalized),
        "fl" => Ok(Objective::Plain),
        other => Err(format!("objective must be pfl|fl, got {other:?}")),
    }
}

/// Short mode tag used in file names.
pub fn mode_tag(mode: Mode) -> &'static str {
    match mode {
        Mode::SemiSync => "semi",
        Mode::Sync => "sync",
        Mode::Async => "async",
    }
}
