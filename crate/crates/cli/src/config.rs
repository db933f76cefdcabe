//! Run configuration: a strict TOML schema validated before any
//! computation. Unknown keys are rejected everywhere.

use powcoord::model::{
    smallcell_gain_means, symmetric_gain_means, uniform_power_grid, NetRate, Scenario,
    ScenarioConfig, SmallCellLayout, Topology, UtilityKind, UtilitySpec,
};
use powcoord::observe::{
    build_noisy_individual, build_observation, ChannelModel, CsiStructure,
};
use powcoord::problem::TeamProblem;
use powcoord::synth::SynthOptions;
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub channel: ChannelSection,
    pub observation: ObservationSection,
    pub utility: UtilitySection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub region: RegionSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub topology: String,
    pub k: usize,
    #[serde(default = "one")]
    pub bands: usize,
    pub p_max_w: f64,
    /// Defaults to `p_max_w`.
    pub p_total_w: Option<f64>,
    pub noise_w: f64,
    #[serde(default)]
    pub p0_w: f64,
    #[serde(default = "one_f64")]
    pub r0_bps: f64,
    pub power_levels: usize,
    pub gains: GainsSection,
}

fn one() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum GainsSection {
    /// Direct links share one mean; cross links sit `cross_ratio_db` below.
    Symmetric {
        direct_mean: f64,
        cross_ratio_db: f64,
    },
    /// Every link has the same mean.
    Uniform { mean: f64 },
    /// Explicit flat matrix: `k*k*bands` (interference, transmitter-major)
    /// or `k*bands` (multiple access).
    Matrix { means: Vec<f64> },
    /// Inverse-square path loss over a small-cell grid (single band).
    Smallcell {
        isd_m: f64,
        #[serde(default = "default_d0")]
        d0_m: f64,
        ms_coords: Vec<[f64; 2]>,
        sbs_coords: Option<Vec<[f64; 2]>>,
    },
}

fn default_d0() -> f64 {
    5.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ChannelSection {
    /// Exponential per-link gains through a maximum-entropy quantizer.
    Quantized { cells: usize },
    /// Identical explicit discrete marginal on every link.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    /// global | direct | local | individual | constant | noisy_individual
    pub structure: String,
    /// Target estimation SNR in dB for `noisy_individual`; "inf" accepted.
    pub esnr_db: Option<toml::Value>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

fn default_mc_samples() -> usize {
    200_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    /// energy_efficiency | shannon_rate
    pub kind: String,
    /// packet_success | outage | shannon
    #[serde(default = "default_psi")]
    pub psi: String,
    pub psi_m: Option<u32>,
    pub psi_c: Option<f64>,
    /// Defaults to uniform weights.
    pub weights: Option<Vec<f64>>,
}

fn default_psi() -> String {
    "shannon".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_iter_max")]
    pub iter_max: usize,
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    pub eps: Option<f64>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            iter_max: default_iter_max(),
            n_starts: default_n_starts(),
            eps: None,
        }
    }
}

fn default_iter_max() -> usize {
    200
}
fn default_n_starts() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    #[serde(default = "default_budget")]
    pub budget: f64,
    /// exhaustive | synthesize | auto
    #[serde(default = "default_mode")]
    pub mode: String,
    pub qos: Option<Vec<f64>>,
    pub qos_lambda: Option<Vec<f64>>,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self {
            lambda_points: default_lambda_points(),
            budget: default_budget(),
            mode: default_mode(),
            qos: None,
            qos_lambda: None,
        }
    }
}

fn default_lambda_points() -> usize {
    101
}
fn default_budget() -> f64 {
    1e6
}
fn default_mode() -> String {
    "auto".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
    /// synthesized | table | goodman | iwfa | bpc_cs | full_power
    #[serde(default = "default_policy")]
    pub policy: String,
    pub table_path: Option<String>,
    #[serde(default = "default_pol_iters")]
    pub goodman_max_iters: usize,
    #[serde(default = "default_pol_iters")]
    pub iwfa_max_rounds: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_blocks: default_blocks(),
            policy: default_policy(),
            table_path: None,
            goodman_max_iters: default_pol_iters(),
            iwfa_max_rounds: default_pol_iters(),
        }
    }
}

fn default_blocks() -> usize {
    100_000
}
fn default_policy() -> String {
    "synthesized".into()
}
fn default_pol_iters() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Only "gain_mean" is defined: every link mean is set to each value.
    pub axis: String,
    pub values: Vec<f64>,
    pub policies: Vec<String>,
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config parse failed: {e}")))
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let s = &self.scenario;
        let topology = match s.topology.as_str() {
            "interference" => Topology::Interference,
            "mac" => Topology::MultipleAccess,
            other => return err(format!("unknown topology '{other}'")),
        };
        if s.power_levels < 1 {
            return err("power_levels must be >= 1");
        }
        let (k, gain_means) = match &s.gains {
            GainsSection::Symmetric {
                direct_mean,
                cross_ratio_db,
            } => {
                if topology != Topology::Interference {
                    return err("symmetric gains need the interference topology");
                }
                let cross = direct_mean * 10f64.powf(-cross_ratio_db / 10.0);
                (s.k, symmetric_gain_means(s.k, s.bands, *direct_mean, cross))
            }
            GainsSection::Uniform { mean } => {
                let n = match topology {
                    Topology::Interference => s.k * s.k * s.bands,
                    Topology::MultipleAccess => s.k * s.bands,
                };
                (s.k, vec![*mean; n])
            }
            GainsSection::Matrix { means } => (s.k, means.clone()),
            GainsSection::Smallcell {
                isd_m,
                d0_m,
                ms_coords,
                sbs_coords,
            } => {
                if topology != Topology::Interference || s.bands != 1 {
                    return err("smallcell gains need interference topology and one band");
                }
                if ms_coords.len() != s.k {
                    return err(format!(
                        "smallcell has {} mobile stations but k = {}",
                        ms_coords.len(),
                        s.k
                    ));
                }
                let layout = SmallCellLayout {
                    isd_m: *isd_m,
                    d0_m: *d0_m,
                    ms_coords: ms_coords.iter().map(|c| (c[0], c[1])).collect(),
                    sbs_coords: sbs_coords
                        .as_ref()
                        .map(|v| v.iter().map(|c| (c[0], c[1])).collect()),
                };
                (
                    s.k,
                    smallcell_gain_means(&layout).map_err(|e| ConfigError(e.to_string()))?,
                )
            }
        };
        Scenario::new(ScenarioConfig {
            topology,
            k,
            bands: s.bands,
            p_max: s.p_max_w,
            p_total: s.p_total_w.unwrap_or(s.p_max_w),
            noise: s.noise_w,
            p0: s.p0_w,
            r0: s.r0_bps,
            gain_means,
            power_levels: uniform_power_grid(s.power_levels, s.p_max_w),
        })
        .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn channel(&self, scenario: &Scenario) -> Result<ChannelModel, ConfigError> {
        match &self.channel {
            ChannelSection::Quantized { cells } => {
                ChannelModel::quantized(scenario, *cells).map_err(|e| ConfigError(e.to_string()))
            }
            ChannelSection::Discrete { values, probs } => {
                ChannelModel::discrete_iid(scenario, values.clone(), probs.clone())
                    .map_err(|e| ConfigError(e.to_string()))
            }
        }
    }

    pub fn esnr_db(&self) -> Result<f64, ConfigError> {
        match &self.observation.esnr_db {
            None => err("noisy_individual requires esnr_db"),
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(toml::Value::String(s)) if s == "inf" => Ok(f64::INFINITY),
            Some(other) => err(format!("esnr_db must be a number or \"inf\", got {other}")),
        }
    }

    pub fn observation(
        &self,
        scenario: &Scenario,
        channel: &ChannelModel,
        seed: u64,
    ) -> Result<powcoord::observe::ObservationModel, ConfigError> {
        let built = match self.observation.structure.as_str() {
            "global" => build_observation(CsiStructure::Global, scenario, channel),
            "direct" => build_observation(CsiStructure::Direct, scenario, channel),
            "local" => build_observation(CsiStructure::Local, scenario, channel),
            "individual" => build_observation(CsiStructure::Individual, scenario, channel),
            "constant" => build_observation(CsiStructure::Constant, scenario, channel),
            "noisy_individual" => build_noisy_individual(
                scenario,
                channel,
                self.esnr_db()?,
                self.observation.mc_samples,
                seed ^ 0x0b5e_a11d,
            ),
            other => return err(format!("unknown observation structure '{other}'")),
        };
        built.map_err(|e| ConfigError(e.to_string()))
    }

    pub fn utility(&self, k: usize) -> Result<UtilitySpec, ConfigError> {
        let kind = match self.utility.kind.as_str() {
            "energy_efficiency" => UtilityKind::EnergyEfficiency,
            "shannon_rate" => UtilityKind::ShannonRate,
            other => return err(format!("unknown utility kind '{other}'")),
        };
        let psi = match self.utility.psi.as_str() {
            "packet_success" => NetRate::PacketSuccess {
                m: self
                    .utility
                    .psi_m
                    .ok_or(ConfigError("packet_success requires psi_m".into()))?,
            },
            "outage" => NetRate::Outage {
                c: self
                    .utility
                    .psi_c
                    .ok_or(ConfigError("outage requires psi_c".into()))?,
            },
            "shannon" => NetRate::Shannon,
            other => return err(format!("unknown psi '{other}'")),
        };
        let weights = match &self.utility.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / k as f64; k],
        };
        UtilitySpec::new(kind, psi, weights).map_err(|e| ConfigError(e.to_string()))
    }

    /// Full problem assembly; the seed feeds only the noisy-observation
    /// table estimation.
    pub fn problem(&self, seed: u64) -> Result<TeamProblem, ConfigError> {
        let scenario = self.scenario()?;
        let channel = self.channel(&scenario)?;
        let observation = self.observation(&scenario, &channel, seed)?;
        let utility = self.utility(scenario.k())?;
        TeamProblem::with_shared_actions(scenario, channel, observation, utility)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn synth_options(&self) -> SynthOptions {
        SynthOptions {
            eps: self.synth.eps,
            iter_max: self.synth.iter_max,
            ..SynthOptions::default()
        }
    }
}
