//! Run configuration: a TOML file with one section per component.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected. Angles are given in degrees and converted on
//! resolution. The fully resolved file is written next to every run's
//! outputs as `config.frozen.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::DdpgConfig;
use crate::orbits::{ConstellationSpec, LayerSpec, DEFAULT_PHASING};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub scenario: ScenarioSection,
    pub constellation: ConstellationSection,
    pub handover: HandoverSection,
    pub channel: ChannelSection,
    pub env: EnvSection,
    pub ddpg: DdpgConfig,
    pub eval: EvalSection,
    pub baseline: BaselineSection,
    pub trace: TraceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub label: String,
    pub output_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, label: "default".into(), output_dir: "runs/default".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    /// Users are dropped uniformly in a disc of this radius.
    pub radius_m: f64,
    pub users: usize,
    pub user_speed_mps: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { center_lat_deg: 54.526, center_lon_deg: -3.3, radius_m: 40e3, users: 2, user_speed_mps: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerSection {
    pub planes: u32,
    pub sats_per_plane: u32,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_offset_deg: f64,
    pub phase_offset_deg: f64,
    pub phasing: u32,
}

impl Default for LayerSection {
    fn default() -> Self {
        Self {
            planes: 1,
            sats_per_plane: 1,
            altitude_km: 550.0,
            inclination_deg: 53.0,
            raan_offset_deg: 0.0,
            phase_offset_deg: 0.0,
            phasing: DEFAULT_PHASING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationSection {
    pub earth_rotation: bool,
    pub layers: Vec<LayerSection>,
}

impl Default for ConstellationSection {
    fn default() -> Self {
        let spec = ConstellationSpec::default();
        Self {
            earth_rotation: spec.earth_rotation,
            layers: spec
                .layers
                .iter()
                .map(|l| LayerSection {
                    planes: l.plane_count,
                    sats_per_plane: l.sats_per_plane,
                    altitude_km: l.altitude / 1e3,
                    inclination_deg: l.inclination.to_degrees(),
                    raan_offset_deg: l.raan_offset.to_degrees(),
                    phase_offset_deg: l.phase_offset.to_degrees(),
                    phasing: l.phasing,
                })
                .collect(),
        }
    }
}

impl ConstellationSection {
    pub fn to_spec(&self) -> ConstellationSpec {
        ConstellationSpec {
            earth_rotation: self.earth_rotation,
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    plane_count: l.planes,
                    sats_per_plane: l.sats_per_plane,
                    altitude: l.altitude_km * 1e3,
                    inclination: l.inclination_deg.to_radians(),
                    raan_offset: l.raan_offset_deg.to_radians(),
                    phase_offset: l.phase_offset_deg.to_radians(),
                    phasing: l.phasing,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandoverSection {
    pub epsilon: f64,
    pub min_elevation_deg: f64,
}

impl Default for HandoverSection {
    fn default() -> Self {
        Self { epsilon: 0.1, min_elevation_deg: 25.0 }
    }
}

/// A named rule or an explicit number of seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Interval {
    Seconds(f64),
    Named(IntervalRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalRule {
    /// Shortest coherence interval of the reference geometry.
    Coherence,
    /// Propagation delay of the serving link at the start time.
    Propagation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub frequency_hz: f64,
    /// Defaults to 2% of the carrier.
    pub bandwidth_hz: Option<f64>,
    pub temperature_k: f64,
    pub m_x: usize,
    pub m_y: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub paths_min: usize,
    pub paths_max: usize,
    pub max_excess_delay_s: f64,
    /// How long random channel parameters stay frozen.
    pub refresh: Interval,
    /// Geometry used for the coherence interval.
    pub coherence_altitude_km: f64,
    pub coherence_elevation_deg: f64,
    pub antenna_gain_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            frequency_hz: 2e9,
            bandwidth_hz: None,
            temperature_k: 280.0,
            m_x: 3,
            m_y: 3,
            kappa_min: 81.0,
            kappa_max: 90.0,
            paths_min: 2,
            paths_max: 7,
            max_excess_delay_s: 1e-6,
            refresh: Interval::Named(IntervalRule::Coherence),
            coherence_altitude_km: 540.0,
            coherence_elevation_deg: 80.0,
            antenna_gain_db: 0.0,
        }
    }
}

impl ChannelSection {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_hz.unwrap_or(0.02 * self.frequency_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    /// Time between pilots.
    pub pilot_interval: Interval,
    /// Overrides the delay derived from the propagation time.
    pub delay_steps: Option<usize>,
    pub eta1: f64,
    pub eta2: f64,
    pub power_w: f64,
    /// Overrides the default free-space-loss based observation scale.
    pub obs_scale: Option<f64>,
    pub start_time_s: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            pilot_interval: Interval::Named(IntervalRule::Propagation),
            delay_steps: None,
            eta1: 4.0,
            eta2: 2.0,
            power_w: 1.0,
            obs_scale: None,
            start_time_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    /// Steps per evaluation episode; defaults to the training episode length.
    pub steps: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { episodes: 5, steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub kinds: Vec<String>,
    pub steps: usize,
    /// Number of seeds swept, starting at the run seed.
    pub seeds: u64,
    /// Worker threads for seed sweeps (results are merged in seed order).
    pub workers: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            kinds: ["zf-perfect", "zf-delayed", "mrt-perfect", "mrt-delayed", "random"].map(String::from).to_vec(),
            steps: 480,
            seeds: 1,
            workers: 4,
        }
    }
}

/// Window of the serving-satellite trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub duration_s: f64,
    pub step_s: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self { duration_s: 360.0, step_s: 0.1 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
