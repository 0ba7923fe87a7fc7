//! Experiment configuration: one JSON document drives every subcommand.

use serde::{Deserialize, Serialize};

use crate::ccr::CcrModel;
use crate::detect::DetectorModel;
use crate::error::{Error, Result};
use crate::phasematch::CrystalSpec;
use crate::source::SourceConfig;

/// Full experiment definition. Unknown keys are rejected on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub crystal: CrystalSpec,
    pub detectors: [DetectorModel; 2],
    pub window_ns: f64,
    pub pump_power_mw: f64,
    pub seed: u64,
    pub phasematch: PhasematchBlock,
    pub powersweep: PowerSweepBlock,
    pub visibility: VisibilityBlock,
    pub misalign: MisalignBlock,
    pub stability: StabilityBlock,
    pub ccr_sweep: CcrSweepBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            crystal: CrystalSpec::default(),
            detectors: [DetectorModel::default(), DetectorModel::default()],
            window_ns: 20.0,
            pump_power_mw: 0.086,
            seed: 1,
            phasematch: PhasematchBlock::default(),
            powersweep: PowerSweepBlock::default(),
            visibility: VisibilityBlock::default(),
            misalign: MisalignBlock::default(),
            stability: StabilityBlock::default(),
            ccr_sweep: CcrSweepBlock::default(),
        }
    }
}

/// Pump-wavelength / crystal-temperature map grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhasematchBlock {
    pub lambda_p_min_nm: f64,
    pub lambda_p_max_nm: f64,
    pub lambda_p_points: usize,
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    pub temp_points: usize,
    pub band_center_nm: f64,
    pub band_width_nm: f64,
}

impl Default for PhasematchBlock {
    fn default() -> Self {
        Self {
            lambda_p_min_nm: 403.0,
            lambda_p_max_nm: 407.0,
            lambda_p_points: 41,
            temp_min_c: 15.0,
            temp_max_c: 40.0,
            temp_points: 26,
            band_center_nm: 780.0,
            band_width_nm: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSweepBlock {
    pub power_min_mw: f64,
    pub power_max_mw: f64,
    pub power_points: usize,
    /// Detected-pair rate per mW at low power.
    pub pairs_per_s_per_mw: f64,
    /// Coherence time for multi-pair accidentals, ns.
    pub multipair_coherence_ns: f64,
    pub duration_s: f64,
}

impl Default for PowerSweepBlock {
    fn default() -> Self {
        Self {
            power_min_mw: 0.02,
            power_max_mw: 0.5,
            power_points: 13,
            pairs_per_s_per_mw: 2.5e6,
            multipair_coherence_ns: 2.0,
            duration_s: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisibilityBlock {
    /// Fixed signal-polarizer angles, one fringe per entry.
    pub theta1_list_deg: Vec<f64>,
    /// Idler-polarizer step over [0, 180), degrees.
    pub theta2_step_deg: f64,
    /// Pairs emitted per fringe point.
    pub pairs_per_point: u64,
}

impl Default for VisibilityBlock {
    fn default() -> Self {
        Self {
            theta1_list_deg: vec![0.0, 90.0, 45.0, 135.0],
            theta2_step_deg: 7.5,
            pairs_per_point: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MisalignBlock {
    pub tip_min_deg: f64,
    pub tip_max_deg: f64,
    pub tip_points: usize,
    pub compensated: bool,
    pub beam_waist_at_coupler_um: f64,
    pub lever_arm_mm: f64,
}

impl Default for MisalignBlock {
    fn default() -> Self {
        Self {
            tip_min_deg: -1.2,
            tip_max_deg: 1.2,
            tip_points: 25,
            compensated: false,
            beam_waist_at_coupler_um: crate::source::DEFAULT_COUPLER_WAIST_UM,
            lever_arm_mm: crate::source::DEFAULT_LEVER_ARM_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityBlock {
    pub duration_s: f64,
    /// Base counting interval, s.
    pub tau_s: f64,
    /// Mean coincidence rate of the simulated monitor, pairs/s.
    pub mean_coincidence_rate: f64,
    /// Singles-to-coincidence ratio of the simulated monitor.
    pub singles_ratio: f64,
    /// Fractional linear drift per hour injected into the rates.
    pub drift_per_hour: f64,
}

impl Default for StabilityBlock {
    fn default() -> Self {
        Self {
            duration_s: 13_000.0,
            tau_s: 0.013,
            mean_coincidence_rate: 215_000.0,
            singles_ratio: 7.0,
            drift_per_hour: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CcrSweepBlock {
    /// Models to sweep; names from the retroreflector catalogue.
    pub models: Vec<String>,
    pub hwp_step_deg: f64,
}

impl Default for CcrSweepBlock {
    fn default() -> Self {
        Self {
            models: CcrModel::NAMES.iter().map(|s| s.to_string()).collect(),
            hwp_step_deg: 2.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config { path: None, msg: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: Some(path.display().to_string()),
            msg: e.to_string(),
        })?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config { msg, .. } => {
                Error::Config { path: Some(path.display().to_string()), msg }
            }
            other => other,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.crystal.validate()?;
        self.detectors[0].validate()?;
        self.detectors[1].validate()?;
        if self.window_ns <= 0.0 {
            return Err(Error::Config {
                path: None,
                msg: format!("window_ns {} must be positive", self.window_ns),
            });
        }
        if self.pump_power_mw <= 0.0 {
            return Err(Error::Config {
                path: None,
                msg: format!("pump_power_mw {} must be positive", self.pump_power_mw),
            });
        }
        let v = &self.visibility;
        if !(0.0 < v.theta2_step_deg && v.theta2_step_deg <= 90.0) {
            return Err(Error::Config {
                path: None,
                msg: format!("visibility.theta2_step_deg {} outside (0, 90]", v.theta2_step_deg),
            });
        }
        let s = &self.stability;
        if s.tau_s <= 0.0 || s.duration_s < 100.0 * s.tau_s {
            return Err(Error::Config {
                path: None,
                msg: "stability.duration_s must cover at least 100 intervals of tau_s".into(),
            });
        }
        let p = &self.powersweep;
        if p.power_min_mw <= 0.0 || p.power_max_mw < p.power_min_mw || p.power_points == 0 {
            return Err(Error::Config {
                path: None,
                msg: "powersweep power grid must be positive and ascending".into(),
            });
        }
        let m = &self.misalign;
        if m.tip_max_deg < m.tip_min_deg || m.tip_points == 0 {
            return Err(Error::Config { path: None, msg: "misalign tip grid is empty".into() });
        }
        let pm = &self.phasematch;
        if pm.lambda_p_points == 0
            || pm.temp_points == 0
            || pm.lambda_p_max_nm < pm.lambda_p_min_nm
            || pm.temp_max_c < pm.temp_min_c
            || pm.band_width_nm <= 0.0
        {
            return Err(Error::Config { path: None, msg: "phasematch grid is invalid".into() });
        }
        for name in &self.ccr_sweep.models {
            if CcrModel::by_name(name).is_none() {
                return Err(Error::Config {
                    path: None,
                    msg: format!(
                        "unknown retroreflector model {name:?}; valid names: {}",
                        CcrModel::NAMES.join(", ")
                    ),
                });
            }
        }
        if self.ccr_sweep.hwp_step_deg <= 0.0 || self.ccr_sweep.hwp_step_deg > 90.0 {
            return Err(Error::Config {
                path: None,
                msg: format!("ccr_sweep.hwp_step_deg {} outside (0, 90]", self.ccr_sweep.hwp_step_deg),
            });
        }
        Ok(())
    }

    /// SHA-256-free stable content hash of the canonical JSON form.
    pub fn content_hash(&self) -> u64 {
        let canonical = serde_json::to_string(self).expect("config serializes");
        fnv1a(canonical.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derives an independent sub-seed for a named random-number consumer.
///
/// The scheme is splitmix64 applied to (seed XOR fnv1a(domain)), so every
/// figure draws from its own stream while staying reproducible from the one
/// configured seed.
pub fn split_seed(seed: u64, domain: &str) -> u64 {
    let mut z = seed ^ fnv1a(domain.as_bytes());
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Linearly spaced grid helper used by the sweep blocks.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![min];
    }
    let step = (max - min) / (points - 1) as f64;
    (0..points).map(|i| min + step * i as f64).collect()
}
