//! Declarative dataset generation settings (TOML).

use std::path::Path;

use aoa_core::array::{ArrayConfig, DEFAULT_CARRIER_HZ};
use aoa_core::augment::{FOV_DEG, PHASE_SHIFTS_DEG};
use aoa_core::covariance::{DEFAULT_WINDOWS, DEFAULT_WINDOW_LEN};
use aoa_core::signal::{Baseband, DEFAULT_FRAME_LEN, DEFAULT_SAMPLE_RATE};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySettings {
    pub num_elements: usize,
    pub spacing_factor: f64,
    pub carrier_hz: f64,
}

impl Default for ArraySettings {
    fn default() -> Self {
        Self {
            num_elements: 4,
            spacing_factor: 0.2,
            carrier_hz: DEFAULT_CARRIER_HZ,
        }
    }
}

impl ArraySettings {
    pub fn build(&self) -> Result<ArrayConfig> {
        Ok(ArrayConfig::with_carrier(self.num_elements, self.spacing_factor, self.carrier_hz)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSettings {
    pub length: usize,
    pub sample_rate: f64,
    pub window_length: usize,
    pub windows: usize,
}

impl Default for FrameSettings {
    fn default() -> Self {
        Self {
            length: DEFAULT_FRAME_LEN,
            sample_rate: DEFAULT_SAMPLE_RATE,
            window_length: DEFAULT_WINDOW_LEN,
            windows: DEFAULT_WINDOWS,
        }
    }
}

/// Inclusive angle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleGrid {
    pub start_deg: f64,
    pub end_deg: f64,
    pub step_deg: f64,
}

impl AngleGrid {
    pub fn values(&self) -> Vec<f64> {
        aoa_core::array::angle_grid(self.start_deg, self.end_deg, self.step_deg)
    }
}

/// One recording condition: a transmitter waveform and a power range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// `kind[:param]`, e.g. `chirp:20000`, `qpsk:125000`, `tone:1000`.
    pub baseband: String,
    #[serde(default = "default_power_range")]
    pub power_range: [f64; 2],
}

fn default_power_range() -> [f64; 2] {
    [0.5, 1.0]
}

impl Scenario {
    pub fn baseband(&self) -> Result<Baseband> {
        Ok(self.baseband.parse::<Baseband>()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSettings {
    /// Two-source records per single-source record.
    pub ratio: f64,
    pub min_separation_deg: f64,
}

impl Default for PairSettings {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            min_separation_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub array: ArraySettings,
    pub frame: FrameSettings,
    pub base_angles: AngleGrid,
    pub scenarios: Vec<Scenario>,
    /// Raw single-source frames per (scenario, base angle).
    pub frames_per_angle: usize,
    pub phase_shifts_deg: Vec<f64>,
    pub snr_levels_db: Vec<f64>,
    pub pairs: PairSettings,
    /// Train / validation / test fractions of the raw frames.
    pub splits: [f64; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let scenarios = (0..5)
            .map(|i| Scenario {
                name: format!("site{i}"),
                baseband: "chirp:20000".into(),
                power_range: default_power_range(),
            })
            .collect();
        Self {
            seed: 1,
            array: ArraySettings::default(),
            frame: FrameSettings::default(),
            base_angles: AngleGrid {
                start_deg: -70.0,
                end_deg: 70.0,
                step_deg: 10.0,
            },
            scenarios,
            frames_per_angle: 22,
            phase_shifts_deg: PHASE_SHIFTS_DEG.to_vec(),
            snr_levels_db: vec![0.0, 5.0, 10.0],
            pairs: PairSettings::default(),
            splits: [0.6, 0.3, 0.1],
        }
    }
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PipelineError::Config(msg.into()))
}

impl DatasetConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Data(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.array.build()?;
        let f = &self.frame;
        if f.window_length == 0 || f.windows == 0 || f.window_length * f.windows > f.length {
            return cfg_err(format!(
                "{} windows of {} samples do not fit a {}-sample frame",
                f.windows, f.window_length, f.length
            ));
        }
        if self.array.num_elements != 4 {
            return cfg_err("features are defined for a 4-element array");
        }
        let g = &self.base_angles;
        if !(g.step_deg > 0.0) || g.start_deg > g.end_deg {
            return cfg_err("base angle grid must have a positive step and start ≤ end");
        }
        let max_shift = self.phase_shifts_deg.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if g.start_deg - max_shift < -FOV_DEG || g.end_deg + max_shift > FOV_DEG {
            return cfg_err(format!("shifted base angles leave the ±{FOV_DEG}° field of view"));
        }
        if self.scenarios.is_empty() {
            return cfg_err("at least one scenario is required");
        }
        for s in &self.scenarios {
            s.baseband()?;
            let [lo, hi] = s.power_range;
            if !(lo > 0.0 && lo <= hi) {
                return cfg_err(format!("scenario {}: bad power range {:?}", s.name, s.power_range));
            }
        }
        let mut names: Vec<_> = self.scenarios.iter().map(|s| &s.name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.scenarios.len() {
            return cfg_err("scenario names must be unique");
        }
        if self.frames_per_angle == 0 {
            return cfg_err("frames_per_angle must be positive");
        }
        if self.phase_shifts_deg.contains(&0.0) {
            return cfg_err("the unshifted frame is always kept; drop 0 from phase_shifts_deg");
        }
        if self.snr_levels_db.is_empty() || self.snr_levels_db.iter().any(|s| s.is_nan()) {
            return cfg_err("at least one SNR level is required");
        }
        if self.splits.iter().any(|s| !(*s >= 0.0)) || (self.splits.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return cfg_err(format!("split fractions {:?} must be non-negative and sum to 1", self.splits));
        }
        let p = &self.pairs;
        if !(p.ratio >= 0.0) || !(p.min_separation_deg >= 0.0) {
            return cfg_err("pair ratio and separation must be non-negative");
        }
        if p.ratio > 0.0 && self.scenarios.len() < 2 {
            return cfg_err("two-source records need at least two scenarios");
        }
        Ok(())
    }

    /// Multiplies the raw frame count, e.g. to scale towards a larger set.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return cfg_err("scale factor must be positive");
        }
        self.frames_per_angle = ((self.frames_per_angle as f64 * factor).round() as usize).max(1);
        Ok(self)
    }

    pub fn raw_frame_count(&self) -> usize {
        self.scenarios.len() * self.base_angles.values().len() * self.frames_per_angle
    }

    pub fn single_record_count(&self) -> usize {
        self.raw_frame_count() * (1 + self.phase_shifts_deg.len()) * self.snr_levels_db.len()
    }
}
