//! Engine configuration with defaults matching the DSP constants.
//!
//! A config file (TOML or JSON, chosen by extension) may override any subset
//! of fields; unknown keys are rejected so typos fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp_core;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config {path} has unsupported extension (expected .toml or .json)")]
    UnsupportedExtension { path: String },
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// How a source's reverb send interacts with its distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DryWetLaw {
    /// Send level is exactly the plan's reverb_send.
    #[default]
    Independent,
    /// Send level is reverb_send scaled by d/(d+1), so distant sources sound
    /// wetter.
    DistanceWeighted,
}

/// Tunable engine parameters shared by the renderer and analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub head_radius_m: f64,
    pub speed_of_sound_mps: f64,
    pub ild_max_db: f64,
    pub shelf_fc_hz: f64,
    pub shelf_slope: f64,
    pub normalize: bool,
    pub normalize_peak_dbfs: f64,
    pub dry_wet_law: DryWetLaw,
    pub comb_delays_ms: [f64; 4],
    pub allpass_delays_ms: [f64; 2],
    pub allpass_coeff: f64,
    pub analyze_tolerance_deg: f64,
    /// Debug hook: render ITD/ILD sources without the interaural delay so
    /// analysis mismatches can be exercised end to end.
    pub debug_disable_itd_delay: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            head_radius_m: dsp_core::HeadModel::default().head_radius_m,
            speed_of_sound_mps: dsp_core::HeadModel::default().speed_of_sound_mps,
            ild_max_db: dsp_core::DEFAULT_ILD_MAX_DB,
            shelf_fc_hz: dsp_core::DEFAULT_SHELF_FC_HZ,
            shelf_slope: dsp_core::DEFAULT_SHELF_SLOPE,
            normalize: true,
            normalize_peak_dbfs: -1.0,
            dry_wet_law: DryWetLaw::Independent,
            comb_delays_ms: dsp_core::COMB_DELAYS_MS,
            allpass_delays_ms: dsp_core::ALLPASS_DELAYS_MS,
            allpass_coeff: dsp_core::ALLPASS_COEFF,
            analyze_tolerance_deg: 5.0,
            debug_disable_itd_delay: false,
        }
    }
}

impl EngineConfig {
    pub fn head_model(&self) -> dsp_core::HeadModel {
        dsp_core::HeadModel {
            head_radius_m: self.head_radius_m,
            speed_of_sound_mps: self.speed_of_sound_mps,
        }
    }

    /// Loads a config file, TOML or JSON by extension.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let config: Self = match ext.as_deref() {
            Some("toml") => toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            Some("json") => serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            _ => {
                return Err(ConfigError::UnsupportedExtension {
                    path: path.display().to_string(),
                })
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.head_model().is_valid() {
            return Err(ConfigError::Invalid(
                "head_radius_m and speed_of_sound_mps must be positive and finite".into(),
            ));
        }
        if !(self.ild_max_db.is_finite() && self.ild_max_db >= 0.0) {
            return Err(ConfigError::Invalid("ild_max_db must be nonnegative".into()));
        }
        if !(self.shelf_fc_hz.is_finite() && self.shelf_fc_hz > 0.0) {
            return Err(ConfigError::Invalid("shelf_fc_hz must be positive".into()));
        }
        if !(self.shelf_slope.is_finite() && self.shelf_slope > 0.0) {
            return Err(ConfigError::Invalid("shelf_slope must be positive".into()));
        }
        if !(self.normalize_peak_dbfs.is_finite() && self.normalize_peak_dbfs <= 0.0) {
            return Err(ConfigError::Invalid(
                "normalize_peak_dbfs must be zero or negative".into(),
            ));
        }
        if self.comb_delays_ms.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(ConfigError::Invalid(
                "comb_delays_ms must contain positive delays".into(),
            ));
        }
        if self
            .allpass_delays_ms
            .iter()
            .any(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(ConfigError::Invalid(
                "allpass_delays_ms must contain positive delays".into(),
            ));
        }
        if !(self.allpass_coeff.is_finite() && self.allpass_coeff.abs() < 1.0) {
            return Err(ConfigError::Invalid(
                "allpass_coeff must have magnitude below 1".into(),
            ));
        }
        if !(self.analyze_tolerance_deg.is_finite() && self.analyze_tolerance_deg > 0.0) {
            return Err(ConfigError::Invalid(
                "analyze_tolerance_deg must be positive".into(),
            ));
        }
        Ok(())
    }
}
