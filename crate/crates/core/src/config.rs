//! Scenario files: one TOML document holding every physics, drive, lock-in
//! and signal parameter of a run, validated before anything is simulated.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::{Fig3Params, Fig4Params, HarmonicsParams, Setup};
use crate::signal::{DemodConfig, DriveConfig, ScenarioSignal};
use crate::spectral::WelchConfig;
use crate::spin::{NvSystem, PhysicalConstants};
use crate::trace::Unit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// Photodetector simulation rate, Hz.
    pub raw_rate: f64,
    pub system: NvSystem,
    pub constants: PhysicalConstants,
    pub drive: DriveConfig,
    pub demod: DemodConfig,
    pub signal: ScenarioSignal,
    #[serde(default)]
    pub output: OutputSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Also write the photodetector trace.
    #[serde(default)]
    pub write_raw: bool,
    /// Balancing angle used to form S_T and S_B, degrees.
    #[serde(default)]
    pub epsilon_deg: f64,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            write_raw: false,
            epsilon_deg: 0.0,
        }
    }
}

/// Packaged end-to-end experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Fig3(Fig3Params),
    Fig4(Fig4Params),
    HarmonicsStudy(HarmonicsParams),
}

/// Analyses run on a directory of traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Unit every input trace must carry.
    pub unit: Unit,
    /// Trace names to load; S_T and S_B are formed when both s1 and s2 are
    /// present.
    #[serde(default = "default_traces")]
    pub traces: Vec<String>,
    /// Frequencies fitted in every trace, Hz.
    #[serde(default)]
    pub tones: Vec<f64>,
    /// Test tone for isolation, harmonics, balancing and field calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tone_frequency: Option<f64>,
    #[serde(default = "default_harmonics")]
    pub n_harmonics: u32,
    /// Applied on-axis test field, T RMS; enables field calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied_field_rms: Option<f64>,
    /// Temperature reference trace (kelvin); enables temperature calibration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Search ε instead of using `epsilon_deg`.
    #[serde(default)]
    pub balance: bool,
    #[serde(default)]
    pub epsilon_deg: f64,
    #[serde(default = "default_band")]
    pub band: [f64; 2],
    #[serde(default)]
    pub welch: WelchConfig,
}

fn default_traces() -> Vec<String> {
    vec!["s1".into(), "s2".into()]
}

fn default_harmonics() -> u32 {
    6
}

fn default_band() -> [f64; 2] {
    [2.0, 40.0]
}

impl AnalysisSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| prefix(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.traces.is_empty() {
            return Err(Error::Config("analysis.traces is empty".into()));
        }
        let bad_freq = |f: f64| !(f.is_finite() && f > 0.0);
        if self.tones.iter().any(|&f| bad_freq(f)) || self.tone_frequency.is_some_and(bad_freq) {
            return Err(Error::Config("analysis tone frequencies must be finite and > 0".into()));
        }
        if self.applied_field_rms.is_some_and(|a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::Config("analysis.applied_field_rms must be finite and > 0".into()));
        }
        let [lo, hi] = self.band;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::Config(format!("analysis.band [{lo}, {hi}] is not an interval")));
        }
        if !self.epsilon_deg.is_finite() {
            return Err(Error::Config("analysis.epsilon_deg must be finite".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        hash_json(self)
    }
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// sha256 of the compact JSON serialization.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration types serialize to JSON");
    hex::encode(Sha256::digest(bytes))
}

impl ScenarioFile {
    /// Parses and validates. Parse errors carry TOML line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| prefix(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.setup().validate()?;
        self.signal.validate(self.raw_rate)?;
        if !self.output.epsilon_deg.is_finite() {
            return Err(Error::Config("output.epsilon_deg must be finite".into()));
        }
        if let Some(a) = &self.analysis {
            a.validate()?;
        }
        Ok(())
    }

    pub fn setup(&self) -> Setup {
        Setup {
            sys: self.system.clone(),
            consts: self.constants,
            drive: self.drive.clone(),
            demod: self.demod,
            raw_rate: self.raw_rate,
        }
    }

    /// Replaces the seed and revalidates.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.signal.seed = seed;
        match &mut self.experiment {
            Some(Experiment::Fig3(p)) => p.seed = seed,
            Some(Experiment::Fig4(p)) => p.seed = seed,
            _ => {}
        }
        self
    }

    pub fn with_raw_rate(mut self, raw_rate: f64) -> Result<Self> {
        self.raw_rate = raw_rate;
        self.validate()?;
        Ok(self)
    }

    pub fn config_hash(&self) -> String {
        hash_json(self)
    }

    /// Every parameter, defaults included, as TOML.
    pub fn effective_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::REFERENCE_MOD_DEPTH;

    fn sample() -> ScenarioFile {
        let s = Setup::reference(REFERENCE_MOD_DEPTH).unwrap();
        ScenarioFile {
            name: "t".into(),
            raw_rate: s.raw_rate,
            system: s.sys,
            constants: s.consts,
            drive: s.drive,
            demod: s.demod,
            signal: ScenarioSignal::quiet(1.0),
            output: OutputSettings::default(),
            analysis: None,
            experiment: Some(Experiment::Fig3(Fig3Params::default())),
        }
    }

    #[test]
    fn effective_toml_round_trips() {
        let f = sample();
        let text = f.effective_toml().unwrap();
        let back = ScenarioFile::from_toml_str(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.config_hash(), f.config_hash());
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let text = sample().effective_toml().unwrap().replacen("raw_rate", "raw_rte", 1);
        let e = ScenarioFile::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("raw_rte") || e.contains("unknown"), "{e}");
        assert!(e.contains("line"), "{e}");
        let nested = sample()
            .effective_toml()
            .unwrap()
            .replacen("time_constant", "time_constant = 1e-3\ntau", 1);
        assert!(ScenarioFile::from_toml_str(&nested).is_err());
    }

    #[test]
    fn edits_change_hash() {
        let a = sample();
        let b = a.clone().with_seed(99);
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn invalid_physics_rejected() {
        let mut f = sample();
        f.drive.channels[1].reference_frequency = f.drive.channels[0].reference_frequency;
        let text = f.effective_toml().unwrap();
        assert!(matches!(
            ScenarioFile::from_toml_str(&text),
            Err(Error::ChannelsNotSeparated { .. })
        ));
    }
}
