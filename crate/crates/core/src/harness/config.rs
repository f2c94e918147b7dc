use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agents::{BackendKind, MockScales, MAX_TEMPERATURE};
use crate::catalog::ListTreatment;
use crate::prompting::VotingMethod;

/// Voters per treatment cell.
pub const DEFAULT_AGENTS: usize = 180;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: VotingMethod,
    pub n_agents: usize,
    pub temperature: f64,
    pub persona: bool,
    pub cot: bool,
    pub treatment: ListTreatment,
    pub backend: BackendKind,
    pub seed: u64,
    #[serde(default)]
    pub survey_path: Option<PathBuf>,
    #[serde(default)]
    pub catalog_path: Option<PathBuf>,
    /// Directory with prompt template overrides.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    /// Recorded cache read by the replay backend.
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    pub model: String,
    pub parallelism: usize,
    /// How survey answers shape mock voters.
    #[serde(default)]
    pub mock_scales: MockScales,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: VotingMethod::K_APPROVAL,
            n_agents: DEFAULT_AGENTS,
            temperature: 1.0,
            persona: false,
            cot: false,
            treatment: ListTreatment::Original,
            backend: BackendKind::Mock,
            seed: 0,
            survey_path: None,
            catalog_path: None,
            templates_dir: None,
            cache_path: None,
            model: "mock".into(),
            parallelism: 8,
            mock_scales: MockScales::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_agents == 0 {
            return Err(HarnessError::InvalidConfig("n_agents must be at least 1".into()));
        }
        if !(0.0..=MAX_TEMPERATURE).contains(&self.temperature) {
            return Err(HarnessError::InvalidConfig(format!(
                "temperature {} outside [0, {MAX_TEMPERATURE}]",
                self.temperature
            )));
        }
        if self.persona && self.survey_path.is_none() {
            return Err(HarnessError::SurveyRequired);
        }
        if self.backend == BackendKind::Replay && self.cache_path.is_none() {
            return Err(HarnessError::InvalidConfig("replay needs a cache path".into()));
        }
        if let VotingMethod::KApproval { k: 0 }
        | VotingMethod::Ranked { top: 0 }
        | VotingMethod::Cumulative { points: 0 } = self.method
        {
            return Err(HarnessError::InvalidConfig(format!(
                "degenerate method {}",
                self.method
            )));
        }
        Ok(())
    }

    /// SHA-256 of the JSON form; stable across runs and round-trips.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Treatment-cell label, e.g. `kapp_t1_p0_c0_orig`. Backend and seed are
    /// left out so a replay labels like its recording.
    pub fn label(&self) -> String {
        format!(
            "{}_t{}_p{}_c{}_{}",
            self.method.code(),
            self.temperature,
            u8::from(self.persona),
            u8::from(self.cot),
            self.treatment.code()
        )
    }
}
