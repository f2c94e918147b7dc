use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::catalog::ListTreatment;
use crate::prompting::VotingMethod;

/// Axes of a treatment grid. The default is the full experiment grid; narrow any
/// axis to select a subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub methods: Vec<VotingMethod>,
    pub personas: Vec<bool>,
    /// Only varied for k-approval; other methods always run without CoT.
    pub cot: Vec<bool>,
    pub temperatures: Vec<f64>,
    pub treatments: Vec<ListTreatment>,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        Self {
            methods: VotingMethod::ALL.to_vec(),
            personas: vec![false, true],
            cot: vec![false, true],
            temperatures: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            treatments: ListTreatment::ALL.to_vec(),
        }
    }
}

impl MatrixSpec {
    /// One config per cell, copying everything else from `base`.
    pub fn expand(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &method in &self.methods {
            let cots: Vec<bool> = if matches!(method, VotingMethod::KApproval { .. }) {
                self.cot.clone()
            } else {
                vec![false]
            };
            for &persona in &self.personas {
                for &cot in &cots {
                    for &temperature in &self.temperatures {
                        for &treatment in &self.treatments {
                            out.push(ExperimentConfig {
                                method,
                                persona,
                                cot,
                                temperature,
                                treatment,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
