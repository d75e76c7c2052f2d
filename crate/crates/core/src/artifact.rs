//! Versioned JSON model artifacts.
//!
//! An artifact carries everything needed to score raw records: the class
//! names in index order, the categorical codebooks and scaler fitted at
//! preparation time, the trained model, and a fingerprint of the preparation
//! state so that evaluation refuses to mix models and datasets prepared
//! differently.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Codebooks, ConnectionRecord};
use crate::openset::{Family, OpenSetClassifier, PlattModel, WsvmModel};
use crate::preprocess::{ScalingMode, ScalingParams};
use crate::svm::{GridSearchResult, KernelParams};

pub const ARTIFACT_VERSION: u32 = 1;

/// Encoding and scaling state fitted during preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub codebooks: Codebooks,
    pub scaling: ScalingParams,
    pub scaling_mode: ScalingMode,
}

impl PreprocessState {
    pub fn transform(&self, record: &ConnectionRecord) -> Result<Vec<f64>> {
        Ok(self.scaling.apply(&self.codebooks.encode(record))?.0)
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable value");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TrainedModel {
    Platt(PlattModel),
    Wsvm(WsvmModel),
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        match self {
            TrainedModel::Platt(_) => Family::Platt,
            TrainedModel::Wsvm(_) => Family::Wsvm,
        }
    }

    pub fn classifier(&self) -> &dyn OpenSetClassifier {
        match self {
            TrainedModel::Platt(m) => m,
            TrainedModel::Wsvm(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub class_names: Vec<String>,
    pub kernel: KernelParams,
    pub preprocess: PreprocessState,
    pub preprocess_fingerprint: String,
    /// Fingerprint of the training configuration that produced the model.
    pub config_fingerprint: String,
    pub grid_search: Option<GridSearchResult>,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn family(&self) -> Family {
        self.model.family()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| Error::Artifact(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let probe: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let version = probe.get("version").and_then(serde_json::Value::as_u64);
        if version != Some(u64::from(ARTIFACT_VERSION)) {
            return Err(Error::Artifact(format!(
                "{}: artifact version {version:?}, expected {ARTIFACT_VERSION}",
                path.display()
            )));
        }
        let artifact: Self = serde_json::from_value(probe).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if artifact.preprocess.fingerprint() != artifact.preprocess_fingerprint {
            return Err(Error::Artifact(format!(
                "{}: preprocessing state does not match its fingerprint",
                path.display()
            )));
        }
        Ok(artifact)
    }

    /// Fails unless the artifact was trained on data prepared with
    /// `preprocess` and `class_names`.
    pub fn check_compatible(&self, preprocess: &PreprocessState, class_names: &[String]) -> Result<()> {
        if self.preprocess_fingerprint != preprocess.fingerprint() {
            return Err(Error::Artifact(format!(
                "{} model was trained on differently prepared data",
                self.family()
            )));
        }
        if self.class_names != class_names {
            return Err(Error::Artifact(format!(
                "{} model classes {:?} differ from the evaluation classes {:?}",
                self.family(),
                self.class_names,
                class_names
            )));
        }
        Ok(())
    }
}
