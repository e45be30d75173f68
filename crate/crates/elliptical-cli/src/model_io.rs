//! Model files: the fitted core model plus the standardization that maps
//! raw data into it, serialized as JSON with full f64 fidelity.

use elliptical::train::EPModel;
use serde::{Deserialize, Serialize};

use crate::data::Standardization;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub mode: String,
    pub dataset: String,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: EPModel,
    pub standardization: Standardization,
    pub meta: ModelMeta,
}

impl ModelFile {
    pub fn save(&self, path: &str) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(format!("serializing model: {e}")))?;
        std::fs::write(path, json)
            .map_err(|e| CliError::Internal(format!("writing {path}: {e}")))?;
        Ok(())
    }

    pub fn load(path: &str) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read model file {path}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("model file {path} is not valid: {e}")))
    }
}
