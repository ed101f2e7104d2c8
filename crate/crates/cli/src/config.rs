//! The `--config` file. Every section is optional and every key inside a
//! section overrides one field of the matching defaults.
//!
//! ```toml
//! [synth]            # synthetic corpus generator
//! n_groups = 2000
//! noise_std = 0.5
//!
//! [train]            # scorer training
//! loss = "lipo"      # lipo | bpo | bce
//! lr = 1e-4
//! epochs = 5
//! aux_mse_weight = 0.1
//!
//! [ablate]
//! axis = "list_size" # list_size | fraction
//! values = [1, 2, 3, 4, 5]
//! seeds = [0, 1, 2, 3, 4]
//!
//! [agree]
//! stdev_max = 1.2
//! mad_max = 1.5
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub synth: toml::Table,
    #[serde(default)]
    pub train: toml::Table,
    #[serde(default)]
    pub ablate: AblateSection,
    #[serde(default)]
    pub agree: AgreeSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSection {
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreeSection {
    pub stdev_max: Option<f64>,
    pub mad_max: Option<f64>,
    pub shift: Option<toml::Table>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::data(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::data(format!("config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }
}

/// Replaces fields of `base` with the table's keys. Unknown keys are
/// rejected when `T` denies them.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, table: &toml::Table, section: &str) -> CliResult<T> {
    let mut value = serde_json::to_value(base).map_err(|e| CliError::runtime(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::runtime(format!("[{section}] is not a table")))?;
    for (k, v) in table {
        let v = serde_json::to_value(v).map_err(|e| CliError::data(format!("[{section}] {k}: {e}")))?;
        obj.insert(k.clone(), v);
    }
    serde_json::from_value(value).map_err(|e| CliError::data(format!("config [{section}]: {e}")))
}
