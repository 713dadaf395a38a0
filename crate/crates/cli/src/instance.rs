//! Instance files: `{"px": [..], "f": [..], "h": [..]?, "labels": [..]?}`
//! with dense 0-based label ranges. String labels are display-only.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use rho_privacy::scalar::{parse_rational, Rational};
use rho_privacy::{DataModel, Model64};

use crate::emit;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub px: Vec<f64>,
    pub f: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Parsed instance plus its canonical digest.
pub struct LoadedInstance {
    pub file: InstanceFile,
    pub model: Model64,
    pub digest: String,
}

pub fn load_instance(path: &str) -> Result<LoadedInstance, CliError> {
    let raw = if path == "-" {
        use std::io::Read;
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        std::fs::read_to_string(path)?
    };
    let file: InstanceFile = serde_json::from_str(&raw)?;
    if let Some(labels) = &file.labels {
        if labels.len() != file.px.len() {
            return Err(CliError::Validation(format!(
                "labels has {} entries but px has {}",
                labels.len(),
                file.px.len()
            )));
        }
    }
    let model = build_model(&file)?;
    let digest = digest_of(&file)?;
    Ok(LoadedInstance {
        file,
        model,
        digest,
    })
}

fn build_model(file: &InstanceFile) -> Result<Model64, CliError> {
    let model = match &file.h {
        Some(h) => DataModel::from_maps_with_predicate(file.px.clone(), file.f.clone(), h.clone())?,
        None => DataModel::from_maps(file.px.clone(), file.f.clone())?,
    };
    Ok(model)
}

/// SHA-256 of the canonical rendering (sorted keys, 17-digit floats).
pub fn digest_of(file: &InstanceFile) -> Result<String, CliError> {
    let value: Value = serde_json::to_value(file)?;
    let canonical = emit::render(&value);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

/// Exact-rational twin of the instance, reading each probability through its
/// shortest decimal representation (so `0.3` in the file becomes `3/10`).
pub fn exact_model(file: &InstanceFile) -> Result<DataModel<Rational>, CliError> {
    let px = file
        .px
        .iter()
        .map(|&p| {
            parse_rational(&format!("{p}")).ok_or_else(|| {
                CliError::Validation(format!("probability {p} has no decimal representation"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let model = match &file.h {
        Some(h) => DataModel::from_maps_with_predicate(px, file.f.clone(), h.clone())?,
        None => DataModel::from_maps(px, file.f.clone())?,
    };
    Ok(model)
}

/// Exact rational for a level given on the command line, via its shortest
/// decimal form.
pub fn exact_level(rho: f64) -> Option<Rational> {
    parse_rational(&format!("{rho}"))
}
