//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PreprocessOptions;
use crate::embeddings::hex_string;
use crate::error::{Error, Result};
use crate::net::{Dims, Model, WINDOW};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Identifies the tokenizer version and its options.
pub fn tokenizer_fingerprint(options: &PreprocessOptions) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"whitespace-strip-filter/1");
    hasher.update((options.max_tokens as u64).to_le_bytes());
    hasher.update([options.lowercase as u8]);
    hex_string(&hasher.finalize())
}

/// A trained model together with what is needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: Model,
    pub labels: Vec<String>,
    pub preprocess: PreprocessOptions,
    pub embedding_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    dims: Dims,
    labels: Vec<String>,
    preprocess: PreprocessOptions,
    tokenizer_fingerprint: String,
    embedding_fingerprint: String,
    /// `[filter][embedding row][window offset]`
    conv_weights: Vec<Vec<[f64; WINDOW]>>,
    conv_bias: Vec<f64>,
    /// `[class][filter]`
    fc_weights: Vec<Vec<f64>>,
    fc_bias: Vec<f64>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        let m = &self.model;
        let dims = m.dims();
        if self.labels.len() != dims.classes {
            return Err(Error::InvalidModel(format!("{} labels for {} classes", self.labels.len(), dims.classes)));
        }
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            dims,
            labels: self.labels.clone(),
            preprocess: self.preprocess,
            tokenizer_fingerprint: tokenizer_fingerprint(&self.preprocess),
            embedding_fingerprint: self.embedding_fingerprint.clone(),
            conv_weights: m
                .conv_weights
                .outer_iter()
                .map(|filter| filter.outer_iter().map(|row| [row[0], row[1]]).collect())
                .collect(),
            conv_bias: m.conv_bias.to_vec(),
            fc_weights: m.fc_weights.outer_iter().map(|r| r.to_vec()).collect(),
            fc_bias: m.fc_bias.to_vec(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion { found: probe.version, expected: MODEL_FORMAT_VERSION });
        }
        let file: ModelFile = serde_json::from_str(text)?;
        if file.tokenizer_fingerprint != tokenizer_fingerprint(&file.preprocess) {
            return Err(Error::InvalidModel("tokenizer fingerprint does not match its options".into()));
        }
        let Dims { embedding, filters, classes } = file.dims;
        let bad = |what: &str| Error::InvalidModel(format!("{what} do not match dims"));
        if file.conv_weights.len() != filters || file.conv_weights.iter().any(|f| f.len() != embedding) {
            return Err(bad("conv weights"));
        }
        if file.fc_weights.len() != classes || file.fc_weights.iter().any(|r| r.len() != filters) {
            return Err(bad("fc weights"));
        }
        if file.labels.len() != classes {
            return Err(bad("labels"));
        }
        let conv_weights = Array3::from_shape_fn((filters, embedding, WINDOW), |(f, i, k)| file.conv_weights[f][i][k]);
        let fc_weights = Array2::from_shape_fn((classes, filters), |(c, f)| file.fc_weights[c][f]);
        let model = Model::new(conv_weights, Array1::from(file.conv_bias), fc_weights, Array1::from(file.fc_bias))?;
        Ok(SavedModel {
            model,
            labels: file.labels,
            preprocess: file.preprocess,
            embedding_fingerprint: file.embedding_fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
