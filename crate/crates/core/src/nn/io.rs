use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelArch, ModelParams, TrainingSummary, Vocabulary};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "nlufb-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Array {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    arch: ModelArch,
    vocab: BTreeMap<String, Vocabulary>,
    params: Vec<Array>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingSummary>,
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            arch: p.arch().clone(),
            vocab: self.vocab.clone(),
            params: p
                .names()
                .map(|(name, shape)| Array { name: name.into(), shape: shape.to_vec(), data: p.get(name).unwrap().to_vec() })
                .collect(),
            training: self.training.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
        }
        let arch = ModelArch::new(file.arch.features, file.arch.highway_layers)?;
        for f in &arch.features {
            let size = match f.kind {
                super::FeatureKind::Sequential { vocab, .. } | super::FeatureKind::Categorical { vocab, .. } => vocab,
                super::FeatureKind::Numerical { .. } => continue,
            };
            match file.vocab.get(&f.name) {
                Some(v) if v.len() == size => {}
                _ => return Err(Error::ModelFormat(format!("vocabulary for `{}` missing or of wrong size", f.name))),
            }
        }
        let params = ModelParams::from_parts(arch, file.params.into_iter().map(|a| (a.name, a.shape, a.data)).collect())?;
        Ok(Model { vocab: file.vocab, params, training: file.training })
    }
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Model::from_json(&text)
}
