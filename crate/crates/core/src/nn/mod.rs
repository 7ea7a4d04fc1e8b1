//! A small from-scratch neural kernel: per-feature embeddings, a bidirectional
//! LSTM aggregator for token sequences, two highway layers and a sigmoid
//! output, trained with weighted binary cross-entropy and Adam.
//!
//! Features are concatenated in name order. Sequential features are embedded
//! and summarized by the final forward and backward LSTM states, categorical
//! features by their embedding row, numerical features pass through unchanged.

mod io;
mod kernel;
mod params;
mod train;

#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use params::ModelParams;
pub use train::{
    grad_check, grad_check_with, sample_loss, train, train_from, GradCheckReport, TrainConfig, TrainingSummary, GRAD_CHECK_FLOOR,
};

pub const UNK: &str = "<unk>";

/// Token-id view of one model input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub sequential: BTreeMap<String, Vec<usize>>,
    pub categorical: BTreeMap<String, usize>,
    pub numerical: BTreeMap<String, Vec<f64>>,
}

/// String-level view of one model input, before vocabulary lookup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub sequential: BTreeMap<String, Vec<String>>,
    pub categorical: BTreeMap<String, String>,
    pub numerical: BTreeMap<String, Vec<f64>>,
}

impl RawFeatures {
    /// Merges `other` into `self`; names must not collide.
    pub fn extend(&mut self, other: RawFeatures) {
        self.sequential.extend(other.sequential);
        self.categorical.extend(other.categorical);
        self.numerical.extend(other.numerical);
    }
}

/// Token table for one feature. Id 0 is reserved for unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = tokens.into_iter().filter(|t| *t != UNK).collect();
        let mut all = vec![UNK.to_string()];
        all.extend(set.into_iter().map(str::to_string));
        Self::from_list(all)
    }

    fn from_list(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(serde::de::Error::custom("vocabulary must start with <unk>"));
        }
        Ok(Self::from_list(tokens))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Sequential { vocab: usize, emb_dim: usize, hidden: usize },
    Categorical { vocab: usize, dim: usize },
    Numerical { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    /// Width of this feature's aggregation vector.
    pub fn output_dim(&self) -> usize {
        match self.kind {
            FeatureKind::Sequential { hidden, .. } => 2 * hidden,
            FeatureKind::Categorical { dim, .. } => dim,
            FeatureKind::Numerical { dim } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArch {
    pub features: Vec<FeatureSpec>,
    pub highway_layers: usize,
}

impl ModelArch {
    /// Sorts features by name; names must be unique and dimensions positive.
    pub fn new(mut features: Vec<FeatureSpec>, highway_layers: usize) -> Result<Self> {
        features.sort_by(|a, b| a.name.cmp(&b.name));
        for w in features.windows(2) {
            if w[0].name == w[1].name {
                return Err(Error::Config(format!("duplicate feature `{}`", w[0].name)));
            }
        }
        for f in &features {
            let ok = match f.kind {
                FeatureKind::Sequential { vocab, emb_dim, hidden } => vocab > 0 && emb_dim > 0 && hidden > 0,
                FeatureKind::Categorical { vocab, dim } => vocab > 0 && dim > 0,
                FeatureKind::Numerical { dim } => dim > 0,
            };
            if !ok {
                return Err(Error::Config(format!("feature `{}` has a zero dimension", f.name)));
            }
        }
        if features.is_empty() {
            return Err(Error::Config("model has no features".into()));
        }
        Ok(Self { features, highway_layers })
    }

    pub fn input_dim(&self) -> usize {
        self.features.iter().map(FeatureSpec::output_dim).sum()
    }

    /// Checks that `bundle` carries every feature with in-range ids and
    /// finite values of the right width.
    pub fn validate(&self, bundle: &FeatureBundle) -> Result<()> {
        for f in &self.features {
            let missing = || Error::MissingFeature(f.name.clone());
            let oov = |id: usize, size: usize| Error::OutOfVocabulary { feature: f.name.clone(), id, size };
            match f.kind {
                FeatureKind::Sequential { vocab, .. } => {
                    let ids = bundle.sequential.get(&f.name).ok_or_else(missing)?;
                    if let Some(&id) = ids.iter().find(|&&id| id >= vocab) {
                        return Err(oov(id, vocab));
                    }
                }
                FeatureKind::Categorical { vocab, .. } => {
                    let id = *bundle.categorical.get(&f.name).ok_or_else(missing)?;
                    if id >= vocab {
                        return Err(oov(id, vocab));
                    }
                }
                FeatureKind::Numerical { dim } => {
                    let v = bundle.numerical.get(&f.name).ok_or_else(missing)?;
                    if v.len() != dim {
                        return Err(Error::DimensionMismatch { feature: f.name.clone(), expected: dim, got: v.len() });
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFiniteFeature(f.name.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Embedding and hidden sizes used when building an architecture from a
/// feature profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dims {
    pub seq_emb: usize,
    pub cat_emb: usize,
    pub hidden: usize,
    /// Per-feature overrides of `hidden`.
    pub hidden_overrides: BTreeMap<String, usize>,
    pub highway_layers: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { seq_emb: 16, cat_emb: 8, hidden: 32, hidden_overrides: BTreeMap::new(), highway_layers: 2 }
    }
}

/// A trained or freshly initialised model: architecture, vocabularies and
/// parameters, plus the training record when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vocab: BTreeMap<String, Vocabulary>,
    pub params: ModelParams,
    pub training: Option<TrainingSummary>,
}

impl Model {
    /// Builds vocabularies from `samples` and an architecture from `dims`.
    /// Feature names and numerical widths are taken from the first sample.
    pub fn build_arch(samples: &[RawFeatures], dims: &Dims) -> Result<(ModelArch, BTreeMap<String, Vocabulary>)> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let mut vocab = BTreeMap::new();
        let mut features = Vec::new();
        for name in first.sequential.keys() {
            let v = Vocabulary::from_tokens(
                samples.iter().filter_map(|s| s.sequential.get(name)).flatten().map(String::as_str),
            );
            let hidden = dims.hidden_overrides.get(name).copied().unwrap_or(dims.hidden);
            features.push(FeatureSpec {
                name: name.clone(),
                kind: FeatureKind::Sequential { vocab: v.len(), emb_dim: dims.seq_emb, hidden },
            });
            vocab.insert(name.clone(), v);
        }
        for name in first.categorical.keys() {
            let v = Vocabulary::from_tokens(samples.iter().filter_map(|s| s.categorical.get(name)).map(String::as_str));
            features.push(FeatureSpec { name: name.clone(), kind: FeatureKind::Categorical { vocab: v.len(), dim: dims.cat_emb } });
            vocab.insert(name.clone(), v);
        }
        for (name, v) in &first.numerical {
            features.push(FeatureSpec { name: name.clone(), kind: FeatureKind::Numerical { dim: v.len() } });
        }
        Ok((ModelArch::new(features, dims.highway_layers)?, vocab))
    }

    pub fn arch(&self) -> &ModelArch {
        self.params.arch()
    }

    /// Maps string features to ids; unknown tokens become id 0.
    pub fn encode(&self, raw: &RawFeatures) -> Result<FeatureBundle> {
        let mut b = FeatureBundle::default();
        for f in &self.arch().features {
            let missing = || Error::MissingFeature(f.name.clone());
            match f.kind {
                FeatureKind::Sequential { .. } => {
                    let v = &self.vocab[&f.name];
                    let toks = raw.sequential.get(&f.name).ok_or_else(missing)?;
                    b.sequential.insert(f.name.clone(), toks.iter().map(|t| v.id(t)).collect());
                }
                FeatureKind::Categorical { .. } => {
                    let v = &self.vocab[&f.name];
                    let tok = raw.categorical.get(&f.name).ok_or_else(missing)?;
                    b.categorical.insert(f.name.clone(), v.id(tok));
                }
                FeatureKind::Numerical { .. } => {
                    let x = raw.numerical.get(&f.name).ok_or_else(missing)?;
                    b.numerical.insert(f.name.clone(), x.clone());
                }
            }
        }
        Ok(b)
    }

    pub fn score(&self, raw: &RawFeatures) -> Result<f64> {
        predict(&self.encode(raw)?, &self.params)
    }
}

/// Row-major matrix with `rows` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Per-feature embedding: `m x d` for sequences, `1 x d` for categorical
/// features, the raw vector as `1 x n` for numerical ones.
pub fn embed(bundle: &FeatureBundle, params: &ModelParams) -> Result<BTreeMap<String, Matrix>> {
    params.arch().validate(bundle)?;
    let mut out = BTreeMap::new();
    for (fi, f) in params.arch().features.iter().enumerate() {
        let m = match f.kind {
            FeatureKind::Sequential { emb_dim, .. } => {
                let ids = &bundle.sequential[&f.name];
                let table = params.embedding(fi);
                let mut data = Vec::with_capacity(ids.len() * emb_dim);
                for &id in ids {
                    data.extend_from_slice(&table[id * emb_dim..(id + 1) * emb_dim]);
                }
                Matrix { rows: ids.len(), cols: emb_dim, data }
            }
            FeatureKind::Categorical { dim, .. } => {
                let id = bundle.categorical[&f.name];
                Matrix { rows: 1, cols: dim, data: params.embedding(fi)[id * dim..(id + 1) * dim].to_vec() }
            }
            FeatureKind::Numerical { dim } => Matrix { rows: 1, cols: dim, data: bundle.numerical[&f.name].clone() },
        };
        out.insert(f.name.clone(), m);
    }
    Ok(out)
}

/// Per-feature aggregation vectors. Sequences become `[h_fwd_last, h_bwd_last]`
/// (zeros when empty); categorical and numerical rows pass through.
pub fn aggregate(embeddings: &BTreeMap<String, Matrix>, params: &ModelParams) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for (fi, f) in params.arch().features.iter().enumerate() {
        let m = embeddings.get(&f.name).ok_or_else(|| Error::MissingFeature(f.name.clone()))?;
        let v = match f.kind {
            FeatureKind::Sequential { emb_dim, hidden, .. } => {
                if m.cols != emb_dim && m.rows > 0 {
                    return Err(Error::DimensionMismatch { feature: f.name.clone(), expected: emb_dim, got: m.cols });
                }
                let rows: Vec<&[f64]> = (0..m.rows).map(|r| m.row(r)).collect();
                let mut v = kernel::lstm_final(params, fi, false, &rows, hidden);
                v.extend(kernel::lstm_final(params, fi, true, &rows, hidden));
                v
            }
            _ => {
                if m.rows != 1 || m.cols != f.output_dim() {
                    return Err(Error::DimensionMismatch { feature: f.name.clone(), expected: f.output_dim(), got: m.data.len() });
                }
                m.data.clone()
            }
        };
        out.insert(f.name.clone(), v);
    }
    Ok(out)
}

/// Concatenates aggregations in feature-name order, applies the highway
/// layers and the sigmoid output.
pub fn classify(aggregations: &BTreeMap<String, Vec<f64>>, params: &ModelParams) -> Result<f64> {
    let mut x = Vec::with_capacity(params.arch().input_dim());
    for f in &params.arch().features {
        let v = aggregations.get(&f.name).ok_or_else(|| Error::MissingFeature(f.name.clone()))?;
        if v.len() != f.output_dim() {
            return Err(Error::DimensionMismatch { feature: f.name.clone(), expected: f.output_dim(), got: v.len() });
        }
        x.extend_from_slice(v);
    }
    Ok(kernel::sigmoid(kernel::head(params, x)))
}

/// `classify(aggregate(embed(bundle)))`.
pub fn predict(bundle: &FeatureBundle, params: &ModelParams) -> Result<f64> {
    params.arch().validate(bundle)?;
    Ok(kernel::sigmoid(kernel::forward(params, bundle, None)))
}

impl Model {
    /// Builds vocabularies and an architecture from the samples, then trains.
    pub fn fit(samples: &[(RawFeatures, bool)], dims: &Dims, cfg: &TrainConfig, seed: u64) -> Result<Model> {
        let raw: Vec<RawFeatures> = samples.iter().map(|(r, _)| r.clone()).collect();
        let (arch, vocab) = Model::build_arch(&raw, dims)?;
        let shell = Model { vocab, params: ModelParams::zeros(arch.clone()), training: None };
        let data = samples.iter().map(|(r, y)| Ok((shell.encode(r)?, *y))).collect::<Result<Vec<_>>>()?;
        let (params, summary) = train(&arch, &data, cfg, seed)?;
        Ok(Model { vocab: shell.vocab, params, training: Some(summary) })
    }
}
