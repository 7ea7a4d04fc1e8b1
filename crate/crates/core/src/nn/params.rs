use rand::Rng as _;

use super::{FeatureKind, ModelArch};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Entry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Offsets of one feature's tables. Numerical features own nothing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct FeatureSlots {
    pub emb: Option<usize>,
    pub fwd_w: usize,
    pub fwd_b: usize,
    pub bwd_w: usize,
    pub bwd_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HighwaySlots {
    pub tw: usize,
    pub tb: usize,
    pub gw: usize,
    pub gb: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub entries: Vec<Entry>,
    pub features: Vec<FeatureSlots>,
    pub highway: Vec<HighwaySlots>,
    pub out_w: usize,
    pub out_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(arch: &ModelArch) -> Self {
        let mut entries = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let offset = total;
            total += shape.iter().product::<usize>();
            entries.push(Entry { name, shape, offset });
            offset
        };
        let mut features = Vec::new();
        for f in &arch.features {
            let mut s = FeatureSlots::default();
            match f.kind {
                FeatureKind::Sequential { vocab, emb_dim, hidden } => {
                    s.emb = Some(push(format!("emb.{}", f.name), vec![vocab, emb_dim]));
                    s.fwd_w = push(format!("lstm.{}.fwd.w", f.name), vec![4 * hidden, emb_dim + hidden]);
                    s.fwd_b = push(format!("lstm.{}.fwd.b", f.name), vec![4 * hidden]);
                    s.bwd_w = push(format!("lstm.{}.bwd.w", f.name), vec![4 * hidden, emb_dim + hidden]);
                    s.bwd_b = push(format!("lstm.{}.bwd.b", f.name), vec![4 * hidden]);
                }
                FeatureKind::Categorical { vocab, dim } => {
                    s.emb = Some(push(format!("emb.{}", f.name), vec![vocab, dim]));
                }
                FeatureKind::Numerical { .. } => {}
            }
            features.push(s);
        }
        let d = arch.input_dim();
        let mut highway = Vec::new();
        for l in 0..arch.highway_layers {
            highway.push(HighwaySlots {
                tw: push(format!("highway.{l}.transform.w"), vec![d, d]),
                tb: push(format!("highway.{l}.transform.b"), vec![d]),
                gw: push(format!("highway.{l}.gate.w"), vec![d, d]),
                gb: push(format!("highway.{l}.gate.b"), vec![d]),
            });
        }
        let out_w = push("out.w".into(), vec![d]);
        let out_b = push("out.b".into(), vec![1]);
        Self { entries, features, highway, out_w, out_b, total }
    }
}

/// Named parameter arrays stored in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: ModelArch,
    pub(crate) layout: Layout,
    pub(crate) data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: ModelArch) -> Self {
        let layout = Layout::new(&arch);
        let data = vec![0.0; layout.total];
        Self { arch, layout, data }
    }

    /// Uniform Glorot-style initialisation; LSTM forget-gate biases start at 1
    /// and highway gate biases at -1 so early training favours the carry path.
    pub fn init(arch: ModelArch, seed: u64) -> Self {
        let mut p = Self::zeros(arch);
        let mut rng = seed::rng(seed);
        for e in p.layout.entries.clone() {
            let slice = &mut p.data[e.offset..e.offset + e.len()];
            if e.name.starts_with("emb.") {
                slice.iter_mut().for_each(|x| *x = rng.gen_range(-0.1..0.1));
            } else if e.shape.len() == 2 {
                let bound = (6.0 / (e.shape[0] + e.shape[1]) as f64).sqrt();
                slice.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
            } else if e.name == "out.w" {
                let bound = (6.0 / (e.shape[0] + 1) as f64).sqrt();
                slice.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
            } else if e.name.starts_with("lstm.") {
                let h = e.shape[0] / 4;
                slice[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
            } else if e.name.ends_with(".gate.b") {
                slice.iter_mut().for_each(|x| *x = -1.0);
            }
        }
        p
    }

    pub(crate) fn from_parts(arch: ModelArch, arrays: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let mut p = Self::zeros(arch);
        if arrays.len() != p.layout.entries.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} parameter arrays, found {}",
                p.layout.entries.len(),
                arrays.len()
            )));
        }
        for (e, (name, shape, data)) in p.layout.entries.clone().iter().zip(arrays) {
            if e.name != name || e.shape != shape || data.len() != e.len() {
                return Err(Error::ModelFormat(format!("parameter `{name}` {shape:?} does not match `{}` {:?}", e.name, e.shape)));
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::ModelFormat(format!("parameter `{name}` has non-finite values")));
            }
            p.data[e.offset..e.offset + e.len()].copy_from_slice(&data);
        }
        Ok(p)
    }

    pub fn arch(&self) -> &ModelArch {
        &self.arch
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(name, shape)` of every array in storage order.
    pub fn names(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.layout.entries.iter().map(|e| (e.name.as_str(), e.shape.as_slice()))
    }

    fn entry(&self, name: &str) -> Option<&Entry> {
        self.layout.entries.iter().find(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entry(name).map(|e| &self.data[e.offset..e.offset + e.len()])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.entry(name)?.clone();
        Some(&mut self.data[e.offset..e.offset + e.len()])
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn embedding(&self, feature: usize) -> &[f64] {
        let off = self.layout.features[feature].emb.expect("feature has an embedding table");
        &self.data[off..]
    }

    pub(crate) fn offset_name(&self, index: usize) -> &str {
        let e = self.layout.entries.iter().rev().find(|e| e.offset <= index).expect("index in range");
        &e.name
    }
}
