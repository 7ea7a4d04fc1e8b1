use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dcm::{DEFAULT_K, DEFAULT_Q};
use crate::dim::{DEFAULT_EPSILON, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::features::default_dims;
use crate::feedback::FeedbackConfig;
use crate::nn::{Dims, TrainConfig};
use crate::seed::{derive_seed, sha256_hex};
use crate::sessions::DEFAULT_SESSION_GAP_MS;
use crate::simgen::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Output directory; not part of the config hash.
    pub out_dir: PathBuf,
    /// Optional week-1 turn log (JSONL) used instead of simulated traffic.
    pub week1_logs: Option<PathBuf>,
    /// Optional week-2 turn log for shadow evaluation; needs oracle labels.
    pub week2_logs: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("runs/reference"), week1_logs: None, week2_logs: None }
    }
}

/// Week 1 feeds both training stages, week 2 is only used for evaluation.
/// Unset seeds derive from the master seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weeks {
    pub week1_seed: Option<u64>,
    pub week2_seed: Option<u64>,
    pub week1_sessions: Option<usize>,
    pub week2_sessions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimStage {
    pub train: TrainConfig,
    pub dims: Dims,
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for DimStage {
    fn default() -> Self {
        Self { train: TrainConfig::default(), dims: default_dims(), lambda: DEFAULT_LAMBDA, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcmStage {
    pub train: TrainConfig,
    pub dims: Dims,
    pub k: usize,
    pub q: usize,
}

impl Default for DcmStage {
    fn default() -> Self {
        Self { train: TrainConfig::default(), dims: default_dims(), k: DEFAULT_K, q: DEFAULT_Q }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankStage {
    pub train: TrainConfig,
    pub dims: Dims,
}

impl Default for RerankStage {
    fn default() -> Self {
        Self { train: TrainConfig::default(), dims: default_dims() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stage derives its own seed from it.
    pub seed: u64,
    pub session_gap_ms: i64,
    pub paths: Paths,
    pub weeks: Weeks,
    /// Traffic model for both weeks. Its own `seed` and `n_sessions` are
    /// overridden per week.
    pub simulator: SimConfig,
    pub feedback: FeedbackConfig,
    pub dim: DimStage,
    pub dcm: DcmStage,
    pub reranker: RerankStage,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            session_gap_ms: DEFAULT_SESSION_GAP_MS,
            paths: Paths::default(),
            weeks: Weeks::default(),
            simulator: SimConfig::default(),
            feedback: FeedbackConfig::default(),
            dim: DimStage::default(),
            dcm: DcmStage::default(),
            reranker: RerankStage::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative log paths are taken relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.week1_logs, &mut cfg.paths.week2_logs].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulator.validate()?;
        self.feedback.validate()?;
        for t in [&self.dim.train, &self.dcm.train, &self.reranker.train] {
            t.validate()?;
        }
        if !(self.dim.lambda > 0.0 && self.dim.lambda < 1.0) || !(self.dim.epsilon > 0.0 && self.dim.epsilon < 1.0) {
            return Err(Error::Config("dim.lambda and dim.epsilon must lie in (0, 1)".into()));
        }
        if self.dcm.k == 0 {
            return Err(Error::Config("dcm.k must be at least 1".into()));
        }
        if self.session_gap_ms <= 0 {
            return Err(Error::Config("session_gap_ms must be positive".into()));
        }
        for p in [&self.paths.week1_logs, &self.paths.week2_logs].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("log file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// The config minus the output directory, as canonical JSON.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.paths.out_dir = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    pub fn week_sim(&self, week: u8) -> SimConfig {
        let (seed, n) = match week {
            1 => (self.weeks.week1_seed, self.weeks.week1_sessions),
            _ => (self.weeks.week2_seed, self.weeks.week2_sessions),
        };
        SimConfig {
            seed: seed.unwrap_or_else(|| derive_seed(self.seed, &format!("week{week}"))),
            n_sessions: n.unwrap_or(self.simulator.n_sessions),
            ..self.simulator.clone()
        }
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

/// Keys whose values differ between two canonical configs, as
/// `key: old -> new` lines.
pub fn config_diff(old_json: &str, new_json: &str) -> String {
    let parse = |s: &str| {
        let mut m = BTreeMap::new();
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(s) {
            flatten("", &v, &mut m);
        }
        m
    };
    let (a, b) = (parse(old_json), parse(new_json));
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let none = "<unset>".to_string();
    let lines: Vec<String> = keys
        .into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| {
            let short = |s: &String| {
                if s.chars().count() > 60 {
                    format!("{}...", s.chars().take(57).collect::<String>())
                } else {
                    s.clone()
                }
            };
            format!("{k}: {} -> {}", short(a.get(k).unwrap_or(&none)), short(b.get(k).unwrap_or(&none)))
        })
        .collect();
    if lines.is_empty() {
        "no key differs (artifact was modified or written by another run)".into()
    } else {
        lines.join("; ")
    }
}
