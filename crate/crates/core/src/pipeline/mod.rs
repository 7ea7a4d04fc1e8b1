//! The two-stage curation pipeline as eight resumable stages over one output
//! directory. Every artifact gets a `<name>.meta.json` sidecar carrying the
//! producing stage, the config hash and the artifact's sha256; `manifest.json`
//! is rewritten after each completed stage.

mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{config_diff, DcmStage, DimStage, Paths, PipelineConfig, RerankStage, Weeks};

use crate::dcm::{self, DcmInstance};
use crate::dim::{self, ThresSearchResult};
use crate::error::{Error, Result};
use crate::feedback::annotate_sessions;
use crate::logio::{group_sessions, sessions_to_lines};
use crate::nn::Model;
use crate::rerank::{self, AttributionReport, EvalReport, Origin, SupervisionRecord};
use crate::seed::sha256_hex;
use crate::sessions::sessionize;
use crate::simgen::generate_traffic;
use crate::types::{Dataset, InterpretationCatalog, Provenance, Session, Turn};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.json";

pub const WEEK1_RAW: &str = "week1.raw.jsonl";
pub const WEEK2_RAW: &str = "week2.raw.jsonl";
pub const WEEK1: &str = "week1.annotated.jsonl";
pub const WEEK2: &str = "week2.annotated.jsonl";
pub const DIM_MODEL: &str = "dim.model.json";
pub const DIM_VALID: &str = "dim_valid.jsonl";
pub const THRES_SEARCH: &str = "thres_search.json";
pub const TARGETS: &str = "targets.jsonl";
pub const ATTRIBUTION: &str = "attribution.json";
pub const DCM_INSTANCES: &str = "dcm_instances.jsonl";
pub const DCM_MODEL: &str = "dcm.model.json";
pub const CURATED: &str = "curated.jsonl";
pub const RERANKER_MODEL: &str = "reranker.model.json";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const EVAL_TABLE: &str = "eval_report.txt";
pub const DCM_EVAL: &str = "dcm_eval.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Simulate,
    Annotate,
    TrainDim,
    SelectTargets,
    TrainDcm,
    Curate,
    TrainReranker,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Simulate,
        Stage::Annotate,
        Stage::TrainDim,
        Stage::SelectTargets,
        Stage::TrainDcm,
        Stage::Curate,
        Stage::TrainReranker,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Annotate => "annotate",
            Stage::TrainDim => "train-dim",
            Stage::SelectTargets => "select-targets",
            Stage::TrainDcm => "train-dcm",
            Stage::Curate => "curate",
            Stage::TrainReranker => "train-reranker",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Artifacts read by the stage.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Stage::Simulate => &[],
            Stage::Annotate => &[WEEK1_RAW, WEEK2_RAW],
            Stage::TrainDim => &[WEEK1],
            Stage::SelectTargets => &[WEEK1, DIM_MODEL, DIM_VALID],
            Stage::TrainDcm => &[WEEK1],
            Stage::Curate => &[WEEK1, TARGETS, DCM_MODEL],
            Stage::TrainReranker => &[CURATED],
            Stage::Evaluate => &[WEEK2, DIM_MODEL, THRES_SEARCH, DCM_MODEL, RERANKER_MODEL],
        }
    }

    /// Artifacts written by the stage.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Simulate => &[WEEK1_RAW, WEEK2_RAW],
            Stage::Annotate => &[WEEK1, WEEK2],
            Stage::TrainDim => &[DIM_MODEL, DIM_VALID],
            Stage::SelectTargets => &[THRES_SEARCH, TARGETS, ATTRIBUTION],
            Stage::TrainDcm => &[DCM_INSTANCES, DCM_MODEL],
            Stage::Curate => &[CURATED],
            Stage::TrainReranker => &[RERANKER_MODEL],
            Stage::Evaluate => &[EVAL_REPORT, EVAL_TABLE, DCM_EVAL],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<ArtifactRecord>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    stage: String,
    config_hash: String,
    sha256: String,
}

/// Correction quality on held-out target defects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcmEval {
    pub targets: usize,
    /// Targets whose served top-1 misses the oracle.
    pub confused_targets: usize,
    /// Confused targets whose oracle is in the k-best.
    pub eligible: usize,
    pub corrected_to_oracle: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub dataset_sizes: BTreeMap<String, usize>,
    pub thres_search: Option<ThresSearchResult>,
    pub eval: Option<EvalReport>,
}

impl Manifest {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            format: "nlufb-run".into(),
            version: 1,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            stages: Vec::new(),
            dataset_sizes: BTreeMap::new(),
            thres_search: None,
            eval: None,
        }
    }

    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
            _ => Error::Io(e),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage.name())
    }

    /// Rebuilds the headline fields from the stage summaries.
    fn refresh(&mut self) {
        self.dataset_sizes.clear();
        for r in &self.stages {
            if let serde_json::Value::Object(m) = &r.summary {
                for (k, v) in m {
                    if let Some(n) = v.as_u64().filter(|_| k.starts_with("n_")) {
                        self.dataset_sizes.insert(k[2..].to_string(), n as usize);
                    }
                }
            }
        }
        self.thres_search = self
            .stage(Stage::SelectTargets)
            .and_then(|r| serde_json::from_value(r.summary["thres_search"].clone()).ok());
        self.eval = self.stage(Stage::Evaluate).and_then(|r| serde_json::from_value(r.summary["eval"].clone()).ok());
    }
}

fn jsonl_bytes<T: Serialize>(records: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn parse_jsonl<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<Vec<T>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| Error::Json { path: path.display().to_string(), line: i + 1, source }))
        .collect()
}

fn stage_err(stage: Stage) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage: stage.name().into(), source: Box::new(e) },
    }
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    hash: String,
    out: PathBuf,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, stage: Stage, name: &str, bytes: &[u8]) -> Result<ArtifactRecord> {
        debug_assert!(stage.outputs().contains(&name), "{stage} does not declare {name}");
        let sha256 = sha256_hex(bytes);
        fs::write(self.path(name), bytes)?;
        let meta = Sidecar { stage: stage.name().into(), config_hash: self.hash.clone(), sha256: sha256.clone() };
        fs::write(self.path(&format!("{name}.meta.json")), serde_json::to_vec_pretty(&meta)?)?;
        Ok(ArtifactRecord { path: name.into(), sha256 })
    }

    fn write_json<T: Serialize>(&self, stage: Stage, name: &str, value: &T) -> Result<ArtifactRecord> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(stage, name, &bytes)
    }

    fn write_jsonl<T: Serialize>(&self, stage: Stage, name: &str, records: impl IntoIterator<Item = T>) -> Result<ArtifactRecord> {
        self.write(stage, name, &jsonl_bytes(records)?)
    }

    fn write_model(&self, stage: Stage, name: &str, model: &Model) -> Result<ArtifactRecord> {
        self.write(stage, name, model.to_json()?.as_bytes())
    }

    /// Reads an upstream artifact after checking its sidecar against the
    /// current config hash and the file's content hash.
    fn read(&self, name: &str) -> Result<Vec<u8>> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
            _ => Error::Io(e),
        })?;
        let meta_path = self.path(&format!("{name}.meta.json"));
        let meta: Sidecar = match fs::read(&meta_path) {
            Ok(b) => serde_json::from_slice(&b)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingArtifact(meta_path)),
            Err(e) => return Err(Error::Io(e)),
        };
        if meta.config_hash != self.hash {
            let old = fs::read_to_string(self.path(CONFIG_SNAPSHOT)).unwrap_or_default();
            return Err(Error::HashMismatch { stage: meta.stage, diff: config_diff(&old, &self.cfg.canonical_json()) });
        }
        if meta.sha256 != sha256_hex(&bytes) {
            return Err(Error::HashMismatch { stage: meta.stage, diff: format!("{name} was modified after it was written") });
        }
        Ok(bytes)
    }

    fn read_jsonl<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>> {
        parse_jsonl(&self.path(name), &self.read(name)?)
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        Ok(serde_json::from_slice(&self.read(name)?)?)
    }

    fn read_model(&self, name: &str) -> Result<Model> {
        let bytes = self.read(name)?;
        Model::from_json(std::str::from_utf8(&bytes).map_err(|e| Error::ModelFormat(e.to_string()))?)
    }

    fn read_sessions(&self, name: &str) -> Result<Vec<Session>> {
        let turns: Vec<Turn> = self.read_jsonl(name)?;
        for t in &turns {
            t.validate()?;
        }
        Ok(group_sessions(turns))
    }

    fn execute(&self, stage: Stage) -> Result<StageRecord> {
        let (outputs, summary) = match stage {
            Stage::Simulate => self.simulate()?,
            Stage::Annotate => self.annotate()?,
            Stage::TrainDim => self.train_dim()?,
            Stage::SelectTargets => self.select_targets()?,
            Stage::TrainDcm => self.train_dcm()?,
            Stage::Curate => self.curate()?,
            Stage::TrainReranker => self.train_reranker()?,
            Stage::Evaluate => self.evaluate()?,
        };
        Ok(StageRecord {
            stage: stage.name().into(),
            inputs: stage.inputs().iter().map(|s| s.to_string()).collect(),
            outputs,
            summary,
        })
    }

    fn week(&self, week: u8, logs: &Option<PathBuf>) -> Result<Vec<Session>> {
        match logs {
            Some(path) => {
                let turns = crate::logio::read_turns(path)?;
                sessionize(turns, self.cfg.session_gap_ms)
            }
            None => generate_traffic(&self.cfg.week_sim(week)),
        }
    }

    fn simulate(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let w1 = self.week(1, &self.cfg.paths.week1_logs)?;
        let w2 = self.week(2, &self.cfg.paths.week2_logs)?;
        let outputs = vec![
            self.write_jsonl(Stage::Simulate, WEEK1_RAW, sessions_to_lines(&w1))?,
            self.write_jsonl(Stage::Simulate, WEEK2_RAW, sessions_to_lines(&w2))?,
        ];
        let turns = |s: &[Session]| s.iter().map(|s| s.turns.len()).sum::<usize>();
        let summary = serde_json::json!({
            "n_week1_sessions": w1.len(), "n_week1_turns": turns(&w1),
            "n_week2_sessions": w2.len(), "n_week2_turns": turns(&w2),
        });
        Ok((outputs, summary))
    }

    fn annotate(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let mut outputs = Vec::new();
        let mut summary = serde_json::Map::new();
        for (week, raw, out) in [(1, WEEK1_RAW, WEEK1), (2, WEEK2_RAW, WEEK2)] {
            let sessions = annotate_sessions(&self.read_sessions(raw)?, &self.cfg.feedback)?;
            for s in &sessions {
                s.validate(self.cfg.session_gap_ms)?;
            }
            let turns: Vec<&Turn> = sessions_to_lines(&sessions);
            summary.insert(format!("n_week{week}_defects"), turns.iter().filter(|t| t.is_defect()).count().into());
            summary.insert(format!("n_week{week}_rephrases"), turns.iter().filter(|t| t.is_rephrase()).count().into());
            outputs.push(self.write_jsonl(Stage::Annotate, out, turns)?);
        }
        Ok((outputs, summary.into()))
    }

    fn week1(&self) -> Result<(Vec<Session>, Dataset)> {
        let sessions = self.read_sessions(WEEK1)?;
        let d = Dataset::from_sessions(&sessions);
        Ok((sessions, d))
    }

    fn train_dim(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let (_, d_live) = self.week1()?;
        let c = &self.cfg.dim;
        let (model, valid) = dim::train_dim(&d_live, &c.train, &c.dims, self.cfg.stage_seed("train-dim"))?;
        let outputs = vec![
            self.write_model(Stage::TrainDim, DIM_MODEL, &model)?,
            self.write_jsonl(Stage::TrainDim, DIM_VALID, &valid.records)?,
        ];
        let summary = serde_json::json!({
            "n_dim_train": d_live.len() - valid.len(),
            "n_dim_valid": valid.len(),
            "final_loss": model.training.as_ref().map(|t| t.final_loss()),
        });
        Ok((outputs, summary))
    }

    fn select_targets(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let (_, d_live) = self.week1()?;
        let model = self.read_model(DIM_MODEL)?;
        let valid = Dataset::new(self.read_jsonl(DIM_VALID)?, Provenance::ValidSplit);
        let search = dim::thres_search(&model, &valid, self.cfg.dim.lambda, self.cfg.dim.epsilon)?;
        let defects = d_live.defects();
        let targets = dim::select_targets(&model, &defects, search.tau)?;
        let attribution = match rerank::error_attribution_report(&defects, &targets) {
            Ok(a) => Some(a),
            Err(Error::MissingOracle(_)) => None,
            Err(e) => return Err(e),
        };
        let outputs = vec![
            self.write_json(Stage::SelectTargets, THRES_SEARCH, &search)?,
            self.write_jsonl(Stage::SelectTargets, TARGETS, &targets.records)?,
            self.write_json(Stage::SelectTargets, ATTRIBUTION, &attribution)?,
        ];
        let summary = serde_json::json!({
            "thres_search": search,
            "n_week1_turns": d_live.len(),
            "n_targets": targets.len(),
            "attribution": attribution,
        });
        Ok((outputs, summary))
    }

    fn train_dcm(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let (sessions, d_live) = self.week1()?;
        let pairs = dcm::extract_high_value_pairs(&sessions);
        if pairs.is_empty() {
            return Err(Error::EmptyHighValueSet);
        }
        let catalog = InterpretationCatalog::from_turns(&d_live.records);
        let c = &self.cfg.dcm;
        let instances: Vec<DcmInstance> =
            dcm::generate_dcm_training_data(&pairs, c.k, c.q, &catalog, self.cfg.stage_seed("dcm-data"))?;
        let model = dcm::train_dcm(&instances, &c.train, &c.dims, self.cfg.stage_seed("train-dcm"))?;
        let outputs = vec![
            self.write_jsonl(Stage::TrainDcm, DCM_INSTANCES, &instances)?,
            self.write_model(Stage::TrainDcm, DCM_MODEL, &model)?,
        ];
        let summary = serde_json::json!({
            "n_high_value_pairs": pairs.len(),
            "n_dcm_instances": instances.len(),
            "n_catalog": catalog.len(),
            "final_loss": model.training.as_ref().map(|t| t.final_loss()),
        });
        Ok((outputs, summary))
    }

    fn curate(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let (_, d_sample) = self.week1()?;
        let targets = Dataset::new(self.read_jsonl(TARGETS)?, Provenance::TargetDefects);
        let model = self.read_model(DCM_MODEL)?;
        let records = rerank::build_curated_dataset(&d_sample, &targets, &model)?;
        let corrected = records.iter().filter(|r| r.origin == Origin::Corrected).count();
        let changed = records
            .iter()
            .filter(|r| r.origin == Origin::Corrected && &r.gold != r.turn.top_interpretation())
            .count();
        let outputs = vec![self.write_jsonl(Stage::Curate, CURATED, &records)?];
        let summary = serde_json::json!({
            "n_curated": records.len(),
            "n_corrected": corrected,
            "n_corrected_changed": changed,
            "corrected_fraction": corrected as f64 / records.len().max(1) as f64,
        });
        Ok((outputs, summary))
    }

    fn train_reranker(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let records: Vec<SupervisionRecord> = self.read_jsonl(CURATED)?;
        let c = &self.cfg.reranker;
        let model = rerank::train_reranker(&records, &c.train, &c.dims, self.cfg.stage_seed("train-reranker"))?;
        let outputs = vec![self.write_model(Stage::TrainReranker, RERANKER_MODEL, &model)?];
        let summary = serde_json::json!({ "final_loss": model.training.as_ref().map(|t| t.final_loss()) });
        Ok((outputs, summary))
    }

    fn evaluate(&self) -> Result<(Vec<ArtifactRecord>, serde_json::Value)> {
        let week2 = self.read_sessions(WEEK2)?;
        let reranker = self.read_model(RERANKER_MODEL)?;
        let report = rerank::evaluate_shadow(&week2, &reranker)?;

        let dim_model = self.read_model(DIM_MODEL)?;
        let search: ThresSearchResult = self.read_json(THRES_SEARCH)?;
        let dcm_model = self.read_model(DCM_MODEL)?;
        let defects = Dataset::from_sessions(&week2).defects();
        let targets = dim::select_targets(&dim_model, &defects, search.tau)?;
        let dcm_eval = evaluate_corrections(&targets, &dcm_model)?;

        let outputs = vec![
            self.write_json(Stage::Evaluate, EVAL_REPORT, &report)?,
            self.write(Stage::Evaluate, EVAL_TABLE, report.table().as_bytes())?,
            self.write_json(Stage::Evaluate, DCM_EVAL, &dcm_eval)?,
        ];
        let summary = serde_json::json!({ "eval": report, "dcm_eval": dcm_eval });
        Ok((outputs, summary))
    }
}

/// Correction accuracy on confused targets whose oracle is in the k-best.
pub fn evaluate_corrections(targets: &Dataset, dcm_model: &Model) -> Result<DcmEval> {
    let mut e = DcmEval { targets: targets.len(), confused_targets: 0, eligible: 0, corrected_to_oracle: 0, accuracy: 0.0 };
    for t in &targets.records {
        let oracle = t.oracle()?;
        if t.top_interpretation() == oracle {
            continue;
        }
        e.confused_targets += 1;
        if !t.hypotheses.iter().any(|h| &h.interpretation == oracle) {
            continue;
        }
        e.eligible += 1;
        e.corrected_to_oracle += usize::from(&dcm::correct(t, dcm_model)? == oracle);
    }
    e.accuracy = if e.eligible == 0 { 0.0 } else { e.corrected_to_oracle as f64 / e.eligible as f64 };
    Ok(e)
}

fn check_upstream(run: &Run, prior: &Manifest, from: Stage) -> Result<Vec<StageRecord>> {
    let mut kept = Vec::new();
    for stage in Stage::ALL.into_iter().filter(|s| *s < from) {
        let record = prior.stage(stage).ok_or_else(|| Error::Stage {
            stage: from.name().into(),
            source: Box::new(Error::MissingArtifact(run.path(stage.outputs()[0]))),
        })?;
        for name in stage.outputs() {
            run.read(name).map_err(stage_err(from))?;
        }
        kept.push(record.clone());
    }
    Ok(kept)
}

/// Runs stages `from..=to` in `cfg.paths.out_dir`. Stages before `from` must
/// have completed under the same config; their artifacts are verified and
/// reused.
pub fn run_stages(cfg: &PipelineConfig, from: Stage, to: Stage) -> Result<Manifest> {
    cfg.validate()?;
    if from > to {
        return Err(Error::Config(format!("stage range {from}..{to} is empty")));
    }
    let out = cfg.paths.out_dir.clone();
    fs::create_dir_all(&out)?;
    let run = Run { cfg, hash: cfg.hash(), out };
    let mut manifest = Manifest::new(cfg);
    if from > Stage::Simulate {
        let prior = Manifest::load(&run.out).map_err(stage_err(from))?;
        manifest.stages = check_upstream(&run, &prior, from)?;
    } else {
        fs::write(run.path(CONFIG_SNAPSHOT), cfg.canonical_json())?;
    }
    for stage in Stage::ALL.into_iter().filter(|s| (from..=to).contains(s)) {
        log::info!("stage {stage}");
        let record = run.execute(stage).map_err(stage_err(stage))?;
        manifest.stages.push(record);
        manifest.refresh();
        fs::write(run.path(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    }
    Ok(manifest)
}

/// Runs every stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    run_stages(cfg, Stage::Simulate, Stage::Evaluate)
}

/// Re-executes from `stage` onward, reusing verified upstream artifacts.
pub fn stage_resume(cfg: &PipelineConfig, stage: Stage) -> Result<Manifest> {
    run_stages(cfg, stage, Stage::Evaluate)
}

/// Reads curated records back from a run directory.
pub fn read_curated(out_dir: &Path) -> Result<Vec<SupervisionRecord>> {
    let path = out_dir.join(CURATED);
    parse_jsonl(&path, &fs::read(&path).map_err(|_| Error::MissingArtifact(path.clone()))?)
}

pub fn read_attribution(out_dir: &Path) -> Result<Option<AttributionReport>> {
    let path = out_dir.join(ATTRIBUTION);
    Ok(serde_json::from_slice(&fs::read(&path).map_err(|_| Error::MissingArtifact(path.clone()))?)?)
}
