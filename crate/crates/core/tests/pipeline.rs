use std::fs;
use std::path::Path;

use nlufb::nn::{Dims, TrainConfig};
use nlufb::pipeline::{self, Manifest, PipelineConfig, Stage, CURATED, EVAL_REPORT, MANIFEST};
use nlufb::Error;

fn tiny(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig { seed: 3, ..PipelineConfig::default() };
    cfg.paths.out_dir = out.to_path_buf();
    cfg.simulator.n_sessions = 250;
    let train = TrainConfig { epochs: 2, batch_size: 32, learning_rate: 5e-3, class_weighting: true };
    let dims = Dims { seq_emb: 4, cat_emb: 4, hidden: 4, highway_layers: 1, ..Dims::default() };
    cfg.dim.train = train.clone();
    cfg.dim.dims = dims.clone();
    cfg.dcm.train = train.clone();
    cfg.dcm.dims = dims.clone();
    cfg.reranker.train = train;
    cfg.reranker.dims = dims;
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn full_run_is_deterministic_and_records_every_stage() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = pipeline::run_pipeline(&tiny(a.path())).unwrap();
    let mb = pipeline::run_pipeline(&tiny(b.path())).unwrap();
    assert_eq!(read(a.path(), CURATED), read(b.path(), CURATED));
    assert_eq!(read(a.path(), EVAL_REPORT), read(b.path(), EVAL_REPORT));
    assert_eq!(read(a.path(), MANIFEST), read(b.path(), MANIFEST));
    assert_eq!(ma, mb);

    assert_eq!(ma.stages.len(), 8);
    assert!(ma.thres_search.is_some());
    assert!(ma.eval.is_some());
    assert!(ma.dataset_sizes.contains_key("curated"));
    assert_eq!(Manifest::load(a.path()).unwrap(), ma);
}

#[test]
fn stages_write_only_declared_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = pipeline::run_pipeline(&tiny(dir.path())).unwrap();
    let mut expected = vec![MANIFEST.to_string(), pipeline::CONFIG_SNAPSHOT.to_string()];
    for (stage, record) in Stage::ALL.iter().zip(&m.stages) {
        assert_eq!(record.stage, stage.name());
        let names: Vec<&str> = record.outputs.iter().map(|o| o.path.as_str()).collect();
        assert_eq!(names, stage.outputs());
        for name in stage.outputs() {
            expected.push(name.to_string());
            expected.push(format!("{name}.meta.json"));
        }
    }
    expected.sort();
    let mut found: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    found.sort();
    assert_eq!(found, expected);
}

#[test]
fn resume_matches_full_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    pipeline::run_pipeline(&cfg).unwrap();
    let report = read(dir.path(), EVAL_REPORT);
    let curated = read(dir.path(), CURATED);
    fs::remove_file(dir.path().join(EVAL_REPORT)).unwrap();
    let m = pipeline::stage_resume(&cfg, Stage::TrainReranker).unwrap();
    assert_eq!(read(dir.path(), EVAL_REPORT), report);
    assert_eq!(read(dir.path(), CURATED), curated);
    assert_eq!(m.stages.len(), 8);
}

#[test]
fn resume_after_config_change_is_refused_with_diff() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    pipeline::run_pipeline(&cfg).unwrap();
    let mut changed = cfg.clone();
    changed.reranker.train.learning_rate = 1e-2;
    let err = pipeline::stage_resume(&changed, Stage::Curate).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Stage { .. }), "{msg}");
    assert!(msg.contains("hash mismatch"), "{msg}");
    assert!(msg.contains("reranker.train.learning_rate: 0.005 -> 0.01"), "{msg}");
}

#[test]
fn deleted_intermediate_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    pipeline::run_pipeline(&cfg).unwrap();
    fs::remove_file(dir.path().join(pipeline::TARGETS)).unwrap();
    let msg = pipeline::stage_resume(&cfg, Stage::Curate).unwrap_err().to_string();
    assert!(msg.contains(pipeline::TARGETS), "{msg}");
}

#[test]
fn tampered_intermediate_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    pipeline::run_pipeline(&cfg).unwrap();
    let path = dir.path().join(CURATED);
    let mut bytes = fs::read(&path).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(&path, bytes).unwrap();
    let msg = pipeline::stage_resume(&cfg, Stage::TrainReranker).unwrap_err().to_string();
    assert!(msg.contains("modified"), "{msg}");
}

#[test]
fn no_rephrases_aborts_at_train_dcm() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.simulator.behavior.rephrase_prob_after_defect = 0.0;
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(stage, "train-dcm"),
        other => panic!("unexpected {other}"),
    }
    assert!(err.to_string().contains("empty high-value set"));
    // the checkpoint covers the stages that completed
    let m = Manifest::load(dir.path()).unwrap();
    assert_eq!(m.stages.last().unwrap().stage, "select-targets");
}

#[test]
fn missing_log_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.paths.week1_logs = Some(dir.path().join("absent.jsonl"));
    assert!(matches!(pipeline::run_pipeline(&cfg), Err(Error::Config(_))));
}

#[test]
fn resume_without_prior_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let msg = pipeline::stage_resume(&tiny(dir.path()), Stage::Curate).unwrap_err().to_string();
    assert!(msg.contains(MANIFEST), "{msg}");
}

#[test]
fn stage_names_round_trip() {
    for s in Stage::ALL {
        assert_eq!(s.name().parse::<Stage>().unwrap(), s);
    }
    assert!("bogus".parse::<Stage>().is_err());
}
