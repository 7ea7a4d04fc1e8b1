use rand::Rng as _;

use super::*;
use crate::seed;

fn small_arch() -> ModelArch {
    ModelArch::new(
        vec![
            FeatureSpec { name: "tokens".into(), kind: FeatureKind::Sequential { vocab: 6, emb_dim: 3, hidden: 2 } },
            FeatureSpec { name: "color".into(), kind: FeatureKind::Categorical { vocab: 4, dim: 2 } },
            FeatureSpec { name: "x".into(), kind: FeatureKind::Numerical { dim: 2 } },
        ],
        2,
    )
    .unwrap()
}

fn bundle(tokens: &[usize], color: usize, x: [f64; 2]) -> FeatureBundle {
    let mut b = FeatureBundle::default();
    b.sequential.insert("tokens".into(), tokens.to_vec());
    b.categorical.insert("color".into(), color);
    b.numerical.insert("x".into(), x.to_vec());
    b
}

fn random_bundle(rng: &mut seed::Rng) -> FeatureBundle {
    let len = rng.gen_range(0..5);
    let toks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..6)).collect();
    bundle(&toks, rng.gen_range(0..4), [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar LSTM over `inputs`, written independently of the kernel.
fn reference_lstm(w: &[f64], b: &[f64], inputs: &[Vec<f64>], hidden: usize) -> Vec<f64> {
    let e = inputs.first().map_or(0, Vec::len);
    let cols = e + hidden;
    let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
    for x in inputs {
        let full: Vec<f64> = x.iter().chain(h.iter()).copied().collect();
        let z = |r: usize| b[r] + (0..cols).map(|j| w[r * cols + j] * full[j]).sum::<f64>();
        let mut nh = vec![0.0; hidden];
        for k in 0..hidden {
            let i = sig(z(k));
            let f = sig(z(hidden + k));
            let g = z(2 * hidden + k).tanh();
            let o = sig(z(3 * hidden + k));
            c[k] = f * c[k] + i * g;
            nh[k] = o * c[k].tanh();
        }
        h = nh;
    }
    h
}

#[test]
fn categorical_embedding_is_a_table_lookup() {
    let p = ModelParams::init(small_arch(), 1);
    let e = embed(&bundle(&[1], 3, [0.0, 0.0]), &p).unwrap();
    let table = p.get("emb.color").unwrap();
    assert_eq!(e["color"].rows, 1);
    assert_eq!(e["color"].data, table[6..8].to_vec());
}

#[test]
fn numerical_features_pass_through() {
    let p = ModelParams::init(small_arch(), 1);
    let b = bundle(&[1], 0, [0.3, 0.7]);
    assert_eq!(embed(&b, &p).unwrap()["x"].data, vec![0.3, 0.7]);
    assert_eq!(aggregate(&embed(&b, &p).unwrap(), &p).unwrap()["x"], vec![0.3, 0.7]);
}

#[test]
fn sequence_embedding_stacks_table_rows() {
    let p = ModelParams::init(small_arch(), 2);
    let toks = [5, 1, 1, 0, 4];
    let e = embed(&bundle(&toks, 0, [0.0, 0.0]), &p).unwrap();
    let m = &e["tokens"];
    assert_eq!((m.rows, m.cols), (5, 3));
    let table = p.get("emb.tokens").unwrap();
    for (r, &t) in toks.iter().enumerate() {
        assert_eq!(m.row(r), &table[t * 3..t * 3 + 3]);
    }
}

#[test]
fn out_of_vocabulary_ids_are_rejected() {
    let p = ModelParams::init(small_arch(), 1);
    assert!(matches!(embed(&bundle(&[6], 0, [0.0, 0.0]), &p), Err(Error::OutOfVocabulary { .. })));
    assert!(matches!(predict(&bundle(&[0], 4, [0.0, 0.0]), &p), Err(Error::OutOfVocabulary { .. })));
    let mut b = bundle(&[0], 0, [0.0, 0.0]);
    b.numerical.insert("x".into(), vec![1.0]);
    assert!(matches!(predict(&b, &p), Err(Error::DimensionMismatch { .. })));
    b.numerical.remove("x");
    assert!(matches!(predict(&b, &p), Err(Error::MissingFeature(_))));
}

#[test]
fn lstm_matches_the_scalar_reference() {
    let p = ModelParams::init(small_arch(), 3);
    let toks = [2, 4, 1];
    let b = bundle(&toks, 0, [0.0, 0.0]);
    let agg = aggregate(&embed(&b, &p).unwrap(), &p).unwrap();
    let table = p.get("emb.tokens").unwrap();
    let rows: Vec<Vec<f64>> = toks.iter().map(|&t| table[t * 3..t * 3 + 3].to_vec()).collect();
    let fwd = reference_lstm(p.get("lstm.tokens.fwd.w").unwrap(), p.get("lstm.tokens.fwd.b").unwrap(), &rows, 2);
    let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
    let bwd = reference_lstm(p.get("lstm.tokens.bwd.w").unwrap(), p.get("lstm.tokens.bwd.b").unwrap(), &rev, 2);
    let want: Vec<f64> = fwd.into_iter().chain(bwd).collect();
    for (a, b) in agg["tokens"].iter().zip(&want) {
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
}

fn mirrored(seed: u64) -> ModelParams {
    let mut p = ModelParams::init(small_arch(), seed);
    let w = p.get("lstm.tokens.fwd.w").unwrap().to_vec();
    let b = p.get("lstm.tokens.fwd.b").unwrap().to_vec();
    p.get_mut("lstm.tokens.bwd.w").unwrap().copy_from_slice(&w);
    p.get_mut("lstm.tokens.bwd.b").unwrap().copy_from_slice(&b);
    p
}

#[test]
fn single_token_states_agree_under_mirrored_weights() {
    let p = mirrored(4);
    let agg = aggregate(&embed(&bundle(&[3], 0, [0.0, 0.0]), &p).unwrap(), &p).unwrap();
    let v = &agg["tokens"];
    assert_eq!(v[..2], v[2..]);
}

#[test]
fn reversing_a_sequence_swaps_directions_under_mirrored_weights() {
    let p = mirrored(5);
    let a = aggregate(&embed(&bundle(&[1, 2, 5, 3], 0, [0.0, 0.0]), &p).unwrap(), &p).unwrap();
    let b = aggregate(&embed(&bundle(&[3, 5, 2, 1], 0, [0.0, 0.0]), &p).unwrap(), &p).unwrap();
    assert_eq!(a["tokens"][..2], b["tokens"][2..]);
    assert_eq!(a["tokens"][2..], b["tokens"][..2]);
}

#[test]
fn empty_sequence_aggregates_to_zeros() {
    let p = ModelParams::init(small_arch(), 6);
    let agg = aggregate(&embed(&bundle(&[], 1, [0.5, 0.5]), &p).unwrap(), &p).unwrap();
    assert_eq!(agg["tokens"], vec![0.0; 4]);
}

#[test]
fn closed_gates_make_the_highway_an_identity() {
    let mut p = ModelParams::init(small_arch(), 7);
    for l in 0..2 {
        p.get_mut(&format!("highway.{l}.gate.b")).unwrap().iter_mut().for_each(|b| *b = -40.0);
        p.get_mut(&format!("highway.{l}.gate.w")).unwrap().iter_mut().for_each(|w| *w = 0.0);
    }
    let b = bundle(&[1, 2], 2, [0.1, -0.4]);
    let agg = aggregate(&embed(&b, &p).unwrap(), &p).unwrap();
    let x: Vec<f64> = agg.values().flatten().copied().collect();
    let ow = p.get("out.w").unwrap();
    let logit = p.get("out.b").unwrap()[0] + ow.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>();
    let got = classify(&agg, &p).unwrap();
    assert!((got - sig(logit)).abs() < 1e-12);
}

#[test]
fn two_dimensional_head_matches_hand_computation() {
    let arch = ModelArch::new(vec![FeatureSpec { name: "v".into(), kind: FeatureKind::Numerical { dim: 2 } }], 1).unwrap();
    let mut p = ModelParams::zeros(arch);
    p.get_mut("highway.0.transform.w").unwrap().copy_from_slice(&[1.0, 0.5, -0.5, 2.0]);
    p.get_mut("highway.0.transform.b").unwrap().copy_from_slice(&[0.1, -0.1]);
    p.get_mut("highway.0.gate.w").unwrap().copy_from_slice(&[0.0, 1.0, 1.0, 0.0]);
    p.get_mut("highway.0.gate.b").unwrap().copy_from_slice(&[0.0, -1.0]);
    p.get_mut("out.w").unwrap().copy_from_slice(&[1.5, -1.0]);
    p.get_mut("out.b").unwrap().copy_from_slice(&[0.2]);
    let (x0, x1) = (0.4, -0.2);
    let t0 = (1.0 * x0 + 0.5 * x1 + 0.1_f64).tanh();
    let t1 = (-0.5 * x0 + 2.0 * x1 - 0.1_f64).tanh();
    let g0 = sig(x1);
    let g1 = sig(x0 - 1.0);
    let y0 = g0 * t0 + (1.0 - g0) * x0;
    let y1 = g1 * t1 + (1.0 - g1) * x1;
    let want = sig(1.5 * y0 - 1.0 * y1 + 0.2);
    let agg = BTreeMap::from([("v".to_string(), vec![x0, x1])]);
    assert!((classify(&agg, &p).unwrap() - want).abs() < 1e-15);
    let bad = BTreeMap::from([("v".to_string(), vec![x0])]);
    assert!(matches!(classify(&bad, &p), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn forward_is_pure_and_strictly_inside_the_unit_interval() {
    let p = ModelParams::init(small_arch(), 8);
    let mut rng = seed::rng(1);
    for _ in 0..200 {
        let b = random_bundle(&mut rng);
        let y = predict(&b, &p).unwrap();
        assert_eq!(y.to_bits(), predict(&b, &p).unwrap().to_bits());
        assert!(y > 0.0 && y < 1.0);
        let staged = classify(&aggregate(&embed(&b, &p).unwrap(), &p).unwrap(), &p).unwrap();
        assert!((staged - y).abs() < 1e-15);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = seed::rng(2);
    for s in 0..10 {
        let p = ModelParams::init(small_arch(), 100 + s);
        let sample = (random_bundle(&mut rng), rng.gen_bool(0.5));
        let err = grad_check(&p, &sample, 1e-5);
        assert!(err < 1e-4, "sample {s}: {err}");
    }
}

#[test]
fn unused_embedding_rows_have_zero_gradient_and_corruption_is_caught() {
    let p = ModelParams::init(small_arch(), 9);
    let sample = (bundle(&[1, 2], 0, [0.2, 0.3]), true);
    // row 5 of the token table is never read
    let emb_start = p.names().take_while(|(n, _)| *n != "emb.tokens").map(|(_, s)| s.iter().product::<usize>()).sum::<usize>();
    let report = grad_check_with(&p, &sample, 1e-5, |g| assert!(g[emb_start + 15..emb_start + 18].iter().all(|v| *v == 0.0)));
    assert!(report.max_relative_error < 1e-4);
    let corrupted = grad_check_with(&p, &sample, 1e-5, |g| g[g.len() - 1] += 0.05);
    assert!(corrupted.max_relative_error > 1e-2, "{corrupted:?}");
    assert_eq!(corrupted.worst, "out.b");
}

fn separable(n: usize, seed_: u64) -> Vec<(FeatureBundle, bool)> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|_| {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            (bundle(&[1], 0, x), x[0] + 0.5 * x[1] > 0.0)
        })
        .collect()
}

#[test]
fn loss_decreases_monotonically_on_a_separable_toy_set() {
    let cfg = TrainConfig { epochs: 10, batch_size: 32, learning_rate: 5e-3, class_weighting: true };
    let (_, summary) = train(&small_arch(), &separable(400, 3), &cfg, 11).unwrap();
    assert_eq!(summary.loss_history.len(), 10);
    for w in summary.loss_history.windows(2) {
        assert!(w[1] < w[0], "{:?}", summary.loss_history);
    }
}

#[test]
fn training_is_deterministic_given_the_seed() {
    let cfg = TrainConfig { epochs: 2, batch_size: 16, ..TrainConfig::default() };
    let data = separable(100, 4);
    let (a, sa) = train(&small_arch(), &data, &cfg, 5).unwrap();
    let (b, sb) = train(&small_arch(), &data, &cfg, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let (c, _) = train(&small_arch(), &data, &cfg, 6).unwrap();
    assert_ne!(a, c);
}

#[test]
fn single_class_data_is_rejected() {
    let data: Vec<_> = separable(50, 5).into_iter().map(|(b, _)| (b, true)).collect();
    let mut cfg = TrainConfig::default();
    assert!(matches!(train(&small_arch(), &data, &cfg, 1), Err(Error::SingleClass(true))));
    cfg.class_weighting = false;
    assert!(matches!(train(&small_arch(), &data, &cfg, 1), Err(Error::SingleClass(true))));
}

#[test]
fn diverging_training_aborts_on_a_non_finite_loss() {
    let cfg = TrainConfig { epochs: 3, batch_size: 8, learning_rate: 1e300, class_weighting: false };
    let err = train(&small_arch(), &separable(64, 6), &cfg, 1).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
}

#[test]
fn xor_is_learned_by_the_highway_stack() {
    let arch = ModelArch::new(vec![FeatureSpec { name: "x".into(), kind: FeatureKind::Numerical { dim: 2 } }], 2).unwrap();
    let mut rng = seed::rng(7);
    let data: Vec<(FeatureBundle, bool)> = (0..800)
        .map(|_| {
            let (a, b) = (rng.gen_bool(0.5), rng.gen_bool(0.5));
            let jitter = |r: &mut seed::Rng| r.gen_range(-0.2..0.2);
            let x = [if a { 1.0 } else { -1.0 } + jitter(&mut rng), if b { 1.0 } else { -1.0 } + jitter(&mut rng)];
            let mut fb = FeatureBundle::default();
            fb.numerical.insert("x".into(), x.to_vec());
            (fb, a != b)
        })
        .collect();
    let cfg = TrainConfig { epochs: 10, batch_size: 16, learning_rate: 3e-2, class_weighting: true };
    let (p, _) = train(&arch, &data, &cfg, 3).unwrap();
    let correct = data.iter().filter(|(b, y)| (predict(b, &p).unwrap() > 0.5) == *y).count();
    assert!(correct as f64 / data.len() as f64 >= 0.95, "{correct}");
}

#[test]
fn model_file_round_trips_bit_exactly() {
    let raw: Vec<RawFeatures> = ["play thriller", "play the song bad guy", "set a timer"]
        .iter()
        .map(|u| {
            let mut r = RawFeatures::default();
            r.sequential.insert("utterance".into(), u.split(' ').map(str::to_string).collect());
            r.categorical.insert("domain".into(), if u.starts_with("play") { "Music".into() } else { "Timer".into() });
            r.numerical.insert("conf".into(), vec![0.123456789012345]);
            r
        })
        .collect();
    let dims = Dims { seq_emb: 4, cat_emb: 3, hidden: 3, ..Dims::default() };
    let (arch, vocab) = Model::build_arch(&raw, &dims).unwrap();
    assert_eq!(vocab["utterance"].token(0), Some(UNK));
    let model = Model { vocab, params: ModelParams::init(arch, 12), training: None };
    let back = Model::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
    for r in &raw {
        assert_eq!(model.score(r).unwrap().to_bits(), back.score(r).unwrap().to_bits());
    }
    let mut unseen = raw[0].clone();
    unseen.sequential.insert("utterance".into(), vec!["zzz".into()]);
    assert_eq!(model.encode(&unseen).unwrap().sequential["utterance"], vec![0]);
    let text = model.to_json().unwrap().replace("nlufb-model", "other");
    assert!(matches!(Model::from_json(&text), Err(Error::ModelFormat(_))));
}
