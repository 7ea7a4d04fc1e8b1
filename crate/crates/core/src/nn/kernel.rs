//! Forward and backward passes over the flat parameter buffer.

use super::params::{FeatureSlots, ModelParams};
use super::{FeatureBundle, FeatureKind};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = W x + b` for a row-major `W` of `out.len()` rows.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = b[r] + dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `gw += dz x^T`, `gb += dz`, `dx += W^T dz`.
fn affine_back(w: &[f64], x: &[f64], dz: &[f64], gw: &mut [f64], gb: &mut [f64], dx: &mut [f64]) {
    let cols = x.len();
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        gb[r] += d;
        let row = &w[r * cols..(r + 1) * cols];
        let grow = &mut gw[r * cols..(r + 1) * cols];
        for j in 0..cols {
            grow[j] += d * x[j];
            dx[j] += d * row[j];
        }
    }
}

pub(crate) struct Step {
    x: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct LayerCache {
    x: Vec<f64>,
    t: Vec<f64>,
    g: Vec<f64>,
}

/// Intermediate values kept by a training forward pass.
#[derive(Default)]
pub(crate) struct Cache {
    seqs: Vec<Option<(Vec<Step>, Vec<Step>)>>,
    layers: Vec<LayerCache>,
    top: Vec<f64>,
}

/// Runs one LSTM direction; gate order is input, forget, cell, output.
fn lstm_run<'a>(
    data: &[f64],
    w: usize,
    b: usize,
    e: usize,
    h: usize,
    inputs: impl Iterator<Item = &'a [f64]>,
    mut steps: Option<&mut Vec<Step>>,
) -> Vec<f64> {
    let cols = e + h;
    let (w, b) = (&data[w..w + 4 * h * cols], &data[b..b + 4 * h]);
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    let mut x = vec![0.0; cols];
    let mut z = vec![0.0; 4 * h];
    for input in inputs {
        x[..e].copy_from_slice(input);
        x[e..].copy_from_slice(&hs);
        affine(w, b, &x, &mut z);
        for k in 0..h {
            z[k] = sigmoid(z[k]);
            z[h + k] = sigmoid(z[h + k]);
            z[2 * h + k] = z[2 * h + k].tanh();
            z[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let c_prev = steps.as_ref().map(|_| cs.clone());
        let mut tanh_c = vec![0.0; h];
        for k in 0..h {
            cs[k] = z[h + k] * cs[k] + z[k] * z[2 * h + k];
            tanh_c[k] = cs[k].tanh();
            hs[k] = z[3 * h + k] * tanh_c[k];
        }
        if let Some(steps) = steps.as_deref_mut() {
            steps.push(Step { x: x.clone(), c_prev: c_prev.unwrap_or_default(), gates: z.clone(), tanh_c });
        }
    }
    hs
}

#[allow(clippy::too_many_arguments)]
fn lstm_back(
    data: &[f64],
    grad: &mut [f64],
    w: usize,
    b: usize,
    emb: usize,
    e: usize,
    h: usize,
    steps: &[Step],
    ids: &[usize],
    dh_last: &[f64],
) {
    let cols = e + h;
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let mut dx = vec![0.0; cols];
    for (step, &id) in steps.iter().zip(ids).rev() {
        let g = &step.gates;
        for k in 0..h {
            let (i, f, c, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = step.tanh_c[k];
            let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dck * c * i * (1.0 - i);
            dz[h + k] = dck * step.c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dck * i * (1.0 - c * c);
            dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
            dc[k] = dck * f;
        }
        dx.iter_mut().for_each(|v| *v = 0.0);
        {
            let (gw, rest) = grad[w..].split_at_mut(4 * h * cols);
            let gb = &mut rest[b - w - 4 * h * cols..][..4 * h];
            affine_back(&data[w..w + 4 * h * cols], &step.x, &dz, gw, gb, &mut dx);
        }
        let ge = &mut grad[emb + id * e..emb + (id + 1) * e];
        for j in 0..e {
            ge[j] += dx[j];
        }
        dh.copy_from_slice(&dx[e..]);
    }
}

/// Final hidden state of one direction over already-embedded rows.
pub(crate) fn lstm_final(params: &ModelParams, feature: usize, reverse: bool, rows: &[&[f64]], hidden: usize) -> Vec<f64> {
    let s = params.layout.features[feature];
    let e = match params.arch().features[feature].kind {
        FeatureKind::Sequential { emb_dim, .. } => emb_dim,
        _ => unreachable!("lstm over a non-sequential feature"),
    };
    let (w, b) = if reverse { (s.bwd_w, s.bwd_b) } else { (s.fwd_w, s.fwd_b) };
    if reverse {
        lstm_run(&params.data, w, b, e, hidden, rows.iter().rev().copied(), None)
    } else {
        lstm_run(&params.data, w, b, e, hidden, rows.iter().copied(), None)
    }
}

fn emb_rows<'a>(data: &'a [f64], s: &FeatureSlots, e: usize, ids: &'a [usize]) -> Vec<&'a [f64]> {
    let emb = s.emb.expect("sequential feature has an embedding");
    ids.iter().map(|&id| &data[emb + id * e..emb + (id + 1) * e]).collect()
}

/// Highway stack and output projection; returns the logit.
pub(crate) fn head(params: &ModelParams, x: Vec<f64>) -> f64 {
    head_cached(params, x, None)
}

fn head_cached(params: &ModelParams, mut x: Vec<f64>, mut cache: Option<&mut Cache>) -> f64 {
    let d = x.len();
    let data = &params.data;
    for hw in &params.layout.highway {
        let mut t = vec![0.0; d];
        let mut g = vec![0.0; d];
        affine(&data[hw.tw..hw.tw + d * d], &data[hw.tb..hw.tb + d], &x, &mut t);
        affine(&data[hw.gw..hw.gw + d * d], &data[hw.gb..hw.gb + d], &x, &mut g);
        t.iter_mut().for_each(|v| *v = v.tanh());
        g.iter_mut().for_each(|v| *v = sigmoid(*v));
        let y: Vec<f64> = (0..d).map(|k| g[k] * t[k] + (1.0 - g[k]) * x[k]).collect();
        if let Some(c) = cache.as_deref_mut() {
            c.layers.push(LayerCache { x, t, g });
        }
        x = y;
    }
    let lo = params.layout.out_w;
    let logit = data[params.layout.out_b] + dot(&data[lo..lo + d], &x);
    if let Some(c) = cache {
        c.top = x;
    }
    logit
}

/// Full forward pass to the logit, recording intermediates when `cache` is
/// given. The bundle must already be validated against the architecture.
pub(crate) fn forward(params: &ModelParams, bundle: &FeatureBundle, mut cache: Option<&mut Cache>) -> f64 {
    let arch = params.arch();
    let data = &params.data;
    let mut x = Vec::with_capacity(arch.input_dim());
    if let Some(c) = cache.as_deref_mut() {
        c.seqs.clear();
        c.layers.clear();
    }
    for (fi, f) in arch.features.iter().enumerate() {
        let s = &params.layout.features[fi];
        let mut seq_cache = None;
        match f.kind {
            FeatureKind::Sequential { emb_dim: e, hidden: h, .. } => {
                let ids = &bundle.sequential[&f.name];
                let rows = emb_rows(data, s, e, ids);
                if cache.is_some() {
                    let (mut fw, mut bw) = (Vec::new(), Vec::new());
                    x.extend(lstm_run(data, s.fwd_w, s.fwd_b, e, h, rows.iter().copied(), Some(&mut fw)));
                    x.extend(lstm_run(data, s.bwd_w, s.bwd_b, e, h, rows.iter().rev().copied(), Some(&mut bw)));
                    seq_cache = Some((fw, bw));
                } else {
                    x.extend(lstm_run(data, s.fwd_w, s.fwd_b, e, h, rows.iter().copied(), None));
                    x.extend(lstm_run(data, s.bwd_w, s.bwd_b, e, h, rows.iter().rev().copied(), None));
                }
            }
            FeatureKind::Categorical { dim, .. } => {
                let id = bundle.categorical[&f.name];
                let emb = s.emb.expect("categorical feature has an embedding");
                x.extend_from_slice(&data[emb + id * dim..emb + (id + 1) * dim]);
            }
            FeatureKind::Numerical { .. } => x.extend_from_slice(&bundle.numerical[&f.name]),
        }
        if let Some(c) = cache.as_deref_mut() {
            c.seqs.push(seq_cache);
        }
    }
    head_cached(params, x, cache)
}

/// Accumulates `dlogit * d logit / d params` into `grad`.
pub(crate) fn backward(params: &ModelParams, bundle: &FeatureBundle, cache: &Cache, dlogit: f64, grad: &mut [f64]) {
    let data = &params.data;
    let layout = &params.layout;
    let d = cache.top.len();
    let lo = layout.out_w;
    for k in 0..d {
        grad[lo + k] += dlogit * cache.top[k];
    }
    grad[layout.out_b] += dlogit;
    let mut dx: Vec<f64> = data[lo..lo + d].iter().map(|w| w * dlogit).collect();

    let mut dzt = vec![0.0; d];
    let mut dzg = vec![0.0; d];
    for (hw, lc) in layout.highway.iter().zip(&cache.layers).rev() {
        let mut dprev = vec![0.0; d];
        for k in 0..d {
            let (t, g) = (lc.t[k], lc.g[k]);
            dzt[k] = dx[k] * g * (1.0 - t * t);
            dzg[k] = dx[k] * (t - lc.x[k]) * g * (1.0 - g);
            dprev[k] = dx[k] * (1.0 - g);
        }
        {
            let (gw, rest) = grad[hw.tw..].split_at_mut(d * d);
            affine_back(&data[hw.tw..hw.tw + d * d], &lc.x, &dzt, gw, &mut rest[hw.tb - hw.tw - d * d..][..d], &mut dprev);
        }
        {
            let (gw, rest) = grad[hw.gw..].split_at_mut(d * d);
            affine_back(&data[hw.gw..hw.gw + d * d], &lc.x, &dzg, gw, &mut rest[hw.gb - hw.gw - d * d..][..d], &mut dprev);
        }
        dx = dprev;
    }

    let mut off = 0;
    for (fi, f) in params.arch().features.iter().enumerate() {
        let s = &layout.features[fi];
        let width = f.output_dim();
        let seg = &dx[off..off + width];
        match f.kind {
            FeatureKind::Sequential { emb_dim: e, hidden: h, .. } => {
                let ids = &bundle.sequential[&f.name];
                let (fw, bw) = cache.seqs[fi].as_ref().expect("sequence cache");
                let emb = s.emb.expect("sequential feature has an embedding");
                lstm_back(data, grad, s.fwd_w, s.fwd_b, emb, e, h, fw, ids, &seg[..h]);
                let rev: Vec<usize> = ids.iter().rev().copied().collect();
                lstm_back(data, grad, s.bwd_w, s.bwd_b, emb, e, h, bw, &rev, &seg[h..]);
            }
            FeatureKind::Categorical { dim, .. } => {
                let id = bundle.categorical[&f.name];
                let emb = s.emb.expect("categorical feature has an embedding");
                for k in 0..dim {
                    grad[emb + id * dim + k] += seg[k];
                }
            }
            FeatureKind::Numerical { .. } => {}
        }
        off += width;
    }
}
