//! Scalar-loop reference forward pass and a central-difference gradient
//! checker. Shares nothing with the batched training path.

#![allow(dead_code)]

use foodpair_core::model::{Hyperparams, ModelParams, TENSOR_NAMES};

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn layer(w: &ndarray::Array2<f64>, b: &ndarray::Array1<f64>, x: &[f64], pre: &mut Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.nrows());
    for r in 0..w.nrows() {
        let mut z = b[r];
        for c in 0..w.ncols() {
            z += w[[r, c]] * x[c];
        }
        pre.push(z);
        out.push(relu(z));
    }
    out
}

fn core(p: &ModelParams, hp: &Hyperparams, xa: &[f64], xb: &[f64], pre: &mut Vec<f64>) -> f64 {
    let ha = layer(&p.w2, &p.b2, &layer(&p.w1, &p.b1, xa, pre), pre);
    let hb = layer(&p.w2, &p.b2, &layer(&p.w1, &p.b1, xb, pre), pre);
    let joint: Vec<f64> = ha.iter().chain(hb.iter()).copied().collect();
    let deep = layer(&p.w4, &p.b4, &layer(&p.w3, &p.b3, &joint, pre), pre);
    let mut features = Vec::new();
    if hp.use_wide {
        for x in &ha {
            for y in &hb {
                features.push(x * y);
            }
        }
    }
    features.extend(deep);
    let mut y = p.b5;
    for (w, f) in p.w5.iter().zip(&features) {
        y += w * f;
    }
    y
}

/// Model output, recording every ReLU pre-activation into `pre`.
pub fn reference_forward(p: &ModelParams, hp: &Hyperparams, xa: &[f64], xb: &[f64], pre: &mut Vec<f64>) -> f64 {
    if hp.symmetrize {
        (core(p, hp, xa, xb, pre) + core(p, hp, xb, xa, pre)) / 2.0
    } else {
        core(p, hp, xa, xb, pre)
    }
}

pub type Example = (Vec<f64>, Vec<f64>, f64);

pub fn reference_loss(p: &ModelParams, hp: &Hyperparams, batch: &[Example], pre: &mut Vec<f64>) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(a, b, y)| (reference_forward(p, hp, a, b, pre) - y).powi(2))
        .sum();
    total / batch.len() as f64
}

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub excluded: usize,
    pub max_rel_error: f64,
    pub failures: Vec<String>,
}

/// Relative error with a floor so components near zero compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn signs(pre: &[f64]) -> Vec<bool> {
    pre.iter().map(|z| *z > 0.0).collect()
}

/// Compares `analytic` with central differences of the reference loss.
/// Components whose perturbation changes any ReLU's side, or whose base
/// pre-activations sit within `kink` of zero, are excluded.
pub fn check_gradients(
    params: &ModelParams,
    hp: &Hyperparams,
    batch: &[Example],
    analytic: &ModelParams,
    step: f64,
    tol: f64,
    kink: f64,
) -> GradCheck {
    let mut report = GradCheck::default();
    let mut base_pre = Vec::new();
    reference_loss(params, hp, batch, &mut base_pre);
    let near_kink = base_pre.iter().any(|z| z.abs() < kink);
    let base_signs = signs(&base_pre);

    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        let len = params.tensors()[t].len();
        for k in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t][k] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[t][k] -= step;
            let (mut pre_p, mut pre_m) = (Vec::new(), Vec::new());
            let lp = reference_loss(&plus, hp, batch, &mut pre_p);
            let lm = reference_loss(&minus, hp, batch, &mut pre_m);
            if near_kink || signs(&pre_p) != base_signs || signs(&pre_m) != base_signs {
                report.excluded += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * step);
            let a = analytic.tensors()[t][k];
            let err = relative_error(a, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(err);
            if err >= tol {
                report.failures.push(format!("{name}[{k}]: analytic {a:e} numeric {numeric:e} rel {err:e}"));
            }
        }
    }
    report
}
