//! Mean-squared-error training with exact gradients and Adam.

use std::time::Instant;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{forward, init_params, Hyperparams, ModelParams, TENSOR_NAMES};
use crate::pairscore::{ScoreDataset, Split};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 512,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid training config {self:?}")))
        }
    }
}

pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("mse of an empty sequence".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(sum / predictions.len() as f64)
}

fn relu_inplace(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(crate::model::relu)
}

/// Zeroes `grad` wherever the pre-activation was not strictly positive.
fn mask_relu(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    Zip::from(grad).and(pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
}

fn affine(x: &ArrayView2<'_, f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += b;
    z
}

/// Activations of one batched pass through the asymmetric core.
struct CoreCache {
    x: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    h: Array2<f64>,
    joint: Array2<f64>,
    z3: Array2<f64>,
    a3: Array2<f64>,
    z4: Array2<f64>,
    deep: Array2<f64>,
}

fn core_forward(
    params: &ModelParams,
    hp: &Hyperparams,
    xa: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
) -> (Array1<f64>, CoreCache) {
    let n = xa.nrows();
    let j = hp.hidden_j;
    let x = concatenate![Axis(0), xa, xb];
    let z1 = affine(&x.view(), &params.w1, &params.b1);
    let a1 = relu_inplace(&z1);
    let z2 = affine(&a1.view(), &params.w2, &params.b2);
    let h = relu_inplace(&z2);
    let (ha, hb) = (h.slice(s![..n, ..]), h.slice(s![n.., ..]));
    let joint = concatenate![Axis(1), ha, hb];
    let z3 = affine(&joint.view(), &params.w3, &params.b3);
    let a3 = relu_inplace(&z3);
    let z4 = affine(&a3.view(), &params.w4, &params.b4);
    let deep = relu_inplace(&z4);

    let mut y = Array1::from_elem(n, params.b5);
    if hp.use_wide {
        let wide_w = params
            .w5
            .slice(s![..j * j])
            .into_shape_with_order((j, j))
            .expect("contiguous W5");
        // sum_pq W[p,q] ha[p] hb[q] = <ha, hb W^T>
        let hb_wt = hb.dot(&wide_w.t());
        y += &(&ha * &hb_wt).sum_axis(Axis(1));
        y += &deep.dot(&params.w5.slice(s![j * j..]));
    } else {
        y += &deep.dot(&params.w5);
    }
    let cache = CoreCache {
        x,
        z1,
        a1,
        z2,
        h,
        joint,
        z3,
        a3,
        z4,
        deep,
    };
    (y, cache)
}

fn core_backward(
    params: &ModelParams,
    hp: &Hyperparams,
    cache: &CoreCache,
    dy: &Array1<f64>,
    grads: &mut ModelParams,
) {
    let n = dy.len();
    let j = hp.hidden_j;
    let ha = cache.h.slice(s![..n, ..]);
    let hb = cache.h.slice(s![n.., ..]);
    let dy_col = dy.view().insert_axis(Axis(1));

    grads.b5 += dy.sum();
    let deep_w = if hp.use_wide {
        params.w5.slice(s![j * j..])
    } else {
        params.w5.view()
    };
    let mut dha = Array2::<f64>::zeros((n, j));
    let mut dhb = Array2::<f64>::zeros((n, j));
    if hp.use_wide {
        let wide_w = params
            .w5
            .slice(s![..j * j])
            .into_shape_with_order((j, j))
            .expect("contiguous W5");
        // dW[p,q] = sum_n dy_n ha[n,p] hb[n,q]
        let weighted_ha = &ha * &dy_col;
        let d_wide = weighted_ha.t().dot(&hb);
        let mut g_wide = grads.w5.slice_mut(s![..j * j]);
        g_wide += &d_wide.into_shape_with_order(j * j).expect("contiguous");
        dha += &(&hb.dot(&wide_w.t()) * &dy_col);
        dhb += &(&ha.dot(&wide_w) * &dy_col);
        let mut g_deep = grads.w5.slice_mut(s![j * j..]);
        g_deep += &cache.deep.t().dot(dy);
    } else {
        grads.w5 += &cache.deep.t().dot(dy);
    }

    // deep tower
    let mut dz4 = &dy_col * &deep_w.insert_axis(Axis(0));
    mask_relu(&mut dz4, &cache.z4);
    grads.w4 += &dz4.t().dot(&cache.a3);
    grads.b4 += &dz4.sum_axis(Axis(0));
    let mut dz3 = dz4.dot(&params.w4);
    mask_relu(&mut dz3, &cache.z3);
    grads.w3 += &dz3.t().dot(&cache.joint);
    grads.b3 += &dz3.sum_axis(Axis(0));
    let djoint = dz3.dot(&params.w3);
    dha += &djoint.slice(s![.., ..j]);
    dhb += &djoint.slice(s![.., j..]);

    // shared encoder, both inputs stacked
    let mut dz2 = concatenate![Axis(0), dha, dhb];
    mask_relu(&mut dz2, &cache.z2);
    grads.w2 += &dz2.t().dot(&cache.a1);
    grads.b2 += &dz2.sum_axis(Axis(0));
    let mut dz1 = dz2.dot(&params.w2);
    mask_relu(&mut dz1, &cache.z1);
    grads.w1 += &dz1.t().dot(&cache.x);
    grads.b1 += &dz1.sum_axis(Axis(0));
}

/// Batched predictions; agrees with [`forward`] up to summation order.
pub fn predict_batch(
    params: &ModelParams,
    hp: &Hyperparams,
    xa: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
) -> Array1<f64> {
    let (ab, _) = core_forward(params, hp, xa, xb);
    if hp.symmetrize {
        let (ba, _) = core_forward(params, hp, xb, xa);
        (ab + ba) / 2.0
    } else {
        ab
    }
}

/// MSE over the batch and its exact gradient with respect to every parameter.
pub fn loss_and_gradients(
    params: &ModelParams,
    hp: &Hyperparams,
    xa: ArrayView2<'_, f64>,
    xb: ArrayView2<'_, f64>,
    targets: &Array1<f64>,
) -> Result<(f64, ModelParams)> {
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if xa.nrows() != n || xb.nrows() != n {
        return Err(Error::Shape("batch inputs and targets differ in length".into()));
    }
    if xa.ncols() != hp.input_dim || xb.ncols() != hp.input_dim {
        return Err(Error::Shape(format!(
            "batch inputs have {} / {} columns, model expects {}",
            xa.ncols(),
            xb.ncols(),
            hp.input_dim
        )));
    }
    params.check_shapes(hp)?;

    let mut grads = params.zeros_like();
    let (ab, cache_ab) = core_forward(params, hp, xa, xb);
    if hp.symmetrize {
        let (ba, cache_ba) = core_forward(params, hp, xb, xa);
        let y = (&ab + &ba) / 2.0;
        let residual = &y - targets;
        let loss = residual.mapv(|r| r * r).sum() / n as f64;
        // each ordering carries half of the output
        let dy = residual * (1.0 / n as f64);
        core_backward(params, hp, &cache_ab, &dy, &mut grads);
        core_backward(params, hp, &cache_ba, &dy, &mut grads);
        Ok((loss, grads))
    } else {
        let residual = &ab - targets;
        let loss = residual.mapv(|r| r * r).sum() / n as f64;
        let dy = residual * (2.0 / n as f64);
        core_backward(params, hp, &cache_ab, &dy, &mut grads);
        Ok((loss, grads))
    }
}

/// Gradient of the batch MSE for `(x_a, x_b, target)` triples.
pub fn gradients(
    params: &ModelParams,
    hp: &Hyperparams,
    batch: &[(&[f64], &[f64], f64)],
) -> Result<ModelParams> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let d = hp.input_dim;
    let mut xa = Array2::zeros((batch.len(), d));
    let mut xb = Array2::zeros((batch.len(), d));
    for (row, (a, b, _)) in batch.iter().enumerate() {
        if a.len() != d || b.len() != d {
            return Err(Error::Shape(format!(
                "input vectors of length {} / {}, model expects {d}",
                a.len(),
                b.len()
            )));
        }
        xa.row_mut(row).assign(&ndarray::ArrayView1::from(*a));
        xb.row_mut(row).assign(&ndarray::ArrayView1::from(*b));
    }
    let targets: Array1<f64> = batch.iter().map(|(_, _, y)| *y).collect();
    Ok(loss_and_gradients(params, hp, xa.view(), xb.view(), &targets)?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam_m: ModelParams,
    pub adam_v: ModelParams,
    pub step: u64,
    pub best_val_rmse: f64,
    pub epochs_since_best: usize,
}

impl TrainState {
    pub fn new(params: ModelParams) -> Self {
        let zeros = params.zeros_like();
        Self {
            adam_m: zeros.clone(),
            adam_v: zeros,
            params,
            step: 0,
            best_val_rmse: f64::INFINITY,
            epochs_since_best: 0,
        }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any state.
pub fn adam_step(state: &mut TrainState, grads: &ModelParams, config: &TrainConfig) -> Result<()> {
    for (name, g) in TENSOR_NAMES.iter().zip(grads.tensors()) {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    if grads.param_count() != state.params.param_count() {
        return Err(Error::Shape("gradient and parameter shapes differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - config.beta1.powi(t);
    let correction2 = 1.0 - config.beta2.powi(t);
    let (b1, b2, lr, eps) = (config.beta1, config.beta2, config.learning_rate, config.epsilon);

    let params = state.params.tensors_mut();
    let ms = state.adam_m.tensors_mut();
    let vs = state.adam_v.tensors_mut();
    for (((theta, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
        for k in 0..theta.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// One training example: rows of an input matrix and the target score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExample {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_rmse: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ModelParams,
    pub last: ModelParams,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn best_val_rmse(&self) -> f64 {
        self.log
            .iter()
            .find(|e| e.epoch == self.best_epoch)
            .map_or(f64::INFINITY, |e| e.val_rmse)
    }
}

fn gather(inputs: &Array2<f64>, examples: &[PairExample]) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let d = inputs.ncols();
    let mut xa = Array2::zeros((examples.len(), d));
    let mut xb = Array2::zeros((examples.len(), d));
    for (row, ex) in examples.iter().enumerate() {
        xa.row_mut(row).assign(&inputs.row(ex.a));
        xb.row_mut(row).assign(&inputs.row(ex.b));
    }
    let y = examples.iter().map(|e| e.target).collect();
    (xa, xb, y)
}

/// RMSE using the single-pair [`forward`], the same path used at inference.
pub fn rmse_on(
    params: &ModelParams,
    hp: &Hyperparams,
    inputs: &Array2<f64>,
    examples: &[PairExample],
) -> Result<f64> {
    let mut sum = 0.0;
    for ex in examples {
        let xa = inputs.row(ex.a);
        let xb = inputs.row(ex.b);
        let y = forward(
            params,
            hp,
            xa.as_slice().expect("standard layout"),
            xb.as_slice().expect("standard layout"),
        )?;
        sum += (y - ex.target).powi(2);
    }
    Ok((sum / examples.len() as f64).sqrt())
}

/// Minibatch Adam with per-epoch validation and early stopping.
pub fn fit(
    inputs: &Array2<f64>,
    train: &[PairExample],
    val: &[PairExample],
    hp: &Hyperparams,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    hp.validate()?;
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation sets must be nonempty".into(),
        ));
    }
    if inputs.ncols() != hp.input_dim {
        return Err(Error::Shape(format!(
            "inputs are {}-d, model expects {}",
            inputs.ncols(),
            hp.input_dim
        )));
    }
    let started = Instant::now();
    let mut state = TrainState::new(init_params(hp, config.seed));
    let mut best = state.params.clone();
    let mut best_epoch = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch: Vec<PairExample> = Vec::with_capacity(config.batch_size);
    let mut log = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            let (xa, xb, y) = gather(inputs, &batch);
            let (loss, grads) = loss_and_gradients(&state.params, hp, xa.view(), xb.view(), &y)?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut state, &grads, config)?;
        }
        let val_rmse = rmse_on(&state.params, hp, inputs, val)?;
        let entry = EpochLog {
            epoch,
            train_mse: loss_sum / train.len() as f64,
            val_rmse,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&entry);
        log.push(entry);

        if val_rmse < state.best_val_rmse {
            state.best_val_rmse = val_rmse;
            state.epochs_since_best = 0;
            best = state.params.clone();
            best_epoch = epoch;
        } else {
            state.epochs_since_best += 1;
            if state.epochs_since_best >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        best,
        last: state.params,
        best_epoch,
        log,
    })
}

/// Stacks the embedding rows in table order and returns the token index.
pub fn input_matrix(embeddings: &EmbeddingTable) -> (Vec<String>, Array2<f64>) {
    let tokens: Vec<String> = embeddings.tokens().map(str::to_owned).collect();
    let mut matrix = Array2::zeros((tokens.len(), embeddings.dim()));
    for (row, (_, v)) in embeddings.iter().enumerate() {
        matrix.row_mut(row).assign(&ndarray::ArrayView1::from(v));
    }
    (tokens, matrix)
}

/// Examples for one split, inputs in canonical (lexicographic) order.
pub fn split_examples(
    dataset: &ScoreDataset,
    tokens: &[String],
    split: Split,
) -> Result<Vec<PairExample>> {
    let index = |t: &str| {
        tokens
            .binary_search_by(|probe| probe.as_str().cmp(t))
            .map_err(|_| Error::MissingTokens(vec![t.to_owned()]))
    };
    dataset
        .in_split(split)
        .map(|p| {
            Ok(PairExample {
                a: index(&p.a)?,
                b: index(&p.b)?,
                target: p.score,
            })
        })
        .collect()
}

pub fn train_loop(
    dataset: &ScoreDataset,
    embeddings: &EmbeddingTable,
    hp: &Hyperparams,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let missing = embeddings.missing(dataset.tokens());
    if !missing.is_empty() {
        return Err(Error::MissingTokens(missing));
    }
    if embeddings.dim() != hp.input_dim {
        return Err(Error::Shape(format!(
            "embeddings are {}-d, model expects {}",
            embeddings.dim(),
            hp.input_dim
        )));
    }
    let (tokens, inputs) = input_matrix(embeddings);
    let train = split_examples(dataset, &tokens, Split::Train)?;
    let val = split_examples(dataset, &tokens, Split::Val)?;
    fit(&inputs, &train, &val, hp, config, on_epoch)
}
