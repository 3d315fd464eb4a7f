//! Siamese encoder with a wide&deep scoring head.
//!
//! ```text
//! h_a = relu(W2 relu(W1 x_a + b1) + b2)          (same weights for x_b)
//! d   = relu(W4 relu(W3 [h_a; h_b] + b3) + b4)
//! w   = flatten(h_a ⊗ h_b)                        row-major, length j²
//! y   = W5 [w; d] + b5
//! ```
//!
//! Without the wide part `y = W5 d + b5`. With `symmetrize` the score is the
//! mean of both input orders.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub input_dim: usize,
    pub hidden_i: usize,
    pub hidden_j: usize,
    pub symmetrize: bool,
    pub use_wide: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            input_dim: 64,
            hidden_i: 64,
            hidden_j: 64,
            symmetrize: false,
            use_wide: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_i == 0 || self.hidden_j == 0 {
            return Err(Error::InvalidArgument(
                "input_dim, hidden_i and hidden_j must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn wide_len(&self) -> usize {
        self.hidden_j * self.hidden_j
    }

    /// Column count of `W5`.
    pub fn head_len(&self) -> usize {
        if self.use_wide {
            self.wide_len() + self.hidden_j
        } else {
            self.hidden_j
        }
    }
}

/// All weights and biases. `w5` is the single row of `W5`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    pub w4: Array2<f64>,
    pub b4: Array1<f64>,
    pub w5: Array1<f64>,
    pub b5: f64,
}

/// Parameter tensor names, in storage order.
pub const TENSOR_NAMES: [&str; 10] = ["W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4", "W5", "b5"];

impl ModelParams {
    pub fn zeros(hp: &Hyperparams) -> Self {
        let (d, i, j) = (hp.input_dim, hp.hidden_i, hp.hidden_j);
        Self {
            w1: Array2::zeros((i, d)),
            b1: Array1::zeros(i),
            w2: Array2::zeros((j, i)),
            b2: Array1::zeros(j),
            w3: Array2::zeros((j, 2 * j)),
            b3: Array1::zeros(j),
            w4: Array2::zeros((j, j)),
            b4: Array1::zeros(j),
            w5: Array1::zeros(hp.head_len()),
            b5: 0.0,
        }
    }

    /// Same shapes, every entry zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    pub fn check_shapes(&self, hp: &Hyperparams) -> Result<()> {
        let expected = Self::zeros(hp);
        let ours = self.shapes();
        let theirs = expected.shapes();
        for (name, (a, b)) in TENSOR_NAMES.iter().zip(ours.iter().zip(theirs.iter())) {
            if a != b {
                return Err(Error::Shape(format!(
                    "{name} has shape {a:?}, expected {b:?}"
                )));
            }
        }
        if self.tensors().iter().flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }

    fn shapes(&self) -> [Vec<usize>; 10] {
        [
            self.w1.shape().to_vec(),
            self.b1.shape().to_vec(),
            self.w2.shape().to_vec(),
            self.b2.shape().to_vec(),
            self.w3.shape().to_vec(),
            self.b3.shape().to_vec(),
            self.w4.shape().to_vec(),
            self.b4.shape().to_vec(),
            vec![1, self.w5.len()],
            vec![1],
        ]
    }

    /// Flat views of every tensor, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[f64]; 10] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
            self.w4.as_slice().expect("standard layout"),
            self.b4.as_slice().expect("standard layout"),
            self.w5.as_slice().expect("standard layout"),
            std::slice::from_ref(&self.b5),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
            self.w4.as_slice_mut().expect("standard layout"),
            self.b4.as_slice_mut().expect("standard layout"),
            self.w5.as_slice_mut().expect("standard layout"),
            std::slice::from_mut(&mut self.b5),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// He-style Gaussian weights (std `sqrt(2 / fan_in)`), zero biases.
pub fn init_params(hp: &Hyperparams, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(hp);
    let mut fill = |values: &mut [f64], fan_in: usize| {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        for v in values.iter_mut() {
            *v = normal.sample(&mut rng);
        }
    };
    fill(params.w1.as_slice_mut().unwrap(), hp.input_dim);
    fill(params.w2.as_slice_mut().unwrap(), hp.hidden_i);
    fill(params.w3.as_slice_mut().unwrap(), 2 * hp.hidden_j);
    fill(params.w4.as_slice_mut().unwrap(), hp.hidden_j);
    fill(params.w5.as_slice_mut().unwrap(), hp.head_len());
    params
}

pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn dense(w: &Array2<f64>, b: &Array1<f64>, x: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut z = w.dot(&x);
    z += b;
    z.mapv_inplace(relu);
    z
}

/// Shared encoder applied to one ingredient vector.
pub fn encode(params: &ModelParams, x: &[f64]) -> Result<Array1<f64>> {
    if x.len() != params.w1.ncols() {
        return Err(Error::Shape(format!(
            "input of length {} for an encoder expecting {}",
            x.len(),
            params.w1.ncols()
        )));
    }
    let hidden = dense(&params.w1, &params.b1, ArrayView1::from(x));
    Ok(dense(&params.w2, &params.b2, hidden.view()))
}

fn head(params: &ModelParams, use_wide: bool, ha: &Array1<f64>, hb: &Array1<f64>) -> f64 {
    let j = ha.len();
    let mut joint = Array1::zeros(2 * j);
    joint.slice_mut(ndarray::s![..j]).assign(ha);
    joint.slice_mut(ndarray::s![j..]).assign(hb);
    let deep = dense(&params.w4, &params.b4, dense(&params.w3, &params.b3, joint.view()).view());

    let mut y = params.b5;
    if use_wide {
        let (wide_w, deep_w) = params.w5.view().split_at(ndarray::Axis(0), j * j);
        let mut wide = 0.0;
        for p in 0..j {
            let row = wide_w.slice(ndarray::s![p * j..(p + 1) * j]);
            wide += ha[p] * row.dot(hb);
        }
        y += wide + deep_w.dot(&deep);
    } else {
        y += params.w5.dot(&deep);
    }
    y
}

/// Scores one ordered pair of ingredient vectors.
pub fn forward(params: &ModelParams, hp: &Hyperparams, xa: &[f64], xb: &[f64]) -> Result<f64> {
    if params.w5.len() != hp.head_len() {
        return Err(Error::Shape(format!(
            "W5 has {} columns, hyperparameters imply {}",
            params.w5.len(),
            hp.head_len()
        )));
    }
    let ha = encode(params, xa)?;
    let hb = encode(params, xb)?;
    let ab = head(params, hp.use_wide, &ha, &hb);
    if hp.symmetrize {
        let ba = head(params, hp.use_wide, &hb, &ha);
        Ok((ab + ba) / 2.0)
    } else {
        Ok(ab)
    }
}

/// Where the model's input vectors came from. Checkpoints trained on random
/// vectors record the seed so later stages can regenerate them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputEmbeddings {
    #[default]
    File,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyperparams: Hyperparams,
    pub input_embeddings: InputEmbeddings,
    pub params: ModelParams,
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    hyperparams: Hyperparams,
    #[serde(default)]
    input_embeddings: InputEmbeddings,
    W1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    W2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    W3: Vec<Vec<f64>>,
    b3: Vec<f64>,
    W4: Vec<Vec<f64>>,
    b4: Vec<f64>,
    W5: Vec<Vec<f64>>,
    b5: f64,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(name: &str, rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::Shape(format!("{name} has ragged rows")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n_rows, n_cols), flat).map_err(|e| Error::Shape(format!("{name}: {e}")))
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let p = &self.params;
        let file = CheckpointFile {
            format_version: CHECKPOINT_FORMAT_VERSION,
            hyperparams: self.hyperparams,
            input_embeddings: self.input_embeddings,
            W1: rows(&p.w1),
            b1: p.b1.to_vec(),
            W2: rows(&p.w2),
            b2: p.b2.to_vec(),
            W3: rows(&p.w3),
            b3: p.b3.to_vec(),
            W4: rows(&p.w4),
            b4: p.b4.to_vec(),
            W5: vec![p.w5.to_vec()],
            b5: p.b5,
        };
        serde_json::to_writer(&mut out, &file)?;
        writeln!(out)?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_reader(source)?;
        if file.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint format_version {}",
                file.format_version
            )));
        }
        let w5 = matrix("W5", file.W5)?;
        if w5.nrows() != 1 {
            return Err(Error::Shape("W5 must have exactly one row".into()));
        }
        let params = ModelParams {
            w1: matrix("W1", file.W1)?,
            b1: Array1::from(file.b1),
            w2: matrix("W2", file.W2)?,
            b2: Array1::from(file.b2),
            w3: matrix("W3", file.W3)?,
            b3: Array1::from(file.b3),
            w4: matrix("W4", file.W4)?,
            b4: Array1::from(file.b4),
            w5: w5.row(0).to_owned(),
            b5: file.b5,
        };
        file.hyperparams.validate()?;
        params.check_shapes(&file.hyperparams)?;
        Ok(Self {
            hyperparams: file.hyperparams,
            input_embeddings: file.input_embeddings,
            params,
        })
    }
}
