//! Fixed ingredient vectors.
//!
//! Vectors come from a word2vec-style text file or are derived from the
//! corpus by factorizing the positive shifted-PMI co-occurrence matrix.
//! Either way they are frozen inputs to the model.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::CountTable;
use crate::error::{Error, Result};
use crate::pairscore::pmi;

/// Desk-scale default vector length.
pub const DEFAULT_DIM: usize = 64;

/// Half-width of the uniform range used by [`random_embeddings`].
pub const RANDOM_INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector of length {} in a {}-d table",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite embedding value".into()));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(t, v)| (t.as_str(), v.as_slice()))
    }

    /// Tokens from `wanted` without a vector, sorted.
    pub fn missing<'a, I>(&self, wanted: I) -> Vec<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let missing: BTreeSet<&str> = wanted
            .into_iter()
            .filter(|t| !self.vectors.contains_key(*t))
            .collect();
        missing.into_iter().map(str::to_owned).collect()
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let malformed = || Error::Malformed {
        line: 1,
        message: "expected header `<n_tokens> <dim>`".into(),
    };
    let n = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(malformed)?;
    let dim: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(malformed)?;
    if parts.next().is_some() || dim == 0 {
        return Err(malformed());
    }
    Ok((n, dim))
}

/// Streams an embedding file, keeping only rows accepted by `keep`.
fn read_embeddings<R, F>(source: R, mut keep: F) -> Result<EmbeddingTable>
where
    R: BufRead,
    F: FnMut(&str) -> bool,
{
    let mut lines = source.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::Malformed {
                line: 1,
                message: "empty embedding file".into(),
            })
        }
    };
    let (_, dim) = parse_header(&header)?;
    let mut table = EmbeddingTable::new(dim);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx + 2;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            continue;
        };
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        if !keep(token) {
            continue;
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed {
                line: line_no,
                message: "non-finite value".into(),
            });
        }
        table.vectors.insert(token.to_owned(), vector);
    }
    Ok(table)
}

/// Loads vectors for `vocabulary`; fails listing every token the file lacks.
pub fn load_embeddings<R: BufRead>(source: R, vocabulary: &BTreeSet<String>) -> Result<EmbeddingTable> {
    let table = read_embeddings(source, |t| vocabulary.contains(t))?;
    let missing = table.missing(vocabulary.iter().map(String::as_str));
    if !missing.is_empty() {
        return Err(Error::MissingTokens(missing));
    }
    Ok(table)
}

/// Loads every vector in the file.
pub fn load_all_embeddings<R: BufRead>(source: R) -> Result<EmbeddingTable> {
    read_embeddings(source, |_| true)
}

/// Writes the header and one row per token (sorted), 6-decimal floats.
pub fn save_embeddings<W: Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", table.len(), table.dim)?;
    for (token, vector) in &table.vectors {
        write!(out, "{token}")?;
        for v in vector {
            // Avoid writing "-0.000000".
            let v = if v.abs() < 5e-7 { 0.0 } else { *v };
            write!(out, " {v:.6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Eigendecomposition of the shifted-PPMI matrix, truncated to the
/// `dim` eigenvalues of largest magnitude.
#[derive(Debug, Clone)]
pub struct PpmiFactorization {
    pub tokens: Vec<String>,
    /// Dense row-major `n x n` shifted-PPMI matrix.
    pub matrix: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl PpmiFactorization {
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// `U S U^T` as a dense row-major matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n * n];
        for (lambda, u) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for r in 0..n {
                let scaled = lambda * u[r];
                for c in 0..n {
                    out[r * n + c] += scaled * u[c];
                }
            }
        }
        out
    }

    /// Row embeddings `U |S|^{1/2}`.
    pub fn embeddings(&self) -> EmbeddingTable {
        let dim = self.eigenvalues.len();
        let mut table = EmbeddingTable::new(dim);
        for (r, token) in self.tokens.iter().enumerate() {
            let vector = self
                .eigenvalues
                .iter()
                .zip(&self.eigenvectors)
                .map(|(lambda, u)| u[r] * lambda.abs().sqrt())
                .collect();
            table.vectors.insert(token.clone(), vector);
        }
        table
    }
}

/// `M[x][y] = max(0, pmi(x, y) - ln(shift))` over known pairs, zero elsewhere.
pub fn shifted_ppmi_matrix(table: &CountTable, shift: f64) -> Result<(Vec<String>, Vec<f64>)> {
    if !(shift.is_finite() && shift > 0.0) {
        return Err(Error::InvalidArgument("shift must be positive".into()));
    }
    let tokens: Vec<String> = table.vocabulary().map(str::to_owned).collect();
    let n = tokens.len();
    let index: BTreeMap<&str, usize> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let offset = shift.ln();
    let mut matrix = vec![0.0; n * n];
    for (key, &cooc) in &table.cooccurrence {
        let (Some(&i), Some(&j)) = (index.get(key.a()), index.get(key.b())) else {
            continue;
        };
        let value = pmi(
            cooc,
            table.occurrence(key.a()),
            table.occurrence(key.b()),
            table.recipe_count,
        )?;
        let positive = (value - offset).max(0.0);
        matrix[i * n + j] = positive;
        matrix[j * n + i] = positive;
    }
    Ok((tokens, matrix))
}

/// Factorizes the shifted-PPMI matrix of `table`'s vocabulary.
///
/// The symmetric eigensolver is direct, so the result does not depend on
/// `seed`; the argument is kept so callers record it alongside the artifact.
pub fn factorize_ppmi(table: &CountTable, dim: usize, shift: f64, _seed: u64) -> Result<PpmiFactorization> {
    let n = table.vocab_size();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "vocabulary of {n} token(s) is too small to embed"
        )));
    }
    if dim == 0 || dim > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dim {dim} must be between 1 and the vocabulary size {n}"
        )));
    }
    let (tokens, matrix) = shifted_ppmi_matrix(table, shift)?;
    let eigen = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &matrix));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eigen.eigenvalues[y]
            .abs()
            .total_cmp(&eigen.eigenvalues[x].abs())
            .then(x.cmp(&y))
    });
    order.truncate(dim);

    let mut eigenvalues = Vec::with_capacity(dim);
    let mut eigenvectors = Vec::with_capacity(dim);
    for k in order {
        let mut u: Vec<f64> = eigen.eigenvectors.column(k).iter().copied().collect();
        // Fix the sign so the largest-magnitude component is positive.
        let pivot = u
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
        eigenvalues.push(eigen.eigenvalues[k]);
        eigenvectors.push(u);
    }
    Ok(PpmiFactorization {
        tokens,
        matrix,
        eigenvalues,
        eigenvectors,
    })
}

/// PPMI+SVD embeddings for the vocabulary of a filtered count table.
pub fn train_ppmi_svd(table: &CountTable, dim: usize, shift: f64, seed: u64) -> Result<EmbeddingTable> {
    Ok(factorize_ppmi(table, dim, shift, seed)?.embeddings())
}

/// Seeded uniform vectors in `[-0.05, 0.05]`. Each token draws from its own
/// stream keyed by `seed` and the token bytes, so a token's vector does not
/// depend on which other tokens are present.
pub fn random_embeddings<'a, I>(tokens: I, dim: usize, seed: u64) -> EmbeddingTable
where
    I: IntoIterator<Item = &'a str>,
{
    let mut table = EmbeddingTable::new(dim);
    for token in tokens {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a(token.as_bytes()).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        let vector = (0..dim)
            .map(|_| rng.random_range(-RANDOM_INIT_RANGE..=RANDOM_INIT_RANGE))
            .collect();
        table.vectors.insert(token.to_owned(), vector);
    }
    table
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}
