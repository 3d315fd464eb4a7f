//! PMI / NPMI pairing scores and the known-pair dataset.
//!
//! Logarithms are natural. NPMI does not depend on the base; PMI does.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CountTable, PairKey};
use crate::error::{Error, Result};

fn check_counts(cooc: u64, occ_a: u64, occ_b: u64, n_recipes: u64) -> Result<()> {
    if cooc == 0 {
        return Err(Error::ZeroCooccurrence);
    }
    if occ_a == 0 || occ_b == 0 || n_recipes == 0 {
        return Err(Error::InvalidArgument("counts must be at least 1".into()));
    }
    if cooc > occ_a.min(occ_b) || occ_a > n_recipes || occ_b > n_recipes {
        return Err(Error::InvalidArgument(format!(
            "inconsistent counts: cooc={cooc} occ_a={occ_a} occ_b={occ_b} n={n_recipes}"
        )));
    }
    Ok(())
}

/// `ln(p(a,b) / (p(a) p(b)))` with probabilities taken over recipes.
pub fn pmi(cooc: u64, occ_a: u64, occ_b: u64, n_recipes: u64) -> Result<f64> {
    check_counts(cooc, occ_a, occ_b, n_recipes)?;
    // p(a,b)/(p(a)p(b)) = cooc*n / (occ_a*occ_b); both products are exact in f64
    // for any realistic corpus size.
    let ratio = (cooc as f64 * n_recipes as f64) / (occ_a as f64 * occ_b as f64);
    Ok(ratio.ln())
}

/// PMI divided by `-ln p(a,b)`, in `[-1, 1]`.
pub fn npmi(cooc: u64, occ_a: u64, occ_b: u64, n_recipes: u64) -> Result<f64> {
    let pmi = pmi(cooc, occ_a, occ_b, n_recipes)?;
    // p(a) = p(b) = p(a,b); this also covers p(a,b) = 1 where h vanishes.
    if cooc == occ_a && cooc == occ_b {
        return Ok(1.0);
    }
    let h = (n_recipes as f64 / cooc as f64).ln();
    Ok((pmi / h).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub a: String,
    pub b: String,
    pub occ_a: u64,
    pub occ_b: u64,
    pub cooc: u64,
    pub score: f64,
}

impl PairStats {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.a, &self.b).expect("scored pairs are never self-pairs")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Summary of the score distribution. `top_threshold` is `mean + 2 * std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub n_pairs: usize,
    pub mean: f64,
    pub std: f64,
    pub top_threshold: f64,
}

impl ScoreStats {
    /// Population statistics over all scores.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Ok(Self {
            n_pairs: scores.len(),
            mean,
            std,
            top_threshold: mean + 2.0 * std,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.train, self.val, self.test]
            .iter()
            .all(|r| r.is_finite() && *r > 0.0);
        if !all_positive {
            return Err(Error::InvalidArgument("split ratios must be positive".into()));
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios must sum to 1 (got {sum})"
            )));
        }
        Ok(())
    }

    /// Train and val sizes are floored; test takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad ratios `{s}`")))?;
        match parts.as_slice() {
            [train, val, test] => {
                let ratios = Self {
                    train: *train,
                    val: *val,
                    test: *test,
                };
                ratios.validate()?;
                Ok(ratios)
            }
            _ => Err(Error::InvalidArgument(format!(
                "expected three comma-separated ratios, got `{s}`"
            ))),
        }
    }
}

/// Known pairs with their scores, split assignment and distribution statistics.
#[derive(Debug, Clone)]
pub struct ScoreDataset {
    pairs: Vec<PairStats>,
    splits: Vec<Split>,
    index: HashMap<PairKey, usize>,
    stats: ScoreStats,
}

impl ScoreDataset {
    /// Assembles a dataset from already-scored pairs; pairs are reordered by key.
    pub fn from_parts(mut rows: Vec<(PairStats, Split)>) -> Result<Self> {
        rows.sort_by(|x, y| (&x.0.a, &x.0.b).cmp(&(&y.0.a, &y.0.b)));
        let (pairs, splits): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
        let stats = ScoreStats::from_scores(&scores)?;
        let mut index = HashMap::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            if p.a >= p.b {
                return Err(Error::InvalidArgument(format!(
                    "pair ({}, {}) is not in canonical order",
                    p.a, p.b
                )));
            }
            if index.insert(p.key(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate pair ({}, {})",
                    p.a, p.b
                )));
            }
        }
        Ok(Self {
            pairs,
            splits,
            index,
            stats,
        })
    }

    pub fn pairs(&self) -> &[PairStats] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn stats(&self) -> &ScoreStats {
        &self.stats
    }

    pub fn split_of(&self, key: &PairKey) -> Option<Split> {
        self.index.get(key).map(|&i| self.splits[i])
    }

    pub fn get(&self, x: &str, y: &str) -> Option<&PairStats> {
        let key = PairKey::new(x, y)?;
        self.index.get(&key).map(|&i| &self.pairs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairStats, Split)> {
        self.pairs.iter().zip(self.splits.iter().copied())
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &PairStats> {
        self.iter().filter(move |(_, s)| *s == split).map(|(p, _)| p)
    }

    /// Every token that appears in at least one pair, sorted.
    pub fn tokens(&self) -> std::collections::BTreeSet<&str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.a.as_str(), p.b.as_str()])
            .collect()
    }
}

/// Scores every surviving pair and assigns splits by a seeded shuffle.
pub fn build_dataset(table: &CountTable, seed: u64, ratios: SplitRatios) -> Result<ScoreDataset> {
    ratios.validate()?;
    if table.cooccurrence.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = table.recipe_count;
    let pairs = table
        .cooccurrence
        .iter()
        .map(|(key, &cooc)| {
            let occ_a = table.occurrence(key.a());
            let occ_b = table.occurrence(key.b());
            Ok(PairStats {
                a: key.a().to_owned(),
                b: key.b().to_owned(),
                occ_a,
                occ_b,
                cooc,
                score: npmi(cooc, occ_a, occ_b, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_val, _) = ratios.sizes(pairs.len());
    let mut splits = vec![Split::Test; pairs.len()];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    ScoreDataset::from_parts(pairs.into_iter().zip(splits).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Complementary,
    NonComplementary,
}

/// Complementary iff `score >= threshold`.
pub fn classify_pair(score: f64, threshold: f64) -> PairClass {
    if score >= threshold {
        PairClass::Complementary
    } else {
        PairClass::NonComplementary
    }
}

const SCORES_HEADER: &str = "ingredient_a\tingredient_b\tocc_a\tocc_b\tcooc\tnpmi\tsplit";

pub fn write_scores_tsv<W: Write>(dataset: &ScoreDataset, mut out: W) -> Result<()> {
    writeln!(out, "{SCORES_HEADER}")?;
    for (p, split) in dataset.iter() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
            p.a, p.b, p.occ_a, p.occ_b, p.cooc, p.score, split
        )?;
    }
    Ok(())
}

/// Reads a scores file. Scores carry the file's 6-decimal precision and the
/// statistics are recomputed from them.
pub fn read_scores_tsv<R: BufRead>(source: R) -> Result<ScoreDataset> {
    let mut rows = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line_no == 1 {
            if line != SCORES_HEADER {
                return Err(Error::Malformed {
                    line: 1,
                    message: "unexpected scores header".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| Error::Malformed {
            line: line_no,
            message: format!("bad {what}"),
        };
        if fields.len() != 7 {
            return Err(bad("column count"));
        }
        let stats = PairStats {
            a: fields[0].to_owned(),
            b: fields[1].to_owned(),
            occ_a: fields[2].parse().map_err(|_| bad("occ_a"))?,
            occ_b: fields[3].parse().map_err(|_| bad("occ_b"))?,
            cooc: fields[4].parse().map_err(|_| bad("cooc"))?,
            score: fields[5].parse().map_err(|_| bad("npmi"))?,
        };
        let split: Split = fields[6].parse().map_err(|_| bad("split"))?;
        rows.push((stats, split));
    }
    ScoreDataset::from_parts(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmi_independence_and_complete() {
        assert_eq!(pmi(1, 2, 2, 4).unwrap(), 0.0);
        let k = 7;
        assert!((pmi(k, k, k, 4 * k).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(npmi(k, k, k, 4 * k).unwrap(), 1.0);
    }

    #[test]
    fn pmi_table_counts() {
        // ln(14657 * 1029720 / (51756 * 58931)), evaluated by hand: 1.59905...
        let v = pmi(14657, 51756, 58931, 1_029_720).unwrap();
        assert!((v - 1.599).abs() < 1e-3, "{v}");
    }

    #[test]
    fn zero_cooccurrence_is_rejected() {
        assert!(matches!(pmi(0, 3, 3, 10), Err(Error::ZeroCooccurrence)));
        assert!(matches!(npmi(0, 3, 3, 10), Err(Error::ZeroCooccurrence)));
        assert!(npmi(4, 3, 3, 10).is_err());
        assert!(npmi(1, 11, 3, 10).is_err());
    }

    #[test]
    fn full_corpus_pair_scores_one() {
        assert_eq!(npmi(10, 10, 10, 10).unwrap(), 1.0);
    }

    #[test]
    fn classify_boundary() {
        assert_eq!(classify_pair(0.274, 0.274), PairClass::Complementary);
        assert_eq!(classify_pair(0.273, 0.274), PairClass::NonComplementary);
        assert_eq!(classify_pair(-0.589, 0.274), PairClass::NonComplementary);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(SplitRatios::default().sizes(100), (80, 10, 10));
        assert_eq!(SplitRatios::default().sizes(7), (5, 0, 2));
        assert!("0.8,0.1,0.2".parse::<SplitRatios>().is_err());
        assert!("0.8,0.2".parse::<SplitRatios>().is_err());
        assert_eq!(
            "0.8, 0.1, 0.1".parse::<SplitRatios>().unwrap(),
            SplitRatios::default()
        );
    }

    #[test]
    fn stats_are_population() {
        let s = ScoreStats::from_scores(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(s.top_threshold, 4.0);
    }

    #[test]
    fn empty_table_has_no_dataset() {
        let table = CountTable::default();
        assert!(matches!(
            build_dataset(&table, 1, SplitRatios::default()),
            Err(Error::EmptyDataset)
        ));
    }
}
