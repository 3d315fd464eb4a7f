//! Regression and ranking metrics.
//!
//! NDCG gains are `max(true score, 0)` with a `log2(rank + 1)` discount. ROC-AUC is
//! the Mann–Whitney statistic with ties counted as one half.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::pairscore::{ScoreDataset, Split};
use crate::predictor::PairPredictor;

pub const NDCG_CUTOFFS: [usize; 6] = [10, 20, 50, 100, 500, 1000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mse: f64,
    pub mae: f64,
    pub corr: f64,
    pub r2: f64,
}

/// RMSE, MSE, MAE, Pearson correlation and R².
///
/// Constant predictions have no defined correlation; it is reported as 0.
pub fn regression_metrics(predictions: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.len() < 2 {
        return Err(Error::InvalidArgument(
            "regression metrics need at least two examples".into(),
        ));
    }
    let n = targets.len() as f64;
    let t_mean = targets.iter().sum::<f64>() / n;
    let p_mean = predictions.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|t| (t - t_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric(
            "corr and r2 are undefined for constant targets".into(),
        ));
    }
    let mut ss_res = 0.0;
    let mut abs_sum = 0.0;
    let mut cov = 0.0;
    let mut p_var = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        ss_res += (p - t).powi(2);
        abs_sum += (p - t).abs();
        cov += (p - p_mean) * (t - t_mean);
        p_var += (p - p_mean).powi(2);
    }
    let mse = ss_res / n;
    let constant = predictions.iter().all(|p| *p == predictions[0]);
    let corr = if constant || p_var == 0.0 {
        0.0
    } else {
        (cov / (p_var * ss_tot).sqrt()).clamp(-1.0, 1.0)
    };
    Ok(RegressionMetrics {
        rmse: mse.sqrt(),
        mse,
        mae: abs_sum / n,
        corr,
        r2: 1.0 - ss_res / ss_tot,
    })
}

fn dcg(scores: &[f64], k: usize) -> f64 {
    scores
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, s)| s.max(0.0) / ((r + 2) as f64).log2())
        .sum()
}

/// NDCG@k of `ranked_true_scores` (true scores listed in predicted order)
/// against the descending order of the same multiset.
pub fn ndcg_at_k(ranked_true_scores: &[f64], ideal_true_scores: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut ideal = ideal_true_scores.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let mut check = ranked_true_scores.to_vec();
    check.sort_by(|a, b| b.total_cmp(a));
    if check.len() != ideal.len() || check.iter().zip(&ideal).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err(Error::InvalidArgument(
            "ranked and ideal scores are not the same multiset".into(),
        ));
    }
    let ideal_dcg = dcg(&ideal, k);
    if ideal_dcg == 0.0 {
        return Ok(1.0);
    }
    Ok((dcg(ranked_true_scores, k) / ideal_dcg).clamp(0.0, 1.0))
}

/// Area under the ROC curve via average ranks (ties contribute one half).
pub fn roc_auc(predictions: &[f64], labels: &[bool]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "roc_auc needs both positive and negative labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && predictions[order[end]] == predictions[order[start]] {
            end += 1;
        }
        // ranks are 1-based; the tie group shares the average rank
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        pos_rank_sum += avg_rank * positives as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    let u = pos_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// Cosine similarity of the two ingredient vectors, used as a score.
pub fn cosine_baseline(embeddings: &EmbeddingTable, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|(a, b)| {
            let lookup = |t: &str| {
                embeddings.get(t).ok_or_else(|| Error::UnknownIngredient {
                    token: t.to_owned(),
                    suggestions: Vec::new(),
                })
            };
            cosine(lookup(a)?, lookup(b)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub predictor: String,
    pub split: Split,
    pub n_examples: usize,
    pub threshold: f64,
    pub rmse: f64,
    pub mse: f64,
    pub mae: f64,
    pub corr: f64,
    pub r2: f64,
    pub ndcg_at: BTreeMap<usize, f64>,
    /// `None` when the split holds only one class under the threshold.
    pub roc_auc: Option<f64>,
}

impl MetricsReport {
    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }

    pub const CSV_HEADER: &'static str =
        "predictor,split,n_examples,rmse,mse,mae,corr,r2,ndcg@10,ndcg@20,ndcg@50,ndcg@100,ndcg@500,ndcg@1000,roc_auc";

    /// One row of a model comparison table, 4 decimals.
    pub fn csv_row(&self) -> String {
        let mut fields = vec![
            self.predictor.clone(),
            self.split.to_string(),
            self.n_examples.to_string(),
        ];
        for v in [self.rmse, self.mse, self.mae, self.corr, self.r2] {
            fields.push(format!("{v:.4}"));
        }
        for k in NDCG_CUTOFFS {
            fields.push(self.ndcg_at.get(&k).map_or(String::new(), |v| format!("{v:.4}")));
        }
        fields.push(self.roc_auc.map_or(String::new(), |v| format!("{v:.4}")));
        fields.join(",")
    }
}

/// Scores every pair in `split` with `predictor` and computes the full suite.
pub fn evaluate(
    predictor: &dyn PairPredictor,
    dataset: &ScoreDataset,
    split: Split,
    threshold: f64,
) -> Result<MetricsReport> {
    let pairs: Vec<_> = dataset.in_split(split).collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(format!("split `{split}` is empty")));
    }
    let predictions = pairs
        .iter()
        .map(|p| predictor.predict(&p.a, &p.b))
        .collect::<Result<Vec<f64>>>()?;
    let truth: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    let reg = regression_metrics(&predictions, &truth)?;

    // pairs are already in key order, so a stable sort breaks ties by key
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| predictions[b].total_cmp(&predictions[a]));
    let ranked: Vec<f64> = order.iter().map(|&i| truth[i]).collect();
    let ndcg_at = NDCG_CUTOFFS
        .iter()
        .map(|&k| Ok((k, ndcg_at_k(&ranked, &truth, k)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let labels: Vec<bool> = truth.iter().map(|t| *t >= threshold).collect();
    let roc = match roc_auc(&predictions, &labels) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(MetricsReport {
        predictor: predictor.name().to_owned(),
        split,
        n_examples: pairs.len(),
        threshold,
        rmse: reg.rmse,
        mse: reg.mse,
        mae: reg.mae,
        corr: reg.corr,
        r2: reg.r2,
        ndcg_at,
        roc_auc: roc,
    })
}
