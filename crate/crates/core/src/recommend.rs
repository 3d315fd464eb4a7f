//! Pair lookups, top-K partner ranking and comparison grids.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairscore::ScoreDataset;
use crate::predictor::PairPredictor;

const MAX_SUGGESTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingStatus {
    Known,
    Unknown,
}

impl fmt::Display for PairingStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairingStatus::Known => "known",
            PairingStatus::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingAnswer {
    pub partner: String,
    pub predicted_score: f64,
    pub status: PairingStatus,
    pub true_score: Option<f64>,
    pub cooccurrence: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankFilter {
    #[default]
    All,
    KnownOnly,
    UnknownOnly,
}

impl RankFilter {
    fn admits(self, status: PairingStatus) -> bool {
        match self {
            RankFilter::All => true,
            RankFilter::KnownOnly => status == PairingStatus::Known,
            RankFilter::UnknownOnly => status == PairingStatus::Unknown,
        }
    }
}

impl FromStr for RankFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(RankFilter::All),
            "known" | "known_only" => Ok(RankFilter::KnownOnly),
            "unknown" | "unknown_only" => Ok(RankFilter::UnknownOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown filter `{other}` (expected all, known or unknown)"
            ))),
        }
    }
}

/// Read-only query surface over a predictor, the known-pair dataset and the
/// filtered vocabulary (token -> occurrence count).
pub struct PairingEngine {
    predictor: Arc<dyn PairPredictor>,
    dataset: Arc<ScoreDataset>,
    vocabulary: BTreeMap<String, u64>,
}

impl PairingEngine {
    pub fn new(
        predictor: Arc<dyn PairPredictor>,
        dataset: Arc<ScoreDataset>,
        vocabulary: BTreeMap<String, u64>,
    ) -> Result<Self> {
        let missing: Vec<String> = dataset
            .tokens()
            .into_iter()
            .filter(|t| !vocabulary.contains_key(*t))
            .map(str::to_owned)
            .collect();
        if !missing.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "dataset tokens outside the vocabulary: {}",
                missing.join(", ")
            )));
        }
        Ok(Self {
            predictor,
            dataset,
            vocabulary,
        })
    }

    pub fn predictor(&self) -> &dyn PairPredictor {
        self.predictor.as_ref()
    }

    pub fn dataset(&self) -> &ScoreDataset {
        &self.dataset
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, u64> {
        &self.vocabulary
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocabulary.contains_key(token)
    }

    /// Vocabulary tokens sharing the longest available prefix with `token`,
    /// most frequent first.
    pub fn suggestions(&self, token: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = token.char_indices().collect();
        for keep in (1..=chars.len()).rev() {
            let end = chars.get(keep).map_or(token.len(), |(i, _)| *i);
            let hits = self.search(&token[..end], MAX_SUGGESTIONS);
            if !hits.is_empty() {
                return hits.into_iter().map(|(t, _)| t).collect();
            }
        }
        Vec::new()
    }

    pub fn check_token(&self, token: &str) -> Result<()> {
        if self.contains(token) {
            Ok(())
        } else {
            Err(Error::UnknownIngredient {
                token: token.to_owned(),
                suggestions: self.suggestions(token),
            })
        }
    }

    /// Tokens with the given prefix, by occurrence descending then lexicographically.
    pub fn search(&self, prefix: &str, limit: usize) -> Vec<(String, u64)> {
        let mut hits: Vec<(&String, u64)> = self
            .vocabulary
            .range(prefix.to_owned()..)
            .take_while(|(t, _)| t.starts_with(prefix))
            .map(|(t, &n)| (t, n))
            .collect();
        hits.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        hits.into_iter()
            .take(limit)
            .map(|(t, n)| (t.clone(), n))
            .collect()
    }

    fn answer(&self, a: &str, b: &str) -> Result<PairingAnswer> {
        let predicted_score = self.predictor.predict(a, b)?;
        let known = self.dataset.get(a, b);
        Ok(PairingAnswer {
            partner: b.to_owned(),
            predicted_score,
            status: if known.is_some() {
                PairingStatus::Known
            } else {
                PairingStatus::Unknown
            },
            true_score: known.map(|p| p.score),
            cooccurrence: known.map(|p| p.cooc),
        })
    }

    pub fn score_pair(&self, a: &str, b: &str) -> Result<PairingAnswer> {
        self.check_token(a)?;
        self.check_token(b)?;
        if a == b {
            return Err(Error::SelfPair(a.to_owned()));
        }
        self.answer(a, b)
    }

    /// The `k` best partners for `a` among the vocabulary, ties broken by token.
    pub fn rank_partners(&self, a: &str, k: usize, filter: RankFilter) -> Result<Vec<PairingAnswer>> {
        self.check_token(a)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut answers = Vec::with_capacity(self.vocabulary.len());
        for partner in self.vocabulary.keys() {
            if partner == a {
                continue;
            }
            let answer = self.answer(a, partner)?;
            if filter.admits(answer.status) {
                answers.push(answer);
            }
        }
        answers.sort_by(|x, y| {
            y.predicted_score
                .total_cmp(&x.predicted_score)
                .then_with(|| x.partner.cmp(&y.partner))
        });
        answers.truncate(k);
        Ok(answers)
    }

    /// Tokens from `tokens` that are not in the vocabulary, first-seen order.
    pub fn unknown_tokens<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in tokens {
            if !self.contains(t) && !out.iter().any(|o| o == t) {
                out.push(t.to_owned());
            }
        }
        out
    }

    /// Row-major `targets x probes` grid of [`Self::score_pair`] answers.
    pub fn compare_targets(&self, targets: &[&str], probes: &[&str]) -> Result<Vec<Vec<PairingAnswer>>> {
        if targets.is_empty() || probes.is_empty() {
            return Err(Error::InvalidArgument(
                "targets and probes must be nonempty".into(),
            ));
        }
        targets
            .iter()
            .map(|t| probes.iter().map(|p| self.score_pair(t, p)).collect())
            .collect()
    }
}

/// Shortest round-trip decimal, the same text the JSON API emits.
pub fn format_score(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

pub const RANKING_CSV_HEADER: &str = "rank,partner,predicted_score,status,true_score,cooccurrence";

pub fn write_ranking_csv<W: Write>(answers: &[PairingAnswer], mut out: W) -> Result<()> {
    writeln!(out, "{RANKING_CSV_HEADER}")?;
    for (i, a) in answers.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            a.partner,
            format_score(a.predicted_score),
            a.status,
            a.true_score.map(format_score).unwrap_or_default(),
            a.cooccurrence.map(|c| c.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}
