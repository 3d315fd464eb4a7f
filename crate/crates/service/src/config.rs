use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use foodpair_core::corpus::read_counts_tsv;
use foodpair_core::embedding::load_embeddings;
use foodpair_core::model::Checkpoint;
use foodpair_core::pairscore::{read_scores_tsv, ScoreDataset, ScoreStats};
use foodpair_core::predictor::{PredictorContext, PredictorRegistry};
use foodpair_core::recommend::PairingEngine;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Artifact {
        path: PathBuf,
        source: foodpair_core::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] foodpair_core::Error),
}

/// Startup configuration, read from a JSON file. Relative artifact paths are
/// taken relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub checkpoint: PathBuf,
    pub embeddings: PathBuf,
    pub scores: PathBuf,
    pub stats: PathBuf,
    /// Filtered counts TSV; supplies the vocabulary and occurrence counts.
    pub counts: PathBuf,
    #[serde(default)]
    pub cors_allowed_origin: Option<String>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".to_owned()
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let file = open(path)?;
        let mut config: ServiceConfig =
            serde_json::from_reader(BufReader::new(file)).map_err(|source| ServiceError::Json {
                path: path.to_owned(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.checkpoint,
            &mut config.embeddings,
            &mut config.scores,
            &mut config.stats,
            &mut config.counts,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

fn open(path: &Path) -> Result<File, ServiceError> {
    File::open(path).map_err(|source| ServiceError::Io {
        path: path.to_owned(),
        source,
    })
}

fn artifact<T>(path: &Path, r: foodpair_core::Result<T>) -> Result<T, ServiceError> {
    r.map_err(|source| ServiceError::Artifact {
        path: path.to_owned(),
        source,
    })
}

/// The artifact files a query engine is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactPaths {
    pub checkpoint: PathBuf,
    pub embeddings: PathBuf,
    pub scores: PathBuf,
    pub counts: PathBuf,
}

impl From<&ServiceConfig> for ArtifactPaths {
    fn from(c: &ServiceConfig) -> Self {
        Self {
            checkpoint: c.checkpoint.clone(),
            embeddings: c.embeddings.clone(),
            scores: c.scores.clone(),
            counts: c.counts.clone(),
        }
    }
}

/// Everything loaded from disk at startup.
pub struct Artifacts {
    pub checkpoint: Arc<Checkpoint>,
    pub context: PredictorContext,
    pub dataset: Arc<ScoreDataset>,
    /// From the stats file when loaded through a [`ServiceConfig`], otherwise
    /// recomputed from the scores.
    pub stats: ScoreStats,
    pub vocabulary: BTreeMap<String, u64>,
}

impl Artifacts {
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let mut artifacts = Self::from_paths(&ArtifactPaths::from(config))?;
        artifacts.stats = serde_json::from_reader(BufReader::new(open(&config.stats)?)).map_err(|source| {
            ServiceError::Json {
                path: config.stats.clone(),
                source,
            }
        })?;
        Ok(artifacts)
    }

    pub fn from_paths(paths: &ArtifactPaths) -> Result<Self, ServiceError> {
        let counts = artifact(
            &paths.counts,
            read_counts_tsv(BufReader::new(open(&paths.counts)?)),
        )?;
        let vocabulary = counts.occurrence;
        let wanted: BTreeSet<String> = vocabulary.keys().cloned().collect();
        let embeddings = artifact(
            &paths.embeddings,
            load_embeddings(BufReader::new(open(&paths.embeddings)?), &wanted),
        )?;
        let dataset = artifact(
            &paths.scores,
            read_scores_tsv(BufReader::new(open(&paths.scores)?)),
        )?;
        let checkpoint = artifact(
            &paths.checkpoint,
            Checkpoint::read(BufReader::new(open(&paths.checkpoint)?)),
        )?;
        let checkpoint = Arc::new(checkpoint);
        let dataset = Arc::new(dataset);
        Ok(Self {
            context: PredictorContext {
                embeddings: Some(Arc::new(embeddings)),
                dataset: Some(Arc::clone(&dataset)),
                checkpoint: Some(Arc::clone(&checkpoint)),
            },
            checkpoint,
            stats: *dataset.stats(),
            dataset,
            vocabulary,
        })
    }

    /// A query engine backed by the named predictor from `registry`.
    pub fn engine(&self, registry: &PredictorRegistry, predictor: &str) -> Result<PairingEngine, ServiceError> {
        let p = registry.build(predictor, &self.context)?;
        Ok(PairingEngine::new(
            p,
            Arc::clone(&self.dataset),
            self.vocabulary.clone(),
        )?)
    }
}
