//! Interchangeable pair predictors, registered by name.
//!
//! Evaluation, ranking and the HTTP service only see `dyn PairPredictor`;
//! which one runs is chosen at runtime through [`PredictorRegistry`].

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::embedding::{cosine, random_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::model::{forward, Checkpoint, Hyperparams, InputEmbeddings, ModelParams};
use crate::pairscore::ScoreDataset;

pub trait PairPredictor: Send + Sync {
    fn name(&self) -> &str;

    /// Predicted pairing score. Implementations are order-insensitive.
    fn predict(&self, a: &str, b: &str) -> Result<f64>;
}

fn lookup<'a>(embeddings: &'a EmbeddingTable, token: &str) -> Result<&'a [f64]> {
    embeddings.get(token).ok_or_else(|| Error::UnknownIngredient {
        token: token.to_owned(),
        suggestions: Vec::new(),
    })
}

fn canonical<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The trained Siamese wide&deep model, fed inputs in lexicographic order.
pub struct SiamesePredictor {
    hp: Hyperparams,
    params: ModelParams,
    inputs: Arc<EmbeddingTable>,
}

impl SiamesePredictor {
    pub fn new(hp: Hyperparams, params: ModelParams, inputs: Arc<EmbeddingTable>) -> Result<Self> {
        params.check_shapes(&hp)?;
        if inputs.dim() != hp.input_dim {
            return Err(Error::Shape(format!(
                "embeddings are {}-d, model expects {}",
                inputs.dim(),
                hp.input_dim
            )));
        }
        Ok(Self { hp, params, inputs })
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint, file_embeddings: &Arc<EmbeddingTable>) -> Result<Self> {
        let inputs = model_inputs(checkpoint, file_embeddings);
        Self::new(checkpoint.hyperparams, checkpoint.params.clone(), inputs)
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

impl PairPredictor for SiamesePredictor {
    fn name(&self) -> &str {
        "siamese"
    }

    fn predict(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = canonical(a, b);
        forward(
            &self.params,
            &self.hp,
            lookup(&self.inputs, a)?,
            lookup(&self.inputs, b)?,
        )
    }
}

/// The vectors a checkpoint was trained on: the file table, or the seeded
/// random table over the same tokens.
pub fn model_inputs(checkpoint: &Checkpoint, file_embeddings: &Arc<EmbeddingTable>) -> Arc<EmbeddingTable> {
    match checkpoint.input_embeddings {
        InputEmbeddings::File => Arc::clone(file_embeddings),
        InputEmbeddings::Random { seed } => Arc::new(random_embeddings(
            file_embeddings.tokens(),
            checkpoint.hyperparams.input_dim,
            seed,
        )),
    }
}

/// Cosine similarity of the two ingredient vectors.
pub struct CosinePredictor {
    embeddings: Arc<EmbeddingTable>,
}

impl CosinePredictor {
    pub fn new(embeddings: Arc<EmbeddingTable>) -> Self {
        Self { embeddings }
    }
}

impl PairPredictor for CosinePredictor {
    fn name(&self) -> &str {
        "cosine"
    }

    fn predict(&self, a: &str, b: &str) -> Result<f64> {
        cosine(lookup(&self.embeddings, a)?, lookup(&self.embeddings, b)?)
    }
}

/// Returns the true score of known pairs. Useful as an upper bound and for
/// checking the metric plumbing.
pub struct OraclePredictor {
    dataset: Arc<ScoreDataset>,
}

impl OraclePredictor {
    pub fn new(dataset: Arc<ScoreDataset>) -> Self {
        Self { dataset }
    }
}

impl PairPredictor for OraclePredictor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, a: &str, b: &str) -> Result<f64> {
        self.dataset
            .get(a, b)
            .map(|p| p.score)
            .ok_or_else(|| Error::InvalidArgument(format!("oracle has no score for ({a}, {b})")))
    }
}

/// Everything a predictor factory may draw on.
#[derive(Clone, Default)]
pub struct PredictorContext {
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub dataset: Option<Arc<ScoreDataset>>,
    pub checkpoint: Option<Arc<Checkpoint>>,
}

impl PredictorContext {
    fn embeddings(&self, who: &str) -> Result<&Arc<EmbeddingTable>> {
        self.embeddings
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("predictor `{who}` needs embeddings")))
    }
}

type Factory = Box<dyn Fn(&PredictorContext) -> Result<Arc<dyn PairPredictor>> + Send + Sync>;

pub struct PredictorRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for PredictorRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register("siamese", |ctx| {
            let checkpoint = ctx
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("predictor `siamese` needs a checkpoint".into()))?;
            let predictor = SiamesePredictor::from_checkpoint(checkpoint, ctx.embeddings("siamese")?)?;
            Ok(Arc::new(predictor))
        });
        registry.register("cosine", |ctx| {
            Ok(Arc::new(CosinePredictor::new(Arc::clone(ctx.embeddings("cosine")?))))
        });
        registry.register("oracle", |ctx| {
            let dataset = ctx
                .dataset
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("predictor `oracle` needs a dataset".into()))?;
            Ok(Arc::new(OraclePredictor::new(Arc::clone(dataset))))
        });
        registry
    }
}

impl PredictorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registers (or replaces) a factory under `name`.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&PredictorContext) -> Result<Arc<dyn PairPredictor>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, ctx: &PredictorContext) -> Result<Arc<dyn PairPredictor>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownPredictor(name.to_owned()))?;
        factory(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn table() -> Arc<EmbeddingTable> {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![1.0, 0.5]).unwrap();
        t.insert("b", vec![-0.3, 2.0]).unwrap();
        Arc::new(t)
    }

    #[test]
    fn registry_lists_builtins() {
        let names: Vec<_> = PredictorRegistry::default().names().map(str::to_owned).collect();
        assert_eq!(names, ["cosine", "oracle", "siamese"]);
    }

    #[test]
    fn unknown_name_and_missing_inputs() {
        let registry = PredictorRegistry::default();
        let ctx = PredictorContext::default();
        assert!(matches!(registry.build("svr", &ctx), Err(Error::UnknownPredictor(_))));
        assert!(registry.build("cosine", &ctx).is_err());
        assert!(registry.build("siamese", &ctx).is_err());
    }

    #[test]
    fn custom_predictor_can_be_registered() {
        struct Constant;
        impl PairPredictor for Constant {
            fn name(&self) -> &str {
                "constant"
            }
            fn predict(&self, _: &str, _: &str) -> Result<f64> {
                Ok(0.25)
            }
        }
        let mut registry = PredictorRegistry::default();
        registry.register("constant", |_| Ok(Arc::new(Constant)));
        let p = registry.build("constant", &PredictorContext::default()).unwrap();
        assert_eq!(p.predict("x", "y").unwrap(), 0.25);
    }

    #[test]
    fn siamese_is_order_insensitive_through_canonical_inputs() {
        let hp = Hyperparams {
            input_dim: 2,
            hidden_i: 3,
            hidden_j: 2,
            ..Default::default()
        };
        let ckpt = Checkpoint {
            hyperparams: hp,
            input_embeddings: InputEmbeddings::File,
            params: init_params(&hp, 3),
        };
        let p = SiamesePredictor::from_checkpoint(&ckpt, &table()).unwrap();
        let ab = p.predict("a", "b").unwrap();
        assert_eq!(ab, p.predict("b", "a").unwrap());
        let direct = forward(&ckpt.params, &hp, &[1.0, 0.5], &[-0.3, 2.0]).unwrap();
        assert_eq!(ab.to_bits(), direct.to_bits());
    }

    #[test]
    fn random_inputs_are_regenerated_from_seed() {
        let hp = Hyperparams {
            input_dim: 4,
            hidden_i: 3,
            hidden_j: 2,
            ..Default::default()
        };
        let ckpt = Checkpoint {
            hyperparams: hp,
            input_embeddings: InputEmbeddings::Random { seed: 8 },
            params: init_params(&hp, 3),
        };
        let inputs = model_inputs(&ckpt, &table());
        assert_eq!(inputs.dim(), 4);
        assert_eq!(*inputs, random_embeddings(["a", "b"], 4, 8));
    }
}
