//! Acceptance gate. Runs every primary criterion at its stated tolerance and
//! runtime budget, printing one PASS/FAIL line per criterion.

mod common;
#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::Request;
use foodpair_core::corpus::{count_corpus, count_sharded, filter_counts};
use foodpair_core::embedding::train_ppmi_svd;
use foodpair_core::eval::{evaluate, ndcg_at_k, regression_metrics, roc_auc, MetricsReport};
use foodpair_core::model::{forward, init_params, Hyperparams, ModelParams};
use foodpair_core::pairscore::{build_dataset, npmi, Split, SplitRatios};
use foodpair_core::predictor::{CosinePredictor, PredictorRegistry, SiamesePredictor};
use foodpair_core::recommend::{PairingAnswer, RankFilter};
use foodpair_core::synthetic::PlantedCorpus;
use foodpair_core::train::{fit, gradients, train_loop, PairExample, TrainConfig};
use foodpair_service::{router, AppState, Artifacts, ServiceConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "npmi-printed-rows", budget: Some(Duration::from_secs(1)), check: npmi_printed_rows },
        Criterion { name: "npmi-properties", budget: None, check: npmi_properties },
        Criterion { name: "counting-oracle", budget: Some(Duration::from_secs(5)), check: counting_oracle },
        Criterion { name: "gradient-check", budget: Some(Duration::from_secs(30)), check: gradient_check },
        Criterion { name: "forward-trace", budget: None, check: forward_trace },
        Criterion { name: "overfit-capacity", budget: Some(Duration::from_secs(60)), check: overfit_capacity },
        Criterion { name: "model-beats-cosine", budget: Some(Duration::from_secs(300)), check: model_beats_cosine },
        Criterion { name: "ablation-shapes", budget: None, check: ablation_shapes },
        Criterion { name: "metric-suite", budget: None, check: metric_suite },
        Criterion { name: "end-to-end-determinism", budget: None, check: determinism },
        Criterion { name: "service-consistency", budget: None, check: service_consistency },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = started.elapsed();
        let result = match (result, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (r, _) => r,
        };
        let budget = c.budget.map_or(String::new(), |b| format!(" / {b:?}"));
        match result {
            Ok(detail) => println!("PASS  {:<24} {:>9.2?}{budget}  {detail}", c.name, elapsed),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:<24} {:>9.2?}{budget}  {detail}", c.name, elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn npmi_oracle(cooc: u64, a: u64, b: u64, n: u64) -> f64 {
    let p_ab = cooc as f64 / n as f64;
    let p_a = a as f64 / n as f64;
    let p_b = b as f64 / n as f64;
    (p_ab / (p_a * p_b)).log2() / -p_ab.log2()
}

fn npmi_printed_rows() -> Result<String, String> {
    const N: u64 = 1_029_720;
    const VANILLA: u64 = 51_756;
    // (partner, partner count, co-occurrence, printed score, headline row)
    let rows: [(&str, u64, u64, f64, bool); 10] = [
        ("baking_soda", 58_931, 14_657, 0.376, true),
        ("cocoa", 6_520, 2_759, 0.360, false),
        ("powdered_sugar", 26_729, 6_558, 0.314, false),
        ("nut", 9_090, 2_865, 0.312, false),
        ("chocolate_chips", 9_172, 2_821, 0.307, false),
        ("onion", 191_691, 12, -0.589, true),
        ("soy_sauce", 40_518, 6, -0.483, false),
        ("salt_and_pepper", 46_534, 14, -0.479, false),
        ("garlic", 46_534, 9, -0.477, false),
        ("pepper", 68_984, 26, -0.462, false),
    ];
    let mut discrepancies = Vec::new();
    for (partner, count, cooc, printed, headline) in rows {
        let got = npmi(cooc, VANILLA, count, N).map_err(|e| e.to_string())?;
        let oracle = npmi_oracle(cooc, VANILLA, count, N);
        ensure!((got - oracle).abs() < 1e-12, "{partner}: library {got} vs oracle {oracle}");
        if (got - printed).abs() <= 1e-3 {
            continue;
        }
        ensure!(!headline, "vanilla&{partner}: {got:.4} vs printed {printed}");
        // smallest partner count that would reproduce the printed score
        let (mut lo, mut hi) = (cooc, N);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if npmi(cooc, VANILLA, mid, N).unwrap() <= printed + 5e-4 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let line = format!(
            "vanilla&{partner}: computed {got:.4} vs printed {printed} (count {count}; ~{lo} would match)"
        );
        eprintln!("      discrepancy {line}");
        discrepancies.push(line);
    }
    Ok(format!(
        "headline rows within 1e-3; {} of 10 rows reproduce; logged: [{}]",
        10 - discrepancies.len(),
        discrepancies.join("; ")
    ))
}

fn npmi_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=2_000_000u64);
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        let c = rng.random_range(1..=a.min(b));
        let v = npmi(c, a, b, n).unwrap();
        ensure!((-1.0..=1.0).contains(&v), "npmi({c},{a},{b},{n}) = {v}");
        ensure!(v.to_bits() == npmi(c, b, a, n).unwrap().to_bits(), "asymmetric at ({c},{a},{b},{n})");

        let full = rng.random_range(1..=n);
        ensure!(npmi(full, full, full, n).unwrap() == 1.0, "complete co-occurrence {full}/{n} is not 1");

        // p(a) = 1/x, p(b) = 1/y, p(a,b) = 1/(xy)
        let (x, y, m) = (rng.random_range(2..50u64), rng.random_range(2..50u64), rng.random_range(1..400u64));
        let ind = npmi(m, y * m, x * m, x * y * m).unwrap();
        ensure!(ind.abs() < 1e-12, "independent construction gives {ind}");
    }
    Ok("10000 tuples: range, exact symmetry, complete = 1, independence < 1e-12".into())
}

fn brute_counts(recipes: &[foodpair_core::corpus::RecipeRecord]) -> (BTreeMap<String, u64>, BTreeMap<(String, String), u64>) {
    let mut vocab: Vec<&String> = recipes.iter().flat_map(|r| &r.ingredients).collect();
    vocab.sort();
    vocab.dedup();
    let mut occ = BTreeMap::new();
    let mut cooc = BTreeMap::new();
    for (i, x) in vocab.iter().enumerate() {
        occ.insert((*x).clone(), recipes.iter().filter(|r| r.ingredients.contains(*x)).count() as u64);
        for y in &vocab[i + 1..] {
            let c = recipes
                .iter()
                .filter(|r| r.ingredients.contains(*x) && r.ingredients.contains(*y))
                .count() as u64;
            if c > 0 {
                cooc.insert(((*x).clone(), (*y).clone()), c);
            }
        }
    }
    (occ, cooc)
}

fn counting_oracle() -> Result<String, String> {
    let recipes = PlantedCorpus { n_recipes: 1000, seed: 17, ..Default::default() }.generate();
    let serial = count_corpus(&recipes);
    let sharded = count_sharded(&recipes, 4);
    ensure!(serial == sharded, "4-shard counts differ from serial counts");
    let (occ, cooc) = brute_counts(&recipes);
    ensure!(serial.occurrence == occ, "occurrence counts differ from brute force");
    let table: BTreeMap<(String, String), u64> = serial
        .cooccurrence
        .iter()
        .map(|(k, v)| ((k.a().to_owned(), k.b().to_owned()), *v))
        .collect();
    ensure!(table == cooc, "co-occurrence counts differ from brute force");
    ensure!(serial.recipe_count == 1000, "recipe count {}", serial.recipe_count);
    Ok(format!("{} tokens, {} pairs identical across serial/4 shards/brute force", occ.len(), cooc.len()))
}

fn gradient_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut checked, mut excluded, mut worst) = (0, 0, 0.0f64);
    for config in 0..20 {
        let width = rng.random_range(1..=6);
        let hp = Hyperparams {
            input_dim: rng.random_range(1..=8),
            hidden_i: width,
            hidden_j: width,
            symmetrize: rng.random_bool(0.5),
            use_wide: rng.random_bool(0.7),
        };
        let mut params = init_params(&hp, config);
        for t in [&mut params.b1, &mut params.b2, &mut params.b3, &mut params.b4] {
            t.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        params.b5 = rng.random_range(-0.5..0.5);
        let batch: Vec<oracle::Example> = (0..rng.random_range(1..=4))
            .map(|_| {
                let mut v = || (0..hp.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
                let (a, b) = (v(), v());
                (a, b, rng.random_range(-1.0..1.0))
            })
            .collect();
        let refs: Vec<(&[f64], &[f64], f64)> = batch.iter().map(|(a, b, y)| (a.as_slice(), b.as_slice(), *y)).collect();
        let analytic = gradients(&params, &hp, &refs).map_err(|e| e.to_string())?;
        let report = oracle::check_gradients(&params, &hp, &batch, &analytic, 1e-5, 1e-4, 1e-6);
        ensure!(report.failures.is_empty(), "config {config} {hp:?}: {}", report.failures.join("; "));
        checked += report.checked;
        excluded += report.excluded;
        worst = worst.max(report.max_rel_error);
    }
    ensure!(checked > 0, "no components checked");
    Ok(format!("20 configs, {checked} components checked, {excluded} near kinks skipped, max rel err {worst:.2e}"))
}

fn forward_trace() -> Result<String, String> {
    let hp = Hyperparams { input_dim: 1, hidden_i: 1, hidden_j: 1, symmetrize: false, use_wide: true };
    let mut ones = ModelParams::zeros(&hp);
    for (name, t) in foodpair_core::model::TENSOR_NAMES.iter().zip(ones.tensors_mut()) {
        if name.starts_with('W') {
            t.fill(1.0);
        }
    }
    let y = forward(&ones, &hp, &[1.0], &[2.0]).unwrap();
    ensure!(y == 5.0, "hand trace gives {y}");
    let reference = oracle::reference_forward(&ones, &hp, &[1.0], &[2.0], &mut Vec::new());
    ensure!(reference == 5.0, "scalar trace gives {reference}");

    let defaults = Hyperparams::default();
    let zeros = ModelParams::zeros(&defaults);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut v = || (0..64).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
    let (xa, xb) = (v(), v());
    ensure!(forward(&zeros, &defaults, &xa, &xb).unwrap() == 0.0, "zero parameters give nonzero output");

    let sym = Hyperparams { symmetrize: true, ..defaults };
    let params = init_params(&sym, 9);
    for _ in 0..1000 {
        let (a, b) = (v(), v());
        let ab = forward(&params, &sym, &a, &b).unwrap();
        let ba = forward(&params, &sym, &b, &a).unwrap();
        ensure!(ab.to_bits() == ba.to_bits(), "symmetrized forward differs: {ab} vs {ba}");
    }
    Ok("trace = 5 exactly, zeros = 0, 1000 symmetrized pairs bit-identical".into())
}

fn overfit_capacity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = Array2::from_shape_fn((30, 64), |_| rng.random_range(-1.0..1.0));
    let mut examples = Vec::new();
    for a in 0..30 {
        for b in (a + 1)..30 {
            examples.push(PairExample { a, b, target: rng.random_range(-0.6..0.8) });
        }
    }
    examples.truncate(200);
    let config = TrainConfig { max_epochs: 2000, patience: 2000, seed: 3, ..Default::default() };
    let outcome = fit(&inputs, &examples, &examples, &Hyperparams::default(), &config, |_| {})
        .map_err(|e| e.to_string())?;
    let first = outcome
        .log
        .iter()
        .find(|e| e.val_rmse * e.val_rmse < 1e-3)
        .ok_or_else(|| format!("best MSE {:e} after 2000 epochs", outcome.best_val_rmse().powi(2)))?;
    Ok(format!(
        "200 pairs, j = 64: MSE < 1e-3 at epoch {}, best MSE {:.1e}",
        first.epoch,
        outcome.best_val_rmse().powi(2)
    ))
}

fn model_beats_cosine() -> Result<String, String> {
    let mut lines = Vec::new();
    for seed in [11u64, 12, 13] {
        let recipes = PlantedCorpus { seed, ..Default::default() }.generate();
        let counts = filter_counts(&count_corpus(&recipes), 21, 5).map_err(|e| e.to_string())?;
        let dataset = build_dataset(&counts, seed, SplitRatios::default()).map_err(|e| e.to_string())?;
        let embeddings = Arc::new(train_ppmi_svd(&counts, 64, 1.0, seed).map_err(|e| e.to_string())?);
        let hp = Hyperparams::default();
        let config = TrainConfig { seed, ..Default::default() };
        let outcome = train_loop(&dataset, &embeddings, &hp, &config, |_| {}).map_err(|e| e.to_string())?;
        let model = SiamesePredictor::new(hp, outcome.best, Arc::clone(&embeddings)).map_err(|e| e.to_string())?;
        let cosine = CosinePredictor::new(Arc::clone(&embeddings));
        let t = dataset.stats().top_threshold;
        let m = evaluate(&model, &dataset, Split::Test, t).map_err(|e| e.to_string())?;
        let c = evaluate(&cosine, &dataset, Split::Test, t).map_err(|e| e.to_string())?;
        ensure!(
            m.rmse < c.rmse && m.corr > c.corr,
            "seed {seed}: model rmse {:.4} corr {:.4}, cosine rmse {:.4} corr {:.4}",
            m.rmse, m.corr, c.rmse, c.corr
        );
        lines.push(format!("seed {seed} rmse {:.4}<{:.4} corr {:.4}>{:.4}", m.rmse, c.rmse, m.corr, c.corr));
    }
    Ok(lines.join("; "))
}

fn ablation_shapes() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = common::run_pipeline(dir.path(), 4, &["--no-wide"]);
    common::run_ok(
        &p.dir,
        &["train", "--scores", "scores.tsv", "--embeddings", "emb.txt", "--hidden", "16", "--seed", "4",
          "--out-dir", "random", "--random-embeddings", "--max-epochs", "60"],
    );
    common::run_ok(
        &p.dir,
        &["eval", "--checkpoint", "random/best.json", "--scores", "scores.tsv", "--embeddings", "emb.txt",
          "--out", "random.json"],
    );
    let w5 = |file: &str| -> Result<usize, String> {
        let v: serde_json::Value = serde_json::from_slice(&p.read(file)).map_err(|e| e.to_string())?;
        // stored as a single output row
        v["W5"][0].as_array().map(Vec::len).ok_or_else(|| format!("{file}: no W5 row"))
    };
    let no_wide = w5("run/best.json")?;
    let random = w5("random/best.json")?;
    ensure!(no_wide == 16, "--no-wide W5 width {no_wide}, expected 16");
    ensure!(random == 16 * 16 + 16, "default W5 width {random}, expected 272");
    let kind: serde_json::Value = serde_json::from_slice(&p.read("random/best.json")).unwrap();
    ensure!(kind["input_embeddings"]["kind"] == "random", "random run did not record its inputs");
    for file in ["report.json", "random.json"] {
        let r: MetricsReport = serde_json::from_slice(&p.read(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure!(r.n_examples > 0 && r.rmse.is_finite() && r.corr.is_finite(), "{file}: invalid report");
    }
    Ok(format!("W5 width {no_wide} without wide part, {random} with; both reports valid"))
}

fn brute_auc(preds: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut total) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                total += 1.0;
                wins += if preds[i] > preds[j] { 1.0 } else if preds[i] == preds[j] { 0.5 } else { 0.0 };
            }
        }
    }
    wins / total
}

fn metric_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        t[0] = 0.9;
        t[1] = -0.9;
        let m = regression_metrics(&p, &t).unwrap();
        ensure!((m.rmse * m.rmse - m.mse).abs() <= 1e-12, "rmse^2 {} vs mse {}", m.rmse * m.rmse, m.mse);
        ensure!(m.mae <= m.rmse, "mae {} > rmse {}", m.mae, m.rmse);
    }
    let ndcg = ndcg_at_k(&[0.3, 0.5, 0.0], &[0.3, 0.5, 0.0], 3).unwrap();
    ensure!((ndcg - 0.8929).abs() <= 1e-4, "hand NDCG {ndcg}");
    let ideal = ndcg_at_k(&[0.5, 0.3, 0.0], &[0.3, 0.5, 0.0], 3).unwrap();
    ensure!(ideal == 1.0, "ideal NDCG {ideal}");
    for _ in 0..200 {
        let preds: Vec<f64> = (0..50).map(|_| rng.random_range(0..20) as f64 / 10.0).collect();
        let mut labels: Vec<bool> = (0..50).map(|_| rng.random_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let got = roc_auc(&preds, &labels).unwrap();
        let want = brute_auc(&preds, &labels);
        ensure!((got - want).abs() < 1e-12, "AUC {got} vs brute force {want}");
    }
    let hand = regression_metrics(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
    ensure!(hand.r2 == -0.75 && hand.corr == 1.0, "hand r2 {} corr {}", hand.r2, hand.corr);
    Ok(format!("1000 sets; NDCG {ndcg:.4}; ideal 1.0; 200 AUC sets; r2 = {}", hand.r2))
}

const DETERMINISM_FILES: [&str; 10] = [
    "recipes.jsonl", "counts.tsv", "scores.tsv", "stats.json", "emb.txt", "run/best.json", "run/last.json",
    "run/train_log.csv", "report.json", "cosine.json",
];

fn determinism() -> Result<String, String> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = common::run_pipeline(a.path(), 21, &[]);
    let second = common::run_pipeline(b.path(), 21, &[]);
    for file in DETERMINISM_FILES {
        ensure!(first.read(file) == second.read(file), "{file} differs between runs");
    }
    let replay = tempfile::tempdir().unwrap();
    let third = common::run_pipeline(replay.path(), 21, &[]);
    for file in DETERMINISM_FILES {
        std::fs::remove_file(third.path(file)).unwrap();
    }
    common::run_ok(replay.path(), &["replay", "--manifest", "manifest.json"]);
    for file in DETERMINISM_FILES {
        ensure!(first.read(file) == third.read(file), "{file} differs after manifest replay");
    }
    Ok(format!("{} artifacts byte-identical across two runs and a manifest replay", DETERMINISM_FILES.len()))
}

fn service_consistency() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let p = common::run_pipeline(dir.path(), 8, &[]);
    std::fs::write(
        p.path("service.json"),
        r#"{"checkpoint":"run/best.json","embeddings":"emb.txt","scores":"scores.tsv","stats":"stats.json","counts":"counts.tsv"}"#,
    )
    .unwrap();
    let config = ServiceConfig::load(&p.path("service.json")).map_err(|e| e.to_string())?;
    let artifacts = Artifacts::load(&config).map_err(|e| e.to_string())?;
    let engine = artifacts.engine(&PredictorRegistry::default(), "siamese").map_err(|e| e.to_string())?;
    let library = artifacts.engine(&PredictorRegistry::default(), "siamese").map_err(|e| e.to_string())?;
    let app = router(AppState::new(engine, artifacts.stats, None));
    let vocab: Vec<String> = library.vocabulary().keys().cloned().collect();
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let get = |uri: String| -> String {
        runtime.block_on(async {
            let res = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
            let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
            String::from_utf8(bytes.to_vec()).unwrap()
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let (mut scores, mut ranks, mut cli_ranks) = (0, 0, 0);
    for q in 0..100 {
        let a = &vocab[rng.random_range(0..vocab.len())];
        match q % 3 {
            0 => {
                let mut b = a;
                while b == a {
                    b = &vocab[rng.random_range(0..vocab.len())];
                }
                let body = get(format!("/api/score?a={a}&b={b}"));
                let answer = library.score_pair(a, b).map_err(|e| e.to_string())?;
                let expected = serde_json::to_string(&answer.predicted_score).unwrap();
                ensure!(body.contains(&format!("\"predicted_score\":{expected},")), "score {a},{b}: {body}");
                scores += 1;
            }
            1 => {
                let k = rng.random_range(1..=40);
                let filter = ["all", "known", "unknown"][rng.random_range(0..3)];
                let body = get(format!("/api/rank?ingredient={a}&k={k}&filter={filter}"));
                let answers = library
                    .rank_partners(a, k, filter.parse().unwrap())
                    .map_err(|e| e.to_string())?;
                ensure!(body == serde_json::to_string(&answers).unwrap(), "rank {a} k={k} {filter} differs");
                ranks += 1;
            }
            _ => {
                let k = rng.random_range(1..=15);
                let out = common::run_ok(
                    &p.dir,
                    &["rank", "--checkpoint", "run/best.json", "--embeddings", "emb.txt", "--scores", "scores.tsv",
                      "--counts", "counts.tsv", "--ingredient", a, "--k", &k.to_string()],
                );
                let csv = String::from_utf8(out.stdout).unwrap();
                let answers = library.rank_partners(a, k, RankFilter::All).map_err(|e| e.to_string())?;
                let mut expected = Vec::new();
                foodpair_core::recommend::write_ranking_csv(&answers, &mut expected).unwrap();
                ensure!(csv.as_bytes() == expected.as_slice(), "CLI rank {a} k={k} differs");
                let api: Vec<PairingAnswer> =
                    serde_json::from_str(&get(format!("/api/rank?ingredient={a}&k={k}"))).unwrap();
                for (line, ans) in csv.lines().skip(1).zip(&api) {
                    let cell = line.split(',').nth(2).unwrap();
                    ensure!(cell == serde_json::to_string(&ans.predicted_score).unwrap(), "CLI vs API decimal {cell}");
                }
                cli_ranks += 1;
            }
        }
    }
    Ok(format!("{scores} score, {ranks} rank, {cli_ranks} CLI rank queries agree to the last decimal; no web UI involved"))
}
