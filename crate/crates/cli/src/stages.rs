use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use foodpair_core::corpus::{count_corpus, count_sharded, filter_counts, load_recipes, read_counts_tsv, write_counts_tsv};
use foodpair_core::embedding::{load_all_embeddings, load_embeddings, random_embeddings, save_embeddings, train_ppmi_svd};
use foodpair_core::eval::{evaluate, MetricsReport};
use foodpair_core::model::{Checkpoint, Hyperparams, InputEmbeddings};
use foodpair_core::pairscore::{build_dataset, read_scores_tsv, write_scores_tsv};
use foodpair_core::predictor::{PredictorContext, PredictorRegistry};
use foodpair_core::recommend::{format_score, write_ranking_csv};
use foodpair_core::synthetic::{write_recipes_jsonl, PlantedCorpus};
use foodpair_core::train::{train_loop, TrainConfig};
use foodpair_service::{run as serve_http, shutdown_signal, AppState, ArtifactPaths, Artifacts, ServiceConfig};

use crate::manifest::{self, absolute, Manifest, StageRecord};
use crate::{Cli, Command, EmbedArgs, EvalArgs, IngestArgs, RankArgs, ReplayArgs, ScoreArgs, ServeArgs, SynthArgs, TrainArgs};

pub const BEST_CHECKPOINT: &str = "best.json";
pub const LAST_CHECKPOINT: &str = "last.json";
pub const TRAIN_LOG: &str = "train_log.csv";

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(&a),
        Command::Score(a) => score(&a),
        Command::Embed(a) => embed(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Rank(a) => rank(&a),
        Command::Serve(a) => serve(&a),
        Command::Replay(a) => replay(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn arg(flag: &str, value: impl ToString) -> [String; 2] {
    [format!("--{flag}"), value.to_string()]
}

fn path_arg(flag: &str, path: &Path) -> [String; 2] {
    arg(flag, absolute(path).display())
}

fn record(stage: &str, args: Vec<String>, outputs: &[&Path]) -> Result<()> {
    let outputs: Vec<PathBuf> = outputs.iter().map(|p| absolute(p)).collect();
    let dir = manifest::parent_dir(&outputs[0]);
    manifest::record(
        &dir,
        StageRecord {
            stage: stage.to_owned(),
            args,
            outputs,
        },
    )
}

fn synth(a: &SynthArgs) -> Result<()> {
    let corpus = PlantedCorpus {
        n_recipes: a.recipes,
        n_groups: a.groups,
        group_size: a.group_size,
        seed: a.seed,
        ..PlantedCorpus::default()
    };
    if a.groups < 2 || a.group_size < 2 {
        bail!("--groups and --group-size must be at least 2");
    }
    let recipes = corpus.generate();
    let mut out = create(&a.out)?;
    write_recipes_jsonl(&recipes, &mut out)?;
    finish(out, &a.out)?;
    eprintln!("wrote {} recipes over {} ingredients", recipes.len(), corpus.vocabulary().len());

    let mut args = vec!["synth".to_owned()];
    args.extend(path_arg("out", &a.out));
    args.extend(arg("recipes", a.recipes));
    args.extend(arg("groups", a.groups));
    args.extend(arg("group-size", a.group_size));
    args.extend(arg("seed", a.seed));
    record("synth", args, &[&a.out])
}

fn ingest(a: &IngestArgs) -> Result<()> {
    if a.shards == 0 {
        bail!("--shards must be at least 1");
    }
    let recipes = load_recipes(open(&a.recipes)?).with_context(|| format!("reading {}", a.recipes.display()))?;
    if recipes.is_empty() {
        bail!("no recipes with two or more ingredients in {}", a.recipes.display());
    }
    let raw = if a.shards > 1 {
        count_sharded(&recipes, a.shards)
    } else {
        count_corpus(&recipes)
    };
    let table = filter_counts(&raw, a.min_occurrence, a.min_cooccurrence)?;
    let mut out = create(&a.out)?;
    write_counts_tsv(&table, &mut out)?;
    finish(out, &a.out)?;
    println!("recipes\t{}", table.recipe_count);
    println!("vocab_size\t{}", table.vocab_size());
    println!("known_pairs\t{}", table.pair_count());

    let mut args = vec!["ingest".to_owned()];
    args.extend(path_arg("recipes", &a.recipes));
    args.extend(path_arg("out", &a.out));
    args.extend(arg("min-occurrence", a.min_occurrence));
    args.extend(arg("min-cooccurrence", a.min_cooccurrence));
    args.extend(arg("shards", a.shards));
    record("ingest", args, &[&a.out])
}

fn score(a: &ScoreArgs) -> Result<()> {
    a.ratios.validate()?;
    let counts = read_counts_tsv(open(&a.counts)?).with_context(|| format!("reading {}", a.counts.display()))?;
    let dataset = build_dataset(&counts, a.seed, a.ratios)?;
    let stats_path = a
        .stats
        .clone()
        .unwrap_or_else(|| manifest::parent_dir(&a.out).join("stats.json"));
    let mut out = create(&a.out)?;
    write_scores_tsv(&dataset, &mut out)?;
    finish(out, &a.out)?;
    let mut out = create(&stats_path)?;
    serde_json::to_writer_pretty(&mut out, dataset.stats())?;
    writeln!(out)?;
    finish(out, &stats_path)?;
    let s = dataset.stats();
    eprintln!(
        "{} pairs, mean {:.4}, std {:.4}, top threshold {:.4}",
        s.n_pairs, s.mean, s.std, s.top_threshold
    );

    let r = a.ratios;
    let mut args = vec!["score".to_owned()];
    args.extend(path_arg("counts", &a.counts));
    args.extend(path_arg("out", &a.out));
    args.extend(path_arg("stats", &stats_path));
    args.extend(arg("seed", a.seed));
    args.extend(arg("ratios", format!("{},{},{}", r.train, r.val, r.test)));
    record("score", args, &[&a.out, &stats_path])
}

fn embed(a: &EmbedArgs) -> Result<()> {
    let counts = read_counts_tsv(open(&a.counts)?).with_context(|| format!("reading {}", a.counts.display()))?;
    let mut args = vec!["embed".to_owned()];
    args.extend(path_arg("counts", &a.counts));
    let table = match &a.load {
        Some(path) => {
            let vocabulary: BTreeSet<String> = counts.vocabulary().map(str::to_owned).collect();
            let table = load_embeddings(open(path)?, &vocabulary)
                .with_context(|| format!("validating {}", path.display()))?;
            eprintln!("{}: {} of {} tokens, {}-d", path.display(), table.len(), vocabulary.len(), table.dim());
            args.extend(path_arg("load", path));
            table
        }
        None => {
            if a.out.is_none() {
                bail!("--out is required unless --load is given");
            }
            let table = train_ppmi_svd(&counts, a.dim, a.shift, a.seed)?;
            eprintln!("trained {} vectors of dimension {}", table.len(), table.dim());
            args.extend(arg("dim", a.dim));
            args.extend(arg("shift", a.shift));
            args.extend(arg("seed", a.seed));
            table
        }
    };
    let Some(out_path) = &a.out else {
        return Ok(());
    };
    let mut out = create(out_path)?;
    save_embeddings(&table, &mut out)?;
    finish(out, out_path)?;
    args.extend(path_arg("out", out_path));
    record("embed", args, &[out_path])
}

fn train(a: &TrainArgs) -> Result<()> {
    let dataset = read_scores_tsv(open(&a.scores)?).with_context(|| format!("reading {}", a.scores.display()))?;
    let file_embeddings =
        load_all_embeddings(open(&a.embeddings)?).with_context(|| format!("reading {}", a.embeddings.display()))?;
    let hp = Hyperparams {
        input_dim: file_embeddings.dim(),
        hidden_i: a.hidden,
        hidden_j: a.hidden,
        symmetrize: a.symmetrize,
        use_wide: !a.no_wide,
    };
    hp.validate()?;
    let (inputs, input_embeddings) = if a.random_embeddings {
        (
            random_embeddings(file_embeddings.tokens(), hp.input_dim, a.seed),
            InputEmbeddings::Random { seed: a.seed },
        )
    } else {
        (file_embeddings, InputEmbeddings::File)
    };
    let config = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        ..TrainConfig::default()
    };
    config.validate()?;

    let started = Instant::now();
    let outcome = train_loop(&dataset, &inputs, &hp, &config, |e| {
        eprintln!(
            "epoch {:>4}  train_mse {:.6}  val_rmse {:.6}  {:.1}s",
            e.epoch, e.train_mse, e.val_rmse, e.elapsed_seconds
        );
    })?;

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let best_path = a.out_dir.join(BEST_CHECKPOINT);
    let last_path = a.out_dir.join(LAST_CHECKPOINT);
    let log_path = a.out_dir.join(TRAIN_LOG);
    for (path, params) in [(&best_path, &outcome.best), (&last_path, &outcome.last)] {
        let checkpoint = Checkpoint {
            hyperparams: hp,
            input_embeddings,
            params: params.clone(),
        };
        let mut out = create(path)?;
        checkpoint.write(&mut out)?;
        finish(out, path)?;
    }
    let mut out = create(&log_path)?;
    writeln!(out, "epoch,train_mse,val_rmse")?;
    for e in &outcome.log {
        writeln!(out, "{},{},{}", e.epoch, format_score(e.train_mse), format_score(e.val_rmse))?;
    }
    finish(out, &log_path)?;
    eprintln!(
        "best epoch {} of {}, val_rmse {:.6}, {:.1}s",
        outcome.best_epoch,
        outcome.log.len(),
        outcome.best_val_rmse(),
        started.elapsed().as_secs_f64()
    );

    let mut args = vec!["train".to_owned()];
    args.extend(path_arg("scores", &a.scores));
    args.extend(path_arg("embeddings", &a.embeddings));
    args.extend(arg("hidden", a.hidden));
    args.extend(arg("seed", a.seed));
    args.extend(path_arg("out-dir", &a.out_dir));
    for (on, flag) in [
        (a.no_wide, "--no-wide"),
        (a.random_embeddings, "--random-embeddings"),
        (a.symmetrize, "--symmetrize"),
    ] {
        if on {
            args.push(flag.to_owned());
        }
    }
    args.extend(arg("lr", a.lr));
    args.extend(arg("batch-size", a.batch_size));
    args.extend(arg("max-epochs", a.max_epochs));
    args.extend(arg("patience", a.patience));
    record("train", args, &[&a.out_dir, &best_path, &last_path, &log_path])
}

fn eval(a: &EvalArgs) -> Result<()> {
    let dataset = Arc::new(read_scores_tsv(open(&a.scores)?).with_context(|| format!("reading {}", a.scores.display()))?);
    let tokens: BTreeSet<String> = dataset.tokens().into_iter().map(str::to_owned).collect();
    let embeddings = load_embeddings(open(&a.embeddings)?, &tokens)
        .with_context(|| format!("reading {}", a.embeddings.display()))?;
    let checkpoint = match &a.checkpoint {
        Some(path) => Some(Arc::new(
            Checkpoint::read(open(path)?).with_context(|| format!("reading {}", path.display()))?,
        )),
        None => None,
    };
    let name = a.baseline.as_deref().unwrap_or("siamese");
    let ctx = PredictorContext {
        embeddings: Some(Arc::new(embeddings)),
        dataset: Some(Arc::clone(&dataset)),
        checkpoint,
    };
    let predictor = PredictorRegistry::default().build(name, &ctx)?;
    let threshold = a.threshold.unwrap_or(dataset.stats().top_threshold);
    let report = evaluate(predictor.as_ref(), &dataset, a.split, threshold)?;

    let mut out = create(&a.out)?;
    report.write_json(&mut out)?;
    finish(out, &a.out)?;
    if let Some(csv) = &a.csv {
        let fresh = !csv.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv)
            .with_context(|| format!("opening {}", csv.display()))?;
        if fresh {
            writeln!(f, "{}", MetricsReport::CSV_HEADER)?;
        }
        writeln!(f, "{}", report.csv_row())?;
    }
    eprintln!("{}", MetricsReport::CSV_HEADER);
    eprintln!("{}", report.csv_row());

    let mut args = vec!["eval".to_owned()];
    if let Some(c) = &a.checkpoint {
        args.extend(path_arg("checkpoint", c));
    }
    args.extend(path_arg("scores", &a.scores));
    args.extend(path_arg("embeddings", &a.embeddings));
    args.extend(arg("split", a.split));
    args.extend(path_arg("out", &a.out));
    if let Some(b) = &a.baseline {
        args.extend(arg("baseline", b));
    }
    args.extend(arg("threshold", threshold));
    record("eval", args, &[&a.out])
}

fn rank(a: &RankArgs) -> Result<()> {
    let artifacts = Artifacts::from_paths(&ArtifactPaths {
        checkpoint: a.checkpoint.clone(),
        embeddings: a.embeddings.clone(),
        scores: a.scores.clone(),
        counts: a.counts.clone(),
    })?;
    let engine = artifacts.engine(&PredictorRegistry::default(), &a.predictor)?;
    let answers = engine.rank_partners(&a.ingredient, a.k, a.filter)?;
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    write_ranking_csv(&answers, &mut lock)?;
    lock.flush()?;
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::load(&a.config)?;
    if let Some(bind) = &a.bind {
        config.bind = bind.clone();
    }
    let artifacts = Artifacts::load(&config)?;
    let engine = artifacts.engine(&PredictorRegistry::default(), &a.predictor)?;
    let state = AppState::new(engine, artifacts.stats, config.cors_allowed_origin.as_deref());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .with_context(|| format!("binding {}", config.bind))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve_http(listener, state, shutdown_signal()).await?;
        eprintln!("shut down");
        Ok(())
    })
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let manifest = Manifest::read(&a.manifest)?;
    for stage in &manifest.stages {
        let cli = Cli::try_parse_from(std::iter::once("foodpair".to_owned()).chain(stage.args.iter().cloned()))
            .map_err(|e| anyhow!("manifest stage `{}`: {e}", stage.stage))?;
        if matches!(cli.command, Command::Replay(_) | Command::Serve(_)) {
            bail!("manifest stage `{}` cannot be replayed", stage.stage);
        }
        eprintln!("replaying {}", stage.stage);
        run(cli.command)?;
    }
    Ok(())
}
