use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use rgnn::ingest::{parse_records, Corpus, SplitLabel};
use rgnn::model::{declare_parameters, EntityInput, Rgnn, Side, Variant};
use rgnn::numcore::{read_checkpoint, write_checkpoint, Checkpoint, FdOptions, Tape};
use rgnn::pipeline::{build_graphs, graph_key, train_and_evaluate, RunResult};
use rgnn::seeds::{SeedFan, SPLIT};
use rgnn::synthetic::{planted_corpus, toy_instance};
use rgnn::trainer::{check_gradients, evaluate, EvalReport, Example, TrainingData, RESIDUAL_BINS};
use rgnn::wordgraph::GraphCache;

use super::manifest::RunManifest;
use super::settings::Settings;
use super::{EvalArgs, ExplainArgs, GradcheckArgs, SynthArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const METRICS_FILE: &str = "metrics.tsv";
const CORPUS_FINGERPRINT_KEY: &str = "# corpus-fingerprint=";

fn data_path(s: &Settings) -> Result<&Path> {
    s.data.as_deref().ok_or_else(|| anyhow!("--data is required"))
}

pub(super) fn out_dir(s: &Settings) -> Result<PathBuf> {
    let out = s.out.clone().ok_or_else(|| anyhow!("--out is required"))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

pub(super) fn load_corpus(s: &Settings) -> Result<(Corpus, PathBuf)> {
    let dir = data_path(s)?.to_path_buf();
    let corpus = Corpus::load(&dir).with_context(|| format!("loading corpus from {}", dir.display()))?;
    Ok((corpus, dir))
}

/// Reads the graph cache for the settings' window and seed from the corpus
/// directory, building and storing it first if absent.
pub(super) fn load_graphs(corpus: &Corpus, dir: &Path, s: &Settings) -> Result<(GraphCache, PathBuf)> {
    let key = graph_key(s.model.omega, s.seed);
    let path = dir.join(key.file_name());
    if path.exists() {
        let cache = GraphCache::read(BufReader::new(File::open(&path)?))
            .with_context(|| format!("reading {}", path.display()))?;
        if cache.key != key {
            bail!("graph cache {} does not match window/seed", path.display());
        }
        return Ok((cache, path));
    }
    log::info!("building graphs for omega={}", s.model.omega);
    let cache = build_graphs(corpus, key, s.mode())?;
    let mut w = BufWriter::new(File::create(&path)?);
    cache.write(&mut w)?;
    w.flush()?;
    Ok((cache, path))
}

pub(super) fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{}", header.join("\t"))?;
    for r in rows {
        writeln!(w, "{}", r.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

fn metadata(s: &Settings, corpus_fp: &str) -> String {
    format!("{}{CORPUS_FINGERPRINT_KEY}{corpus_fp}\n", s.snapshot_text())
}

/// Checkpoint plus the settings it was trained with.
fn open_checkpoint(path: &Path) -> Result<(Checkpoint, Settings, String)> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let ckpt = read_checkpoint(&mut f).with_context(|| format!("reading {}", path.display()))?;
    let settings = Settings::from_text(&ckpt.metadata).context("checkpoint metadata")?;
    let fp = ckpt
        .metadata
        .lines()
        .find_map(|l| l.strip_prefix(CORPUS_FINGERPRINT_KEY))
        .unwrap_or_default()
        .to_string();
    Ok((ckpt, settings, fp))
}

fn write_checkpoint_file(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    write_checkpoint(&mut w, ckpt)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn eval_rows(prefix: &str, r: &EvalReport) -> Vec<Vec<String>> {
    let mut rows = vec![
        vec![format!("{prefix}_mse"), r.mse.to_string()],
        vec![format!("{prefix}_count"), r.count.to_string()],
        vec![format!("{prefix}_fallback"), r.fallback.to_string()],
    ];
    let mut lo = 0.0;
    for (i, n) in r.histogram.iter().enumerate() {
        let label = match RESIDUAL_BINS.get(i) {
            Some(hi) => format!("{prefix}_abs_residual_{lo}_{hi}"),
            None => format!("{prefix}_abs_residual_{lo}_inf"),
        };
        rows.push(vec![label, n.to_string()]);
        lo = RESIDUAL_BINS.get(i).copied().unwrap_or(lo);
    }
    rows
}

pub fn preprocess(s: &Settings) -> Result<()> {
    let input = data_path(s)?;
    let out = out_dir(s)?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let parsed = parse_records(BufReader::new(file), s.format)?;
    if parsed.malformed > 0 {
        log::warn!("skipped {} malformed records", parsed.malformed);
    }
    let corpus = Corpus::preprocess(parsed.records, &s.corpus, SeedFan::new(s.seed).sub(SPLIT))?;
    corpus.save(&out)?;
    let (_, graphs_path) = load_graphs(&corpus, &out, s)?;

    let mut m = RunManifest::new("preprocess", s);
    m.corpus_fingerprint = Some(corpus.fingerprint());
    m.input("records", input)?;
    for f in ["records.tsv", "split.tsv", "vocab.tsv", "documents.tsv", "corpus.txt"] {
        m.artifact(f, &out.join(f))?;
    }
    m.artifact("graphs", &graphs_path)?;
    m.metric("records", corpus.records.len() as f64);
    m.metric("malformed", parsed.malformed as f64);
    m.metric("vocabulary", corpus.vocab.len() as f64);
    for label in [SplitLabel::Train, SplitLabel::Val, SplitLabel::Test] {
        m.metric(&format!("{label}_records"), corpus.split.count(label) as f64);
    }
    m.write(&out)?;
    println!(
        "records={} train={} val={} test={} vocabulary={} users={} items={}",
        corpus.records.len(),
        corpus.split.count(SplitLabel::Train),
        corpus.split.count(SplitLabel::Val),
        corpus.split.count(SplitLabel::Test),
        corpus.vocab.len(),
        corpus.users.len(),
        corpus.items.len()
    );
    Ok(())
}

/// Trains one configuration into `out`, writing the checkpoint at every
/// improvement, the epoch log, metrics and manifest.
pub(super) fn train_into(s: &Settings, corpus: &Corpus, corpus_dir: &Path, out: &Path, command: &str) -> Result<RunResult> {
    fs::create_dir_all(out)?;
    let (graphs, graphs_path) = load_graphs(corpus, corpus_dir, s)?;
    let data = TrainingData::from_corpus(corpus, &graphs, &s.model.ablations);
    let fp = corpus.fingerprint();
    let meta = metadata(s, &fp);
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let log_path = out.join(TRAIN_LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path)?);

    let result = train_and_evaluate(&data, &s.model, &s.train, s.seed, s.mode(), |t| {
        let e = t.history().epochs.last().expect("epoch recorded");
        let line = json!({
            "epoch": e.epoch,
            "train_loss": e.train_loss,
            "train_mse": e.train_mse,
            "val_mse": e.val_mse,
            "improved": e.improved,
            "wall_seconds": e.wall_seconds,
        });
        writeln!(log, "{line}")?;
        if e.improved {
            let ckpt = Checkpoint {
                metadata: meta.clone(),
                params: t.store().clone(),
                optimizer: Some(t.optimizer().clone()),
            };
            write_checkpoint_file(&ckpt_path, &ckpt).map_err(|e| std::io::Error::other(format!("{e:#}")))?;
        }
        Ok(())
    })?;
    log.flush()?;

    let h = &result.outcome.history;
    let mut rows = eval_rows("val", &result.val);
    rows.extend(eval_rows("test", &result.test));
    rows.push(vec!["best_epoch".into(), h.best_epoch.unwrap_or(0).to_string()]);
    rows.push(vec!["epochs".into(), h.epochs.len().to_string()]);
    let metrics_path = out.join(METRICS_FILE);
    write_tsv(&metrics_path, &["metric", "value"], &rows)?;

    let mut m = RunManifest::new(command, s);
    m.corpus_fingerprint = Some(fp);
    m.input("corpus", &corpus_dir.join("corpus.txt"))?;
    m.input("graphs", &graphs_path)?;
    m.artifact("checkpoint", &ckpt_path)?;
    m.artifact("train_log", &log_path)?;
    m.artifact("metrics", &metrics_path)?;
    m.metric("val_mse", result.val.mse);
    m.metric("test_mse", result.test.mse);
    m.metric("best_epoch", h.best_epoch.unwrap_or(0) as f64);
    m.write(out)?;
    Ok(result)
}

pub fn train(s: &Settings) -> Result<()> {
    let (corpus, dir) = load_corpus(s)?;
    let out = out_dir(s)?;
    let r = train_into(s, &corpus, &dir, &out, "train")?;
    println!(
        "best_epoch={} val_mse={} test_mse={}",
        r.outcome.history.best_epoch.unwrap_or(0),
        r.val.mse,
        r.test.mse
    );
    Ok(())
}

/// Loads corpus, graphs and checkpoint and checks that they belong
/// together.
fn checkpoint_context(common: &Settings, checkpoint: &Path) -> Result<(Corpus, TrainingData, Rgnn, Checkpoint, Settings)> {
    let (ckpt, trained, fp) = open_checkpoint(checkpoint)?;
    let (corpus, dir) = load_corpus(common)?;
    if fp != corpus.fingerprint() {
        bail!("checkpoint was trained on a different corpus (fingerprint {fp})");
    }
    let mut s = trained.clone();
    s.sequential = common.sequential;
    let (graphs, _) = load_graphs(&corpus, &dir, &s)?;
    let data = TrainingData::from_corpus(&corpus, &graphs, &s.model.ablations);
    let expected = declare_parameters(&s.model, data.sizes(), 0)?;
    if !expected.same_layout(&ckpt.params) {
        bail!("checkpoint parameter shapes do not match the corpus vocabulary/entity counts");
    }
    let model = Rgnn::new(s.model.clone())?;
    Ok((corpus, data, model, ckpt, s))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let common = a.common.resolve()?;
    let (corpus, data, model, ckpt, trained) = checkpoint_context(&common, &a.checkpoint)?;
    let label: SplitLabel = a.split.parse().map_err(|e| anyhow!("--split: {e}"))?;
    let examples = match label {
        SplitLabel::Train => &data.train,
        SplitLabel::Val => &data.val,
        SplitLabel::Test => &data.test,
    };
    let r = evaluate(&model, &ckpt.params, &data, examples, common.mode())?;
    let name = label.to_string();
    let rows = eval_rows(&name, &r);
    for row in &rows {
        println!("{}", row.join("\t"));
    }
    if let Some(out) = &common.out {
        fs::create_dir_all(out)?;
        let path = out.join(METRICS_FILE);
        write_tsv(&path, &["metric", "value"], &rows)?;
        let mut m = RunManifest::new("eval", &trained);
        m.corpus_fingerprint = Some(corpus.fingerprint());
        m.input("checkpoint", &a.checkpoint)?;
        m.artifact("metrics", &path)?;
        m.metric(&format!("{name}_mse"), r.mse);
        m.write(out)?;
    }
    Ok(())
}

pub fn ablate(s: &Settings) -> Result<()> {
    let (corpus, dir) = load_corpus(s)?;
    let out = out_dir(s)?;
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let mut vs = s.clone();
        vs.model = s.model.with_variant(v);
        log::info!("variant {v}");
        let r = train_into(&vs, &corpus, &dir, &out.join(v.name()), "ablate")?;
        let h = &r.outcome.history;
        rows.push(vec![
            v.name().to_string(),
            r.val.mse.to_string(),
            r.test.mse.to_string(),
            h.best_epoch.unwrap_or(0).to_string(),
            h.epochs.len().to_string(),
        ]);
        println!("{}\t{}\t{}", v.name(), r.val.mse, r.test.mse);
    }
    write_tsv(
        &out.join("ablation.tsv"),
        &["variant", "val_mse", "test_mse", "best_epoch", "epochs"],
        &rows,
    )?;
    Ok(())
}

fn pair_records(
    model: &Rgnn,
    corpus: &Corpus,
    data: &TrainingData,
    store: &rgnn::numcore::ParameterStore,
    ex: &Example,
    user_id: &str,
    item_id: &str,
) -> Result<Vec<serde_json::Value>> {
    let rating = Some(ex.rating).filter(|r| r.is_finite());
    let (u, i): (EntityInput, EntityInput) = data.inputs(ex);
    let mut tape = Tape::new(store);
    let out = model.forward(&mut tape, u, i)?;
    let prediction = tape.scalar(out.prediction)?;
    let mut records = vec![json!({
        "pair": ex.key,
        "user": user_id,
        "item": item_id,
        "prediction": prediction,
        "rating": rating,
        "fallback": ex.is_fallback(),
    })];
    for (side, trace) in [(Side::User, &out.user_trace), (Side::Item, &out.item_trace)] {
        for (l, layer) in trace.layers.iter().enumerate() {
            let mut kept = vec![false; layer.words.len()];
            for &k in &layer.selected {
                kept[k] = true;
            }
            for (n, &w) in layer.words.iter().enumerate() {
                records.push(json!({
                    "pair": ex.key,
                    "side": side.name(),
                    "layer": l + 1,
                    "word": corpus.vocab.word(w).unwrap_or("?"),
                    "beta": layer.beta.get(n),
                    "kept": kept[n],
                }));
            }
        }
    }
    Ok(records)
}

pub fn explain(a: &ExplainArgs) -> Result<()> {
    let common = a.common.resolve()?;
    let (corpus, data, model, ckpt, _) = checkpoint_context(&common, &a.checkpoint)?;
    let mut pairs: Vec<(String, String, Option<f64>)> = Vec::new();
    if let (Some(u), Some(i)) = (&a.user, &a.item) {
        let known_user = corpus.records.iter().any(|r| &r.user_id == u);
        let known_item = corpus.records.iter().any(|r| &r.item_id == i);
        if !known_user {
            bail!("unknown user `{u}`");
        }
        if !known_item {
            bail!("unknown item `{i}`");
        }
        let rating = corpus
            .records
            .iter()
            .find(|r| &r.user_id == u && &r.item_id == i)
            .map(|r| r.rating);
        pairs.push((u.clone(), i.clone(), rating));
    } else {
        for idx in corpus.indices(SplitLabel::Test).into_iter().take(a.limit) {
            let r = &corpus.records[idx];
            pairs.push((r.user_id.clone(), r.item_id.clone(), Some(r.rating)));
        }
    }

    let mut sink: Box<dyn Write> = match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Box::new(BufWriter::new(File::create(dir.join("explain.jsonl"))?))
        }
        None => Box::new(std::io::stdout().lock()),
    };
    for (u, i, rating) in pairs {
        let ex = Example {
            key: format!("{u}|{i}"),
            user: corpus.users.get(&u),
            item: corpus.items.get(&i),
            rating: rating.unwrap_or(f64::NAN),
        };
        for rec in pair_records(&model, &corpus, &data, &ckpt.params, &ex, &u, &i)? {
            writeln!(sink, "{rec}")?;
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    let mut worst: f64 = 0.0;
    for k in 0..a.instances {
        let toy = toy_instance(a.seed + k as u64, a.dim);
        let model = Rgnn::new(toy.config.clone())?;
        let batch: Vec<&Example> = toy.data.train.iter().collect();
        let opts = FdOptions {
            seed: a.seed + k as u64,
            ..FdOptions::default()
        };
        let r = check_gradients(&model, &toy.store, &toy.data, &batch, 0.01, 1.0, &opts)?;
        println!(
            "instance={k} checked={} skipped_near_kink={} max_relative_error={:e} worst={}[{}]",
            r.checked,
            r.skipped_near_kink,
            r.max_relative_error,
            r.worst_param.as_deref().unwrap_or("-"),
            r.worst_index
        );
        worst = worst.max(r.max_relative_error);
    }
    println!("max_relative_error={worst:e} tolerance={:e}", a.tolerance);
    if worst >= a.tolerance {
        bail!("gradient check failed: {worst:e} >= {:e}", a.tolerance);
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let planted = planted_corpus(a.users, a.items, a.seed);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["user_id", "item_id", "rating", "review_text", "timestamp"])?;
    for r in &planted.records {
        w.write_record([
            r.user_id.as_str(),
            r.item_id.as_str(),
            &r.rating.to_string(),
            r.review_text.as_str(),
            &r.timestamp.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    println!("wrote {} records to {}", planted.records.len(), a.out.display());
    Ok(())
}
