use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use undermine::checkpoint::{self, write_json};
use undermine::corpus::{self, ingest_corpus, ArgumentPost, load_corpus, Corpus, Split, SynthOptions};
use undermine::evaluation::{compare_reports, evaluate_run, read_generated, EvalReport, GeneratedCounter};
use undermine::generator::{self, GeneratorConfig, GeneratorModel, GeneratorTrainConfig};
use undermine::pipeline::{self, candidate_seed, PipelineConfig, SamplingGenerator};
use undermine::ranker::{
    accuracy_at_3, baseline_rank, precision_at_1, train_ranker, BaselineMethod, Objective,
    PremiseScores, Ranker, RankerConfig, RankerTrainConfig,
};
use undermine::text::{default_synth_vocab, StopWords, Vocab};
use undermine::{Error, Result};

use crate::args::*;

pub const MANIFEST: &str = "manifest.json";
/// Subdirectory of a training run holding the final model.
pub const MODEL_DIR: &str = "model";

/// Record of one command run, written to `<output_dir>/manifest.json`.
#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    version: String,
    config: &'a C,
    seeds: BTreeMap<&'a str, u64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    summary: Value,
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    seeds: &[(&str, u64)],
    summary: Value,
) -> Result<()> {
    write_json(
        &dir.join(MANIFEST),
        &RunManifest {
            command,
            version: version(),
            config,
            seeds: seeds.iter().copied().collect(),
            summary,
        },
    )
}

/// Crate version plus, when built from a git checkout, its description.
pub fn version() -> String {
    match option_env!("UNDERMINE_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("{} ({d})", checkpoint::version()),
        _ => checkpoint::version(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

/// A checkpoint directory, or a training run directory containing one.
fn resolve_checkpoint(path: &Path, what: &str) -> Result<PathBuf> {
    for dir in [path.join(MODEL_DIR), path.to_path_buf()] {
        if dir.join(checkpoint::MANIFEST_FILE).is_file() {
            return Ok(dir);
        }
    }
    Err(Error::Config(format!(
        "{what} checkpoint {} not found (expected {} inside it or in its {MODEL_DIR}/)",
        path.display(),
        checkpoint::MANIFEST_FILE
    )))
}

fn check_backbone(backbone: &Backbone) -> Result<()> {
    match backbone {
        Backbone::Tiny => Ok(()),
        Backbone::Pretrained(name) => Err(Error::Config(format!(
            "pretrained backbone {name:?} is not available in this build; use tiny"
        ))),
    }
}

fn load_stopwords(path: Option<&Path>) -> Result<StopWords> {
    match path {
        Some(p) => {
            require_file(p, "stopword file")?;
            StopWords::load(p)
        }
        None => Ok(StopWords::english()),
    }
}

fn epoch_dir(run: &Path, epoch: usize) -> PathBuf {
    run.join(format!("epoch-{epoch:03}"))
}

pub fn ingest(args: &IngestArgs) -> Result<String> {
    require_file(&args.corpus, "corpus")?;
    let ingested = ingest_corpus(&args.corpus)?;
    prepare_dir(&args.output_dir)?;
    let manifest = ingested.corpus.manifest();
    write_manifest(
        &args.output_dir,
        "ingest",
        args,
        &[],
        json!({ "corpus": manifest, "skipped_comments": ingested.skipped_comments }),
    )?;
    let mut out = format!("{:<6} {:>7} {:>9} {:>6} {:>8}\n", "split", "posts", "premises", "weak", "triples");
    for (split, c) in &manifest.splits {
        let _ = writeln!(out, "{:<6} {:>7} {:>9} {:>6} {:>8}", split, c.posts, c.premises, c.weak_premises, c.triples);
    }
    let _ = writeln!(out, "skipped comments: {}", ingested.skipped_comments);
    Ok(out)
}

pub fn synth(args: &SynthArgs) -> Result<String> {
    let vocab = match &args.vocab {
        Some(p) => {
            require_file(p, "vocabulary file")?;
            let raw = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            raw.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect()
        }
        None => default_synth_vocab(),
    };
    let mut options = SynthOptions::with_posts(args.posts);
    options.marker = args.marker.clone();
    if let Some(n) = args.train {
        options.train = n;
    }
    if let Some(n) = args.valid {
        options.valid = n;
    }
    if let Some(n) = args.test {
        options.test = n;
    }
    let corpus = corpus::synth_corpus_with(args.seed, &options, &vocab)?;
    prepare_dir(&args.output_dir)?;
    let path = args.output_dir.join("corpus.jsonl");
    corpus.save(&path)?;
    write_manifest(
        &args.output_dir,
        "synth",
        args,
        &[("seed", args.seed)],
        json!({ "corpus": corpus.manifest() }),
    )?;
    Ok(format!(
        "wrote {} posts and {} triples to {}\n",
        corpus.posts().len(),
        corpus.triples().len(),
        path.display()
    ))
}

fn load_checked_corpus(path: &Path) -> Result<Corpus> {
    require_file(path, "corpus")?;
    load_corpus(path)
}

fn ranker_vocab(corpus: &Corpus) -> Vocab {
    Vocab::build(
        corpus
            .posts_in(Split::Train)
            .flat_map(|p| std::iter::once(p.claim.as_str()).chain(p.premises.iter().map(String::as_str))),
    )
}

fn generator_vocab(corpus: &Corpus) -> Vocab {
    Vocab::build(corpus.triples_in(Split::Train).flat_map(|t| {
        std::iter::once(t.claim.as_str())
            .chain(t.premises.iter().map(String::as_str))
            .chain([t.counter.as_str()])
    }))
}

pub fn train_ranker_cmd(args: &TrainRankerArgs) -> Result<String> {
    check_backbone(&args.backbone)?;
    let corpus = load_checked_corpus(&args.corpus)?;
    let config = RankerConfig {
        hidden: args.hidden,
        layers: args.layers,
        heads: args.heads,
        max_len: args.max_len,
        seed: args.seed,
        objective: args.objective,
    };
    let mut ranker = Ranker::new(ranker_vocab(&corpus), config)?;
    let train = RankerTrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        batch_posts: args.batch_posts,
        seed: args.seed,
    };
    prepare_dir(&args.output_dir)?;
    let run = args.output_dir.clone();
    let report = train_ranker(&mut ranker, &corpus, &train, |epoch, loss, model| {
        log::info!("ranker epoch {epoch}: loss {loss:.4}");
        model.save(&epoch_dir(&run, epoch))
    })?;
    ranker.save(&args.output_dir.join(MODEL_DIR))?;
    write_manifest(&args.output_dir, "train-ranker", args, &[("seed", args.seed)], json!(report))?;
    let mut out = String::new();
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(out, "epoch {:>3}  loss {l:.4}", i + 1);
    }
    let _ = writeln!(out, "model saved to {}", args.output_dir.join(MODEL_DIR).display());
    Ok(out)
}

#[derive(Serialize)]
struct MethodScore {
    method: String,
    precision_at_1: f64,
    accuracy_at_3: f64,
}

pub fn eval_ranker(args: &EvalRankerArgs) -> Result<String> {
    let corpus = load_checked_corpus(&args.corpus)?;
    let ranker = Ranker::load(&resolve_checkpoint(&args.ranker, "ranker")?)?;
    let pointwise = match &args.pointwise {
        Some(p) => Some(Ranker::load(&resolve_checkpoint(p, "pointwise")?)?),
        None => None,
    };
    let (posts, excluded): (Vec<&ArgumentPost>, Vec<_>) = corpus
        .posts_in(args.split)
        .partition(|p| !p.weak_indices.is_empty());
    let mut posts = posts;
    posts.sort_by(|a, b| a.id.cmp(&b.id));
    if posts.is_empty() {
        return Err(Error::InvalidInput(format!("no {} post has a weak premise", args.split)));
    }
    let labels: Vec<Vec<u8>> = posts.iter().map(|p| p.labels()).collect();
    let mut methods: Vec<(String, Vec<PremiseScores>)> = Vec::new();
    let mut baselines = vec![BaselineMethod::Random { seed: args.seed }, BaselineMethod::SentenceLength];
    if let Some(model) = &pointwise {
        baselines.push(BaselineMethod::Pointwise(model));
    }
    for b in baselines {
        let ranked = posts.iter().map(|p| baseline_rank(p, b)).collect::<Result<_>>()?;
        methods.push((b.name().to_owned(), ranked));
    }
    let name = match ranker.config().objective {
        Objective::Listwise => "listwise",
        Objective::Pointwise => "pointwise_model",
    };
    methods.push((name.to_owned(), posts.iter().map(|p| ranker.rank_post(p)).collect::<Result<_>>()?));

    let scores = methods
        .iter()
        .map(|(m, r)| {
            Ok(MethodScore {
                method: m.clone(),
                precision_at_1: precision_at_1(r, &labels)?,
                accuracy_at_3: accuracy_at_3(r, &labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = format!("{:<16} {:>7} {:>7}\n", "method", "P@1", "A@3");
    for s in &scores {
        let _ = writeln!(table, "{:<16} {:>7.4} {:>7.4}", s.method, s.precision_at_1, s.accuracy_at_3);
    }
    let _ = writeln!(table, "\n{} {} posts ({} without a weak premise excluded)", posts.len(), args.split, excluded.len());
    prepare_dir(&args.output_dir)?;
    let metrics = json!({
        "split": args.split,
        "posts": posts.len(),
        "excluded_posts": excluded.len(),
        "methods": scores,
    });
    write_json(&args.output_dir.join("ranking-metrics.json"), &metrics)?;
    write_text(&args.output_dir.join("ranking-metrics.txt"), &table)?;
    let (_, model_ranked) = methods.last().expect("the trained model is always scored");
    let rows: Vec<_> = posts
        .iter()
        .zip(model_ranked)
        .map(|(p, r)| json!({ "id": p.id, "ranking": r.ranking, "scores": r.scores }))
        .collect();
    write_jsonl(&args.output_dir.join("rankings.jsonl"), &rows)?;
    write_manifest(&args.output_dir, "eval-ranker", args, &[("seed", args.seed)], Value::Null)?;
    Ok(table)
}

pub fn train_generator_cmd(args: &TrainGeneratorArgs) -> Result<String> {
    check_backbone(&args.backbone)?;
    let corpus = load_checked_corpus(&args.corpus)?;
    let triples: Vec<_> = corpus.triples_in(Split::Train).cloned().collect();
    let config = GeneratorConfig {
        hidden: args.hidden,
        layers: args.layers,
        heads: args.heads,
        context: args.context,
        variant: args.variant,
        seed: args.seed,
    };
    let mut model = GeneratorModel::new(generator_vocab(&corpus), config)?;
    let train = GeneratorTrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    prepare_dir(&args.output_dir)?;
    let run = args.output_dir.clone();
    let report = generator::train_generator(&mut model, &triples, &train, |stats, m| {
        log::info!("generator epoch {}: {:?}", stats.epoch, stats.loss);
        m.save(&epoch_dir(&run, stats.epoch))
    })?;
    model.save(&args.output_dir.join(MODEL_DIR))?;
    write_manifest(&args.output_dir, "train-generator", args, &[("seed", args.seed)], json!(report))?;
    let mut out = String::new();
    for e in &report.epochs {
        let _ = writeln!(
            out,
            "epoch {:>3}  L1 {:.4}  L2 {:.4}  total {:.4}",
            e.epoch, e.loss.lm, e.loss.cls, e.loss.total
        );
    }
    let _ = writeln!(out, "model saved to {}", args.output_dir.join(MODEL_DIR).display());
    Ok(out)
}

pub fn generate(args: &GenerateArgs) -> Result<String> {
    let corpus = load_checked_corpus(&args.corpus)?;
    let model = GeneratorModel::load(&resolve_checkpoint(&args.generator, "generator")?)?;
    let variant = model.config().variant;
    let mut triples: Vec<_> = corpus.triples_in(args.split).collect();
    triples.sort_by(|a, b| (&a.post_id, &a.attacked_indices).cmp(&(&b.post_id, &b.attacked_indices)));
    triples.dedup_by(|a, b| a.post_id == b.post_id && a.attacked_indices == b.attacked_indices);
    if triples.is_empty() {
        return Err(Error::InvalidInput(format!("no {} triples to generate for", args.split)));
    }
    let mut records = Vec::with_capacity(triples.len());
    for (n, t) in triples.iter().enumerate() {
        let first = *t.attacked_indices.iter().next().expect("triples attack a premise");
        let seed = candidate_seed(args.seed, first);
        let counter = generator::generate_counter(
            &model,
            &t.claim,
            &t.premises,
            &t.attacked_indices,
            variant,
            &args.sampling.config(seed),
        )?;
        log::debug!("generated {}/{}", n + 1, triples.len());
        records.push(GeneratedCounter {
            post_id: t.post_id.clone(),
            attacked_indices: t.attacked_indices.iter().copied().collect(),
            counter,
            seed,
        });
    }
    prepare_dir(&args.output_dir)?;
    let path = args.output_dir.join("generated.jsonl");
    write_jsonl(&path, &records)?;
    write_manifest(&args.output_dir, "generate", args, &[("seed", args.seed)], Value::Null)?;
    Ok(format!("wrote {} counters to {}\n", records.len(), path.display()))
}

pub fn undermine_cmd(args: &UndermineArgs) -> Result<String> {
    let generator_path = args
        .generator
        .as_deref()
        .ok_or_else(|| Error::Config("undermine needs a trained generator checkpoint (--generator)".into()))?;
    let ranker_path = args
        .ranker
        .as_deref()
        .ok_or_else(|| Error::Config("undermine needs a trained ranker checkpoint (--ranker)".into()))?;
    let generator_dir = resolve_checkpoint(generator_path, "generator")?;
    let ranker_dir = resolve_checkpoint(ranker_path, "ranker")?;
    if args.top_k == 0 {
        return Err(Error::Config("--top-k must be at least 1".into()));
    }
    args.sampling.config(args.seed).validate()?;
    let corpus = load_checked_corpus(&args.corpus)?;
    let stopwords = load_stopwords(args.stopwords.as_deref())?;
    let model = GeneratorModel::load(&generator_dir)?;
    let ranker = Ranker::load(&ranker_dir)?;
    let generator = SamplingGenerator {
        model: &model,
        variant: model.config().variant,
        sampling: args.sampling.config(args.seed),
    };
    let config = PipelineConfig {
        top_k: args.top_k,
        seed: args.seed,
        stopwords,
    };
    let mut posts: Vec<_> = corpus.posts_in(args.split).collect();
    posts.sort_by(|a, b| a.id.cmp(&b.id));
    if posts.is_empty() {
        return Err(Error::InvalidInput(format!("no {} posts to undermine", args.split)));
    }
    let mut records = Vec::with_capacity(posts.len());
    for post in &posts {
        let result = pipeline::undermine(post, &ranker, &generator, &config)?;
        records.push(result.to_record());
    }
    prepare_dir(&args.output_dir)?;
    let path = args.output_dir.join("counters.jsonl");
    write_jsonl(&path, &records)?;
    write_manifest(
        &args.output_dir,
        "undermine",
        args,
        &[("seed", args.seed)],
        json!({ "stopwords": config.stopwords.version() }),
    )?;
    Ok(format!("wrote {} counters to {}\n", records.len(), path.display()))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<String> {
    let corpus = load_checked_corpus(&args.corpus)?;
    require_file(&args.generated, "generated file")?;
    let stopwords = load_stopwords(args.stopwords.as_deref())?;
    let generated = read_generated(&args.generated)?;
    let report = evaluate_run(&generated, &corpus, args.mode, &stopwords)?;
    prepare_dir(&args.output_dir)?;
    write_json(&args.output_dir.join("report.json"), &report)?;
    let text = report.to_text();
    write_text(&args.output_dir.join("report.txt"), &text)?;
    write_text(&args.output_dir.join("coverage-histogram.csv"), &report.histogram_csv())?;
    write_manifest(
        &args.output_dir,
        "evaluate",
        args,
        &[],
        json!({ "stopwords": stopwords.version() }),
    )?;
    Ok(text)
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    require_file(&file, "report")?;
    let raw = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    Ok(serde_json::from_str(&raw)?)
}

pub fn compare(args: &CompareArgs) -> Result<String> {
    let a = read_report(&args.run_a)?;
    let b = read_report(&args.run_b)?;
    if a.mode != b.mode {
        return Err(Error::InvalidInput("the two reports use different reference modes".into()));
    }
    let name_a = args.name_a.clone().unwrap_or_else(|| args.run_a.display().to_string());
    let name_b = args.name_b.clone().unwrap_or_else(|| args.run_b.display().to_string());
    let significance = compare_reports(&a, &name_a, &b, &name_b)?;
    prepare_dir(&args.output_dir)?;
    write_json(&args.output_dir.join("comparison.json"), &significance)?;
    let mut text = format!("{:<10} {:>10} {:>10} {:>9} {:>8}\n", "metric", "mean a", "mean b", "t", "p");
    let means = |r: &EvalReport, m: &str| match m {
        "bleu1" => r.aggregates.bleu1,
        "bleu2" => r.aggregates.bleu2,
        "meteor" => r.aggregates.meteor,
        _ => r.aggregates.coverage,
    };
    for s in &significance {
        let t = s.t.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"));
        let p = s.p.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
        let _ = writeln!(
            text,
            "{:<10} {:>10.4} {:>10.4} {:>9} {:>8}",
            s.metric,
            means(&a, &s.metric),
            means(&b, &s.metric),
            t,
            p
        );
        if let Some(note) = &s.note {
            let _ = writeln!(text, "  note: {note}");
        }
    }
    let _ = writeln!(text, "\na = {name_a}\nb = {name_b}");
    write_text(&args.output_dir.join("comparison.txt"), &text)?;
    write_manifest(&args.output_dir, "compare", args, &[], Value::Null)?;
    Ok(text)
}
