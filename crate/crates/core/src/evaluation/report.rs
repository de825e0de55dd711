use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CounterTriple};
use crate::error::{Error, Result};
use crate::pipeline::{content_tokens, overlap_count};
use crate::text::StopWords;

use super::{bleu_n, meteor, paired_t_one_tailed};

/// Largest tolerated share of generated records whose post is unknown.
pub const MAX_UNRESOLVED: f64 = 0.05;
const BINS: usize = 10;

/// One line of a generation output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedCounter {
    pub post_id: String,
    pub attacked_indices: Vec<usize>,
    pub counter: String,
    pub seed: u64,
}

pub fn read_generated(path: &Path) -> Result<Vec<GeneratedCounter>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// What a generated counter is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The quoting sentences of the comment.
    CounterSentences,
    /// The whole comment.
    FullComment,
}

impl std::str::FromStr for ReferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "counter" | "counter_sentences" => Ok(Self::CounterSentences),
            "full" | "full_comment" => Ok(Self::FullComment),
            other => Err(Error::Config(format!(
                "unknown reference mode {other:?} (expected counter or full)"
            ))),
        }
    }
}

/// Share of the premise's content tokens that the counter repeats;
/// `None` when the premise has no content token.
pub fn weak_premise_coverage(counter: &str, premise: &str, stopwords: &StopWords) -> Option<f64> {
    let total = content_tokens(premise, stopwords).len();
    (total > 0).then(|| overlap_count(counter, premise, stopwords) as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub post_id: String,
    pub attacked_indices: Vec<usize>,
    pub bleu1: f64,
    pub bleu2: f64,
    pub meteor: f64,
    pub coverage: Option<f64>,
}

impl ExampleScores {
    fn key(&self) -> (String, Vec<usize>) {
        (self.post_id.clone(), self.attacked_indices.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub examples: usize,
    pub bleu1: f64,
    pub bleu2: f64,
    pub meteor: f64,
    /// Mean over examples with a defined coverage.
    pub coverage: f64,
    pub coverage_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_start: f64,
    pub bin_end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub metric: String,
    pub system_a: String,
    pub system_b: String,
    pub t: Option<f64>,
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: ReferenceMode,
    pub per_example: Vec<ExampleScores>,
    pub aggregates: Aggregates,
    pub coverage_histogram: Vec<HistogramBin>,
    pub unresolved: Vec<String>,
    #[serde(default)]
    pub significance: Vec<Significance>,
}

struct Gold<'a> {
    references: Vec<&'a str>,
    premise: String,
}

fn resolve<'a>(
    generated: &GeneratedCounter,
    corpus: &'a Corpus,
    by_post: &BTreeMap<&str, Vec<&'a CounterTriple>>,
    mode: ReferenceMode,
) -> Option<Gold<'a>> {
    let post = corpus.post(&generated.post_id)?;
    let triples = by_post.get(generated.post_id.as_str())?;
    let wanted: BTreeSet<usize> = generated.attacked_indices.iter().copied().collect();
    let exact: Vec<&CounterTriple> = triples
        .iter()
        .copied()
        .filter(|t| t.attacked_indices == wanted)
        .collect();
    let chosen = if exact.is_empty() { triples.clone() } else { exact };
    let references = match mode {
        ReferenceMode::CounterSentences => chosen.iter().map(|t| t.counter.as_str()).collect(),
        ReferenceMode::FullComment => {
            let full: Vec<&str> = chosen.iter().filter_map(|t| t.full_comment.as_deref()).collect();
            if full.is_empty() {
                chosen.iter().map(|t| t.counter.as_str()).collect()
            } else {
                full
            }
        }
    };
    let attacked: BTreeSet<usize> = if wanted.is_empty() {
        chosen.iter().flat_map(|t| t.attacked_indices.iter().copied()).collect()
    } else {
        wanted
    };
    let premise = attacked
        .iter()
        .map(|&i| post.premises.get(i).map(String::as_str))
        .collect::<Option<Vec<_>>>()?
        .join(" ");
    Some(Gold { references, premise })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn histogram(values: impl Iterator<Item = f64>) -> Vec<HistogramBin> {
    let mut counts = [0usize; BINS];
    for v in values {
        let bin = ((v * BINS as f64).floor() as usize).min(BINS - 1);
        counts[bin] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramBin {
            bin_start: i as f64 / BINS as f64,
            bin_end: (i + 1) as f64 / BINS as f64,
            count,
        })
        .collect()
}

/// Scores every generated counter against its gold triple.
///
/// A record whose attacked premises equal those of a triple of its post is
/// compared with that triple; otherwise with all triples of the post.
/// Coverage is measured against the premises the record attacks (the gold
/// ones when it names none). Records whose post is unknown, has no triple
/// or lacks an attacked premise count as unresolved; more than
/// [`MAX_UNRESOLVED`] of them aborts the run.
pub fn evaluate_run(
    generated: &[GeneratedCounter],
    corpus: &Corpus,
    mode: ReferenceMode,
    stopwords: &StopWords,
) -> Result<EvalReport> {
    if generated.is_empty() {
        return Err(Error::InvalidInput("no generated counters to evaluate".into()));
    }
    let mut by_post: BTreeMap<&str, Vec<&CounterTriple>> = BTreeMap::new();
    for t in corpus.triples() {
        by_post.entry(t.post_id.as_str()).or_default().push(t);
    }
    let mut per_example = Vec::with_capacity(generated.len());
    let mut unresolved = Vec::new();
    for g in generated {
        let Some(gold) = resolve(g, corpus, &by_post, mode) else {
            unresolved.push(g.post_id.clone());
            continue;
        };
        per_example.push(ExampleScores {
            post_id: g.post_id.clone(),
            attacked_indices: g.attacked_indices.clone(),
            bleu1: bleu_n(&g.counter, &gold.references, 1)?,
            bleu2: bleu_n(&g.counter, &gold.references, 2)?,
            meteor: meteor(&g.counter, &gold.references)?,
            coverage: weak_premise_coverage(&g.counter, &gold.premise, stopwords),
        });
    }
    if unresolved.len() as f64 > MAX_UNRESOLVED * generated.len() as f64 {
        return Err(Error::InvalidInput(format!(
            "{} of {} generated records do not resolve to a gold triple: {}",
            unresolved.len(),
            generated.len(),
            unresolved.join(", ")
        )));
    }
    per_example.sort_by_key(ExampleScores::key);
    unresolved.sort();
    let covered: Vec<f64> = per_example.iter().filter_map(|e| e.coverage).collect();
    let aggregates = Aggregates {
        examples: per_example.len(),
        bleu1: mean(per_example.iter().map(|e| e.bleu1)),
        bleu2: mean(per_example.iter().map(|e| e.bleu2)),
        meteor: mean(per_example.iter().map(|e| e.meteor)),
        coverage: mean(covered.iter().copied()),
        coverage_excluded: per_example.len() - covered.len(),
    };
    Ok(EvalReport {
        mode,
        coverage_histogram: histogram(covered.into_iter()),
        per_example,
        aggregates,
        unresolved,
        significance: Vec::new(),
    })
}

/// Paired one-tailed t-tests of `a` over `b` on every metric, over the
/// examples both reports share.
pub fn compare_reports(a: &EvalReport, name_a: &str, b: &EvalReport, name_b: &str) -> Result<Vec<Significance>> {
    let index: BTreeMap<_, &ExampleScores> = b.per_example.iter().map(|e| (e.key(), e)).collect();
    let pairs: Vec<(&ExampleScores, &ExampleScores)> = a
        .per_example
        .iter()
        .filter_map(|e| index.get(&e.key()).map(|o| (e, *o)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidInput("the two runs share no example".into()));
    }
    type Metric = fn(&ExampleScores) -> Option<f64>;
    let metrics: [(&str, Metric); 4] = [
        ("bleu1", |e| Some(e.bleu1)),
        ("bleu2", |e| Some(e.bleu2)),
        ("meteor", |e| Some(e.meteor)),
        ("coverage", |e| e.coverage),
    ];
    let mut out = Vec::new();
    for (metric, get) in metrics {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter_map(|(x, y)| Some((get(x)?, get(y)?)))
            .unzip();
        let mut sig = Significance {
            metric: metric.to_owned(),
            system_a: name_a.to_owned(),
            system_b: name_b.to_owned(),
            t: None,
            p: None,
            note: None,
        };
        match paired_t_one_tailed(&xs, &ys) {
            Ok(r) => {
                sig.t = Some(r.t);
                sig.p = Some(r.p);
            }
            Err(e @ (Error::Degenerate(_) | Error::InvalidInput(_))) => {
                log::warn!("{metric}: {e}");
                sig.note = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
        out.push(sig);
    }
    Ok(out)
}

impl EvalReport {
    /// Aligned-column summary for terminals.
    pub fn to_text(&self) -> String {
        let a = &self.aggregates;
        let mut s = String::new();
        let mode = match self.mode {
            ReferenceMode::CounterSentences => "counter sentences",
            ReferenceMode::FullComment => "full comment",
        };
        let _ = writeln!(s, "reference mode   {mode}");
        let _ = writeln!(s, "examples         {}", a.examples);
        let _ = writeln!(s, "unresolved       {}", self.unresolved.len());
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>10}", "metric", "mean");
        let _ = writeln!(s, "{:<10} {:>10.4}", "meteor", a.meteor);
        let _ = writeln!(s, "{:<10} {:>10.3}", "bleu-1", a.bleu1);
        let _ = writeln!(s, "{:<10} {:>10.3}", "bleu-2", a.bleu2);
        let _ = writeln!(
            s,
            "{:<10} {:>10.4}  ({} excluded)",
            "coverage", a.coverage, a.coverage_excluded
        );
        if !self.significance.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<10} {:<16} {:<16} {:>9} {:>8}", "metric", "system a", "system b", "t", "p");
            for sig in &self.significance {
                let fmt = |v: Option<f64>, prec: usize| {
                    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.prec$}"))
                };
                let _ = writeln!(
                    s,
                    "{:<10} {:<16} {:<16} {:>9} {:>8}",
                    sig.metric,
                    sig.system_a,
                    sig.system_b,
                    fmt(sig.t, 3),
                    fmt(sig.p, 4)
                );
            }
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count\n");
        for b in &self.coverage_histogram {
            let _ = writeln!(s, "{:.1},{:.1},{}", b.bin_start, b.bin_end, b.count);
        }
        s
    }
}
