//! Argument corpus: posts, counter triples and the JSON-lines file format.
//!
//! A post's title is the claim, its sentences are the premises, the
//! sentences quoted by a comment are that comment's attacked (weak)
//! premises, and the comment's quoting text is the counter-argument.
//! Each retained comment becomes one [`CounterTriple`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::StopWords;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split {other:?}"))),
        }
    }
}

/// A claim with its ordered premise sentences and attackability labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgumentPost {
    pub id: String,
    pub claim: String,
    pub premises: Vec<String>,
    /// Union of the premise indices quoted by any retained comment.
    pub weak_indices: BTreeSet<usize>,
    pub split: Split,
}

impl ArgumentPost {
    /// Binary attackability label per premise.
    pub fn labels(&self) -> Vec<u8> {
        (0..self.premises.len())
            .map(|i| u8::from(self.weak_indices.contains(&i)))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidPost {
            post_id: self.id.clone(),
            message,
        };
        if self.claim.trim().is_empty() {
            return Err(invalid("claim is empty".into()));
        }
        if self.premises.is_empty() {
            return Err(invalid("post has no premise sentences".into()));
        }
        if let Some(&i) = self.weak_indices.iter().find(|&&i| i >= self.premises.len()) {
            return Err(invalid(format!(
                "weak premise index {i} out of range for {} premises",
                self.premises.len()
            )));
        }
        Ok(())
    }
}

/// One argument, the premises a single comment attacked, and its counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterTriple {
    pub post_id: String,
    pub claim: String,
    pub premises: Vec<String>,
    pub attacked_indices: BTreeSet<usize>,
    /// The quoting sentences of the comment.
    pub counter: String,
    /// The complete comment, when the corpus carries it.
    pub full_comment: Option<String>,
}

impl CounterTriple {
    /// The attacked premises joined in document order.
    pub fn attacked_text(&self) -> String {
        self.attacked_indices
            .iter()
            .map(|&i| self.premises[i].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub posts: usize,
    pub premises: usize,
    pub weak_premises: usize,
    pub triples: usize,
}

/// Per-split counts, derived from the posts and triples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub splits: BTreeMap<Split, SplitCounts>,
}

/// A validated, immutable collection of posts and their counter triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    posts: Vec<ArgumentPost>,
    triples: Vec<CounterTriple>,
    manifest: Manifest,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(posts: Vec<ArgumentPost>, triples: Vec<CounterTriple>) -> Result<Self> {
        let mut index = HashMap::with_capacity(posts.len());
        for (i, post) in posts.iter().enumerate() {
            post.validate()?;
            if index.insert(post.id.clone(), i).is_some() {
                return Err(Error::InvalidPost {
                    post_id: post.id.clone(),
                    message: "duplicate post id".into(),
                });
            }
        }
        let mut manifest = Manifest::default();
        for split in Split::ALL {
            manifest.splits.insert(split, SplitCounts::default());
        }
        for post in &posts {
            let counts = manifest.splits.get_mut(&post.split).expect("all splits present");
            counts.posts += 1;
            counts.premises += post.premises.len();
            counts.weak_premises += post.weak_indices.len();
        }
        for triple in &triples {
            let invalid = |message: &str| Error::InvalidPost {
                post_id: triple.post_id.clone(),
                message: message.to_owned(),
            };
            let post = index
                .get(&triple.post_id)
                .map(|&i| &posts[i])
                .ok_or_else(|| invalid("triple refers to an unknown post"))?;
            if triple.attacked_indices.is_empty() || triple.counter.trim().is_empty() {
                return Err(invalid("triple needs attacked premises and a counter"));
            }
            if !triple.attacked_indices.is_subset(&post.weak_indices) {
                return Err(invalid("triple attacks premises not marked weak"));
            }
            manifest.splits.get_mut(&post.split).expect("all splits present").triples += 1;
        }
        Ok(Self {
            posts,
            triples,
            manifest,
            index,
        })
    }

    pub fn posts(&self) -> &[ArgumentPost] {
        &self.posts
    }

    pub fn triples(&self) -> &[CounterTriple] {
        &self.triples
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn post(&self, id: &str) -> Option<&ArgumentPost> {
        self.index.get(id).map(|&i| &self.posts[i])
    }

    pub fn posts_in(&self, split: Split) -> impl Iterator<Item = &ArgumentPost> {
        self.posts.iter().filter(move |p| p.split == split)
    }

    pub fn triples_in(&self, split: Split) -> impl Iterator<Item = &CounterTriple> {
        self.triples
            .iter()
            .filter(move |t| self.post(&t.post_id).is_some_and(|p| p.split == split))
    }

    /// Converts back into file records; comments follow triple order.
    pub fn to_records(&self) -> Vec<PostRecord> {
        let mut comments: HashMap<&str, Vec<CommentRecord>> = HashMap::new();
        for t in &self.triples {
            comments.entry(t.post_id.as_str()).or_default().push(CommentRecord {
                quoted: t.attacked_indices.iter().map(|&i| i as i64).collect(),
                text: t.counter.clone(),
                full_text: t.full_comment.clone(),
            });
        }
        self.posts
            .iter()
            .map(|p| PostRecord {
                id: p.id.clone(),
                title: p.claim.clone(),
                sentences: p.premises.clone(),
                comments: comments.remove(p.id.as_str()).unwrap_or_default(),
                split: p.split,
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for record in self.to_records() {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_jsonl(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// One comment in the file format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentRecord {
    pub quoted: Vec<i64>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_text: Option<String>,
}

/// One line of the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRecord {
    pub id: String,
    pub title: String,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub comments: Vec<CommentRecord>,
    pub split: Split,
}

/// Result of mapping one post record onto the data model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedPost {
    pub post: ArgumentPost,
    pub triples: Vec<CounterTriple>,
    /// Comments dropped for an empty quote set or empty text.
    pub skipped_comments: usize,
}

/// Maps a post record and its comments onto a post plus one triple per
/// usable comment. The post's weak set is the union of the retained quotes.
pub fn build_triples(record: &PostRecord) -> Result<MappedPost> {
    let n = record.sentences.len();
    let mut triples = Vec::new();
    let mut weak = BTreeSet::new();
    let mut skipped = 0;
    for comment in &record.comments {
        let mut attacked = BTreeSet::new();
        for &q in &comment.quoted {
            if q < 0 || q as usize >= n {
                return Err(Error::InvalidPost {
                    post_id: record.id.clone(),
                    message: format!("quoted index {q} out of range for {n} premises"),
                });
            }
            attacked.insert(q as usize);
        }
        if attacked.is_empty() || comment.text.trim().is_empty() {
            skipped += 1;
            continue;
        }
        weak.extend(attacked.iter().copied());
        triples.push(CounterTriple {
            post_id: record.id.clone(),
            claim: record.title.clone(),
            premises: record.sentences.clone(),
            attacked_indices: attacked,
            counter: comment.text.clone(),
            full_comment: comment.full_text.clone(),
        });
    }
    let post = ArgumentPost {
        id: record.id.clone(),
        claim: record.title.clone(),
        premises: record.sentences.clone(),
        weak_indices: weak,
        split: record.split,
    };
    post.validate()?;
    Ok(MappedPost {
        post,
        triples,
        skipped_comments: skipped,
    })
}

/// A loaded corpus together with ingestion statistics.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub skipped_comments: usize,
}

/// Reads a JSON-lines corpus, reporting the offending line on failure.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut posts = Vec::new();
    let mut triples = Vec::new();
    let mut skipped = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PostRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let mapped = build_triples(&record).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        skipped += mapped.skipped_comments;
        posts.push(mapped.post);
        triples.extend(mapped.triples);
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} comments with an empty quote set or empty text");
    }
    let corpus = Corpus::new(posts, triples)?;
    Ok(Ingested {
        corpus,
        skipped_comments: skipped,
    })
}

pub fn ingest_corpus(path: &Path) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

/// Loads and validates a JSON-lines corpus file.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    ingest_corpus(path).map(|i| i.corpus)
}

/// Shape of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOptions {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    /// Word planted in every weak premise and nowhere else.
    pub marker: String,
}

impl SynthOptions {
    /// 80/10/10 split of `n_posts`, train first.
    pub fn with_posts(n_posts: usize) -> Self {
        let test = n_posts / 10;
        let valid = n_posts / 10;
        Self {
            train: n_posts - test - valid,
            valid,
            test,
            marker: DEFAULT_MARKER.to_owned(),
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }
}

pub const DEFAULT_MARKER: &str = "supposedly";

const COUNTER_OPENERS: [&str; 4] = ["but", "however", "actually", "no"];
const COUNTER_CLOSERS: [&str; 4] = [
    "is not convincing",
    "does not hold up",
    "is simply exaggerated",
    "misses the point",
];

/// Deterministic synthetic corpus with [`SynthOptions::with_posts`] splits.
pub fn synth_corpus(seed: u64, n_posts: usize, vocab: &[String]) -> Result<Corpus> {
    synth_corpus_with(seed, &SynthOptions::with_posts(n_posts), vocab)
}

/// Generates posts of 3 to 8 premises where exactly the premises carrying
/// the marker word are weak. Every weak premise receives one counter that
/// repeats at least 60% of its non-marker content words.
pub fn synth_corpus_with(seed: u64, options: &SynthOptions, vocab: &[String]) -> Result<Corpus> {
    if options.total() == 0 {
        return Err(Error::InvalidInput("a synthetic corpus needs at least one post".into()));
    }
    let stop = StopWords::english();
    let marker = options.marker.to_lowercase();
    let pool: Vec<&str> = vocab
        .iter()
        .map(String::as_str)
        .filter(|w| {
            *w != marker && !stop.contains(w) && w.chars().all(char::is_alphabetic)
        })
        .collect();
    if pool.len() < 16 {
        return Err(Error::InvalidInput(
            "synthetic vocabulary needs at least 16 alphabetic content words".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let splits = std::iter::repeat_n(Split::Train, options.train)
        .chain(std::iter::repeat_n(Split::Valid, options.valid))
        .chain(std::iter::repeat_n(Split::Test, options.test));
    let width = options.total().to_string().len();
    let mut records = Vec::with_capacity(options.total());
    for (i, split) in splits.enumerate() {
        let claim_len = rng.random_range(3..=6);
        let claim: Vec<&str> = pool.choose_multiple(&mut rng, claim_len).copied().collect();
        let n_premises = rng.random_range(3..=8);
        let n_weak = if rng.random_bool(0.3) { 2 } else { 1 };
        let mut order: Vec<usize> = (0..n_premises).collect();
        order.shuffle(&mut rng);
        let weak: BTreeSet<usize> = order.into_iter().take(n_weak).collect();
        let mut sentences = Vec::with_capacity(n_premises);
        let mut comments = Vec::new();
        for p in 0..n_premises {
            let len = rng.random_range(4..=9);
            let mut words: Vec<&str> = pool.choose_multiple(&mut rng, len).copied().collect();
            if weak.contains(&p) {
                let echo_len = (len * 3).div_ceil(5);
                let mut picked: Vec<usize> = (0..len).collect();
                picked.shuffle(&mut rng);
                picked.truncate(echo_len);
                picked.sort_unstable();
                let echo: Vec<&str> = picked.iter().map(|&k| words[k]).collect();
                let opener = COUNTER_OPENERS.choose(&mut rng).expect("non-empty");
                let closer = COUNTER_CLOSERS.choose(&mut rng).expect("non-empty");
                comments.push(CommentRecord {
                    quoted: vec![p as i64],
                    text: format!("{opener} {} {closer} .", echo.join(" ")),
                    full_text: None,
                });
                let at = rng.random_range(0..=words.len());
                words.insert(at, marker.as_str());
            }
            sentences.push(format!("{} .", words.join(" ")));
        }
        records.push(PostRecord {
            id: format!("synth-{seed}-{i:0width$}"),
            title: format!("{} .", claim.join(" ")),
            sentences,
            comments,
            split,
        });
    }
    let mut posts = Vec::with_capacity(records.len());
    let mut triples = Vec::new();
    for record in &records {
        let mapped = build_triples(record)?;
        posts.push(mapped.post);
        triples.extend(mapped.triples);
    }
    Corpus::new(posts, triples)
}
