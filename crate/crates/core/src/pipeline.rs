//! Argument undermining end to end: rank the premises, generate one
//! counter for each of the `top_k` weakest, keep the counter that shares
//! the most content tokens with the premise it attacks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::ArgumentPost;
use crate::error::{Error, Result};
use crate::generator::{generate_counter, GeneratorModel, SamplingConfig, Variant};
use crate::ranker::{PremiseScores, Ranker};
use crate::seed;
use crate::text::{words, StopWords};

/// Lowercase alphabetic tokens of `text` that are not stopwords.
pub fn content_tokens(text: &str, stopwords: &StopWords) -> BTreeSet<String> {
    words(text)
        .into_iter()
        .filter(|w| w.chars().all(char::is_alphabetic) && !stopwords.contains(w))
        .collect()
}

/// Number of content tokens shared by a counter and a premise.
pub fn overlap_count(counter: &str, premise: &str, stopwords: &StopWords) -> usize {
    content_tokens(counter, stopwords)
        .intersection(&content_tokens(premise, stopwords))
        .count()
}

/// Anything that can order a post's premises by weakness.
pub trait PremiseRanker {
    fn rank(&self, post: &ArgumentPost) -> Result<PremiseScores>;
}

impl PremiseRanker for Ranker {
    fn rank(&self, post: &ArgumentPost) -> Result<PremiseScores> {
        self.rank_post(post)
    }
}

/// Anything that can write a counter focused on the given premises.
pub trait CounterGenerator {
    fn generate(
        &self,
        claim: &str,
        premises: &[String],
        attacked: &BTreeSet<usize>,
        seed: u64,
    ) -> Result<String>;
}

/// A trained generator with fixed decoding settings; the per-call seed
/// replaces `sampling.seed`.
pub struct SamplingGenerator<'a> {
    pub model: &'a GeneratorModel,
    pub variant: Variant,
    pub sampling: SamplingConfig,
}

impl CounterGenerator for SamplingGenerator<'_> {
    fn generate(
        &self,
        claim: &str,
        premises: &[String],
        attacked: &BTreeSet<usize>,
        seed: u64,
    ) -> Result<String> {
        let sampling = SamplingConfig {
            seed,
            ..self.sampling.clone()
        };
        generate_counter(self.model, claim, premises, attacked, self.variant, &sampling)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Number of top-ranked premises to attack, one counter each.
    pub top_k: usize,
    pub seed: u64,
    pub stopwords: StopWords,
}

impl PipelineConfig {
    pub fn new(top_k: usize, seed: u64) -> Self {
        Self {
            top_k,
            seed,
            stopwords: StopWords::english(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub attacked_index: usize,
    pub counter: String,
    pub overlap_count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterResult {
    pub post_id: String,
    /// In premise-rank order.
    pub candidates: Vec<Candidate>,
    pub selected: usize,
    pub premise_ranking: PremiseScores,
}

impl CounterResult {
    pub fn selected_candidate(&self) -> &Candidate {
        &self.candidates[self.selected]
    }

    /// The JSON-lines record: the selected counter in the same fields as a
    /// plain generation record, plus every candidate.
    pub fn to_record(&self) -> CounterResultRecord {
        let chosen = self.selected_candidate();
        CounterResultRecord {
            post_id: self.post_id.clone(),
            attacked_indices: vec![chosen.attacked_index],
            counter: chosen.counter.clone(),
            seed: chosen.seed,
            selected: self.selected,
            candidates: self.candidates.clone(),
            ranking: self.premise_ranking.ranking.clone(),
            scores: self.premise_ranking.scores.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterResultRecord {
    pub post_id: String,
    pub attacked_indices: Vec<usize>,
    pub counter: String,
    pub seed: u64,
    pub selected: usize,
    pub candidates: Vec<Candidate>,
    pub ranking: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Seed for the candidate attacking premise `index`.
pub fn candidate_seed(base: u64, index: usize) -> u64 {
    seed::derive(base, index as u64)
}

/// Index of the candidate with the largest overlap; among ties the one
/// listed first (the better-ranked premise).
pub fn select(candidates: &[Candidate]) -> Option<usize> {
    candidates
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (i, c)| match best {
            Some((_, top)) if top >= c.overlap_count => best,
            _ => Some((i, c.overlap_count)),
        })
        .map(|(i, _)| i)
}

pub fn undermine<R, G>(
    post: &ArgumentPost,
    ranker: &R,
    generator: &G,
    config: &PipelineConfig,
) -> Result<CounterResult>
where
    R: PremiseRanker + ?Sized,
    G: CounterGenerator + ?Sized,
{
    if config.top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let ranking = ranker.rank(post)?;
    if ranking.ranking.len() != post.premises.len() {
        return Err(Error::Model(format!(
            "ranker returned {} scores for {} premises",
            ranking.ranking.len(),
            post.premises.len()
        )));
    }
    let mut candidates = Vec::new();
    for &index in ranking.top(config.top_k) {
        let seed = candidate_seed(config.seed, index);
        let attacked = BTreeSet::from([index]);
        match generator.generate(&post.claim, &post.premises, &attacked, seed) {
            Ok(counter) => {
                let overlap = overlap_count(&counter, &post.premises[index], &config.stopwords);
                candidates.push(Candidate {
                    attacked_index: index,
                    counter,
                    overlap_count: overlap,
                    seed,
                });
            }
            Err(e) => log::warn!("post {}: candidate for premise {index} dropped: {e}", post.id),
        }
    }
    let selected = select(&candidates).ok_or_else(|| {
        Error::Model(format!("post {}: every candidate generation failed", post.id))
    })?;
    Ok(CounterResult {
        post_id: post.id.clone(),
        candidates,
        selected,
        premise_ranking: ranking,
    })
}
