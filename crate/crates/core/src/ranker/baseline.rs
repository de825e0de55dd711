use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ArgumentPost;
use crate::error::{Error, Result};
use crate::seed;
use crate::text::words;

use super::{PremiseScores, Ranker};

/// Reference rankers to compare the trained ranker against.
#[derive(Clone, Copy)]
pub enum BaselineMethod<'a> {
    /// Uniform permutation seeded by `seed` and the post id.
    Random { seed: u64 },
    /// Longer premises first.
    SentenceLength,
    /// Per-premise classifier probability.
    Pointwise(&'a Ranker),
}

impl<'a> BaselineMethod<'a> {
    /// Parses `random`, `sentence_length` or `pointwise`; the latter needs
    /// a classifier.
    pub fn parse(name: &str, seed: u64, classifier: Option<&'a Ranker>) -> Result<Self> {
        match (name, classifier) {
            ("random", _) => Ok(Self::Random { seed }),
            ("sentence_length", _) => Ok(Self::SentenceLength),
            ("pointwise", Some(model)) => Ok(Self::Pointwise(model)),
            ("pointwise", None) => Err(Error::Config(
                "the pointwise baseline needs a trained classifier".into(),
            )),
            (other, _) => Err(Error::Config(format!("unknown baseline method {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random { .. } => "random",
            Self::SentenceLength => "sentence_length",
            Self::Pointwise(_) => "pointwise",
        }
    }
}

pub fn baseline_rank(post: &ArgumentPost, method: BaselineMethod<'_>) -> Result<PremiseScores> {
    let n = post.premises.len();
    match method {
        BaselineMethod::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, seed::fnv1a(&post.id)));
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut scores = vec![0.0; n];
            for (rank, &i) in order.iter().enumerate() {
                scores[i] = (n - rank) as f64;
            }
            Ok(PremiseScores::from_scores(scores))
        }
        BaselineMethod::SentenceLength => Ok(PremiseScores::from_scores(
            post.premises.iter().map(|p| words(p).len() as f64).collect(),
        )),
        BaselineMethod::Pointwise(model) => {
            let scores = model.rank_post(post)?;
            let probs = scores.scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
            Ok(PremiseScores::from_scores(probs))
        }
    }
}
