//! Weak-premise ranking.
//!
//! Every premise is paired with the claim as
//! `[cls] claim [sep] premise [sep]`, encoded, reduced to its first-position
//! vector and projected to a scalar attackability score. Training optimizes
//! the listwise softmax loss jointly over all premises of a post.

mod baseline;
mod loss;
mod metrics;
mod model;

pub use baseline::{baseline_rank, BaselineMethod};
pub use loss::{listwise_softmax_grad, listwise_softmax_loss, listwise_softmax_loss_tensor};
pub use metrics::{accuracy_at_3, precision_at_1};
pub use model::{
    mean_listwise_loss, score_premises, train_ranker, Objective, Ranker, RankerConfig,
    RankerTrainConfig, RankerTrainReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Special;

/// Builds `[cls] claim [sep] premise [sep]`, trimming premise tokens first
/// and then claim tokens until the sequence fits `max_len`.
pub fn encode_pair(claim: &[u32], premise: &[u32], max_len: usize) -> Result<Vec<u32>> {
    if max_len < 3 {
        return Err(Error::InvalidInput(format!(
            "max_len {max_len} cannot hold [cls], [sep] and [sep]"
        )));
    }
    let room = max_len - 3;
    let premise_keep = premise.len().min(room.saturating_sub(claim.len()));
    let claim_keep = claim.len().min(room - premise_keep);
    let mut out = Vec::with_capacity(3 + claim_keep + premise_keep);
    out.push(Special::Cls.id());
    out.extend_from_slice(&claim[..claim_keep]);
    out.push(Special::Sep.id());
    out.extend_from_slice(&premise[..premise_keep]);
    out.push(Special::Sep.id());
    Ok(out)
}

/// Token ids of one post's claim and premises with their labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingExample {
    pub claim_tokens: Vec<u32>,
    pub premise_tokens: Vec<Vec<u32>>,
    pub labels: Vec<u8>,
}

impl RankingExample {
    pub fn new(claim_tokens: Vec<u32>, premise_tokens: Vec<Vec<u32>>, labels: Vec<u8>) -> Result<Self> {
        if premise_tokens.is_empty() || premise_tokens.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} premises with {} labels",
                premise_tokens.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidInput("labels must be 0 or 1".into()));
        }
        Ok(Self {
            claim_tokens,
            premise_tokens,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn has_positive(&self) -> bool {
        self.labels.contains(&1)
    }

    pub fn pairs(&self, max_len: usize) -> Result<Vec<Vec<u32>>> {
        self.premise_tokens
            .iter()
            .map(|p| encode_pair(&self.claim_tokens, p, max_len))
            .collect()
    }
}

/// Per-premise scores and the induced ranking (best first, ties to the
/// lower premise index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseScores {
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
}

impl PremiseScores {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, ranking }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// The `k` best premise indices, fewer when the post is shorter.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.ranking[..k.min(self.ranking.len())]
    }
}
