use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CounterTriple;
use crate::error::{Error, Result};
use crate::text::{Special, Vocab};

/// Segment tag of a position; its embedding is added to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u32)]
pub enum TokenType {
    Arg = 0,
    Weak = 1,
    Counter = 2,
}

impl TokenType {
    pub const COUNT: usize = 3;

    pub fn id(self) -> u32 {
        self as u32
    }
}

/// How the attacked premises are marked in the argument segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Token types only.
    WithoutWeak,
    /// Token types plus `[weak]` wrappers around every attacked premise.
    WithWeak,
    /// No weak-premise information at all.
    CounterBaseline,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WithoutWeak => "without-weak",
            Variant::WithWeak => "with-weak",
            Variant::CounterBaseline => "counter-baseline",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "without-weak" | "w/o" | "wo" => Ok(Variant::WithoutWeak),
            "with-weak" | "w/" | "w" => Ok(Variant::WithWeak),
            "counter-baseline" => Ok(Variant::CounterBaseline),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected with-weak, without-weak or counter-baseline)"
            ))),
        }
    }
}

/// One generator input:
/// `[bos] claim premises… [counter] counter… [eos]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSequence {
    pub token_ids: Vec<u32>,
    pub token_type_ids: Vec<TokenType>,
    /// `lm_targets[p]` is the token to predict after position `p`; only
    /// set from the `[counter]` marker up to the token before `[eos]`.
    pub lm_targets: Vec<Option<u32>>,
    /// 1 for a genuine counter, 0 for a distractor.
    pub cls_label: u8,
    pub variant: Variant,
    /// Position of the `[counter]` marker.
    pub counter_start: usize,
}

impl TrainingSequence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn type_ids(&self) -> Vec<u32> {
        self.token_type_ids.iter().map(|t| t.id()).collect()
    }

    pub fn counter_tokens(&self) -> &[u32] {
        &self.token_ids[self.counter_start + 1..self.token_ids.len() - 1]
    }
}

/// Encodes `[bos] claim premises… [counter]` with token types; the
/// generation prefix and the head of every training sequence.
pub fn encode_argument(
    vocab: &Vocab,
    claim: &str,
    premises: &[String],
    attacked: &BTreeSet<usize>,
    variant: Variant,
) -> Result<(Vec<u32>, Vec<TokenType>)> {
    if let Some(&i) = attacked.iter().find(|&&i| i >= premises.len()) {
        return Err(Error::InvalidInput(format!(
            "attacked premise {i} out of range for {} premises",
            premises.len()
        )));
    }
    let mut ids = vec![Special::Bos.id()];
    let mut types = vec![TokenType::Arg];
    for id in vocab.encode(claim) {
        ids.push(id);
        types.push(TokenType::Arg);
    }
    for (i, premise) in premises.iter().enumerate() {
        let weak = variant != Variant::CounterBaseline && attacked.contains(&i);
        let ty = if weak { TokenType::Weak } else { TokenType::Arg };
        let wrap = weak && variant == Variant::WithWeak;
        if wrap {
            ids.push(Special::Weak.id());
            types.push(TokenType::Weak);
        }
        for id in vocab.encode(premise) {
            ids.push(id);
            types.push(ty);
        }
        if wrap {
            ids.push(Special::Weak.id());
            types.push(TokenType::Weak);
        }
    }
    ids.push(Special::Counter.id());
    types.push(TokenType::Counter);
    Ok((ids, types))
}

/// Builds one sequence for `triple` with `counter_text` in the counter
/// segment. When the sequence exceeds `context`, the counter tail is cut;
/// an argument that alone does not fit is an error.
pub fn build_sequence(
    triple: &CounterTriple,
    counter_text: &str,
    cls_label: u8,
    variant: Variant,
    vocab: &Vocab,
    context: usize,
) -> Result<TrainingSequence> {
    let (mut ids, mut types) =
        encode_argument(vocab, &triple.claim, &triple.premises, &triple.attacked_indices, variant)?;
    let counter_start = ids.len() - 1;
    let needed = ids.len() + 1;
    if needed > context {
        return Err(Error::ContextOverflow { needed, context });
    }
    let mut counter = vocab.encode(counter_text);
    counter.truncate(context - needed);
    ids.extend_from_slice(&counter);
    ids.push(Special::Eos.id());
    types.resize(ids.len(), TokenType::Counter);
    let mut lm_targets = vec![None; ids.len()];
    for p in counter_start..ids.len() - 1 {
        lm_targets[p] = Some(ids[p + 1]);
    }
    Ok(TrainingSequence {
        token_ids: ids,
        token_type_ids: types,
        lm_targets,
        cls_label,
        variant,
        counter_start,
    })
}

/// Sequence for the counter-baseline: same tokens as the
/// [`Variant::WithoutWeak`] encoding, every argument position typed `Arg`.
pub fn counter_baseline_sequence(
    triple: &CounterTriple,
    counter_text: &str,
    vocab: &Vocab,
    context: usize,
) -> Result<TrainingSequence> {
    build_sequence(triple, counter_text, 1, Variant::CounterBaseline, vocab, context)
}

/// Same argument as the genuine sequence, but the counter segment is one
/// premise sentence of the post drawn uniformly; labelled 0.
pub fn make_distractor<R: Rng + ?Sized>(
    triple: &CounterTriple,
    variant: Variant,
    vocab: &Vocab,
    context: usize,
    rng: &mut R,
) -> Result<(TrainingSequence, usize)> {
    if triple.premises.is_empty() {
        return Err(Error::InvalidInput("post has no sentence to draw a distractor from".into()));
    }
    let pick = rng.random_range(0..triple.premises.len());
    let seq = build_sequence(triple, &triple.premises[pick], 0, variant, vocab, context)?;
    Ok((seq, pick))
}

/// Genuine sequence and one distractor per triple, in triple order.
pub fn augment<R: Rng + ?Sized>(
    triples: &[CounterTriple],
    variant: Variant,
    vocab: &Vocab,
    context: usize,
    rng: &mut R,
) -> Result<Vec<TrainingSequence>> {
    let mut out = Vec::with_capacity(2 * triples.len());
    for t in triples {
        out.push(build_sequence(t, &t.counter, 1, variant, vocab, context)?);
        out.push(make_distractor(t, variant, vocab, context, rng)?.0);
    }
    Ok(out)
}
