use std::path::Path;

use candle_core::{DType, Device, Tensor, D};
use candle_nn::{linear, AdamW, Linear, Module, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointManifest};
use crate::corpus::{ArgumentPost, Corpus, Split};
use crate::error::{Error, Result};
use crate::nn::{seeded_init, EncoderAdapter, TinyTransformer, TransformerConfig};
use crate::text::Vocab;

use super::loss::listwise_softmax_loss_tensor;
use super::{PremiseScores, RankingExample};

pub const CHECKPOINT_KIND: &str = "ranker";

/// Training objective. `Pointwise` trains the same scorer as an
/// independent per-premise classifier and backs the classifier baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Listwise,
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_len: usize,
    pub seed: u64,
    pub objective: Objective,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            layers: 2,
            heads: 2,
            max_len: 64,
            seed: 1,
            objective: Objective::Listwise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Posts per optimizer step.
    pub batch_posts: usize,
    pub seed: u64,
}

impl Default for RankerTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4,
            lr: 1e-3,
            batch_posts: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerTrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Training posts without a weak premise (no listwise loss term).
    pub skipped_posts: usize,
    pub steps: usize,
}

/// Tiny transformer encoder plus a dense scoring head.
pub struct Ranker {
    varmap: VarMap,
    encoder: TinyTransformer,
    head: Linear,
    vocab: Vocab,
    config: RankerConfig,
    epochs_trained: usize,
}

impl Ranker {
    pub fn new(vocab: Vocab, config: RankerConfig) -> Result<Self> {
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
        let encoder = TinyTransformer::new(
            TransformerConfig {
                vocab_size: vocab.len(),
                hidden: config.hidden,
                layers: config.layers,
                heads: config.heads,
                max_positions: config.max_len,
                type_vocab: 0,
                causal: false,
            },
            vb.pp("encoder"),
        )?;
        let head = linear(config.hidden, 1, vb.pp("score"))?;
        seeded_init(&varmap, config.seed)?;
        Ok(Self {
            varmap,
            encoder,
            head,
            vocab,
            config,
            epochs_trained: 0,
        })
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn varmap(&self) -> &VarMap {
        &self.varmap
    }

    pub fn encoder(&self) -> &TinyTransformer {
        &self.encoder
    }

    pub fn projection(&self) -> &Linear {
        &self.head
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn example(&self, post: &ArgumentPost) -> Result<RankingExample> {
        RankingExample::new(
            self.vocab.encode(&post.claim),
            post.premises.iter().map(|p| self.vocab.encode(p)).collect(),
            post.labels(),
        )
    }

    pub fn score(&self, example: &RankingExample) -> Result<PremiseScores> {
        score_premises(&self.encoder, &self.head, example)
    }

    pub fn rank_post(&self, post: &ArgumentPost) -> Result<PremiseScores> {
        self.score(&self.example(post)?)
    }

    /// Raw scores for all premises of `examples`, concatenated, `(Σn,)`.
    fn score_tensor(&self, examples: &[&RankingExample]) -> Result<Tensor> {
        let mut pairs = Vec::new();
        for ex in examples {
            pairs.extend(ex.pairs(self.config.max_len)?);
        }
        let hidden = self.encoder.encode(&pairs)?;
        Ok(hidden.apply(&self.head)?.squeeze(D::Minus1)?)
    }

    fn batch_loss(&self, examples: &[&RankingExample]) -> Result<Option<Tensor>> {
        let scores = self.score_tensor(examples)?;
        let mut offset = 0;
        let mut losses = Vec::new();
        for ex in examples {
            let slice = scores.narrow(0, offset, ex.len())?;
            offset += ex.len();
            match self.config.objective {
                Objective::Listwise if ex.has_positive() => {
                    losses.push(listwise_softmax_loss_tensor(&slice, &ex.labels)?)
                }
                Objective::Listwise => {}
                Objective::Pointwise => losses.push(pointwise_loss(&slice, &ex.labels)?),
            }
        }
        if losses.is_empty() {
            return Ok(None);
        }
        Ok(Some(Tensor::stack(&losses, 0)?.mean_all()?))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let manifest = CheckpointManifest {
            kind: CHECKPOINT_KIND.to_owned(),
            config: serde_json::to_value(&self.config)?,
            vocab_hash: self.vocab.fingerprint(),
            seed: self.config.seed,
            epochs_trained: self.epochs_trained,
            version: checkpoint::version(),
        };
        checkpoint::save(dir, &manifest, &self.varmap, &self.vocab)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (manifest, vocab) = checkpoint::open(dir, CHECKPOINT_KIND)?;
        let config: RankerConfig = serde_json::from_value(manifest.config)?;
        let mut ranker = Self::new(vocab, config)?;
        checkpoint::load_weights(dir, &mut ranker.varmap)?;
        ranker.epochs_trained = manifest.epochs_trained;
        Ok(ranker)
    }
}

/// Mean binary cross-entropy of sigmoid(score) against the labels.
fn pointwise_loss(scores: &Tensor, labels: &[u8]) -> Result<Tensor> {
    let y: Vec<f32> = labels.iter().map(|&v| f32::from(v)).collect();
    let y = Tensor::from_vec(y, labels.len(), scores.device())?;
    // softplus(s) - y·s, with softplus(s) = max(s, 0) + ln(1 + e^{-|s|})
    let softplus = (scores.relu()? + (scores.abs()?.neg()?.exp()? + 1.0)?.log()?)?;
    Ok((softplus - (scores * y)?)?.mean_all()?)
}

/// Scores every premise of `example`: encode each `[cls] claim [sep]
/// premise [sep]` pair and project its first-position vector.
pub fn score_premises<A: EncoderAdapter>(
    adapter: &A,
    projection: &Linear,
    example: &RankingExample,
) -> Result<PremiseScores> {
    let pairs = example.pairs(adapter.max_len())?;
    let hidden = adapter.encode(&pairs)?;
    if hidden.dims2()?.1 != adapter.hidden_size() {
        return Err(Error::Model("encoder width does not match the projection".into()));
    }
    let scores = projection.forward(&hidden)?.flatten_all()?.to_vec1::<f32>()?;
    Ok(PremiseScores::from_scores(scores.into_iter().map(f64::from).collect()))
}

/// Mean listwise loss over the posts that have at least one weak premise.
pub fn mean_listwise_loss<'a, I>(ranker: &Ranker, posts: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a ArgumentPost>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for post in posts {
        let ex = ranker.example(post)?;
        if !ex.has_positive() {
            continue;
        }
        let scores = ranker.score(&ex)?;
        total += super::listwise_softmax_loss(&scores.scores, &ex.labels)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("no post with a weak premise".into()));
    }
    Ok(total / count as f64)
}

/// Trains on the corpus' train split. Each step averages the per-post
/// loss over `batch_posts` posts; post order is reshuffled every epoch
/// from `config.seed`. `on_epoch` receives the epoch number and its mean
/// loss after every epoch.
pub fn train_ranker<F>(
    ranker: &mut Ranker,
    corpus: &Corpus,
    config: &RankerTrainConfig,
    mut on_epoch: F,
) -> Result<RankerTrainReport>
where
    F: FnMut(usize, f64, &Ranker) -> Result<()>,
{
    let mut examples = Vec::new();
    let mut skipped = 0;
    for post in corpus.posts_in(Split::Train) {
        let ex = ranker.example(post)?;
        if ex.has_positive() {
            examples.push(ex);
        } else if ranker.config.objective == Objective::Listwise {
            skipped += 1;
        } else {
            examples.push(ex);
        }
    }
    if !examples.iter().any(RankingExample::has_positive) {
        return Err(Error::EmptyTrainingSet(
            "no training post has a weak premise".into(),
        ));
    }
    if skipped > 0 {
        log::info!("{skipped} training posts have no weak premise and add no loss");
    }
    let mut optimizer = AdamW::new(
        ranker.varmap.all_vars(),
        ParamsAdamW {
            lr: config.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch = config.batch_posts.max(1);
    let mut report = RankerTrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        skipped_posts: skipped,
        steps: 0,
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(batch) {
            let refs: Vec<&RankingExample> = chunk.iter().map(|&i| &examples[i]).collect();
            let Some(loss) = ranker.batch_loss(&refs)? else {
                continue;
            };
            optimizer.backward_step(&loss)?;
            sum += f64::from(loss.to_scalar::<f32>()?);
            steps += 1;
        }
        let mean = sum / steps.max(1) as f64;
        log::debug!("ranker epoch {} loss {mean:.4}", epoch + 1);
        report.epoch_losses.push(mean);
        report.steps += steps;
        ranker.epochs_trained += 1;
        on_epoch(ranker.epochs_trained, mean, ranker)?;
    }
    Ok(report)
}
