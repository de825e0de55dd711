use std::collections::BTreeSet;
use std::path::Path;

use candle_core::{DType, Device, IndexOp, Tensor, Var};
use candle_nn::{linear, linear_no_bias, AdamW, Linear, Module, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointManifest};
use crate::corpus::CounterTriple;
use crate::error::{Error, Result};
use crate::nn::{seeded_init, PaddedBatch, TinyTransformer, TransformerConfig};
use crate::text::{Special, Vocab};

use super::sampling::{sample, truncated_distribution, SamplingConfig};
use super::sequence::{augment, encode_argument, TokenType, TrainingSequence, Variant};

pub const CHECKPOINT_KIND: &str = "generator";
const TOKEN_TYPE_VAR: &str = "transformer.embed.token_type.weight";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    /// Model context; the LM conditions on every previous token within it.
    pub context: usize,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            layers: 2,
            heads: 4,
            context: 256,
            variant: Variant::WithoutWeak,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Seeds distractor draws and batch order.
    pub seed: u64,
}

impl Default for GeneratorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 6,
            lr: 1e-3,
            batch_size: 16,
            seed: 1,
        }
    }
}

/// The two task losses and their unweighted sum.
pub struct JointLoss {
    /// Mean next-token NLL over counter positions of genuine sequences.
    pub lm: Tensor,
    /// Mean cross-entropy of the counter/distractor head.
    pub cls: Tensor,
    pub total: Tensor,
}

impl JointLoss {
    pub fn values(&self) -> Result<LossValues> {
        Ok(LossValues {
            lm: f64::from(self.lm.to_scalar::<f32>()?),
            cls: f64::from(self.cls.to_scalar::<f32>()?),
            total: f64::from(self.total.to_scalar::<f32>()?),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub lm: f64,
    pub cls: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: LossValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTrainReport {
    pub epochs: Vec<EpochStats>,
    pub sequences: usize,
}

/// Causal transformer with a language-model head over the vocabulary and
/// a two-way counter/distractor head on the final position.
pub struct GeneratorModel {
    varmap: VarMap,
    transformer: TinyTransformer,
    lm_head: Linear,
    cls_head: Linear,
    vocab: Vocab,
    config: GeneratorConfig,
    epochs_trained: usize,
}

impl GeneratorModel {
    pub fn new(vocab: Vocab, config: GeneratorConfig) -> Result<Self> {
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
        let transformer = TinyTransformer::new(
            TransformerConfig {
                vocab_size: vocab.len(),
                hidden: config.hidden,
                layers: config.layers,
                heads: config.heads,
                max_positions: config.context,
                type_vocab: TokenType::COUNT,
                causal: true,
            },
            vb.pp("transformer"),
        )?;
        let lm_head = linear_no_bias(config.hidden, vocab.len(), vb.pp("lm_head"))?;
        let cls_head = linear(config.hidden, 2, vb.pp("cls_head"))?;
        seeded_init(&varmap, config.seed)?;
        Ok(Self {
            varmap,
            transformer,
            lm_head,
            cls_head,
            vocab,
            config,
            epochs_trained: 0,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn varmap(&self) -> &VarMap {
        &self.varmap
    }

    pub fn context(&self) -> usize {
        self.config.context
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    /// The token-type embedding table, `(3, hidden)`.
    pub fn token_type_var(&self) -> Var {
        self.varmap.data().lock().expect("var map lock poisoned")[TOKEN_TYPE_VAR].clone()
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.varmap.data().lock().expect("var map lock poisoned").get(name).cloned()
    }

    fn batch(&self, seqs: &[&TrainingSequence]) -> Result<PaddedBatch> {
        let ids: Vec<Vec<u32>> = seqs.iter().map(|s| s.token_ids.clone()).collect();
        let types: Vec<Vec<u32>> = seqs.iter().map(|s| s.type_ids()).collect();
        PaddedBatch::new(&ids, Some(&types), self.transformer.device())
    }

    /// Hidden states `(batch, width, hidden)`.
    pub fn hidden_states(&self, seqs: &[&TrainingSequence]) -> Result<Tensor> {
        self.transformer.forward(&self.batch(seqs)?)
    }

    /// LM logits `(batch, width, vocab)` and classification logits `(batch, 2)`.
    pub fn forward(&self, seqs: &[&TrainingSequence]) -> Result<(Tensor, Tensor)> {
        let hidden = self.hidden_states(seqs)?;
        let lm = hidden.apply(&self.lm_head)?;
        let cls = self.cls_logits_from(&hidden, seqs)?;
        Ok((lm, cls))
    }

    fn cls_logits_from(&self, hidden: &Tensor, seqs: &[&TrainingSequence]) -> Result<Tensor> {
        let last: Vec<usize> = seqs.iter().map(|s| s.len() - 1).collect();
        let pooled = TinyTransformer::gather_positions(hidden, &last)?;
        Ok(pooled.apply(&self.cls_head)?)
    }

    /// Predicted label per sequence (1 = counter).
    pub fn classify(&self, seqs: &[&TrainingSequence]) -> Result<Vec<u8>> {
        let (_, cls) = self.forward(seqs)?;
        let logits = cls.to_vec2::<f32>()?;
        Ok(logits.iter().map(|l| u8::from(l[1] > l[0])).collect())
    }

    /// Next-token logits after the last position of `ids`.
    pub fn next_token_logits(&self, ids: &[u32], types: &[TokenType]) -> Result<Vec<f32>> {
        let type_ids: Vec<u32> = types.iter().map(|t| t.id()).collect();
        let batch = PaddedBatch::new(&[ids.to_vec()], Some(&[type_ids]), self.transformer.device())?;
        let hidden = self.transformer.forward(&batch)?;
        let last = hidden.i((0, ids.len() - 1))?.unsqueeze(0)?;
        Ok(self.lm_head.forward(&last)?.flatten_all()?.to_vec1::<f32>()?)
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
        let config: GeneratorConfig = serde_json::from_value(manifest.config)?;
        let mut model = Self::new(vocab, config)?;
        checkpoint::load_weights(dir, &mut model.varmap)?;
        model.epochs_trained = manifest.epochs_trained;
        Ok(model)
    }
}

/// Joint objective over a batch: next-token prediction on the counter
/// segment of genuine sequences plus counter/distractor classification
/// on every sequence, summed with equal weight.
pub fn joint_loss(model: &GeneratorModel, batch: &[&TrainingSequence]) -> Result<JointLoss> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let hidden = model.hidden_states(batch)?;
    let (b, width, h) = hidden.dims3()?;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, seq) in batch.iter().enumerate() {
        if seq.cls_label != 1 {
            continue;
        }
        for (p, t) in seq.lm_targets.iter().enumerate() {
            if let Some(t) = t {
                rows.push((i * width + p) as u32);
                targets.push(*t);
            }
        }
    }
    let device = hidden.device();
    let lm = if rows.is_empty() {
        log::warn!("batch has no genuine counter; next-token loss is zero");
        Tensor::new(0f32, device)?
    } else {
        let m = rows.len();
        let picked = hidden
            .reshape((b * width, h))?
            .index_select(&Tensor::from_vec(rows, m, device)?, 0)?;
        let logits = picked.apply(&model.lm_head)?;
        candle_nn::loss::cross_entropy(&logits, &Tensor::from_vec(targets, m, device)?)?
    };
    let cls_logits = model.cls_logits_from(&hidden, batch)?;
    let labels: Vec<u32> = batch.iter().map(|s| u32::from(s.cls_label)).collect();
    let cls = candle_nn::loss::cross_entropy(&cls_logits, &Tensor::from_vec(labels, b, device)?)?;
    let total = (&lm + &cls)?;
    Ok(JointLoss { lm, cls, total })
}

/// Adam optimizer bound to one model's parameters.
pub struct GeneratorTrainer {
    optimizer: AdamW,
}

impl GeneratorTrainer {
    pub fn new(model: &GeneratorModel, lr: f64) -> Result<Self> {
        let optimizer = AdamW::new(
            model.varmap.all_vars(),
            ParamsAdamW {
                lr,
                weight_decay: 0.0,
                ..Default::default()
            },
        )?;
        Ok(Self { optimizer })
    }

    pub fn step(&mut self, model: &GeneratorModel, batch: &[&TrainingSequence]) -> Result<LossValues> {
        let loss = joint_loss(model, batch)?;
        self.optimizer.backward_step(&loss.total)?;
        loss.values()
    }
}

/// Fine-tunes on the genuine sequences of `triples` plus one distractor
/// each. `on_epoch` runs after every epoch, e.g. to write a checkpoint.
pub fn train_generator<F>(
    model: &mut GeneratorModel,
    triples: &[CounterTriple],
    config: &GeneratorTrainConfig,
    mut on_epoch: F,
) -> Result<GeneratorTrainReport>
where
    F: FnMut(&EpochStats, &GeneratorModel) -> Result<()>,
{
    if triples.is_empty() {
        return Err(Error::EmptyTrainingSet("no counter triples to train on".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sequences = augment(triples, model.config.variant, &model.vocab, model.config.context, &mut rng)?;
    let mut trainer = GeneratorTrainer::new(model, config.lr)?;
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut report = GeneratorTrainReport {
        epochs: Vec::with_capacity(config.epochs),
        sequences: sequences.len(),
    };
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossValues::default();
        let mut steps = 0usize;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<&TrainingSequence> = chunk.iter().map(|&i| &sequences[i]).collect();
            let v = trainer.step(model, &batch)?;
            sum.lm += v.lm;
            sum.cls += v.cls;
            sum.total += v.total;
            steps += 1;
        }
        let n = steps.max(1) as f64;
        model.epochs_trained += 1;
        let stats = EpochStats {
            epoch: model.epochs_trained,
            loss: LossValues {
                lm: sum.lm / n,
                cls: sum.cls / n,
                total: sum.total / n,
            },
        };
        log::debug!("generator epoch {} loss {:?}", stats.epoch, stats.loss);
        on_epoch(&stats, model)?;
        report.epochs.push(stats);
    }
    Ok(report)
}

/// Samples counter token ids after the `[counter]` marker. `[eos]` is
/// blocked until `min_tokens` tokens exist; other special tokens are
/// never produced.
pub fn generate_counter_ids(
    model: &GeneratorModel,
    claim: &str,
    premises: &[String],
    attacked: &BTreeSet<usize>,
    variant: Variant,
    sampling: &SamplingConfig,
) -> Result<Vec<u32>> {
    sampling.validate()?;
    let (mut ids, mut types) = encode_argument(&model.vocab, claim, premises, attacked, variant)?;
    let needed = ids.len() + sampling.max_tokens;
    if needed > model.config.context {
        return Err(Error::ContextOverflow {
            needed,
            context: model.config.context,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut out = Vec::with_capacity(sampling.max_tokens);
    while out.len() < sampling.max_tokens {
        let logits = model.next_token_logits(&ids, &types)?;
        let eos_ok = out.len() >= sampling.min_tokens;
        let dist = truncated_distribution(&logits, sampling, |id| {
            if id == Special::Eos.id() {
                eos_ok
            } else {
                !Vocab::is_special(id)
            }
        });
        let next = sample(&dist, &mut rng)
            .ok_or_else(|| Error::Model("no token left to sample".into()))?;
        if next == Special::Eos.id() {
            break;
        }
        out.push(next);
        ids.push(next);
        types.push(TokenType::Counter);
    }
    Ok(out)
}

pub fn generate_counter(
    model: &GeneratorModel,
    claim: &str,
    premises: &[String],
    attacked: &BTreeSet<usize>,
    variant: Variant,
    sampling: &SamplingConfig,
) -> Result<String> {
    let ids = generate_counter_ids(model, claim, premises, attacked, variant, sampling)?;
    Ok(model.vocab.decode(&ids))
}
