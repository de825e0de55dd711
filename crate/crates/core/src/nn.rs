//! A small pre-norm transformer used as the trainable backbone for both the
//! premise ranker (bidirectional) and the counter generator (causal).

use candle_core::{DType, Device, IndexOp, Tensor, D};
use candle_nn::{embedding, layer_norm, linear, Embedding, LayerNorm, Linear, VarBuilder, VarMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Special;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_positions: usize,
    /// Rows of the token-type table; zero disables it.
    pub type_vocab: usize,
    pub causal: bool,
}

impl TransformerConfig {
    fn check(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden width {} must be a positive multiple of the head count {}",
                self.hidden, self.heads
            )));
        }
        if self.max_positions == 0 || self.vocab_size <= Special::ALL.len() {
            return Err(Error::Config(
                "transformer needs a context and a vocabulary beyond the special tokens".into(),
            ));
        }
        Ok(())
    }
}

struct SelfAttention {
    qkv: Linear,
    out: Linear,
    heads: usize,
}

impl SelfAttention {
    fn forward(&self, x: &Tensor, mask: &Tensor) -> candle_core::Result<Tensor> {
        let (b, l, h) = x.dims3()?;
        let d = h / self.heads;
        let qkv = x.apply(&self.qkv)?;
        let split = |i: usize| -> candle_core::Result<Tensor> {
            qkv.narrow(D::Minus1, i * h, h)?
                .reshape((b, l, self.heads, d))?
                .transpose(1, 2)?
                .contiguous()
        };
        let (q, k, v) = (split(0)?, split(1)?, split(2)?);
        let scores = (q.matmul(&k.t()?)? * (1.0 / (d as f64).sqrt()))?;
        let weights = candle_nn::ops::softmax(&scores.broadcast_add(mask)?, D::Minus1)?;
        weights
            .matmul(&v)?
            .transpose(1, 2)?
            .reshape((b, l, h))?
            .apply(&self.out)
    }
}

const LN_EPS: f32 = 1e-5;

// candle's fused layer-norm kernel has no backward pass
fn norm(ln: &LayerNorm, x: &Tensor) -> candle_core::Result<Tensor> {
    match ln.bias() {
        Some(bias) => candle_nn::ops::layer_norm_slow(x, ln.weight(), bias, LN_EPS),
        None => x.apply(ln),
    }
}

struct Block {
    ln1: LayerNorm,
    attn: SelfAttention,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

impl Block {
    fn new(cfg: &TransformerConfig, vb: VarBuilder) -> candle_core::Result<Self> {
        let h = cfg.hidden;
        Ok(Self {
            ln1: layer_norm(h, f64::from(LN_EPS), vb.pp("ln1"))?,
            attn: SelfAttention {
                qkv: linear(h, 3 * h, vb.pp("attn.qkv"))?,
                out: linear(h, h, vb.pp("attn.out"))?,
                heads: cfg.heads,
            },
            ln2: layer_norm(h, f64::from(LN_EPS), vb.pp("ln2"))?,
            fc1: linear(h, 4 * h, vb.pp("mlp.fc1"))?,
            fc2: linear(4 * h, h, vb.pp("mlp.fc2"))?,
        })
    }

    fn forward(&self, x: &Tensor, mask: &Tensor) -> candle_core::Result<Tensor> {
        let x = (x + self.attn.forward(&norm(&self.ln1, x)?, mask)?)?;
        let mlp = norm(&self.ln2, &x)?.apply(&self.fc1)?.gelu()?.apply(&self.fc2)?;
        x + mlp
    }
}

/// Right-padded batch of token sequences.
#[derive(Debug, Clone)]
pub struct PaddedBatch {
    pub ids: Tensor,
    pub types: Option<Tensor>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn new(seqs: &[Vec<u32>], types: Option<&[Vec<u32>]>, device: &Device) -> Result<Self> {
        if seqs.is_empty() || seqs.iter().any(Vec::is_empty) {
            return Err(Error::InvalidInput("cannot batch empty sequences".into()));
        }
        let width = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let pad = |rows: &[Vec<u32>]| -> candle_core::Result<Tensor> {
            let mut flat = Vec::with_capacity(rows.len() * width);
            for r in rows {
                flat.extend_from_slice(r);
                flat.extend(std::iter::repeat_n(Special::Pad.id(), width - r.len()));
            }
            Tensor::from_vec(flat, (rows.len(), width), device)
        };
        let types = match types {
            Some(t) => {
                if t.len() != seqs.len() || t.iter().zip(seqs).any(|(a, b)| a.len() != b.len()) {
                    return Err(Error::InvalidInput("token types must align with tokens".into()));
                }
                Some(pad(t)?)
            }
            None => None,
        };
        Ok(Self {
            ids: pad(seqs)?,
            types,
            lengths: seqs.iter().map(Vec::len).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }
}

pub struct TinyTransformer {
    word: Embedding,
    position: Embedding,
    token_type: Option<Embedding>,
    blocks: Vec<Block>,
    ln_f: LayerNorm,
    cfg: TransformerConfig,
    device: Device,
}

impl TinyTransformer {
    pub fn new(cfg: TransformerConfig, vb: VarBuilder) -> Result<Self> {
        cfg.check()?;
        let word = embedding(cfg.vocab_size, cfg.hidden, vb.pp("embed.word"))?;
        let position = embedding(cfg.max_positions, cfg.hidden, vb.pp("embed.position"))?;
        let token_type = if cfg.type_vocab > 0 {
            Some(embedding(cfg.type_vocab, cfg.hidden, vb.pp("embed.token_type"))?)
        } else {
            None
        };
        let blocks = (0..cfg.layers)
            .map(|i| Block::new(&cfg, vb.pp(format!("blocks.{i}"))))
            .collect::<candle_core::Result<Vec<_>>>()?;
        let ln_f = layer_norm(cfg.hidden, f64::from(LN_EPS), vb.pp("ln_f"))?;
        Ok(Self {
            word,
            position,
            token_type,
            blocks,
            ln_f,
            device: vb.device().clone(),
            cfg,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.cfg
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn token_type_table(&self) -> Option<&Tensor> {
        self.token_type.as_ref().map(Embedding::embeddings)
    }

    fn mask(&self, lengths: &[usize], width: usize) -> candle_core::Result<Tensor> {
        let mut m = Vec::with_capacity(lengths.len() * width * width);
        for &len in lengths {
            for q in 0..width {
                for k in 0..width {
                    let hidden = k >= len || (self.cfg.causal && k > q);
                    m.push(if hidden { -1e9f32 } else { 0.0 });
                }
            }
        }
        Tensor::from_vec(m, (lengths.len(), 1, width, width), &self.device)
    }

    /// Hidden states of shape `(batch, width, hidden)`.
    ///
    /// The per-position input is the sum of the word, position and (when
    /// configured) token-type embeddings.
    pub fn forward(&self, batch: &PaddedBatch) -> Result<Tensor> {
        let width = batch.width();
        if width > self.cfg.max_positions {
            return Err(Error::ContextOverflow {
                needed: width,
                context: self.cfg.max_positions,
            });
        }
        let (b, _) = batch.ids.dims2()?;
        let positions = Tensor::arange(0u32, width as u32, &self.device)?;
        let mut x = batch
            .ids
            .apply(&self.word)?
            .broadcast_add(&positions.apply(&self.position)?.unsqueeze(0)?)?;
        match (&self.token_type, &batch.types) {
            (Some(table), Some(types)) => x = (x + types.apply(table)?)?,
            (Some(_), None) => {
                return Err(Error::InvalidInput("this model requires token types".into()))
            }
            (None, Some(_)) => {
                return Err(Error::InvalidInput("this model has no token-type table".into()))
            }
            (None, None) => {}
        }
        let mask = self.mask(&batch.lengths, width)?;
        for block in &self.blocks {
            x = block.forward(&x, &mask)?;
        }
        debug_assert_eq!(x.dims3()?, (b, width, self.cfg.hidden));
        Ok(norm(&self.ln_f, &x)?)
    }

    /// Hidden state at position `index[i]` of each sequence, `(batch, hidden)`.
    pub fn gather_positions(hidden: &Tensor, index: &[usize]) -> Result<Tensor> {
        let (b, width, h) = hidden.dims3()?;
        let flat: Vec<u32> = index
            .iter()
            .enumerate()
            .map(|(row, &p)| (row * width + p) as u32)
            .collect();
        let idx = Tensor::from_vec(flat, b, hidden.device())?;
        Ok(hidden.reshape((b * width, h))?.index_select(&idx, 0)?)
    }
}

/// Sequence encoder used by the ranker: one fixed-width vector per input.
pub trait EncoderAdapter {
    fn hidden_size(&self) -> usize;
    fn max_len(&self) -> usize;
    fn device(&self) -> &Device;
    /// First-position representation of each sequence, `(batch, hidden)`.
    fn encode(&self, batch: &[Vec<u32>]) -> Result<Tensor>;
}

impl EncoderAdapter for TinyTransformer {
    fn hidden_size(&self) -> usize {
        self.cfg.hidden
    }

    fn max_len(&self) -> usize {
        self.cfg.max_positions
    }

    fn device(&self) -> &Device {
        &self.device
    }

    fn encode(&self, batch: &[Vec<u32>]) -> Result<Tensor> {
        let padded = PaddedBatch::new(batch, None, &self.device)?;
        let hidden = self.forward(&padded)?;
        Ok(hidden.i((.., 0, ..))?.contiguous()?)
    }
}

/// Overwrites every variable in `varmap` from a seeded generator:
/// layer-norm scales to one, biases to zero, all other weights
/// N(0, 0.02). Variables are visited in name order.
pub fn seeded_init(varmap: &VarMap, seed: u64) -> Result<()> {
    let data = varmap.data().lock().expect("var map lock poisoned");
    let mut names: Vec<&String> = data.keys().collect();
    names.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, 0.02).expect("valid std");
    for name in names {
        let var = &data[name];
        let shape = var.shape().clone();
        let leaf = name.rsplit('.').next().unwrap_or("");
        let parent = name.rsplit('.').nth(1).unwrap_or("");
        let value = if leaf == "bias" {
            Tensor::zeros(&shape, DType::F32, var.device())?
        } else if parent.starts_with("ln") {
            Tensor::ones(&shape, DType::F32, var.device())?
        } else {
            let values: Vec<f32> = (0..shape.elem_count()).map(|_| normal.sample(&mut rng)).collect();
            Tensor::from_vec(values, &shape, var.device())?
        };
        var.set(&value)?;
    }
    Ok(())
}

/// Flattened copy of every variable, keyed by name, for equality checks.
pub fn snapshot(varmap: &VarMap) -> Result<std::collections::BTreeMap<String, Vec<f32>>> {
    let data = varmap.data().lock().expect("var map lock poisoned");
    data.iter()
        .map(|(k, v)| Ok((k.clone(), v.as_tensor().flatten_all()?.to_vec1::<f32>()?)))
        .collect()
}
