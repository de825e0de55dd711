//! Counter-argument generation.
//!
//! A causal transformer reads `[bos] argument [counter] counter [eos]`
//! where each position also carries a token type (argument, weak premise,
//! counter). It is fine-tuned jointly on next-token prediction over the
//! counter and on telling genuine counters from distractor sentences.

mod model;
mod sampling;
mod sequence;

pub use model::{
    generate_counter, generate_counter_ids, joint_loss, train_generator, EpochStats,
    GeneratorConfig, GeneratorModel, GeneratorTrainConfig, GeneratorTrainReport,
    GeneratorTrainer, JointLoss, LossValues,
};
pub use sampling::{sample, truncated_distribution, SamplingConfig};
pub use sequence::{
    augment, build_sequence, counter_baseline_sequence, encode_argument, make_distractor,
    TokenType, TrainingSequence, Variant,
};
