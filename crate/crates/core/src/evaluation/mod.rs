//! Automatic evaluation: BLEU-1/2 and METEOR against reference counters,
//! weak-premise coverage, and paired significance tests between runs.

mod bleu;
mod meteor;
mod report;
mod stats;

pub use bleu::bleu_n;
pub use meteor::{align, count_chunks, meteor, score_from_counts};
pub use report::{
    compare_reports, evaluate_run, read_generated, weak_premise_coverage, Aggregates, EvalReport,
    ExampleScores, GeneratedCounter, HistogramBin, ReferenceMode, Significance, MAX_UNRESOLVED,
};
pub use stats::{paired_t_one_tailed, TTest};
