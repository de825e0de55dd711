use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::text::words;

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    counts
}

/// Sentence-level BLEU with uniform weights over orders `1..=n`, clipped
/// against the multi-reference maximum counts, scaled to `[0, 100]`.
///
/// No smoothing: if any order has no matching n-gram the score is 0.
/// The brevity penalty uses the reference length closest to the
/// candidate's (the shorter one on ties).
pub fn bleu_n<S: AsRef<str>>(candidate: &str, references: &[S], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("BLEU order must be at least 1".into()));
    }
    let refs: Vec<Vec<String>> = references
        .iter()
        .map(|r| words(r.as_ref()))
        .filter(|r| !r.is_empty())
        .collect();
    if refs.is_empty() {
        return Err(Error::InvalidInput("BLEU needs a non-empty reference".into()));
    }
    let cand = words(candidate);
    if cand.is_empty() {
        log::warn!("empty candidate scores BLEU 0");
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for order in 1..=n {
        let cand_counts = ngrams(&cand, order);
        let total: usize = cand_counts.values().sum();
        if total == 0 {
            return Ok(0.0);
        }
        let ref_counts: Vec<_> = refs.iter().map(|r| ngrams(r, order)).collect();
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, &c)| {
                let max_ref = ref_counts.iter().map(|rc| rc.get(gram).copied().unwrap_or(0)).max();
                c.min(max_ref.unwrap_or(0))
            })
            .sum();
        if clipped == 0 {
            return Ok(0.0);
        }
        log_sum += (clipped as f64 / total as f64).ln() / n as f64;
    }
    let c = cand.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let brevity = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(100.0 * brevity * log_sum.exp())
}
