//! Exact-match METEOR (no stemming, no synonyms).
//!
//! ```text
//! F       = P·R / (α·P + (1 − α)·R)          α = 0.9
//! penalty = γ · (chunks / matches)^β         γ = 0.5, β = 3
//! score   = F · (1 − penalty)
//! ```

use crate::error::{Error, Result};
use crate::text::words;

pub const ALPHA: f64 = 0.9;
pub const BETA: f64 = 3.0;
pub const GAMMA: f64 = 0.5;

/// Unigram alignment as `(candidate_index, reference_index)` pairs sorted
/// by candidate index.
///
/// Repeatedly links the longest run of identical tokens that are still
/// unaligned on both sides (earliest candidate, then earliest reference
/// position on ties). Every step links at least one pair while a shared
/// token remains, so the result has the maximum number of matches; taking
/// long runs first keeps the chunk count low.
pub fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let (n, m) = (candidate.len(), reference.len());
    let mut cand_free = vec![true; n];
    let mut ref_free = vec![true; m];
    let mut pairs = Vec::new();
    let mut run = vec![0usize; (n + 1) * (m + 1)];
    loop {
        let mut best = (0usize, 0usize, 0usize);
        for i in 1..=n {
            for j in 1..=m {
                let here = i * (m + 1) + j;
                run[here] = if cand_free[i - 1] && ref_free[j - 1] && candidate[i - 1] == reference[j - 1] {
                    run[(i - 1) * (m + 1) + (j - 1)] + 1
                } else {
                    0
                };
                let len = run[here];
                if len > best.0 || (len == best.0 && len > 0 && (i - len, j - len) < (best.1, best.2)) {
                    best = (len, i - len, j - len);
                }
            }
        }
        let (len, ci, rj) = best;
        if len == 0 {
            break;
        }
        for t in 0..len {
            cand_free[ci + t] = false;
            ref_free[rj + t] = false;
            pairs.push((ci + t, rj + t));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Number of maximal runs contiguous in both candidate and reference.
pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// Score of a tokenized pair given its chunk count.
pub fn score_from_counts(cand_len: usize, ref_len: usize, matches: usize, chunks: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / cand_len as f64;
    let r = matches as f64 / ref_len as f64;
    let f = p * r / (ALPHA * p + (1.0 - ALPHA) * r);
    let penalty = GAMMA * (chunks as f64 / matches as f64).powf(BETA);
    f * (1.0 - penalty)
}

fn meteor_tokens(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let alignment = align(candidate, reference);
    score_from_counts(candidate.len(), reference.len(), alignment.len(), count_chunks(&alignment))
}

/// Maximum single-reference METEOR over `references`, in `[0, 1]`.
pub fn meteor<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<f64> {
    let refs: Vec<Vec<String>> = references
        .iter()
        .map(|r| words(r.as_ref()))
        .filter(|r| !r.is_empty())
        .collect();
    if refs.is_empty() {
        return Err(Error::InvalidInput("METEOR needs a non-empty reference".into()));
    }
    let cand = words(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }
    Ok(refs
        .iter()
        .map(|r| meteor_tokens(&cand, r))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        words(s)
    }

    #[test]
    fn identical_four_tokens() {
        let got = meteor("a b c d", &["a b c d"]).unwrap();
        assert!((got - (1.0 - 0.5 * (0.25f64).powi(3))).abs() < 1e-12);
    }

    #[test]
    fn swapped_pair_has_two_chunks() {
        let got = meteor("a b", &["b a"]).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(meteor("a b", &["c d"]).unwrap(), 0.0);
        assert_eq!(meteor("", &["c d"]).unwrap(), 0.0);
        assert!(meteor("a", &[" "]).is_err());
    }

    #[test]
    fn longest_run_wins_over_early_single() {
        // greedy left-to-right would link the first "a" and split the run
        let alignment = align(&toks("x a b c"), &toks("a y a b c"));
        assert_eq!(alignment, [(1, 2), (2, 3), (3, 4)]);
        assert_eq!(count_chunks(&alignment), 1);
    }
}
