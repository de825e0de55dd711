use crate::error::{Error, Result};

use super::PremiseScores;

fn check(rankings: &[PremiseScores], labels: &[Vec<u8>]) -> Result<()> {
    if rankings.is_empty() {
        return Err(Error::InvalidInput("no posts to evaluate".into()));
    }
    if rankings.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} rankings but {} label lists",
            rankings.len(),
            labels.len()
        )));
    }
    for (r, y) in rankings.iter().zip(labels) {
        if r.ranking.is_empty() || r.ranking.len() != y.len() {
            return Err(Error::InvalidInput(
                "every post needs at least one premise and one label per premise".into(),
            ));
        }
    }
    Ok(())
}

fn hit_rate(rankings: &[PremiseScores], labels: &[Vec<u8>], depth: usize) -> Result<f64> {
    check(rankings, labels)?;
    let hits = rankings
        .iter()
        .zip(labels)
        .filter(|(r, y)| r.ranking.iter().take(depth).any(|&i| y[i] == 1))
        .count();
    Ok(hits as f64 / rankings.len() as f64)
}

/// Fraction of posts whose top-ranked premise is weak.
pub fn precision_at_1(rankings: &[PremiseScores], labels: &[Vec<u8>]) -> Result<f64> {
    hit_rate(rankings, labels, 1)
}

/// Fraction of posts with a weak premise among the first three ranks.
pub fn accuracy_at_3(rankings: &[PremiseScores], labels: &[Vec<u8>]) -> Result<f64> {
    hit_rate(rankings, labels, 3)
}
