use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoding parameters. Defaults: top-k 50, top-p 0.95, temperature 1.0,
/// between 100 and 150 generated tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Zero keeps the whole vocabulary.
    pub top_k: usize,
    pub top_p: f64,
    pub temperature: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            top_k: 50,
            top_p: 0.95,
            temperature: 1.0,
            min_tokens: 100,
            max_tokens: 150,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    /// Top-1 decoding.
    pub fn greedy(min_tokens: usize, max_tokens: usize) -> Self {
        Self {
            top_k: 1,
            top_p: 1.0,
            temperature: 1.0,
            min_tokens,
            max_tokens,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature {} must be positive", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p {} must lie in (0, 1]", self.top_p)));
        }
        if self.min_tokens > self.max_tokens || self.max_tokens == 0 {
            return Err(Error::Config(format!(
                "token bounds [{}, {}] are empty",
                self.min_tokens, self.max_tokens
            )));
        }
        Ok(())
    }
}

/// The renormalized next-token distribution after temperature scaling,
/// top-k truncation and nucleus truncation, most likely first (ties to
/// the lower id). Tokens rejected by `allowed` never appear.
pub fn truncated_distribution(
    logits: &[f32],
    config: &SamplingConfig,
    allowed: impl Fn(u32) -> bool,
) -> Vec<(u32, f64)> {
    let mut scaled: Vec<(u32, f64)> = logits
        .iter()
        .enumerate()
        .filter(|&(i, l)| allowed(i as u32) && l.is_finite())
        .map(|(i, &l)| (i as u32, f64::from(l) / config.temperature))
        .collect();
    scaled.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if config.top_k > 0 {
        scaled.truncate(config.top_k);
    }
    let Some(&(_, max)) = scaled.first() else {
        return Vec::new();
    };
    let mut probs: Vec<(u32, f64)> = scaled.into_iter().map(|(i, l)| (i, (l - max).exp())).collect();
    let z: f64 = probs.iter().map(|p| p.1).sum();
    let mut cumulative = 0.0;
    let mut keep = probs.len();
    for (n, p) in probs.iter_mut().enumerate() {
        p.1 /= z;
        cumulative += p.1;
        if cumulative >= config.top_p {
            keep = n + 1;
            break;
        }
    }
    probs.truncate(keep);
    let z: f64 = probs.iter().map(|p| p.1).sum();
    for p in &mut probs {
        p.1 /= z;
    }
    probs
}

/// Inverse-CDF draw from a distribution produced by
/// [`truncated_distribution`].
pub fn sample<R: Rng + ?Sized>(distribution: &[(u32, f64)], rng: &mut R) -> Option<u32> {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for &(id, p) in distribution {
        cumulative += p;
        if u < cumulative {
            return Some(id);
        }
    }
    distribution.last().map(|&(id, _)| id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(top_k: usize, top_p: f64, temperature: f64) -> SamplingConfig {
        SamplingConfig {
            top_k,
            top_p,
            temperature,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn top_k_keeps_largest() {
        let d = truncated_distribution(&[1.0, 3.0, 2.0], &cfg(2, 1.0, 1.0), |_| true);
        assert_eq!(d.iter().map(|p| p.0).collect::<Vec<_>>(), [1, 2]);
        let e = 1.0f64.exp();
        assert!((d[0].1 - e / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn nucleus_stops_at_threshold() {
        // softmax of ln([0.5, 0.3, 0.2])
        let logits = [0.5f32.ln(), 0.3f32.ln(), 0.2f32.ln()];
        let d = truncated_distribution(&logits, &cfg(0, 0.8, 1.0), |_| true);
        assert_eq!(d.len(), 2);
        assert!((d[0].1 - 0.625).abs() < 1e-6);
        let d = truncated_distribution(&logits, &cfg(0, 0.79, 1.0), |_| true);
        assert_eq!(d.len(), 2);
        let d = truncated_distribution(&logits, &cfg(0, 0.5, 1.0), |_| true);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn temperature_sharpens() {
        let cold = truncated_distribution(&[1.0, 0.0], &cfg(0, 1.0, 0.5), |_| true);
        let warm = truncated_distribution(&[1.0, 0.0], &cfg(0, 1.0, 2.0), |_| true);
        assert!(cold[0].1 > warm[0].1);
    }

    #[test]
    fn disallowed_tokens_are_dropped() {
        let d = truncated_distribution(&[5.0, 1.0, 0.0], &cfg(1, 1.0, 1.0), |id| id != 0);
        assert_eq!(d, [(1, 1.0)]);
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(0, 0.0, 1.0).validate().is_err());
        assert!(cfg(0, 1.0, 0.0).validate().is_err());
        let c = SamplingConfig {
            min_tokens: 200,
            ..SamplingConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(SamplingConfig::default().validate().is_ok());
    }
}
