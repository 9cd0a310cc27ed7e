use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Episode};
use crate::error::{Error, Result};

/// `Σ γ^k r_k`
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::Length("cannot take the return of an empty episode".into()));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    Ok(total)
}

pub fn episode_return(ep: &Episode, gamma: f64) -> Result<f64> {
    discounted_return(&ep.rewards, gamma)
}

/// Min-max scaling of returns into `[0, 1]`. Equal bounds map to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnNormalizer {
    pub min_return: f64,
    pub max_return: f64,
}

impl ReturnNormalizer {
    pub fn fit(returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Length("no returns to normalise".into()));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("episode return".into()));
        }
        let min_return = returns.iter().copied().fold(f64::INFINITY, f64::min);
        let max_return = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            min_return,
            max_return,
        })
    }

    pub fn normalize(&self, ret: f64) -> f64 {
        if self.max_return == self.min_return {
            return 1.0;
        }
        ((ret - self.min_return) / (self.max_return - self.min_return)).clamp(0.0, 1.0)
    }
}

pub fn normalize_returns(dataset: &Dataset) -> Result<(ReturnNormalizer, Vec<f64>)> {
    let returns = dataset
        .episodes
        .iter()
        .map(|ep| episode_return(ep, dataset.env.gamma))
        .collect::<Result<Vec<_>>>()?;
    let norm = ReturnNormalizer::fit(&returns)?;
    let scaled = returns.iter().map(|&r| norm.normalize(r)).collect();
    Ok((norm, scaled))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_cases() {
        assert_eq!(discounted_return(&[1.0; 10], 1.0).unwrap(), 10.0);
        let r = discounted_return(&[1.0; 10], 0.5).unwrap();
        assert!((r - 2.0 * (1.0 - 0.5f64.powi(10))).abs() < 1e-15);
        assert!(discounted_return(&[], 0.9).is_err());
    }

    #[test]
    fn normalizer_endpoints() {
        let n = ReturnNormalizer::fit(&[-3.0, 1.0, -1.0]).unwrap();
        assert_eq!(n.normalize(-3.0), 0.0);
        assert_eq!(n.normalize(1.0), 1.0);
        assert_eq!(n.normalize(-1.0), 0.5);
        assert_eq!(ReturnNormalizer::fit(&[2.5]).unwrap().normalize(2.5), 1.0);
    }
}
