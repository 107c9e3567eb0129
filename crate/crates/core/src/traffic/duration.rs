use serde::{Deserialize, Serialize};

use super::classify::ClassifiedCall;

/// Default truncation horizon (minutes) for fitted exponential models.
pub const DEFAULT_TRUNCATION: u32 = 240;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DurationError {
    #[error("no durations to estimate from")]
    Empty,
    #[error("mean duration is zero")]
    ZeroMean,
    #[error("invalid duration sample {0}")]
    BadSample(f64),
    #[error("exponential rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("histogram horizon must be at least 1 minute")]
    ZeroHorizon,
    #[error("negative or non-finite mass {mass} at minute {minute}")]
    BadMass { minute: usize, mass: f64 },
    #[error("masses sum to {0}, more than 1")]
    MassExceedsOne(f64),
}

/// Distribution of the billed minute index of a call.
///
/// `Empirical` holds the probability of each minute `1..=T` (index 0 is
/// minute 1). `Exponential` is the discretized continuous density: the mass at
/// minute `θ` is `exp(-μ(θ-1)) - exp(-μθ)`, optionally cut off after minute
/// `truncation` without renormalizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DurationModel {
    Empirical {
        mass: Vec<f64>,
    },
    Exponential {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<u32>,
    },
}

impl DurationModel {
    pub fn exponential(mu: f64) -> Self {
        DurationModel::Exponential { mu, truncation: None }
    }

    pub fn validate(&self) -> Result<(), DurationError> {
        match self {
            DurationModel::Empirical { mass } => {
                for (i, &m) in mass.iter().enumerate() {
                    if !m.is_finite() || m < 0.0 {
                        return Err(DurationError::BadMass { minute: i + 1, mass: m });
                    }
                }
                let total: f64 = mass.iter().sum();
                if total > 1.0 + 1e-9 {
                    return Err(DurationError::MassExceedsOne(total));
                }
                Ok(())
            }
            DurationModel::Exponential { mu, .. } => {
                if mu.is_finite() && *mu > 0.0 {
                    Ok(())
                } else {
                    Err(DurationError::BadRate(*mu))
                }
            }
        }
    }

    /// Probability that a call ends in minute `minute` (1-based).
    pub fn mass(&self, minute: u32) -> f64 {
        if minute == 0 {
            return 0.0;
        }
        match self {
            DurationModel::Empirical { mass } => mass.get(minute as usize - 1).copied().unwrap_or(0.0),
            DurationModel::Exponential { mu, truncation } => {
                if truncation.is_some_and(|t| minute > t) {
                    return 0.0;
                }
                let m = f64::from(minute);
                (-mu * (m - 1.0)).exp() - (-mu * m).exp()
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            DurationModel::Empirical { mass } => mass.iter().sum(),
            DurationModel::Exponential { mu, truncation } => match truncation {
                Some(t) => 1.0 - (-mu * f64::from(*t)).exp(),
                None => 1.0,
            },
        }
    }

    /// Probability left out of the model (the cut-off tail of a truncated exponential).
    pub fn residual_mass(&self) -> f64 {
        (1.0 - self.total_mass()).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, DurationModel::Empirical { mass } if mass.iter().all(|&m| m == 0.0))
    }
}

/// Moments of a duration sample and the exponential fitted to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub mu: f64,
    pub mean: f64,
    /// Root-mean-square deviation from the mean. Close to `mean` when the
    /// sample is plausibly exponential.
    pub rmsd: f64,
    pub samples: usize,
}

impl ExponentialFit {
    pub fn model(&self, truncation: Option<u32>) -> DurationModel {
        DurationModel::Exponential { mu: self.mu, truncation }
    }
}

/// Moment fit: `mu = 1 / mean` of durations in minutes.
pub fn fit_exponential(durations: &[f64]) -> Result<ExponentialFit, DurationError> {
    if durations.is_empty() {
        return Err(DurationError::Empty);
    }
    if let Some(&bad) = durations.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(DurationError::BadSample(bad));
    }
    let n = durations.len() as f64;
    let mean = durations.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(DurationError::ZeroMean);
    }
    let rmsd = (durations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExponentialFit { mu: 1.0 / mean, mean, rmsd, samples: durations.len() })
}

/// Relative frequency of each minute index `1..=horizon`; longer calls land in the last bin.
pub fn build_histogram(calls: &[ClassifiedCall], horizon: u32) -> Result<DurationModel, DurationError> {
    histogram_of(calls.iter().map(|c| c.minute_index), horizon)
}

pub(crate) fn histogram_of(
    minutes: impl Iterator<Item = u32>,
    horizon: u32,
) -> Result<DurationModel, DurationError> {
    if horizon == 0 {
        return Err(DurationError::ZeroHorizon);
    }
    let mut counts = vec![0u64; horizon as usize];
    let mut total = 0u64;
    for minute in minutes {
        let bin = minute.clamp(1, horizon) as usize - 1;
        counts[bin] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(DurationError::Empty);
    }
    let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(DurationModel::Empirical { mass })
}
