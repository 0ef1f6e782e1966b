use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROFILE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile is empty")]
    Empty,
    #[error("negative or non-finite share {value} at position {index}")]
    InvalidShare { index: usize, value: f64 },
    #[error("shares sum to {0}, expected 1")]
    NotNormalized(f64),
}

/// Nonnegative shares summing to one: how a budget is split across issues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AllocationProfile(Vec<f64>);

impl AllocationProfile {
    pub fn new(shares: Vec<f64>) -> Result<Self, ProfileError> {
        if shares.is_empty() {
            return Err(ProfileError::Empty);
        }
        if let Some((index, &value)) = shares.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(ProfileError::InvalidShare { index, value });
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > PROFILE_SUM_TOLERANCE {
            return Err(ProfileError::NotNormalized(total));
        }
        Ok(Self(shares))
    }

    /// Normalizes nonnegative weights; all-zero weights give the uniform profile.
    pub fn from_weights(weights: &[f64]) -> Result<Self, ProfileError> {
        if weights.is_empty() {
            return Err(ProfileError::Empty);
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            Self::new(weights.iter().map(|w| w / total).collect())
        } else {
            Self::uniform(weights.len())
        }
    }

    pub fn uniform(n: usize) -> Result<Self, ProfileError> {
        if n == 0 {
            return Err(ProfileError::Empty);
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Component-wise mean of equal-length profiles.
    pub fn mean(profiles: &[AllocationProfile]) -> Result<Self, ProfileError> {
        let first = profiles.first().ok_or(ProfileError::Empty)?;
        let n = first.len();
        let mut acc = vec![0.0; n];
        for p in profiles {
            for (a, v) in acc.iter_mut().zip(p.shares()) {
                *a += v;
            }
        }
        let m = profiles.len() as f64;
        Self::new(acc.into_iter().map(|a| a / m).collect())
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for AllocationProfile {
    type Error = ProfileError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AllocationProfile> for Vec<f64> {
    fn from(p: AllocationProfile) -> Self {
        p.0
    }
}
