use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Observation times, noise level and replicate count of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design<T> {
    times: Vec<T>,
    sigma: T,
    replicates: usize,
}

impl<T: Scalar> Design<T> {
    pub fn new(times: Vec<T>, sigma: T) -> Result<Self> {
        Self::with_replicates(times, sigma, 1)
    }

    pub fn with_replicates(times: Vec<T>, sigma: T, replicates: usize) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidDesign("at least one time point is required".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidDesign("time points must be finite".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDesign("time points must be strictly increasing".into()));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidDesign(format!("noise sd must be positive (got {sigma})")));
        }
        if replicates == 0 {
            return Err(Error::InvalidDesign("replicates must be at least 1".into()));
        }
        Ok(Self {
            times,
            sigma,
            replicates,
        })
    }

    /// `n` points evenly spaced on `[start, end]`.
    pub fn linspace(start: T, end: T, n: usize, sigma: T) -> Result<Self> {
        let times = match n {
            0 => Vec::new(),
            1 => vec![start],
            _ => {
                let step = (end - start) / T::from_usize(n - 1).unwrap();
                (0..n).map(|i| start + step * T::from_usize(i).unwrap()).collect()
            }
        };
        Self::new(times, sigma)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    /// Number of distinct time points `n`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Total observations `n * replicates`.
    pub fn observation_count(&self) -> usize {
        self.times.len() * self.replicates
    }

    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        Self::with_replicates(self.times.clone(), sigma, self.replicates)
    }

    pub fn replicated(&self, replicates: usize) -> Result<Self> {
        Self::with_replicates(self.times.clone(), self.sigma, replicates)
    }
}
