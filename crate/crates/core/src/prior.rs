//! Independent per-parameter priors for sampling over the parameter space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterSpace;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Marginal {
    Uniform { lower: f64, upper: f64 },
    LogUniform { lower: f64, upper: f64 },
}

impl Marginal {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lower, upper } | Marginal::LogUniform { lower, upper } => (lower, upper),
        }
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = self.support();
        let ok = lo.is_finite()
            && hi.is_finite()
            && lo < hi
            && (matches!(self, Marginal::Uniform { .. }) || lo > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid prior marginal {self:?}")))
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            Marginal::Uniform { lower, upper } => lower + (upper - lower) * u,
            Marginal::LogUniform { lower, upper } => (lower.ln() + (upper.ln() - lower.ln()) * u).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub marginals: Vec<Marginal>,
    pub seed: u64,
}

impl Prior {
    pub fn new(marginals: Vec<Marginal>, seed: u64) -> Result<Self> {
        for m in &marginals {
            m.check()?;
        }
        Ok(Self { marginals, seed })
    }

    /// Uniform over the box of `space`.
    pub fn uniform_over<T: Scalar>(space: &ParameterSpace<T>, seed: u64) -> Self {
        let marginals = (0..space.dim())
            .map(|i| Marginal::Uniform {
                lower: space.lower()[i].as_f64(),
                upper: space.upper()[i].as_f64(),
            })
            .collect();
        Self { marginals, seed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Checks the dimension and that every support lies inside the box of `space`.
    pub fn check_against<T: Scalar>(&self, space: &ParameterSpace<T>) -> Result<()> {
        if self.dim() != space.dim() {
            return Err(Error::Dimension {
                what: "prior marginals",
                expected: space.dim(),
                got: self.dim(),
            });
        }
        for (i, m) in self.marginals.iter().enumerate() {
            m.check()?;
            let (lo, hi) = m.support();
            let (blo, bhi) = space.bounds(i);
            if lo < blo.as_f64() || hi > bhi.as_f64() {
                return Err(Error::InvalidArgument(format!(
                    "prior support [{lo}, {hi}] of parameter {i} exceeds bounds [{blo}, {bhi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn sample<T: Scalar, R: Rng>(&self, rng: &mut R) -> Vec<T> {
        self.marginals.iter().map(|m| T::lit(m.sample(rng))).collect()
    }

    /// Draw `index` of this prior, redrawing (up to 1000 times) until it
    /// satisfies the ordering constraints of `space`. Depends only on
    /// `(seed, index)`.
    pub fn draw<T: Scalar>(&self, space: &ParameterSpace<T>, index: u64) -> Result<Vec<T>> {
        let mut rng = stream_rng(derive_seed(self.seed, index), Stream::Prior);
        for _ in 0..1000 {
            let theta: Vec<T> = self.sample(&mut rng);
            if space.check(&theta).is_ok() {
                return Ok(theta);
            }
        }
        Err(Error::InvalidArgument(
            "prior draws never satisfied the ordering constraints".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_uniform_needs_positive_support() {
        assert!(Prior::new(vec![Marginal::LogUniform { lower: 0.0, upper: 1.0 }], 0).is_err());
        assert!(Prior::new(vec![Marginal::Uniform { lower: 1.0, upper: 1.0 }], 0).is_err());
    }

    #[test]
    fn draws_stay_in_support_and_repeat() {
        let space = ParameterSpace::new(vec![0.1, 0.1], vec![10.0, 10.0])
            .unwrap()
            .with_ordering(0, 1)
            .unwrap();
        let prior = Prior::new(
            vec![
                Marginal::LogUniform { lower: 0.1, upper: 10.0 },
                Marginal::Uniform { lower: 0.1, upper: 10.0 },
            ],
            4,
        )
        .unwrap();
        prior.check_against(&space).unwrap();
        for k in 0..200 {
            let a: Vec<f64> = prior.draw(&space, k).unwrap();
            assert!(a[0] > a[1]);
            assert!(a.iter().all(|&v| (0.1..=10.0).contains(&v)));
            assert_eq!(a, prior.draw::<f64>(&space, k).unwrap());
        }
    }

    #[test]
    fn support_outside_box_rejected() {
        let space = ParameterSpace::new(vec![0.0], vec![1.0]).unwrap();
        let prior = Prior::new(vec![Marginal::Uniform { lower: 0.5, upper: 2.0 }], 0).unwrap();
        assert!(prior.check_against(&space).is_err());
    }
}
