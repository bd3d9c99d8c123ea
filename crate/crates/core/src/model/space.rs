use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Admissible parameter set: an axis-aligned box plus optional ordering
/// constraints `theta[greater] > theta[lesser]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace<T> {
    names: Vec<String>,
    lower: Vec<T>,
    upper: Vec<T>,
    ordering: Vec<(usize, usize)>,
}

impl<T: Scalar> ParameterSpace<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                what: "upper bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSpace(format!(
                    "bounds for parameter {i} must satisfy lower < upper (got {lo} and {hi})"
                )));
            }
        }
        let names = (1..=lower.len()).map(|i| format!("theta{i}")).collect();
        Ok(Self {
            names,
            lower,
            upper,
            ordering: Vec::new(),
        })
    }

    pub fn with_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != self.dim() {
            return Err(Error::Dimension {
                what: "parameter names",
                expected: self.dim(),
                got: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    /// Adds the constraint `theta[greater] > theta[lesser]`.
    pub fn with_ordering(mut self, greater: usize, lesser: usize) -> Result<Self> {
        if greater == lesser || greater >= self.dim() || lesser >= self.dim() {
            return Err(Error::InvalidSpace(format!(
                "ordering constraint ({greater}, {lesser}) must reference two distinct indices below {}",
                self.dim()
            )));
        }
        self.ordering.push((greater, lesser));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn ordering(&self) -> &[(usize, usize)] {
        &self.ordering
    }

    pub fn bounds(&self, i: usize) -> (T, T) {
        (self.lower[i], self.upper[i])
    }

    /// Checks box membership only.
    pub fn check_box(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: self.dim(),
                got: theta.len(),
            });
        }
        for (i, &v) in theta.iter().enumerate() {
            if !(v >= self.lower[i] && v <= self.upper[i]) {
                return Err(Error::OutOfBounds {
                    index: i,
                    value: v.as_f64(),
                    lower: self.lower[i].as_f64(),
                    upper: self.upper[i].as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Full membership test: box and ordering constraints.
    pub fn check(&self, theta: &[T]) -> Result<()> {
        self.check_box(theta)?;
        for &(greater, lesser) in &self.ordering {
            if !(theta[greater] > theta[lesser]) {
                return Err(Error::OrderingViolated { greater, lesser });
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[T]) -> bool {
        self.check(theta).is_ok()
    }

    /// Projects onto the box (ordering constraints are not enforced).
    pub fn clamp(&self, theta: &[T]) -> Vec<T> {
        theta
            .iter()
            .enumerate()
            .map(|(i, &v)| v.max(self.lower[i]).min(self.upper[i]))
            .collect()
    }

    /// Same space with the box replaced; ordering constraints are kept.
    pub fn with_bounds(&self, lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        let mut out = Self::new(lower, upper)?;
        if out.dim() != self.dim() {
            return Err(Error::Dimension {
                what: "bounds",
                expected: self.dim(),
                got: out.dim(),
            });
        }
        out.names = self.names.clone();
        out.ordering = self.ordering.clone();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(ParameterSpace::new(vec![1.0], vec![0.5]).is_err());
        assert!(ParameterSpace::new(vec![1.0], vec![1.0]).is_err());
        assert!(ParameterSpace::<f64>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn ordering_constraint_enforced_at_membership() {
        let s = ParameterSpace::new(vec![0.0, 0.0], vec![5.0, 5.0])
            .unwrap()
            .with_ordering(0, 1)
            .unwrap();
        assert!(s.contains(&[2.0, 1.0]));
        assert!(!s.contains(&[1.0, 2.0]));
        assert!(!s.contains(&[1.0, 1.0]));
        assert!(s.check_box(&[1.0, 2.0]).is_ok());
        assert!(matches!(
            s.check(&[6.0, 1.0]),
            Err(Error::OutOfBounds { index: 0, .. })
        ));
    }

    #[test]
    fn ordering_requires_distinct_valid_indices() {
        let s = ParameterSpace::new(vec![0.0, 0.0], vec![5.0, 5.0]).unwrap();
        assert!(s.clone().with_ordering(0, 0).is_err());
        assert!(s.with_ordering(0, 2).is_err());
    }
}
