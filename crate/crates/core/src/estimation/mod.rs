//! Least-squares estimation: closed form for linear models, projected
//! Levenberg–Marquardt for nonlinear ones, and Latin-hypercube multi-start.

mod linear;
mod lm;
mod multistart;

use serde::{Deserialize, Serialize};

pub use linear::linear_least_squares;
pub use lm::{fit, objective, FitOptions};
pub use multistart::{multi_start_fit, ClusterTolerances, MultiStart, OptimumCluster, StartOutcome};

use crate::error::{Error, Result};
use crate::model::ParameterSpace;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    SmallGradient,
    SmallStep,
    MaxIter,
    Boundary,
    ClosedForm,
    EvaluationFailure,
}

impl Termination {
    pub fn is_converged(&self) -> bool {
        matches!(
            self,
            Termination::SmallGradient | Termination::SmallStep | Termination::Boundary | Termination::ClosedForm
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult<T: Scalar> {
    pub theta: Vec<T>,
    /// `S(theta) = 0.5 * ||y - f(theta)||^2`.
    pub objective: T,
    /// `2 S / (N - p_free)`; `None` without residual degrees of freedom.
    pub sigma2_hat: Option<T>,
    pub converged: bool,
    pub iterations: usize,
    pub start: Vec<T>,
    pub termination: Termination,
    pub free_parameters: usize,
    /// Objective after every accepted step, starting with `S(start)`.
    pub history: Vec<T>,
}

/// Parameters held at fixed values during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMask<T> {
    fixed: Vec<Option<T>>,
}

impl<T: Scalar> ParameterMask<T> {
    pub fn all_free(p: usize) -> Self {
        Self { fixed: vec![None; p] }
    }

    /// Fixes parameter `i` at `value`, which must lie in the `i`-th slice of `space`.
    pub fn fix(mut self, space: &ParameterSpace<T>, i: usize, value: T) -> Result<Self> {
        if i >= self.fixed.len() {
            return Err(Error::InvalidArgument(format!("cannot fix parameter {i} of {}", self.fixed.len())));
        }
        let (lo, hi) = space.bounds(i);
        if !(value >= lo && value <= hi) {
            return Err(Error::OutOfBounds {
                index: i,
                value: value.as_f64(),
                lower: lo.as_f64(),
                upper: hi.as_f64(),
            });
        }
        self.fixed[i] = Some(value);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn fixed_value(&self, i: usize) -> Option<T> {
        self.fixed[i]
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&i| self.fixed[i].is_none()).collect()
    }

    /// Overwrites fixed coordinates of `theta`.
    pub fn apply(&self, theta: &mut [T]) {
        for (v, f) in theta.iter_mut().zip(&self.fixed) {
            if let Some(f) = f {
                *v = *f;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_rejects_out_of_slice_value() {
        let space = ParameterSpace::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(ParameterMask::all_free(2).fix(&space, 1, 2.0).is_err());
        let m = ParameterMask::all_free(2).fix(&space, 1, 0.5).unwrap();
        assert_eq!(m.free_indices(), vec![0]);
        let mut th = [0.1, 0.9];
        m.apply(&mut th);
        assert_eq!(th, [0.1, 0.5]);
    }
}
