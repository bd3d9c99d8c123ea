//! Sensitivity matrices `V(theta) = df/dtheta` by finite differences,
//! forward sensitivity equations, or registered analytic Jacobians.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ode, outputs_checked, Design, Model};
use crate::scalar::{max_abs, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityMethod {
    FiniteDifference,
    ForwardOde,
    Analytic,
}

/// Finite-difference step per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepRule<T> {
    /// `cbrt(eps) * max(|theta_j|, 1)`.
    #[default]
    Default,
    /// `factor * max(|theta_j|, 1)`.
    Scaled(T),
    /// The same absolute step for every coordinate.
    Absolute(T),
}

impl<T: Scalar> StepRule<T> {
    pub fn step(&self, value: T) -> T {
        let scale = value.abs().max(T::one());
        match *self {
            StepRule::Default => T::default_epsilon().cbrt() * scale,
            StepRule::Scaled(f) => f * scale,
            StepRule::Absolute(h) => h,
        }
    }
}

/// `n x p` Jacobian of the expected observations at `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix<T: Scalar> {
    pub entries: DMatrix<T>,
    pub theta: Vec<T>,
    pub method: SensitivityMethod,
    /// Columns that fell back to a one-sided difference near a bound.
    pub one_sided: Vec<usize>,
}

impl<T: Scalar> SensitivityMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }
}

/// `max|a - b| / (max|b| + 1e-12)`.
pub fn relative_difference<T: Scalar>(a: &DMatrix<T>, reference: &DMatrix<T>) -> T {
    let diff = max_abs(a.iter().zip(reference.iter()).map(|(&x, &y)| x - y));
    diff / (max_abs(reference.iter().copied()) + T::lit(1e-12))
}

fn check_finite<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput("sensitivity matrix"))
    }
}

/// Central differences; columns whose step would leave the box use a
/// one-sided difference and are listed in `one_sided`.
pub fn fd_jacobian<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta: &[T],
    rule: StepRule<T>,
) -> Result<SensitivityMatrix<T>> {
    let space = model.space();
    space.check_box(theta)?;
    let times = design.times();
    let columns: Vec<(Vec<T>, bool)> = (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let h = rule.step(theta[j]);
            let (lo, hi) = space.bounds(j);
            let shifted = |delta: T| -> Result<Vec<T>> {
                let mut th = theta.to_vec();
                th[j] += delta;
                outputs_checked(model, times, &th)
            };
            let up_ok = theta[j] + h <= hi;
            let down_ok = theta[j] - h >= lo;
            if up_ok && down_ok {
                let (fp, fm) = (shifted(h)?, shifted(-h)?);
                let two_h = h + h;
                Ok((fp.iter().zip(&fm).map(|(&a, &b)| (a - b) / two_h).collect(), false))
            } else {
                let f0 = outputs_checked(model, times, theta)?;
                let (f1, signed_h) = if up_ok { (shifted(h)?, h) } else { (shifted(-h)?, -h) };
                Ok((f1.iter().zip(&f0).map(|(&a, &b)| (a - b) / signed_h).collect(), true))
            }
        })
        .collect::<Result<_>>()?;
    let one_sided = columns
        .iter()
        .enumerate()
        .filter_map(|(j, c)| c.1.then_some(j))
        .collect();
    let entries = DMatrix::from_fn(times.len(), theta.len(), |i, j| columns[j].0[i]);
    check_finite(&entries)?;
    Ok(SensitivityMatrix {
        entries,
        theta: theta.to_vec(),
        method: SensitivityMethod::FiniteDifference,
        one_sided,
    })
}

/// Output sensitivities from the augmented state-plus-sensitivity ODE system.
pub fn forward_ode_jacobian<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta: &[T],
) -> Result<SensitivityMatrix<T>> {
    if design.is_empty() {
        return Err(Error::InvalidDesign("at least one time point is required".into()));
    }
    let sys = model
        .ode()
        .ok_or_else(|| Error::MissingPartials(model.name().to_string()))?;
    model.space().check_box(theta)?;
    let (_, entries) = ode::solve_with_sensitivities(sys, design.times(), theta, &sys.tolerances())?;
    check_finite(&entries)?;
    Ok(SensitivityMatrix {
        entries,
        theta: theta.to_vec(),
        method: SensitivityMethod::ForwardOde,
        one_sided: Vec::new(),
    })
}

/// Best available Jacobian: analytic, then forward ODE, then central
/// differences with the default step rule.
pub fn jacobian<T: Scalar>(model: &dyn Model<T>, design: &Design<T>, theta: &[T]) -> Result<SensitivityMatrix<T>> {
    if let Some(entries) = model.analytic_jacobian(design.times(), theta) {
        model.space().check_box(theta)?;
        check_finite(&entries)?;
        return Ok(SensitivityMatrix {
            entries,
            theta: theta.to_vec(),
            method: SensitivityMethod::Analytic,
            one_sided: Vec::new(),
        });
    }
    if model.ode().is_some() {
        return forward_ode_jacobian(model, design, theta);
    }
    fd_jacobian(model, design, theta, StepRule::Default)
}
