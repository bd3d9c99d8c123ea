//! Model abstraction, parameter spaces, designs and synthetic data.

mod builtins;
mod dataset;
mod design;
pub mod ode;
mod space;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use builtins::{
    builtin_registry, lookup, Biexponential, LinearBasis, LinearModel, Logistic, ModelConstants,
    Reciprocal, RedundantExponential, BUILTIN_NAMES,
};
pub use dataset::{generate_data, Dataset, DatasetMetadata};
pub use design::Design;
pub use ode::OdeSystem;
pub use space::ParameterSpace;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Known identifiability of a built-in model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentifiabilityLabel {
    GloballyIdentifiable,
    LocallyNotGlobally,
    StructurallyUnidentifiable,
}

impl fmt::Display for IdentifiabilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GloballyIdentifiable => "globally-identifiable",
            Self::LocallyNotGlobally => "locally-not-globally",
            Self::StructurallyUnidentifiable => "structurally-unidentifiable",
        })
    }
}

/// Output-preserving parameter transformations of a model.
///
/// Each variant knows how to map a parameter vector to a canonical
/// representative of its orbit, so two vectors describe the same model
/// output exactly when their canonical forms agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    /// Exchanging `theta[i]` and `theta[j]` leaves the output unchanged.
    Swap(usize, usize),
    /// `(theta[scale] * e^c, theta[shift] - c)` leaves the output unchanged for all real `c`.
    ScaleShift { scale: usize, shift: usize },
}

impl Symmetry {
    pub fn canonicalize<T: Scalar>(&self, theta: &mut [T]) {
        match *self {
            Symmetry::Swap(i, j) => {
                let (a, b) = (i.min(j), i.max(j));
                if theta[a] < theta[b] {
                    theta.swap(a, b);
                }
            }
            Symmetry::ScaleShift { scale, shift } => {
                theta[scale] *= theta[shift].exp();
                theta[shift] = T::zero();
            }
        }
    }
}

/// A deterministic model `f(t, theta)` with scalar output per time point.
pub trait Model<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn space(&self) -> &ParameterSpace<T>;

    /// Noiseless outputs at `times`. Does not check membership in the
    /// parameter space; use [`evaluate`] for the checked version.
    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>>;

    /// Exact `n x p` Jacobian of the outputs, when available.
    fn analytic_jacobian(&self, _times: &[T], _theta: &[T]) -> Option<DMatrix<T>> {
        None
    }

    /// Right-hand side and partials, for models defined by an ODE.
    fn ode(&self) -> Option<&dyn OdeSystem<T>> {
        None
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        None
    }

    fn symmetries(&self) -> Vec<Symmetry> {
        Vec::new()
    }

    /// Canonical representative of the orbit of `theta` under
    /// [`Model::symmetries`]. Override for custom orbit maps.
    fn canonicalize(&self, theta: &[T]) -> Vec<T> {
        let mut out = theta.to_vec();
        for s in self.symmetries() {
            s.canonicalize(&mut out);
        }
        out
    }
}

/// Evaluates the model at every design time point.
///
/// Fails when `theta` lies outside the admissible set or when any output is
/// non-finite.
pub fn evaluate<T: Scalar>(model: &dyn Model<T>, design: &Design<T>, theta: &[T]) -> Result<Vec<T>> {
    model.space().check(theta)?;
    outputs_checked(model, design.times(), theta)
}

/// Model outputs with a finiteness check but no parameter-space check.
pub(crate) fn outputs_checked<T: Scalar>(model: &dyn Model<T>, times: &[T], theta: &[T]) -> Result<Vec<T>> {
    if theta.len() != model.space().dim() {
        return Err(Error::Dimension {
            what: "parameter vector",
            expected: model.space().dim(),
            got: theta.len(),
        });
    }
    let out = model.outputs(times, theta)?;
    if out.len() != times.len() {
        return Err(Error::Dimension {
            what: "model outputs",
            expected: times.len(),
            got: out.len(),
        });
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: times[i].as_f64() });
    }
    Ok(out)
}

/// A model defined by a closure `f(t, theta)`.
pub struct FnModel<T, F> {
    name: String,
    space: ParameterSpace<T>,
    func: F,
    label: Option<IdentifiabilityLabel>,
    symmetries: Vec<Symmetry>,
}

impl<T, F> FnModel<T, F>
where
    T: Scalar,
    F: Fn(T, &[T]) -> T + Send + Sync,
{
    pub fn new(name: impl Into<String>, space: ParameterSpace<T>, func: F) -> Self {
        Self {
            name: name.into(),
            space,
            func,
            label: None,
            symmetries: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: IdentifiabilityLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetries.push(symmetry);
        self
    }
}

impl<T, F> Model<T> for FnModel<T, F>
where
    T: Scalar,
    F: Fn(T, &[T]) -> T + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &ParameterSpace<T> {
        &self.space
    }

    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>> {
        Ok(times.iter().map(|&t| (self.func)(t, theta)).collect())
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        self.label
    }

    fn symmetries(&self) -> Vec<Symmetry> {
        self.symmetries.clone()
    }
}
