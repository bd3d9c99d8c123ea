//! Built-in test models with known identifiability.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ode::{self, OdeSystem, Tolerances};
use super::{IdentifiabilityLabel, Model, ParameterSpace, Symmetry};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BUILTIN_NAMES: [&str; 5] = [
    "linear",
    "biexponential",
    "redundant-exponential",
    "reciprocal",
    "logistic",
];

/// Configurable constants for built-in models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConstants {
    /// Replaces the default lower bounds.
    pub lower: Option<Vec<f64>>,
    /// Replaces the default upper bounds.
    pub upper: Option<Vec<f64>>,
    /// Biexponential only: restrict the space to `theta1 > theta2`.
    pub ordered: bool,
    /// Linear only: explicit design matrix, one row per design time point.
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Linear only: polynomial basis `t^0 .. t^degree` (default 1).
    pub degree: Option<usize>,
    /// ODE models only: relative and absolute integration tolerance.
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

fn space_from<T: Scalar>(
    names: &[&str],
    lower: &[f64],
    upper: &[f64],
    constants: &ModelConstants,
) -> Result<ParameterSpace<T>> {
    let lower = constants.lower.as_deref().unwrap_or(lower);
    let upper = constants.upper.as_deref().unwrap_or(upper);
    ParameterSpace::new(
        lower.iter().map(|&v| T::lit(v)).collect(),
        upper.iter().map(|&v| T::lit(v)).collect(),
    )?
    .with_names(names.iter().copied())
}

/// Looks up a built-in model by name, applying `constants`.
pub fn lookup<T: Scalar>(name: &str, constants: &ModelConstants) -> Result<Box<dyn Model<T>>> {
    Ok(match name {
        "linear" => {
            let basis = match (&constants.matrix, constants.degree) {
                (Some(rows), _) => {
                    let n = rows.len();
                    let p = rows.first().map_or(0, Vec::len);
                    if n == 0 || p == 0 || rows.iter().any(|r| r.len() != p) {
                        return Err(Error::InvalidArgument(
                            "linear model matrix must be a non-empty rectangular array".into(),
                        ));
                    }
                    LinearBasis::Matrix(DMatrix::from_fn(n, p, |i, j| T::lit(rows[i][j])))
                }
                (None, degree) => LinearBasis::Polynomial(degree.unwrap_or(1)),
            };
            let p = basis.dim();
            let lower = constants.lower.clone().unwrap_or_else(|| vec![-1e3; p]);
            let upper = constants.upper.clone().unwrap_or_else(|| vec![1e3; p]);
            let space = ParameterSpace::new(
                lower.iter().map(|&v| T::lit(v)).collect(),
                upper.iter().map(|&v| T::lit(v)).collect(),
            )?;
            if space.dim() != p {
                return Err(Error::Dimension {
                    what: "linear model bounds",
                    expected: p,
                    got: space.dim(),
                });
            }
            Box::new(LinearModel::new(basis, space))
        }
        "biexponential" => {
            let space = space_from(&["theta1", "theta2"], &[0.01, 0.01], &[10.0, 10.0], constants)?;
            let space = if constants.ordered { space.with_ordering(0, 1)? } else { space };
            Box::new(Biexponential::new(space))
        }
        "redundant-exponential" => Box::new(RedundantExponential::new(space_from(
            &["theta1", "theta2", "theta3"],
            &[0.01, -5.0, -5.0],
            &[100.0, 5.0, 5.0],
            constants,
        )?)),
        "reciprocal" => Box::new(Reciprocal::new(space_from(&["theta"], &[0.01], &[1000.0], constants)?)),
        "logistic" => {
            let space = space_from(&["r", "K", "x0"], &[0.01, 0.1, 0.001], &[10.0, 100.0, 100.0], constants)?;
            let mut tol = Tolerances::default();
            if let Some(r) = constants.rtol {
                tol.rtol = T::lit(r);
            }
            if let Some(a) = constants.atol {
                tol.atol = T::lit(a);
            }
            Box::new(Logistic::new(space).with_tolerances(tol))
        }
        other => return Err(Error::ModelNotFound(other.to_string())),
    })
}

/// Every built-in with default constants.
pub fn builtin_registry<T: Scalar>() -> Vec<Box<dyn Model<T>>> {
    BUILTIN_NAMES
        .iter()
        .map(|name| lookup(name, &ModelConstants::default()).expect("default constants are valid"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearBasis<T> {
    /// Row `i` multiplies theta at design point `i`.
    Matrix(DMatrix<T>),
    /// `x_ij = t_i^j` for `j = 0..=degree`.
    Polynomial(usize),
}

impl<T: Scalar> LinearBasis<T> {
    pub fn dim(&self) -> usize {
        match self {
            LinearBasis::Matrix(x) => x.ncols(),
            LinearBasis::Polynomial(d) => d + 1,
        }
    }

    /// The `n x p` design matrix for `times`.
    pub fn matrix(&self, times: &[T]) -> Result<DMatrix<T>> {
        match self {
            LinearBasis::Matrix(x) => {
                if x.nrows() != times.len() {
                    return Err(Error::Dimension {
                        what: "linear model rows vs design points",
                        expected: x.nrows(),
                        got: times.len(),
                    });
                }
                Ok(x.clone())
            }
            LinearBasis::Polynomial(d) => Ok(DMatrix::from_fn(times.len(), d + 1, |i, j| times[i].powi(j as i32))),
        }
    }
}

/// `y = X theta`.
#[derive(Debug, Clone)]
pub struct LinearModel<T: Scalar> {
    basis: LinearBasis<T>,
    space: ParameterSpace<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(basis: LinearBasis<T>, space: ParameterSpace<T>) -> Self {
        assert_eq!(basis.dim(), space.dim(), "basis and parameter space dimensions differ");
        Self { basis, space }
    }

    /// Linear model for a fixed matrix with wide symmetric bounds.
    pub fn from_matrix(x: DMatrix<T>) -> Self {
        let p = x.ncols();
        let space = ParameterSpace::new(vec![T::lit(-1e6); p], vec![T::lit(1e6); p]).expect("valid bounds");
        Self::new(LinearBasis::Matrix(x), space)
    }

    pub fn basis(&self) -> &LinearBasis<T> {
        &self.basis
    }
}

impl<T: Scalar> Model<T> for LinearModel<T> {
    fn name(&self) -> &str {
        "linear"
    }

    fn space(&self) -> &ParameterSpace<T> {
        &self.space
    }

    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>> {
        let x = self.basis.matrix(times)?;
        Ok((0..x.nrows())
            .map(|i| (0..x.ncols()).fold(T::zero(), |acc, j| acc + x[(i, j)] * theta[j]))
            .collect())
    }

    fn analytic_jacobian(&self, times: &[T], _theta: &[T]) -> Option<DMatrix<T>> {
        self.basis.matrix(times).ok()
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        Some(IdentifiabilityLabel::GloballyIdentifiable)
    }
}

/// `exp(-theta1 t) + exp(-theta2 t)`.
#[derive(Debug, Clone)]
pub struct Biexponential<T: Scalar> {
    space: ParameterSpace<T>,
}

impl<T: Scalar> Biexponential<T> {
    pub fn new(space: ParameterSpace<T>) -> Self {
        assert_eq!(space.dim(), 2);
        Self { space }
    }

    fn ordered(&self) -> bool {
        !self.space.ordering().is_empty()
    }
}

impl<T: Scalar> Model<T> for Biexponential<T> {
    fn name(&self) -> &str {
        "biexponential"
    }

    fn space(&self) -> &ParameterSpace<T> {
        &self.space
    }

    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>> {
        Ok(times
            .iter()
            .map(|&t| (-theta[0] * t).exp() + (-theta[1] * t).exp())
            .collect())
    }

    fn analytic_jacobian(&self, times: &[T], theta: &[T]) -> Option<DMatrix<T>> {
        Some(DMatrix::from_fn(times.len(), 2, |i, j| {
            let t = times[i];
            -t * (-theta[j] * t).exp()
        }))
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        Some(if self.ordered() {
            IdentifiabilityLabel::GloballyIdentifiable
        } else {
            IdentifiabilityLabel::LocallyNotGlobally
        })
    }

    fn symmetries(&self) -> Vec<Symmetry> {
        if self.ordered() {
            Vec::new()
        } else {
            vec![Symmetry::Swap(0, 1)]
        }
    }
}

/// `theta1 exp(theta2 t + theta3)`; only `theta1 e^theta3` is determined.
#[derive(Debug, Clone)]
pub struct RedundantExponential<T: Scalar> {
    space: ParameterSpace<T>,
}

impl<T: Scalar> RedundantExponential<T> {
    pub fn new(space: ParameterSpace<T>) -> Self {
        assert_eq!(space.dim(), 3);
        Self { space }
    }
}

impl<T: Scalar> Model<T> for RedundantExponential<T> {
    fn name(&self) -> &str {
        "redundant-exponential"
    }

    fn space(&self) -> &ParameterSpace<T> {
        &self.space
    }

    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>> {
        Ok(times
            .iter()
            .map(|&t| theta[0] * (theta[1] * t + theta[2]).exp())
            .collect())
    }

    fn analytic_jacobian(&self, times: &[T], theta: &[T]) -> Option<DMatrix<T>> {
        let mut v = DMatrix::zeros(times.len(), 3);
        for (i, &t) in times.iter().enumerate() {
            let e = (theta[1] * t + theta[2]).exp();
            v[(i, 0)] = e;
            v[(i, 1)] = theta[0] * t * e;
            v[(i, 2)] = theta[0] * e;
        }
        Some(v)
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        Some(IdentifiabilityLabel::StructurallyUnidentifiable)
    }

    fn symmetries(&self) -> Vec<Symmetry> {
        vec![Symmetry::ScaleShift { scale: 0, shift: 2 }]
    }
}

/// `1 + 1/theta`, constant in time.
#[derive(Debug, Clone)]
pub struct Reciprocal<T: Scalar> {
    space: ParameterSpace<T>,
}

impl<T: Scalar> Reciprocal<T> {
    pub fn new(space: ParameterSpace<T>) -> Self {
        assert_eq!(space.dim(), 1);
        Self { space }
    }
}

impl<T: Scalar> Model<T> for Reciprocal<T> {
    fn name(&self) -> &str {
        "reciprocal"
    }

    fn space(&self) -> &ParameterSpace<T> {
        &self.space
    }

    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>> {
        Ok(vec![T::one() + T::one() / theta[0]; times.len()])
    }

    fn analytic_jacobian(&self, times: &[T], theta: &[T]) -> Option<DMatrix<T>> {
        Some(DMatrix::from_element(times.len(), 1, -T::one() / (theta[0] * theta[0])))
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        Some(IdentifiabilityLabel::GloballyIdentifiable)
    }
}

/// Logistic growth `x' = r x (1 - x/K)`, `x(0) = x0`, observed directly.
/// Parameters `(r, K, x0)`; solved numerically.
#[derive(Debug, Clone)]
pub struct Logistic<T: Scalar> {
    space: ParameterSpace<T>,
    tol: Tolerances<T>,
}

impl<T: Scalar> Logistic<T> {
    pub fn new(space: ParameterSpace<T>) -> Self {
        assert_eq!(space.dim(), 3);
        Self {
            space,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances<T>) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerances(&self) -> &Tolerances<T> {
        &self.tol
    }
}

impl<T: Scalar> OdeSystem<T> for Logistic<T> {
    fn state_dim(&self) -> usize {
        1
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn tolerances(&self) -> Tolerances<T> {
        self.tol
    }

    fn initial_state(&self, theta: &[T]) -> Vec<T> {
        vec![theta[2]]
    }

    fn initial_state_jacobian(&self, _theta: &[T]) -> DMatrix<T> {
        DMatrix::from_row_slice(1, 3, &[T::zero(), T::zero(), T::one()])
    }

    fn rhs(&self, _t: T, x: &[T], theta: &[T], dx: &mut [T]) {
        let (r, k) = (theta[0], theta[1]);
        dx[0] = r * x[0] * (T::one() - x[0] / k);
    }

    fn rhs_state_jacobian(&self, _t: T, x: &[T], theta: &[T]) -> Option<DMatrix<T>> {
        let (r, k) = (theta[0], theta[1]);
        Some(DMatrix::from_element(1, 1, r * (T::one() - T::lit(2.0) * x[0] / k)))
    }

    fn rhs_param_jacobian(&self, _t: T, x: &[T], theta: &[T]) -> Option<DMatrix<T>> {
        let (r, k) = (theta[0], theta[1]);
        let x = x[0];
        Some(DMatrix::from_row_slice(
            1,
            3,
            &[x * (T::one() - x / k), r * x * x / (k * k), T::zero()],
        ))
    }
}

impl<T: Scalar> Model<T> for Logistic<T> {
    fn name(&self) -> &str {
        "logistic"
    }

    fn space(&self) -> &ParameterSpace<T> {
        &self.space
    }

    fn outputs(&self, times: &[T], theta: &[T]) -> Result<Vec<T>> {
        ode::solve_outputs(self, times, theta, &self.tol)
    }

    fn ode(&self) -> Option<&dyn OdeSystem<T>> {
        Some(self)
    }

    fn label(&self) -> Option<IdentifiabilityLabel> {
        Some(IdentifiabilityLabel::GloballyIdentifiable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, Design};

    fn get(name: &str) -> Box<dyn Model<f64>> {
        lookup(name, &ModelConstants::default()).unwrap()
    }

    #[test]
    fn registry_contains_labelled_models() {
        let reg = builtin_registry::<f64>();
        assert_eq!(reg.len(), 5);
        assert_eq!(get("biexponential").label(), Some(IdentifiabilityLabel::LocallyNotGlobally));
        assert_eq!(
            get("redundant-exponential").label(),
            Some(IdentifiabilityLabel::StructurallyUnidentifiable)
        );
        assert_eq!(get("reciprocal").label(), Some(IdentifiabilityLabel::GloballyIdentifiable));
        assert_eq!(get("logistic").label(), Some(IdentifiabilityLabel::GloballyIdentifiable));
        assert!(matches!(
            lookup::<f64>("nope", &ModelConstants::default()),
            Err(Error::ModelNotFound(_))
        ));
    }

    #[test]
    fn reciprocal_at_one_is_two() {
        let d = Design::new(vec![0.0, 3.0, 7.5], 0.1).unwrap();
        assert_eq!(evaluate(get("reciprocal").as_ref(), &d, &[1.0]).unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn biexponential_at_time_zero_is_two() {
        let d = Design::new(vec![0.0], 0.1).unwrap();
        assert_eq!(evaluate(get("biexponential").as_ref(), &d, &[0.3, 4.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn logistic_initial_condition_and_closed_form() {
        let d = Design::linspace(0.0, 10.0, 21, 0.1).unwrap();
        let theta = [1.0, 1.0, 0.5];
        let y = evaluate(get("logistic").as_ref(), &d, &theta).unwrap();
        assert_eq!(y[0], 0.5);
        for (&t, &v) in d.times().iter().zip(&y) {
            let e = (theta[0] * t).exp();
            let exact = theta[1] * theta[2] * e / (theta[1] + theta[2] * (e - 1.0));
            assert!((v - exact).abs() < 1e-8 * exact, "t={t}");
        }
    }

    #[test]
    fn ordered_biexponential_is_globally_identifiable() {
        let c = ModelConstants {
            ordered: true,
            ..Default::default()
        };
        let m = lookup::<f64>("biexponential", &c).unwrap();
        assert_eq!(m.label(), Some(IdentifiabilityLabel::GloballyIdentifiable));
        assert!(m.symmetries().is_empty());
        assert!(m.space().contains(&[2.0, 1.0]));
        assert!(!m.space().contains(&[1.0, 2.0]));
    }

    #[test]
    fn linear_matrix_constant_must_match_design() {
        let c = ModelConstants {
            matrix: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ..Default::default()
        };
        let m = lookup::<f64>("linear", &c).unwrap();
        let ok = Design::new(vec![0.0, 1.0], 1.0).unwrap();
        assert_eq!(evaluate(m.as_ref(), &ok, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let bad = Design::new(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        assert!(evaluate(m.as_ref(), &bad, &[3.0, 4.0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let m = lookup::<f32>("biexponential", &ModelConstants::default()).unwrap();
        let d = Design::new(vec![0.0f32, 1.0], 0.1).unwrap();
        let y = evaluate(m.as_ref(), &d, &[1.0, 2.0]).unwrap();
        assert!((y[1] - ((-1.0f32).exp() + (-2.0f32).exp())).abs() < 1e-6);
    }
}
