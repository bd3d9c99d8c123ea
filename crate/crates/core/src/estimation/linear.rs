use nalgebra::{DMatrix, DVector};

use super::{EstimateResult, Termination};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed-form least squares `theta_hat = (X^T X)^-1 X^T y` via the SVD of `X`.
///
/// Fails with [`Error::UnidentifiableDesign`] when `X` is numerically rank
/// deficient (`s_min <= max(n, p) * eps * s_max`), naming the right singular
/// vector of the smallest singular value.
pub fn linear_least_squares<T: Scalar>(x: &DMatrix<T>, y: &[T]) -> Result<EstimateResult<T>> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("design matrix must be non-empty".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension {
            what: "observations",
            expected: n,
            got: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("linear least-squares input"));
    }
    let svd = x.clone().svd(true, true);
    let s = &svd.singular_values;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let u = svd.u.as_ref().expect("requested U");
    let (mut imax, mut imin) = (0, 0);
    for i in 1..s.len() {
        if s[i] > s[imax] {
            imax = i;
        }
        if s[i] < s[imin] {
            imin = i;
        }
    }
    let cutoff = T::from_usize(n.max(p)).unwrap() * T::default_epsilon() * s[imax];
    if p > n || s[imin] <= cutoff {
        let direction = if p > n {
            // Null space of a wide matrix: complete V^T with a vector orthogonal to its rows.
            let full = x.clone().transpose() * x.clone();
            let eig = nalgebra::SymmetricEigen::new(full);
            let k = eig.eigenvalues.imin();
            eig.eigenvectors.column(k).iter().map(|v| v.as_f64()).collect()
        } else {
            v_t.row(imin).iter().map(|v| v.as_f64()).collect()
        };
        return Err(Error::UnidentifiableDesign { direction });
    }
    let yv = DVector::from_column_slice(y);
    let uty = u.transpose() * &yv;
    let scaled = DVector::from_iterator(s.len(), (0..s.len()).map(|i| uty[i] / s[i]));
    let theta = v_t.transpose() * scaled;
    let resid = &yv - x * &theta;
    let objective = T::lit(0.5) * resid.dot(&resid);
    let sigma2_hat = (n > p).then(|| (objective + objective) / T::from_usize(n - p).unwrap());
    Ok(EstimateResult {
        theta: theta.iter().copied().collect(),
        objective,
        sigma2_hat,
        converged: true,
        iterations: 0,
        start: vec![T::zero(); p],
        termination: Termination::ClosedForm,
        free_parameters: p,
        history: vec![objective],
    })
}
