use nalgebra::{DMatrix, DVector};

use super::{EstimateResult, ParameterMask, Termination};
use crate::error::{Error, Result};
use crate::model::{outputs_checked, Dataset, Model};
use crate::scalar::{max_abs, Scalar};
use crate::sensitivity::jacobian;

/// Levenberg–Marquardt settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    pub max_iter: usize,
    /// Stop when `max|grad| < grad_tol * (1 + |S|)`.
    pub grad_tol: T,
    /// Stop when `max|step| < step_tol * max|theta|`.
    pub step_tol: T,
    /// Initial damping relative to `max(diag(V^T V))`.
    pub initial_damping: T,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: T::lit(1e-8),
            step_tol: T::lit(1e-10),
            initial_damping: T::lit(1e-3),
        }
    }
}

/// `S(theta) = 0.5 * ||y - f(theta)||^2`; no parameter-space check.
pub fn objective<T: Scalar>(model: &dyn Model<T>, data: &Dataset<T>, theta: &[T]) -> Result<T> {
    let f = outputs_checked(model, data.design().times(), theta)?;
    Ok(half_sq(&residuals(data, &f)))
}

fn residuals<T: Scalar>(data: &Dataset<T>, f: &[T]) -> Vec<T> {
    data.observations()
        .iter()
        .zip(data.expand(f))
        .map(|(&y, fv)| y - fv)
        .collect()
}

fn half_sq<T: Scalar>(r: &[T]) -> T {
    T::lit(0.5) * r.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// Gradient `-V^T r` and Gauss–Newton matrix `V^T V` summed over replicates.
fn normal_equations<T: Scalar>(v: &DMatrix<T>, resid: &[T], replicates: usize) -> (DVector<T>, DMatrix<T>) {
    let n = v.nrows();
    let summed = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            resid[i * replicates..(i + 1) * replicates]
                .iter()
                .fold(T::zero(), |acc, &r| acc + r)
        }),
    );
    let grad = -(v.transpose() * summed);
    let jtj = v.transpose() * v * T::from_usize(replicates).unwrap();
    (grad, jtj)
}

/// Minimizes `S(theta)` over the free parameters of `mask` by projected
/// Levenberg–Marquardt.
///
/// Box constraints are enforced by projecting each trial point; steps that
/// break an ordering constraint are rejected. The damping starts at
/// `initial_damping * max(diag V^T V)`, doubles on rejection and shrinks by
/// three on acceptance.
pub fn fit<T: Scalar>(
    model: &dyn Model<T>,
    data: &Dataset<T>,
    start: &[T],
    mask: Option<&ParameterMask<T>>,
    options: &FitOptions<T>,
) -> Result<EstimateResult<T>> {
    let space = model.space();
    let p = space.dim();
    let mask = mask.cloned().unwrap_or_else(|| ParameterMask::all_free(p));
    if mask.len() != p {
        return Err(Error::Dimension {
            what: "parameter mask",
            expected: p,
            got: mask.len(),
        });
    }
    let mut theta = start.to_vec();
    mask.apply(&mut theta);
    space.check(&theta)?;
    let start = theta.clone();

    let design = data.design();
    let times = design.times();
    let reps = design.replicates();
    let free = mask.free_indices();
    let n_obs = design.observation_count();

    let mut resid = residuals(data, &outputs_checked(model, times, &theta)?);
    let mut s = half_sq(&resid);
    let mut history = vec![s];
    let mut iterations = 0;
    let mut mu: Option<T> = None;

    let termination = 'outer: loop {
        if free.is_empty() {
            break Termination::SmallGradient;
        }
        let v = match jacobian(model, design, &theta) {
            Ok(v) => v.entries,
            Err(_) => break Termination::EvaluationFailure,
        };
        let (grad, jtj) = normal_equations(&v, &resid, reps);

        // Parameters pinned at a bound with the descent direction pointing outward.
        let mut active = Vec::with_capacity(free.len());
        let mut blocked = false;
        for &j in &free {
            let (lo, hi) = space.bounds(j);
            if (theta[j] <= lo && grad[j] > T::zero()) || (theta[j] >= hi && grad[j] < T::zero()) {
                blocked = true;
            } else {
                active.push(j);
            }
        }
        let g_active = max_abs(active.iter().map(|&j| grad[j]));
        if active.is_empty() || g_active < options.grad_tol * (T::one() + s.abs()) {
            break if blocked { Termination::Boundary } else { Termination::SmallGradient };
        }

        let k = active.len();
        let h = DMatrix::from_fn(k, k, |a, b| jtj[(active[a], active[b])]);
        let g = DVector::from_iterator(k, active.iter().map(|&j| grad[j]));
        let mut damping = *mu.get_or_insert_with(|| {
            let d = max_abs((0..k).map(|a| h[(a, a)]));
            options.initial_damping * if d > T::zero() { d } else { T::one() }
        });

        loop {
            if iterations >= options.max_iter {
                break 'outer Termination::MaxIter;
            }
            iterations += 1;
            let mut lhs = h.clone();
            for a in 0..k {
                lhs[(a, a)] += damping;
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    damping += damping;
                    continue;
                }
            };
            let mut trial = theta.clone();
            for (a, &j) in active.iter().enumerate() {
                trial[j] += step[a];
            }
            let trial = space.clamp(&trial);
            let moved = max_abs(trial.iter().zip(&theta).map(|(&a, &b)| a - b));
            let scale = max_abs(theta.iter().copied());
            let tiny_step = moved <= options.step_tol * scale.max(T::default_epsilon());

            let accepted = if space.check(&trial).is_ok() {
                outputs_checked(model, times, &trial)
                    .ok()
                    .map(|f| residuals(data, &f))
                    .map(|r| (half_sq(&r), r))
                    .filter(|(s_new, _)| *s_new < s)
            } else {
                None
            };
            match accepted {
                Some((s_new, r_new)) => {
                    theta = trial;
                    resid = r_new;
                    s = s_new;
                    history.push(s);
                    mu = Some(damping / T::lit(3.0));
                    if tiny_step {
                        break 'outer Termination::SmallStep;
                    }
                    continue 'outer;
                }
                None => {
                    if tiny_step {
                        break 'outer if moved < max_abs(step.iter().copied()) * T::lit(0.5) {
                            Termination::Boundary
                        } else {
                            Termination::SmallStep
                        };
                    }
                    damping += damping;
                }
            }
        }
    };

    let dof = n_obs.saturating_sub(free.len());
    Ok(EstimateResult {
        theta,
        objective: s,
        sigma2_hat: (dof > 0).then(|| (s + s) / T::from_usize(dof).unwrap()),
        converged: termination.is_converged(),
        iterations,
        start,
        termination,
        free_parameters: free.len(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::linear_least_squares;
    use crate::model::{generate_data, lookup, Design, LinearModel, ModelConstants};

    fn get(name: &str) -> Box<dyn Model<f64>> {
        lookup(name, &ModelConstants::default()).unwrap()
    }

    fn noiseless(model: &dyn Model<f64>, design: &Design<f64>, theta: &[f64]) -> Dataset<f64> {
        let d = design.with_sigma(1e-300).unwrap();
        let ds = generate_data(model, &d, theta, 0).unwrap();
        Dataset::from_observations(design.clone(), ds.observations().to_vec()).unwrap()
    }

    #[test]
    fn reciprocal_noiseless_recovery() {
        let m = get("reciprocal");
        let d = Design::linspace(0.0, 1.0, 5, 0.1).unwrap();
        let data = noiseless(m.as_ref(), &d, &[0.5]);
        let r = fit(m.as_ref(), &data, &[2.0], None, &FitOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.termination);
        assert!((r.theta[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn biexponential_converges_to_swapped_optimum() {
        let m = get("biexponential");
        let d = Design::linspace(0.0, 5.0, 21, 0.01).unwrap();
        let data = noiseless(m.as_ref(), &d, &[2.0, 1.0]);
        let r = fit(m.as_ref(), &data, &[1.1, 1.9], None, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.theta[0] - 1.0).abs() < 1e-6 && (r.theta[1] - 2.0).abs() < 1e-6, "{:?}", r.theta);
        let s_true = objective(m.as_ref(), &data, &[2.0, 1.0]).unwrap();
        assert!((r.objective - s_true).abs() < 1e-12);
    }

    #[test]
    fn mask_fixes_parameter() {
        let m = get("biexponential");
        let d = Design::linspace(0.0, 5.0, 21, 0.01).unwrap();
        let data = noiseless(m.as_ref(), &d, &[2.0, 1.0]);
        let mask = ParameterMask::all_free(2).fix(m.space(), 1, 1.0).unwrap();
        let r = fit(m.as_ref(), &data, &[5.0, 3.0], Some(&mask), &FitOptions::default()).unwrap();
        assert_eq!(r.free_parameters, 1);
        assert_eq!(r.theta[1], 1.0);
        assert!((r.theta[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn start_outside_space_rejected() {
        let m = get("reciprocal");
        let d = Design::new(vec![0.0], 0.1).unwrap();
        let data = Dataset::from_observations(d, vec![2.0]).unwrap();
        assert!(fit(m.as_ref(), &data, &[-1.0], None, &FitOptions::default()).is_err());
    }

    #[test]
    fn objective_history_is_monotone_and_gradient_small() {
        let m = get("logistic");
        let d = Design::linspace(0.0, 10.0, 15, 0.02).unwrap();
        let truth = [0.9, 4.0, 0.3];
        let data = generate_data(m.as_ref(), &d, &truth, 4).unwrap();
        let r = fit(m.as_ref(), &data, &[0.5, 8.0, 0.8], None, &FitOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.termination);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.objective <= r.history[0]);
        let v = jacobian(m.as_ref(), &d, &r.theta).unwrap().entries;
        let f = outputs_checked(m.as_ref(), d.times(), &r.theta).unwrap();
        let res = residuals(&data, &f);
        let g = v.transpose() * DVector::from_column_slice(&res);
        let ynorm = data.observations().iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(g.amax() <= 1e-6 * (1.0 + ynorm), "gradient {}", g.amax());
    }

    #[test]
    fn agrees_with_closed_form_on_linear_model() {
        let x = DMatrix::<f64>::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0]);
        let m = LinearModel::from_matrix(x.clone());
        let d = Design::linspace(0.0, 5.0, 6, 0.3).unwrap();
        let data = generate_data(&m, &d, &[1.0, -0.5], 9).unwrap();
        let closed = linear_least_squares(&x, data.observations()).unwrap();
        let iter = fit(&m, &data, &[0.0, 0.0], None, &FitOptions::default()).unwrap();
        for j in 0..2 {
            assert!((closed.theta[j] - iter.theta[j]).abs() < 1e-8);
        }
        assert!((closed.sigma2_hat.unwrap() - iter.sigma2_hat.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn stops_at_active_bound() {
        // Truth 0.005 lies below the box: the estimate sits on the lower bound.
        let m = get("reciprocal");
        let d = Design::linspace(0.0, 1.0, 4, 0.1).unwrap();
        let data = Dataset::from_observations(d, vec![201.0; 4]).unwrap();
        let r = fit(m.as_ref(), &data, &[1.0], None, &FitOptions::default()).unwrap();
        assert_eq!(r.theta[0], 0.01);
        assert_eq!(r.termination, Termination::Boundary);
        assert!(r.converged);
    }
}
