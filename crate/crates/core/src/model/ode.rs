//! ODE-defined models and an adaptive Dormand–Prince 5(4) integrator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Step-size control tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-8),
            atol: T::lit(1e-10),
            max_steps: 1_000_000,
        }
    }
}

/// `dx/dt = g(t, x, theta)` with scalar output `h(x)`.
pub trait OdeSystem<T: Scalar>: Send + Sync {
    fn state_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    /// Time at which the initial state applies.
    fn t0(&self) -> T {
        T::zero()
    }

    fn initial_state(&self, theta: &[T]) -> Vec<T>;

    /// `m x p` derivative of the initial state with respect to theta.
    fn initial_state_jacobian(&self, theta: &[T]) -> DMatrix<T>;

    fn rhs(&self, t: T, x: &[T], theta: &[T], dx: &mut [T]);

    /// `m x m` partials `dg/dx`; `None` if not provided.
    fn rhs_state_jacobian(&self, _t: T, _x: &[T], _theta: &[T]) -> Option<DMatrix<T>> {
        None
    }

    /// `m x p` partials `dg/dtheta`; `None` if not provided.
    fn rhs_param_jacobian(&self, _t: T, _x: &[T], _theta: &[T]) -> Option<DMatrix<T>> {
        None
    }

    fn tolerances(&self) -> Tolerances<T> {
        Tolerances::default()
    }

    fn output(&self, x: &[T]) -> T {
        x[0]
    }

    /// Gradient of the output with respect to the state.
    fn output_gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); x.len()];
        g[0] = T::one();
        g
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `dx/dt = rhs(t, x)` from `(t0, x0)` and returns the state at
/// every requested time. `times` must be non-decreasing and `>= t0`; steps are
/// truncated so each requested time is hit exactly.
pub fn integrate<T, F>(mut rhs: F, t0: T, x0: &[T], times: &[T], tol: &Tolerances<T>) -> Result<Vec<Vec<T>>>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]),
{
    let m = x0.len();
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut x = x0.to_vec();
    let span = times.last().map_or(T::zero(), |&te| te - t0);
    let mut h = (span * T::lit(1e-3)).max(T::lit(1e-6));
    let mut k = vec![vec![T::zero(); m]; 7];
    let mut stage = vec![T::zero(); m];
    let mut x5 = vec![T::zero(); m];
    let mut steps = 0usize;
    let fac_min = T::lit(0.2);
    let fac_max = T::lit(5.0);
    let safety = T::lit(0.9);
    let order_exp = T::lit(-0.2);

    rhs(t, &x, &mut k[0]);
    for &target in times {
        if target < t {
            return Err(Error::Integrator(format!(
                "requested time {target} precedes current time {t}"
            )));
        }
        while t < target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::Integrator(format!("exceeded {} steps", tol.max_steps)));
            }
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };

            for s in 1..7 {
                for i in 0..m {
                    let mut acc = T::zero();
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += T::lit(a) * kj[i];
                        }
                    }
                    stage[i] = x[i] + step * acc;
                }
                rhs(t + T::lit(C[s]) * step, &stage, &mut k[s]);
            }
            // The seventh stage is evaluated at the fifth-order solution (FSAL).
            let mut err_sq = T::zero();
            for i in 0..m {
                let mut hi5 = T::zero();
                let mut hi4 = T::zero();
                for j in 0..7 {
                    hi5 += T::lit(B5[j]) * k[j][i];
                    hi4 += T::lit(B4[j]) * k[j][i];
                }
                x5[i] = x[i] + step * hi5;
                let e = step * (hi5 - hi4);
                let scale = tol.atol + tol.rtol * x[i].abs().max(x5[i].abs());
                let r = e / scale;
                err_sq += r * r;
            }
            let err = (err_sq / T::from_usize(m.max(1)).unwrap()).sqrt();
            if !err.is_finite() {
                h = step * fac_min;
                if h < T::default_epsilon() * t.abs().max(T::one()) {
                    return Err(Error::Integrator(format!("non-finite state near t = {t}")));
                }
                continue;
            }
            if err <= T::one() {
                t = if last { target } else { t + step };
                std::mem::swap(&mut x, &mut x5);
                let (first, rest) = k.split_at_mut(6);
                first[0].copy_from_slice(&rest[0]);
                let fac = if err == T::zero() {
                    fac_max
                } else {
                    (safety * err.powf(order_exp)).min(fac_max).max(fac_min)
                };
                // A step shortened to land on an output time does not shrink h.
                h = if last { h.max(step * fac) } else { step * fac };
            } else {
                let fac = (safety * err.powf(order_exp)).max(fac_min);
                h = step * fac;
                if h < T::default_epsilon() * t.abs().max(T::one()) {
                    return Err(Error::Integrator(format!("step size underflow near t = {t}")));
                }
            }
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Model outputs `h(x(t_i))` at every time point.
pub fn solve_outputs<T: Scalar>(
    sys: &dyn OdeSystem<T>,
    times: &[T],
    theta: &[T],
    tol: &Tolerances<T>,
) -> Result<Vec<T>> {
    let x0 = sys.initial_state(theta);
    let states = integrate(|t, x, dx| sys.rhs(t, x, theta, dx), sys.t0(), &x0, times, tol)?;
    Ok(states.iter().map(|x| sys.output(x)).collect())
}

/// Outputs and their `n x p` parameter sensitivities, integrating
/// `S' = (dg/dx) S + dg/dtheta` jointly with the state.
pub fn solve_with_sensitivities<T: Scalar>(
    sys: &dyn OdeSystem<T>,
    times: &[T],
    theta: &[T],
    tol: &Tolerances<T>,
) -> Result<(Vec<T>, DMatrix<T>)> {
    let m = sys.state_dim();
    let p = theta.len();
    let t0 = sys.t0();
    let x0 = sys.initial_state(theta);
    if sys.rhs_state_jacobian(t0, &x0, theta).is_none() || sys.rhs_param_jacobian(t0, &x0, theta).is_none() {
        return Err(Error::MissingPartials(format!("{m}-state system")));
    }
    let s0 = sys.initial_state_jacobian(theta);
    let mut z0 = x0.clone();
    // Sensitivities stored column-major after the state.
    z0.extend(s0.iter().copied());

    let mut failed = false;
    let states = integrate(
        |t, z, dz| {
            let (x, s) = z.split_at(m);
            let (dx, ds) = dz.split_at_mut(m);
            sys.rhs(t, x, theta, dx);
            match (sys.rhs_state_jacobian(t, x, theta), sys.rhs_param_jacobian(t, x, theta)) {
                (Some(jx), Some(jp)) => {
                    let s = DMatrix::from_column_slice(m, p, s);
                    let d = jx * s + jp;
                    ds.copy_from_slice(d.as_slice());
                }
                _ => {
                    failed = true;
                    ds.iter_mut().for_each(|v| *v = T::zero());
                }
            }
        },
        t0,
        &z0,
        times,
        tol,
    )?;
    if failed {
        return Err(Error::MissingPartials(format!("{m}-state system")));
    }

    let mut outputs = Vec::with_capacity(times.len());
    let mut jac = DMatrix::zeros(times.len(), p);
    for (row, z) in states.iter().enumerate() {
        let (x, s) = z.split_at(m);
        outputs.push(sys.output(x));
        let grad = sys.output_gradient(x);
        for j in 0..p {
            let mut acc = T::zero();
            for (i, g) in grad.iter().enumerate() {
                acc += *g * s[j * m + i];
            }
            jac[(row, j)] = acc;
        }
    }
    Ok((outputs, jac))
}
