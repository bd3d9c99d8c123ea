//! Profile log-likelihood curves and their identifiability classification.
//!
//! The log-likelihood is `l(theta) = -S(theta) / sigma^2` with `sigma` taken
//! from the dataset's design.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit, multi_start_fit, objective, EstimateResult, FitOptions, ParameterMask};
use crate::fim::{chi_square_quantile, fim_for_design, DEFAULT_RANK_TOLERANCE};
use crate::format::sig17;
use crate::model::{Dataset, Model};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileClass {
    Identifiable,
    PracticallyUnidentifiable,
    StructurallyUnidentifiableFlat,
}

impl ProfileClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileClass::Identifiable => "identifiable",
            ProfileClass::PracticallyUnidentifiable => "practically-unidentifiable",
            ProfileClass::StructurallyUnidentifiableFlat => "structurally-unidentifiable-flat",
        }
    }
}

/// Grid of values for the profiled parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    /// `points` values spanning `theta_hat_i +- width_sd * sd_i`, clipped to
    /// the parameter slice; the whole slice when the FIM is singular.
    Default { points: usize, width_sd: f64 },
    /// Evenly spaced (or log-spaced) values on `[lower, upper]`.
    Range {
        lower: f64,
        upper: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
    /// Explicit values.
    Values { values: Vec<f64> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Default {
            points: 41,
            width_sd: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOptions<T> {
    pub fit: FitOptions<T>,
    pub level: f64,
    /// Total variation below which a curve is called flat.
    pub flat_threshold: f64,
    /// Bisection refits used to locate each interval endpoint between grid points.
    pub refine_iterations: usize,
    /// When set, every grid point is refit from this many Latin-hypercube
    /// starts instead of the warm-start chain.
    pub cold_starts: Option<(usize, u64)>,
}

impl<T: Scalar> Default for ProfileOptions<T> {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            level: 0.95,
            flat_threshold: 1e-6,
            refine_iterations: 50,
            cold_starts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint<T: Scalar> {
    pub value: T,
    pub loglik: T,
    /// Full parameter vector at the constrained optimum.
    pub theta: Vec<T>,
    pub converged: bool,
}

/// Likelihood-ratio interval; `None` marks an unbounded side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileInterval {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub level: f64,
    /// Drop `chi2_1(level) / 2` from the maximum.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve<T: Scalar> {
    pub parameter: usize,
    /// Sorted by `value`.
    pub points: Vec<ProfilePoint<T>>,
    /// `l(theta_hat)` of the fit the profile was started from.
    pub loglik_hat: T,
    pub theta_hat_i: T,
    pub interval: ProfileInterval,
    pub classification: ProfileClass,
    pub total_variation: f64,
    pub flat_threshold: f64,
    /// A refit failed and the sweep stopped early in some direction.
    pub truncated: bool,
    pub sigma: T,
}

/// JSON summary of a [`ProfileCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub parameter: usize,
    pub theta_hat: f64,
    pub loglik_hat: f64,
    pub interval: ProfileInterval,
    pub classification: String,
    pub total_variation: f64,
    pub flat_threshold: f64,
    pub truncated: bool,
    pub sigma: f64,
    pub points: usize,
}

impl<T: Scalar> ProfileCurve<T> {
    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn logliks(&self) -> Vec<T> {
        self.points.iter().map(|p| p.loglik).collect()
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            parameter: self.parameter,
            theta_hat: self.theta_hat_i.as_f64(),
            loglik_hat: self.loglik_hat.as_f64(),
            interval: self.interval,
            classification: self.classification.as_str().to_string(),
            total_variation: self.total_variation,
            flat_threshold: self.flat_threshold,
            truncated: self.truncated,
            sigma: self.sigma.as_f64(),
            points: self.points.len(),
        }
    }

    /// CSV `theta_i,profile_loglik,converged`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta_i", "profile_loglik", "converged"])?;
        for p in &self.points {
            w.write_record([sig17(p.value.as_f64()), sig17(p.loglik.as_f64()), p.converged.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `l(theta) = -S(theta) / sigma^2`.
pub fn loglik<T: Scalar>(model: &dyn Model<T>, data: &Dataset<T>, theta: &[T]) -> Result<T> {
    let sigma = data.design().sigma();
    Ok(-objective(model, data, theta)? / (sigma * sigma))
}

fn build_grid<T: Scalar>(
    model: &dyn Model<T>,
    data: &Dataset<T>,
    theta_hat: &[T],
    i: usize,
    spec: &GridSpec,
) -> Result<Vec<T>> {
    let (lo, hi) = model.space().bounds(i);
    let center = theta_hat[i];
    let mut grid: Vec<T> = match spec {
        GridSpec::Default { points, width_sd } => {
            let points = (*points).max(3);
            let sd = fim_for_design(model, data.design(), theta_hat, T::lit(DEFAULT_RANK_TOLERANCE))
                .ok()
                .and_then(|r| r.inverse().ok())
                .map(|inv| inv[(i, i)].sqrt())
                .filter(|s| s.is_finite() && *s > T::zero());
            let (a, b) = match sd {
                Some(sd) => {
                    let w = T::lit(*width_sd) * sd;
                    ((center - w).max(lo), (center + w).min(hi))
                }
                None => (lo, hi),
            };
            let side = (points - 1) / 2;
            let step = |end: T, k: usize, of: usize| {
                if k == of {
                    end
                } else {
                    center + (end - center) * T::from_usize(k).unwrap() / T::from_usize(of).unwrap()
                }
            };
            let mut g = Vec::with_capacity(points);
            if a < center {
                g.extend((1..=side).rev().map(|k| step(a, k, side)));
            }
            g.push(center);
            if b > center {
                g.extend((1..=points - 1 - side).map(|k| step(b, k, points - 1 - side)));
            }
            g
        }
        GridSpec::Range {
            lower,
            upper,
            points,
            log,
        } => {
            if !(lower < upper) || *points < 2 || (*log && *lower <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "profile grid range [{lower}, {upper}] with {points} points is invalid"
                )));
            }
            (0..*points)
                .map(|k| {
                    let u = k as f64 / (*points - 1) as f64;
                    T::lit(if *log {
                        (lower.ln() + u * (upper.ln() - lower.ln())).exp()
                    } else {
                        lower + u * (upper - lower)
                    })
                })
                .collect()
        }
        GridSpec::Values { values } => values.iter().map(|&v| T::lit(v)).collect(),
    };
    if let Some(bad) = grid.iter().find(|&&v| !(v >= lo && v <= hi)) {
        return Err(Error::InvalidArgument(format!(
            "profile grid value {bad} lies outside the parameter slice [{lo}, {hi}]"
        )));
    }
    grid.push(center);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    Ok(grid)
}

struct Refitter<'a, T: Scalar> {
    model: &'a dyn Model<T>,
    data: &'a Dataset<T>,
    i: usize,
    options: &'a ProfileOptions<T>,
    theta_hat: &'a [T],
}

impl<T: Scalar> Refitter<'_, T> {
    /// Maximizes `l` with `theta_i = value`, warm-started from `warm`.
    fn point(&self, value: T, warm: &[T]) -> Result<ProfilePoint<T>> {
        let space = self.model.space();
        let mask = ParameterMask::all_free(space.dim()).fix(space, self.i, value)?;
        let sigma = self.data.design().sigma();
        let est: EstimateResult<T> = match self.options.cold_starts {
            Some((k, seed)) => multi_start_fit(self.model, self.data, k, seed, Some(&mask), &self.options.fit)
                .best()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument("every cold start failed".into()))?,
            None => {
                let mut start = warm.to_vec();
                start[self.i] = value;
                if !space.contains(&start) {
                    start = self.theta_hat.to_vec();
                    start[self.i] = value;
                    start = space.clamp(&start);
                }
                fit(self.model, self.data, &start, Some(&mask), &self.options.fit)?
            }
        };
        Ok(ProfilePoint {
            value,
            loglik: -est.objective / (sigma * sigma),
            converged: est.converged,
            theta: est.theta,
        })
    }

    /// Sweeps `values` in order, chaining warm starts; stops at the first failure.
    fn sweep(&self, values: &[T], warm: &[T]) -> (Vec<ProfilePoint<T>>, bool) {
        let mut out = Vec::with_capacity(values.len());
        let mut prev = warm.to_vec();
        for &v in values {
            match self.point(v, &prev) {
                Ok(p) => {
                    prev = p.theta.clone();
                    out.push(p);
                }
                Err(_) => return (out, true),
            }
        }
        (out, false)
    }
}

/// Profile of parameter `i` around a converged fit.
///
/// Grid points are visited outward from `theta_hat_i` in both directions,
/// each refit warm-started from its neighbour's optimum. Interval endpoints
/// are then located between grid points by bisection refits.
pub fn profile_parameter<T: Scalar>(
    model: &dyn Model<T>,
    data: &Dataset<T>,
    fit_result: &EstimateResult<T>,
    i: usize,
    grid: &GridSpec,
    options: &ProfileOptions<T>,
) -> Result<ProfileCurve<T>> {
    let p = model.space().dim();
    if i >= p {
        return Err(Error::InvalidArgument(format!("parameter index {i} out of range for dimension {p}")));
    }
    if !fit_result.converged {
        return Err(Error::InvalidArgument("profile requires a converged fit".into()));
    }
    let theta_hat = &fit_result.theta;
    let values = build_grid(model, data, theta_hat, i, grid)?;
    let c = values.iter().position(|&v| v == theta_hat[i]).expect("grid contains theta_hat");
    let refit = Refitter {
        model,
        data,
        i,
        options,
        theta_hat,
    };
    let center = refit.point(values[c], theta_hat)?;
    let up_values = &values[c + 1..];
    let down_values: Vec<T> = values[..c].iter().rev().copied().collect();
    let ((up, up_trunc), (down, down_trunc)) = rayon::join(
        || refit.sweep(up_values, &center.theta),
        || refit.sweep(&down_values, &center.theta),
    );
    let mut points: Vec<ProfilePoint<T>> = down.into_iter().rev().collect();
    points.push(center);
    points.extend(up);

    let sigma = data.design().sigma();
    let mut curve = ProfileCurve {
        parameter: i,
        points,
        loglik_hat: -fit_result.objective / (sigma * sigma),
        theta_hat_i: theta_hat[i],
        interval: ProfileInterval {
            lower: None,
            upper: None,
            level: options.level,
            threshold: 0.0,
        },
        classification: ProfileClass::Identifiable,
        total_variation: 0.0,
        flat_threshold: options.flat_threshold,
        truncated: up_trunc || down_trunc,
        sigma,
    };
    let (class, interval) = classify_profile_with(&curve, options.level, options.flat_threshold)?;
    curve.classification = class;
    curve.total_variation = total_variation(&curve);
    curve.interval = refine_interval(&refit, &curve, interval);
    Ok(curve)
}

/// Profiles of every parameter, computed concurrently.
pub fn profile_all<T: Scalar>(
    model: &dyn Model<T>,
    data: &Dataset<T>,
    fit_result: &EstimateResult<T>,
    grid: &GridSpec,
    options: &ProfileOptions<T>,
) -> Result<Vec<ProfileCurve<T>>> {
    use rayon::prelude::*;
    (0..model.space().dim())
        .into_par_iter()
        .map(|i| profile_parameter(model, data, fit_result, i, grid, options))
        .collect()
}

fn total_variation<T: Scalar>(curve: &ProfileCurve<T>) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].loglik - w[0].loglik).as_f64().abs())
        .sum()
}

/// Linear-interpolation likelihood-ratio interval on the grid.
pub fn profile_interval<T: Scalar>(curve: &ProfileCurve<T>, level: f64) -> Result<ProfileInterval> {
    let threshold = chi_square_quantile(1, level)? / 2.0;
    let ll: Vec<f64> = curve.points.iter().map(|p| p.loglik.as_f64()).collect();
    let xs: Vec<f64> = curve.points.iter().map(|p| p.value.as_f64()).collect();
    if ll.is_empty() {
        return Err(Error::InvalidArgument("empty profile curve".into()));
    }
    let (imax, lmax) = ll
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    let cross = |a: usize, b: usize| -> f64 {
        let (da, db) = (lmax - ll[a], lmax - ll[b]);
        xs[a] + (xs[b] - xs[a]) * (threshold - da) / (db - da)
    };
    let upper = (imax + 1..ll.len())
        .find(|&k| lmax - ll[k] > threshold)
        .map(|k| cross(k - 1, k));
    let lower = (0..imax).rev().find(|&k| lmax - ll[k] > threshold).map(|k| cross(k + 1, k));
    Ok(ProfileInterval {
        lower,
        upper,
        level,
        threshold,
    })
}

/// Flat when the total variation is below `flat_threshold`; practically
/// unidentifiable when the interval is open on either side.
pub fn classify_profile<T: Scalar>(curve: &ProfileCurve<T>, level: f64) -> Result<ProfileClass> {
    Ok(classify_profile_with(curve, level, curve.flat_threshold)?.0)
}

fn classify_profile_with<T: Scalar>(
    curve: &ProfileCurve<T>,
    level: f64,
    flat_threshold: f64,
) -> Result<(ProfileClass, ProfileInterval)> {
    let interval = profile_interval(curve, level)?;
    let class = if total_variation(curve) < flat_threshold {
        ProfileClass::StructurallyUnidentifiableFlat
    } else if interval.lower.is_none() || interval.upper.is_none() {
        ProfileClass::PracticallyUnidentifiable
    } else {
        ProfileClass::Identifiable
    };
    Ok((class, interval))
}

fn refine_interval<T: Scalar>(refit: &Refitter<'_, T>, curve: &ProfileCurve<T>, coarse: ProfileInterval) -> ProfileInterval {
    if refit.options.refine_iterations == 0 {
        return coarse;
    }
    let lmax = curve
        .points
        .iter()
        .map(|p| p.loglik.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    // Returns (inside, outside) grid indices around a coarse crossing.
    let bracket = |x: f64, upper_side: bool| -> Option<(usize, usize)> {
        let k = curve.points.iter().position(|p| p.value.as_f64() >= x)?;
        if upper_side {
            Some((k.checked_sub(1)?, k))
        } else {
            Some((k, k.checked_sub(1)?))
        }
    };
    let solve = |inside: usize, outside: usize| -> Option<f64> {
        // `inside` is within the interval, `outside` beyond the threshold.
        let (mut a, mut b) = (curve.points[inside].value, curve.points[outside].value);
        let mut warm = curve.points[inside].theta.clone();
        for _ in 0..refit.options.refine_iterations {
            let mid = (a + b) * T::lit(0.5);
            if mid == a || mid == b {
                break;
            }
            let p = refit.point(mid, &warm).ok()?;
            if lmax - p.loglik.as_f64() > coarse.threshold {
                b = mid;
            } else {
                a = mid;
                warm = p.theta;
            }
        }
        Some(((a + b) * T::lit(0.5)).as_f64())
    };
    let upper = coarse.upper.map(|x| {
        bracket(x, true)
            .and_then(|(inside, outside)| solve(inside, outside))
            .unwrap_or(x)
    });
    let lower = coarse.lower.map(|x| {
        bracket(x, false)
            .and_then(|(inside, outside)| solve(inside, outside))
            .unwrap_or(x)
    });
    ProfileInterval { lower, upper, ..coarse }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_data, lookup, Design, ModelConstants, ParameterSpace};

    fn synthetic_curve(values: &[f64], logliks: &[f64]) -> ProfileCurve<f64> {
        ProfileCurve {
            parameter: 0,
            points: values
                .iter()
                .zip(logliks)
                .map(|(&value, &loglik)| ProfilePoint {
                    value,
                    loglik,
                    theta: vec![value],
                    converged: true,
                })
                .collect(),
            loglik_hat: logliks.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            theta_hat_i: 0.0,
            interval: ProfileInterval {
                lower: None,
                upper: None,
                level: 0.95,
                threshold: 0.0,
            },
            classification: ProfileClass::Identifiable,
            total_variation: 0.0,
            flat_threshold: 1e-6,
            truncated: false,
            sigma: 1.0,
        }
    }

    #[test]
    fn flat_curve_is_structural() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ll: Vec<f64> = (0..10).map(|k| -3.0 + 1e-13 * k as f64).collect();
        assert_eq!(
            classify_profile(&synthetic_curve(&xs, &ll), 0.95).unwrap(),
            ProfileClass::StructurallyUnidentifiableFlat
        );
    }

    #[test]
    fn tight_quadratic_is_identifiable() {
        let xs: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.1).collect();
        let ll: Vec<f64> = xs.iter().map(|x| -50.0 * x * x).collect();
        let c = synthetic_curve(&xs, &ll);
        assert_eq!(classify_profile(&c, 0.95).unwrap(), ProfileClass::Identifiable);
        let iv = profile_interval(&c, 0.95).unwrap();
        let exact = (iv.threshold / 50.0).sqrt();
        assert!((iv.upper.unwrap() - exact).abs() < 0.01);
        assert!((iv.lower.unwrap() + exact).abs() < 0.01);
        assert!((iv.threshold - 1.920_729).abs() < 1e-6);
    }

    #[test]
    fn one_sided_plateau_is_practically_unidentifiable() {
        // Reciprocal-model shape; the drop tends to 0.25 * 5 = 1.25 as x grows.
        let xs: Vec<f64> = (0..60).map(|k| 0.5 + k as f64 * 0.5).collect();
        let ll: Vec<f64> = xs.iter().map(|x| -(1.0 / x - 0.5f64).powi(2) * 5.0).collect();
        let c = synthetic_curve(&xs, &ll);
        let iv = profile_interval(&c, 0.95).unwrap();
        assert!(iv.lower.is_some());
        assert!(iv.upper.is_none());
        assert_eq!(classify_profile(&c, 0.95).unwrap(), ProfileClass::PracticallyUnidentifiable);
    }

    #[test]
    fn redundant_exponential_profile_is_flat() {
        let m = lookup::<f64>("redundant-exponential", &ModelConstants::default()).unwrap();
        let d = Design::linspace(0.0, 2.0, 8, 0.05).unwrap();
        let data = generate_data(m.as_ref(), &d, &[2.0, -0.5, 0.3], 1).unwrap();
        let est = fit(m.as_ref(), &data, &[2.0, -0.5, 0.3], None, &FitOptions::default()).unwrap();
        let grid = GridSpec::Range {
            lower: 1.0,
            upper: 4.0,
            points: 13,
            log: false,
        };
        let curve = profile_parameter(m.as_ref(), &data, &est, 0, &grid, &ProfileOptions::default()).unwrap();
        let ll = curve.logliks();
        let range = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ll.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(range < 1e-8, "range {range}");
        assert_eq!(curve.classification, ProfileClass::StructurallyUnidentifiableFlat);
    }

    #[test]
    fn linear_interval_matches_information() {
        use crate::estimation::linear_least_squares;
        use crate::fim::assemble_fim;
        use crate::model::LinearModel;
        use nalgebra::DMatrix;
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0]);
        let sigma = 0.3;
        let m = LinearModel::from_matrix(x.clone());
        let d = Design::new((0..6).map(f64::from).collect(), sigma).unwrap();
        let data = generate_data(&m, &d, &[1.0, -0.5], 4).unwrap();
        let est = linear_least_squares(&x, data.observations()).unwrap();
        let cov = assemble_fim(&x, sigma).unwrap().inverse().unwrap();
        let curves = profile_all(&m, &data, &est, &GridSpec::default(), &ProfileOptions::default()).unwrap();
        for (i, c) in curves.iter().enumerate() {
            let half = 1.959_964 * cov[(i, i)].sqrt();
            let (lo, hi) = (c.interval.lower.unwrap(), c.interval.upper.unwrap());
            assert!(((hi - lo) / (2.0 * half) - 1.0).abs() < 0.01);
            assert!((lo - (est.theta[i] - half)).abs() < 0.01 * half);
            assert!((hi - (est.theta[i] + half)).abs() < 0.01 * half);
            assert_eq!(c.classification, ProfileClass::Identifiable);
        }
    }

    #[test]
    fn grid_outside_slice_rejected() {
        let m = lookup::<f64>("reciprocal", &ModelConstants::default()).unwrap();
        let d = Design::linspace(0.0, 1.0, 4, 0.1).unwrap();
        let data = generate_data(m.as_ref(), &d, &[0.5], 0).unwrap();
        let est = fit(m.as_ref(), &data, &[0.5], None, &FitOptions::default()).unwrap();
        let grid = GridSpec::Values { values: vec![-1.0, 0.5] };
        assert!(profile_parameter(m.as_ref(), &data, &est, 0, &grid, &ProfileOptions::default()).is_err());
    }

    #[test]
    fn reciprocal_large_theta_open_above() {
        let m = lookup::<f64>("reciprocal", &ModelConstants::default()).unwrap();
        let d = Design::linspace(0.0, 1.0, 10, 0.1).unwrap();
        let data = generate_data(m.as_ref(), &d, &[20.0], 3).unwrap();
        let est = fit(m.as_ref(), &data, &[20.0], None, &FitOptions::default()).unwrap();
        let curve = profile_parameter(m.as_ref(), &data, &est, 0, &GridSpec::default(), &ProfileOptions::default()).unwrap();
        assert!(curve.interval.upper.is_none(), "{:?}", curve.interval);
        assert_eq!(curve.classification, ProfileClass::PracticallyUnidentifiable);
    }

    #[test]
    fn maximum_matches_fit_and_dominates() {
        let m = lookup::<f64>(
            "biexponential",
            &ModelConstants {
                ordered: true,
                ..Default::default()
            },
        )
        .unwrap();
        let d = Design::linspace(0.0, 5.0, 16, 0.02).unwrap();
        let data = generate_data(m.as_ref(), &d, &[2.0, 0.5], 8).unwrap();
        let est = fit(m.as_ref(), &data, &[2.0, 0.5], None, &FitOptions::default()).unwrap();
        let curve = profile_parameter(m.as_ref(), &data, &est, 0, &GridSpec::default(), &ProfileOptions::default()).unwrap();
        let lmax = curve.logliks().into_iter().fold(f64::NEG_INFINITY, f64::max);
        assert!((lmax - curve.loglik_hat).abs() < 1e-6);
        for p in &curve.points {
            assert!(p.loglik <= curve.loglik_hat + 1e-9);
        }
        // Dominance against random feasible points sharing theta_1.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for p in curve.points.iter().step_by(8) {
            for _ in 0..100 {
                let other = rng.random_range(0.01..p.value);
                let l = loglik(m.as_ref(), &data, &[p.value, other]).unwrap();
                assert!(p.loglik >= l - 1e-9);
            }
        }
        assert_eq!(curve.classification, ProfileClass::Identifiable);
    }

    #[test]
    fn warm_and_cold_profiles_agree() {
        let m = lookup::<f64>(
            "biexponential",
            &ModelConstants {
                ordered: true,
                ..Default::default()
            },
        )
        .unwrap();
        let d = Design::linspace(0.0, 5.0, 16, 0.02).unwrap();
        let data = generate_data(m.as_ref(), &d, &[2.0, 0.5], 8).unwrap();
        let est = fit(m.as_ref(), &data, &[2.0, 0.5], None, &FitOptions::default()).unwrap();
        let grid = GridSpec::Default {
            points: 11,
            width_sd: 4.0,
        };
        let warm = profile_parameter(m.as_ref(), &data, &est, 1, &grid, &ProfileOptions::default()).unwrap();
        let cold_opts = ProfileOptions {
            cold_starts: Some((8, 5)),
            refine_iterations: 0,
            ..Default::default()
        };
        let cold = profile_parameter(m.as_ref(), &data, &est, 1, &grid, &cold_opts).unwrap();
        for (a, b) in warm.points.iter().zip(&cold.points) {
            assert_eq!(a.value, b.value);
            assert!((a.loglik - b.loglik).abs() < 1e-6, "{} vs {}", a.loglik, b.loglik);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let xs = [0.0, 1.0];
        let c = synthetic_curve(&xs, &[-1.0, -2.0]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta_i,profile_loglik,converged\n"));
        assert_eq!(text.lines().count(), 3);
        let _ = ParameterSpace::new(vec![0.0], vec![1.0]).unwrap();
    }
}
