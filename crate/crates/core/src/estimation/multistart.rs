use rayon::prelude::*;

use super::{fit, EstimateResult, FitOptions, ParameterMask};
use crate::model::{Dataset, Model};
use crate::rng::{latin_hypercube, stream_rng, Stream};
use crate::scalar::Scalar;

/// Tolerances for grouping converged fits into distinct optima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterTolerances {
    /// Objectives match when `|dS| <= objective * max(|S_a|, |S_b|) + floor`,
    /// with `floor = 1e-12 * (1 + 0.5 * ||y||^2)`.
    pub objective: f64,
    /// Parameters match when `|d theta_k| <= parameter * max(|theta_k|, 1)`.
    pub parameter: f64,
}

impl Default for ClusterTolerances {
    fn default() -> Self {
        Self {
            objective: 1e-4,
            parameter: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome<T: Scalar> {
    pub start_index: usize,
    pub start: Vec<T>,
    /// `Err` carries the failure message for this start.
    pub result: Result<EstimateResult<T>, String>,
}

impl<T: Scalar> StartOutcome<T> {
    pub fn estimate(&self) -> Option<&EstimateResult<T>> {
        self.result.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumCluster<T: Scalar> {
    /// Best member's parameters and objective.
    pub theta: Vec<T>,
    pub objective: T,
    /// Positions in [`MultiStart::outcomes`].
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart<T: Scalar> {
    /// Successful fits sorted by objective, then failed starts by index.
    pub outcomes: Vec<StartOutcome<T>>,
    /// Distinct optima among converged fits, best first.
    pub clusters: Vec<OptimumCluster<T>>,
}

impl<T: Scalar> MultiStart<T> {
    pub fn best(&self) -> Option<&EstimateResult<T>> {
        self.outcomes.first().and_then(StartOutcome::estimate)
    }
}

/// Fits from `k_starts` Latin-hypercube points over the parameter box and
/// groups converged results into distinct optima.
pub fn multi_start_fit<T: Scalar>(
    model: &dyn Model<T>,
    data: &Dataset<T>,
    k_starts: usize,
    seed: u64,
    mask: Option<&ParameterMask<T>>,
    options: &FitOptions<T>,
) -> MultiStart<T> {
    multi_start_fit_with(model, data, k_starts, seed, mask, options, ClusterTolerances::default())
}

pub fn multi_start_fit_with<T: Scalar>(
    model: &dyn Model<T>,
    data: &Dataset<T>,
    k_starts: usize,
    seed: u64,
    mask: Option<&ParameterMask<T>>,
    options: &FitOptions<T>,
    tolerances: ClusterTolerances,
) -> MultiStart<T> {
    let mut rng = stream_rng(seed, Stream::Starts);
    let mut starts = latin_hypercube(&mut rng, model.space(), k_starts.max(1));
    if let Some(mask) = mask {
        starts.iter_mut().for_each(|s| mask.apply(s));
    }
    let mut outcomes: Vec<StartOutcome<T>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(start_index, start)| StartOutcome {
            start_index,
            result: fit(model, data, &start, mask, options).map_err(|e| e.to_string()),
            start,
        })
        .collect();
    outcomes.sort_by(|a, b| match (&a.result, &b.result) {
        (Ok(x), Ok(y)) => x
            .objective
            .partial_cmp(&y.objective)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.start_index.cmp(&b.start_index)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.start_index.cmp(&b.start_index),
    });

    let y_sq: f64 = data.observations().iter().map(|y| y.as_f64().powi(2)).sum();
    let floor = 1e-12 * (1.0 + 0.5 * y_sq);
    let mut clusters: Vec<OptimumCluster<T>> = Vec::new();
    for (pos, outcome) in outcomes.iter().enumerate() {
        let Some(est) = outcome.estimate().filter(|e| e.converged) else {
            continue;
        };
        let s = est.objective.as_f64();
        let home = clusters.iter_mut().find(|c| {
            let sc = c.objective.as_f64();
            let obj_ok = (s - sc).abs() <= tolerances.objective * s.abs().max(sc.abs()) + floor;
            obj_ok
                && c.theta.iter().zip(&est.theta).all(|(&a, &b)| {
                    let a = a.as_f64();
                    (a - b.as_f64()).abs() <= tolerances.parameter * a.abs().max(1.0)
                })
        });
        match home {
            Some(c) => c.members.push(pos),
            None => clusters.push(OptimumCluster {
                theta: est.theta.clone(),
                objective: est.objective,
                members: vec![pos],
            }),
        }
    }
    MultiStart { outcomes, clusters }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_data, lookup, Design, ModelConstants};

    fn noiseless(name: &str, constants: &ModelConstants, design: &Design<f64>, theta: &[f64]) -> (Box<dyn Model<f64>>, Dataset<f64>) {
        let m = lookup(name, constants).unwrap();
        let ds = generate_data(m.as_ref(), &design.with_sigma(1e-300).unwrap(), theta, 0).unwrap();
        let ds = Dataset::from_observations(design.clone(), ds.observations().to_vec()).unwrap();
        (m, ds)
    }

    #[test]
    fn unimodal_problem_has_one_cluster() {
        let d = Design::linspace(0.0, 1.0, 5, 0.1).unwrap();
        let (m, data) = noiseless("reciprocal", &ModelConstants::default(), &d, &[0.5]);
        let ms = multi_start_fit(m.as_ref(), &data, 8, 3, None, &FitOptions::default());
        assert_eq!(ms.clusters.len(), 1, "{:?}", ms.clusters);
        assert!((ms.best().unwrap().theta[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn results_sorted_by_objective() {
        let d = Design::linspace(0.0, 5.0, 21, 0.05).unwrap();
        let m = lookup::<f64>("biexponential", &ModelConstants::default()).unwrap();
        let data = generate_data(m.as_ref(), &d, &[2.0, 1.0], 2).unwrap();
        let ms = multi_start_fit(m.as_ref(), &data, 12, 5, None, &FitOptions::default());
        let objs: Vec<f64> = ms.outcomes.iter().filter_map(|o| o.estimate()).map(|e| e.objective).collect();
        assert!(objs.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(ms.outcomes.len(), 12);
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let d = Design::linspace(0.0, 5.0, 11, 0.05).unwrap();
        let m = lookup::<f64>("biexponential", &ModelConstants::default()).unwrap();
        let data = generate_data(m.as_ref(), &d, &[2.0, 1.0], 2).unwrap();
        let a = multi_start_fit(m.as_ref(), &data, 6, 1, None, &FitOptions::default());
        let b = multi_start_fit(m.as_ref(), &data, 6, 1, None, &FitOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn biexponential_swap_symmetry_gives_two_clusters() {
        let d = Design::linspace(0.0, 5.0, 21, 0.05).unwrap();
        let (m, data) = noiseless("biexponential", &ModelConstants::default(), &d, &[2.0, 1.0]);
        let ms = multi_start_fit(m.as_ref(), &data, 32, 0, None, &FitOptions::default());
        assert_eq!(ms.clusters.len(), 2, "{:?}", ms.clusters);
        let (a, b) = (&ms.clusters[0], &ms.clusters[1]);
        assert!((a.theta[0] - b.theta[1]).abs() < 1e-6 && (a.theta[1] - b.theta[0]).abs() < 1e-6);
        assert!((a.objective - b.objective).abs() < 1e-8);

        let ordered = ModelConstants { ordered: true, ..Default::default() };
        let (m, data) = noiseless("biexponential", &ordered, &d, &[2.0, 1.0]);
        let ms = multi_start_fit(m.as_ref(), &data, 32, 0, None, &FitOptions::default());
        assert_eq!(ms.clusters.len(), 1, "{:?}", ms.clusters);
        assert!((ms.clusters[0].theta[0] - 2.0).abs() < 1e-6);
    }
}
