//! Synthetic-data recovery: simulate at known parameters, refit, and score.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{multi_start_fit, FitOptions};
use crate::format::sig17;
use crate::model::{generate_data, Design, Model};
use crate::prior::Prior;
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOptions<T> {
    pub starts: usize,
    /// Largest accepted relative error per parameter.
    pub tolerance: f64,
    /// Absolute error accepted when `|theta*| < tiny`.
    pub absolute_tolerance: f64,
    pub tiny: f64,
    pub thresholds: VerdictThresholds,
    pub fit: FitOptions<T>,
}

impl<T: Scalar> Default for RecoveryOptions<T> {
    fn default() -> Self {
        Self {
            starts: 16,
            tolerance: 0.1,
            absolute_tolerance: 1e-3,
            tiny: 1e-6,
            thresholds: VerdictThresholds::default(),
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictThresholds {
    pub identifiable: f64,
    pub marginal: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        Self {
            identifiable: 0.95,
            marginal: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PracticallyIdentifiable,
    Marginal,
    NotPracticallyIdentifiable,
}

impl Verdict {
    pub fn from_rate(rate: f64, thresholds: &VerdictThresholds) -> Self {
        if rate >= thresholds.identifiable {
            Verdict::PracticallyIdentifiable
        } else if rate >= thresholds.marginal {
            Verdict::Marginal
        } else {
            Verdict::NotPracticallyIdentifiable
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::PracticallyIdentifiable => "practically-identifiable",
            Verdict::Marginal => "marginal",
            Verdict::NotPracticallyIdentifiable => "not-practically-identifiable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrial {
    pub trial: usize,
    pub theta_true: Vec<f64>,
    pub seed: u64,
    /// `None` when every start failed.
    pub theta_hat: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// `|theta_hat - theta*| / |theta*|`, or the absolute error when `|theta*|` is tiny.
    pub rel_err: Option<Vec<f64>>,
    pub success: bool,
    /// Success after mapping both vectors to their canonical symmetry representatives.
    pub symmetric_success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub times: Vec<f64>,
    pub sigma: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub model: String,
    pub parameters: Vec<String>,
    pub design: DesignSummary,
    pub seed: u64,
    pub tolerance: f64,
    pub trials: Vec<RecoveryTrial>,
    pub failed_trials: usize,
    pub success_rate: f64,
    pub symmetric_success_rate: f64,
    /// Per parameter, over trials that produced an estimate.
    pub error_quantiles: Vec<Option<ErrorQuantiles>>,
    pub thresholds: VerdictThresholds,
    /// Based on the symmetry-aware success rate.
    pub verdict: Verdict,
}

impl RecoveryReport {
    /// CSV `trial,theta_true...,theta_hat...,rel_err...,success`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["trial".to_string()];
        for prefix in ["theta_true", "theta_hat", "rel_err"] {
            header.extend(self.parameters.iter().map(|n| format!("{prefix}_{n}")));
        }
        header.push("success".into());
        header.push("symmetric_success".into());
        w.write_record(&header)?;
        let p = self.parameters.len();
        for t in &self.trials {
            let mut row = vec![t.trial.to_string()];
            row.extend(t.theta_true.iter().map(|&v| sig17(v)));
            let blank = || vec![String::new(); p];
            row.extend(t.theta_hat.as_ref().map_or_else(blank, |v| v.iter().map(|&x| sig17(x)).collect()));
            row.extend(t.rel_err.as_ref().map_or_else(blank, |v| v.iter().map(|&x| sig17(x)).collect()));
            row.push(t.success.to_string());
            row.push(t.symmetric_success.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn errors(estimate: &[f64], truth: &[f64], tiny: f64) -> Vec<f64> {
    estimate
        .iter()
        .zip(truth)
        .map(|(&e, &t)| {
            if t.abs() < tiny {
                (e - t).abs()
            } else {
                (e - t).abs() / t.abs()
            }
        })
        .collect()
}

fn within<T>(err: &[f64], truth: &[f64], options: &RecoveryOptions<T>) -> bool {
    err.iter().zip(truth).all(|(&e, &t)| {
        let tol = if t.abs() < options.tiny {
            options.absolute_tolerance
        } else {
            options.tolerance
        };
        e <= tol
    })
}

/// Simulates a dataset at `theta_true`, refits by multi-start, and scores
/// the best estimate.
pub fn recover_once<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta_true: &[T],
    seed: u64,
    options: &RecoveryOptions<T>,
) -> Result<RecoveryTrial> {
    recover_trial(model, design, theta_true, seed, 0, options)
}

fn recover_trial<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta_true: &[T],
    seed: u64,
    trial: usize,
    options: &RecoveryOptions<T>,
) -> Result<RecoveryTrial> {
    let data = generate_data(model, design, theta_true, seed)?;
    let fits = multi_start_fit(model, &data, options.starts, seed, None, &options.fit);
    let truth: Vec<f64> = theta_true.iter().map(|v| v.as_f64()).collect();
    let mut out = RecoveryTrial {
        trial,
        theta_true: truth.clone(),
        seed,
        theta_hat: None,
        objective: None,
        rel_err: None,
        success: false,
        symmetric_success: false,
    };
    if let Some(best) = fits.best() {
        let hat: Vec<f64> = best.theta.iter().map(|v| v.as_f64()).collect();
        let err = errors(&hat, &truth, options.tiny);
        out.success = within(&err, &truth, options);
        let canon_truth: Vec<f64> = model.canonicalize(theta_true).iter().map(|v| v.as_f64()).collect();
        let canon_hat: Vec<f64> = model.canonicalize(&best.theta).iter().map(|v| v.as_f64()).collect();
        out.symmetric_success = within(&errors(&canon_hat, &canon_truth, options.tiny), &canon_truth, options);
        out.objective = Some(best.objective.as_f64());
        out.theta_hat = Some(hat);
        out.rel_err = Some(err);
    }
    Ok(out)
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `k_trials` recoveries at parameters drawn from `prior`.
///
/// Trial `k` draws its parameter, noise and starts from child seed `k` of
/// `seed` (the prior's own seed is replaced), so the report depends only on
/// the arguments and not on scheduling.
pub fn global_recovery<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    k_trials: usize,
    prior: &Prior,
    seed: u64,
    options: &RecoveryOptions<T>,
) -> Result<RecoveryReport> {
    if k_trials == 0 {
        return Err(Error::InvalidArgument("recovery needs at least one trial".into()));
    }
    prior.check_against(model.space())?;
    let prior = prior.clone().with_seed(seed);
    let trials: Vec<RecoveryTrial> = (0..k_trials)
        .into_par_iter()
        .map(|k| {
            let theta: Vec<T> = prior.draw(model.space(), k as u64)?;
            recover_trial(model, design, &theta, derive_seed(seed, k as u64), k, options)
        })
        .collect::<Result<_>>()?;

    let p = model.space().dim();
    let n = trials.len() as f64;
    let rate = |f: fn(&RecoveryTrial) -> bool| trials.iter().filter(|t| f(t)).count() as f64 / n;
    let success_rate = rate(|t| t.success);
    let symmetric_success_rate = rate(|t| t.symmetric_success);
    let error_quantiles = (0..p)
        .map(|i| {
            let mut e: Vec<f64> = trials.iter().filter_map(|t| t.rel_err.as_ref().map(|r| r[i])).collect();
            if e.is_empty() {
                return None;
            }
            e.sort_by(f64::total_cmp);
            Some(ErrorQuantiles {
                p50: quantile(&e, 0.5),
                p90: quantile(&e, 0.9),
                max: *e.last().unwrap(),
            })
        })
        .collect();
    Ok(RecoveryReport {
        model: model.name().to_string(),
        parameters: model.space().names().to_vec(),
        design: DesignSummary {
            times: design.times().iter().map(|t| t.as_f64()).collect(),
            sigma: design.sigma().as_f64(),
            replicates: design.replicates(),
        },
        seed,
        tolerance: options.tolerance,
        failed_trials: trials.iter().filter(|t| t.theta_hat.is_none()).count(),
        trials,
        success_rate,
        symmetric_success_rate,
        error_quantiles,
        thresholds: options.thresholds,
        verdict: Verdict::from_rate(symmetric_success_rate, &options.thresholds),
    })
}
