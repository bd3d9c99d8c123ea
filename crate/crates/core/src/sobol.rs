//! Variance-based global sensitivity analysis with pick-freeze estimators.
//!
//! First-order indices use `<f(B) (f(A_B^i) - f(A))> / Var` with `f` centred
//! by its sample mean, total-order
//! indices use `<(f(A) - f(A_B^i))^2> / (2 Var)`, where `A_B^i` is `A` with
//! column `i` taken from `B`. Indices are computed per design time on the
//! noiseless output and then aggregated.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::model::{outputs_checked, Design, Model};
use crate::prior::Prior;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scalar::{pairwise_sum, Scalar};

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;
pub const DEFAULT_SCREEN_THRESHOLD: f64 = 0.01;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Per-time indices weighted by the output variance at that time.
    #[default]
    VarianceWeighted,
    /// Unweighted mean over non-degenerate times.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub first: Vec<f64>,
    pub first_se: Vec<f64>,
    pub total: Vec<f64>,
    pub total_se: Vec<f64>,
    /// Output variance; summed over times for the aggregate.
    pub variance: f64,
    /// No output variance; all indices are reported as zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeIndices {
    pub time: f64,
    #[serde(flatten)]
    pub indices: SobolIndices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolReport {
    pub parameters: Vec<String>,
    pub n: usize,
    pub aggregation: Aggregation,
    pub bootstrap_resamples: usize,
    /// Sample rows redrawn because a model evaluation failed.
    pub rejected: usize,
    pub per_time: Vec<TimeIndices>,
    pub aggregate: SobolIndices,
}

impl SobolReport {
    /// CSV `parameter,S_first,S_first_se,S_total,S_total_se` of the aggregate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["parameter", "S_first", "S_first_se", "S_total", "S_total_se"])?;
        let a = &self.aggregate;
        for (i, name) in self.parameters.iter().enumerate() {
            w.write_record([
                name.clone(),
                sig17(a.first[i]),
                sig17(a.first_se[i]),
                sig17(a.total[i]),
                sig17(a.total_se[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Model outputs on the pick-freeze sample, laid out per time.
struct Evaluations {
    /// `[t][j]`
    fa: Vec<Vec<f64>>,
    fb: Vec<Vec<f64>>,
    /// `[t][i][j]`
    fab: Vec<Vec<Vec<f64>>>,
    rejected: usize,
}

struct Row {
    fa: Vec<f64>,
    fb: Vec<f64>,
    fab: Vec<Vec<f64>>,
    rejected: usize,
}

fn evaluate_row<T: Scalar>(model: &dyn Model<T>, times: &[T], prior: &Prior, j: usize) -> Result<Row> {
    let mut rng = stream_rng(derive_seed(prior.seed, j as u64), Stream::Prior);
    let eval = |theta: &[T]| -> Option<Vec<f64>> {
        outputs_checked(model, times, theta)
            .ok()
            .map(|v| v.into_iter().map(Scalar::as_f64).collect())
    };
    for attempt in 0..MAX_REDRAWS {
        let a: Vec<T> = prior.sample(&mut rng);
        let b: Vec<T> = prior.sample(&mut rng);
        let Some(fa) = eval(&a) else { continue };
        let Some(fb) = eval(&b) else { continue };
        let fab: Option<Vec<Vec<f64>>> = (0..a.len())
            .map(|i| {
                let mut ab = a.clone();
                ab[i] = b[i];
                eval(&ab)
            })
            .collect();
        if let Some(fab) = fab {
            return Ok(Row {
                fa,
                fb,
                fab,
                rejected: attempt,
            });
        }
    }
    Err(Error::InvalidArgument(format!(
        "model evaluation failed for {MAX_REDRAWS} consecutive prior draws"
    )))
}

fn evaluate_sample<T: Scalar>(model: &dyn Model<T>, design: &Design<T>, prior: &Prior, n: usize) -> Result<Evaluations> {
    let times = design.times();
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|j| evaluate_row(model, times, prior, j))
        .collect::<Result<_>>()?;
    let (nt, p) = (times.len(), prior.dim());
    let mut ev = Evaluations {
        fa: vec![Vec::with_capacity(n); nt],
        fb: vec![Vec::with_capacity(n); nt],
        fab: vec![vec![Vec::with_capacity(n); p]; nt],
        rejected: 0,
    };
    for row in rows {
        ev.rejected += row.rejected;
        for t in 0..nt {
            ev.fa[t].push(row.fa[t]);
            ev.fb[t].push(row.fb[t]);
            for i in 0..p {
                ev.fab[t][i].push(row.fab[i][t]);
            }
        }
    }
    Ok(ev)
}

struct Point {
    first: Vec<f64>,
    total: Vec<f64>,
    variance: f64,
    degenerate: bool,
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Indices at one time from the rows selected by `pick`.
fn point_estimate(fa: &[f64], fb: &[f64], fab: &[Vec<f64>], pick: &[usize]) -> Point {
    let n = pick.len();
    let both: Vec<f64> = pick.iter().map(|&j| fa[j]).chain(pick.iter().map(|&j| fb[j])).collect();
    let m = mean(&both);
    let dev: Vec<f64> = both.iter().map(|v| (v - m) * (v - m)).collect();
    let variance = pairwise_sum(&dev) / (2 * n) as f64;
    let scale = both.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let p = fab.len();
    if !(variance > (1e-13 * scale).powi(2)) {
        return Point {
            first: vec![0.0; p],
            total: vec![0.0; p],
            variance,
            degenerate: true,
        };
    }
    let mut first = Vec::with_capacity(p);
    let mut total = Vec::with_capacity(p);
    let mut buf = vec![0.0; n];
    for col in fab {
        for (k, &j) in pick.iter().enumerate() {
            buf[k] = (fb[j] - m) * (col[j] - fa[j]);
        }
        first.push(mean(&buf) / variance);
        for (k, &j) in pick.iter().enumerate() {
            let d = fa[j] - col[j];
            buf[k] = d * d;
        }
        total.push(mean(&buf) / (2.0 * variance));
    }
    Point {
        first,
        total,
        variance,
        degenerate: false,
    }
}

fn aggregate(points: &[Point], aggregation: Aggregation) -> Point {
    let p = points.first().map_or(0, |pt| pt.first.len());
    let live: Vec<&Point> = points.iter().filter(|pt| !pt.degenerate).collect();
    let variance = pairwise_sum(&points.iter().map(|pt| pt.variance).collect::<Vec<_>>());
    if live.is_empty() {
        return Point {
            first: vec![0.0; p],
            total: vec![0.0; p],
            variance,
            degenerate: true,
        };
    }
    let weights: Vec<f64> = match aggregation {
        Aggregation::VarianceWeighted => live.iter().map(|pt| pt.variance).collect(),
        Aggregation::Mean => vec![1.0; live.len()],
    };
    let wsum = pairwise_sum(&weights);
    let combine = |get: &dyn Fn(&Point) -> f64| -> f64 {
        let terms: Vec<f64> = live.iter().zip(&weights).map(|(pt, w)| w * get(pt)).collect();
        pairwise_sum(&terms) / wsum
    };
    Point {
        first: (0..p).map(|i| combine(&|pt| pt.first[i])).collect(),
        total: (0..p).map(|i| combine(&|pt| pt.total[i])).collect(),
        variance,
        degenerate: false,
    }
}

fn all_points(ev: &Evaluations, pick: &[usize]) -> Vec<Point> {
    (0..ev.fa.len())
        .map(|t| point_estimate(&ev.fa[t], &ev.fb[t], &ev.fab[t], pick))
        .collect()
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / (values.len() - 1) as f64).sqrt()
}

/// First- and total-order indices of `model` over `design.times()` with
/// parameters drawn from `prior`.
///
/// `n` must be a power of two no smaller than 1024. The sample and the
/// bootstrap depend only on `prior.seed`, never on the thread count.
pub fn sobol_indices<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    prior: &Prior,
    n: usize,
    aggregation: Aggregation,
) -> Result<SobolReport> {
    sobol_indices_with(model, design, prior, n, aggregation, DEFAULT_BOOTSTRAP_RESAMPLES)
}

pub fn sobol_indices_with<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    prior: &Prior,
    n: usize,
    aggregation: Aggregation,
    resamples: usize,
) -> Result<SobolReport> {
    if !n.is_power_of_two() || n < 1 << 10 {
        return Err(Error::InvalidArgument(format!(
            "sample size {n} must be a power of two no smaller than 1024"
        )));
    }
    prior.check_against(model.space())?;
    let ev = evaluate_sample(model, design, prior, n)?;
    let identity: Vec<usize> = (0..n).collect();
    let points = all_points(&ev, &identity);
    let agg = aggregate(&points, aggregation);

    let mut rng = stream_rng(prior.seed, Stream::Bootstrap);
    let picks: Vec<Vec<usize>> = (0..resamples)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect();
    let boots: Vec<(Vec<Point>, Point)> = picks
        .par_iter()
        .map(|pick| {
            let pts = all_points(&ev, pick);
            let a = aggregate(&pts, aggregation);
            (pts, a)
        })
        .collect();

    let p = prior.dim();
    let se = |get: &dyn Fn(&(Vec<Point>, Point)) -> f64| -> f64 {
        std_dev(&boots.iter().map(get).collect::<Vec<_>>())
    };
    let pack = |pt: &Point, get: &dyn Fn(&(Vec<Point>, Point)) -> &Point| -> SobolIndices {
        let (first_se, total_se) = if pt.degenerate {
            (vec![0.0; p], vec![0.0; p])
        } else {
            (
                (0..p).map(|i| se(&|b| get(b).first[i])).collect(),
                (0..p).map(|i| se(&|b| get(b).total[i])).collect(),
            )
        };
        SobolIndices {
            first: pt.first.clone(),
            first_se,
            total: pt.total.clone(),
            total_se,
            variance: pt.variance,
            degenerate: pt.degenerate,
        }
    };
    let per_time = points
        .iter()
        .enumerate()
        .map(|(t, pt)| TimeIndices {
            time: design.times()[t].as_f64(),
            indices: pack(pt, &|b| &b.0[t]),
        })
        .collect();
    let aggregate = pack(&agg, &|b| &b.1);
    Ok(SobolReport {
        parameters: model.space().names().to_vec(),
        n,
        aggregation,
        bootstrap_resamples: resamples,
        rejected: ev.rejected,
        per_time,
        aggregate,
    })
}

/// Parameters whose aggregate first- and total-order indices are both at
/// most `threshold`.
///
/// Such parameters barely move the output under the prior, so estimating
/// them is unlikely to succeed. The converse does not hold: nonzero
/// indices do not imply identifiability.
pub fn screen_unidentifiable(report: &SobolReport, threshold: f64) -> Vec<usize> {
    let a = &report.aggregate;
    (0..a.first.len())
        .filter(|&i| a.first[i] <= threshold && a.total[i] <= threshold)
        .collect()
}
