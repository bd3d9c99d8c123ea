//! Fisher information: assembly, eigen-analysis, identifiability
//! classification, sloppiness, ellipsoids and design scores.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{Design, Model};
use crate::scalar::Scalar;
use crate::sensitivity::jacobian;

/// Default relative eigenvalue cut-off `lambda_min / lambda_max`.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Identifiable,
    RankDeficient,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Identifiable => "identifiable",
            Classification::RankDeficient => "rank-deficient",
        }
    }
}

/// Thresholds for flagging a log-linearly spread spectrum as sloppy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloppinessThresholds {
    pub min_spread_decades: f64,
    pub min_r_squared: f64,
}

impl Default for SloppinessThresholds {
    fn default() -> Self {
        Self {
            min_spread_decades: 3.0,
            min_r_squared: 0.9,
        }
    }
}

/// Least-squares fit of `log10 lambda_i` against the index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sloppiness {
    pub spread_decades: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual_sum_squares: f64,
    pub r_squared: f64,
    pub sloppy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimReport<T: Scalar> {
    /// `sigma^-2 V^T V`, symmetrized.
    pub fim: DMatrix<T>,
    /// Descending.
    pub eigenvalues: DVector<T>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<T>,
    pub rank: usize,
    pub classification: Classification,
    pub sloppiness: Option<Sloppiness>,
    pub sigma: T,
    pub rank_tolerance: T,
}

impl<T: Scalar> FimReport<T> {
    pub fn dim(&self) -> usize {
        self.fim.nrows()
    }

    pub fn lambda_max(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> T {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn eigenvector(&self, i: usize) -> DVector<T> {
        self.eigenvectors.column(i).into_owned()
    }

    /// `sum_i lambda_i u_i u_i^T`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let d = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }

    pub fn is_identifiable(&self) -> bool {
        self.classification == Classification::Identifiable
    }

    /// Inverse FIM from the eigen-decomposition.
    pub fn inverse(&self) -> Result<DMatrix<T>> {
        if !self.is_identifiable() {
            return Err(Error::RankDeficient);
        }
        let inv_l = self.eigenvalues.map(|l| T::one() / l);
        Ok(&self.eigenvectors * DMatrix::from_diagonal(&inv_l) * self.eigenvectors.transpose())
    }

    /// JSON-ready summary with every design criterion.
    pub fn summary(&self) -> FimSummary {
        let to_f = |v: T| v.as_f64();
        FimSummary {
            fim: self
                .fim
                .row_iter()
                .map(|r| r.iter().map(|&v| to_f(v)).collect())
                .collect(),
            eigenvalues: self.eigenvalues.iter().map(|&v| to_f(v)).collect(),
            eigenvectors: self
                .eigenvectors
                .column_iter()
                .map(|c| c.iter().map(|&v| to_f(v)).collect())
                .collect(),
            rank: self.rank,
            classification: self.classification.as_str().to_string(),
            sloppiness: self.sloppiness,
            scores: CriterionScores {
                d: score_report(self, DesignCriterion::D).finite().map(to_f),
                a: score_report(self, DesignCriterion::A).finite().map(to_f),
                e: score_report(self, DesignCriterion::E).finite().map(to_f),
            },
            sigma: to_f(self.sigma),
            rank_tolerance: to_f(self.rank_tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    #[serde(rename = "D")]
    pub d: Option<f64>,
    /// `None` when the information matrix is singular.
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "E")]
    pub e: Option<f64>,
}

/// Serializable form of [`FimReport`]; `fim` is row-major and
/// `eigenvectors[i]` is the eigenvector of `eigenvalues[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimSummary {
    pub fim: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub rank: usize,
    pub classification: String,
    pub sloppiness: Option<Sloppiness>,
    pub scores: CriterionScores,
    pub sigma: f64,
    pub rank_tolerance: f64,
}

/// `I = sigma^-2 V^T V` with the default rank tolerance.
pub fn assemble_fim<T: Scalar>(v: &DMatrix<T>, sigma: T) -> Result<FimReport<T>> {
    assemble_fim_weighted(v, sigma, 1, T::lit(DEFAULT_RANK_TOLERANCE))
}

/// `I = replicates * sigma^-2 V^T V`; each row of `V` observed `replicates` times.
pub fn assemble_fim_weighted<T: Scalar>(
    v: &DMatrix<T>,
    sigma: T,
    replicates: usize,
    rank_tolerance: T,
) -> Result<FimReport<T>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput("sensitivity matrix"));
    }
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sd must be positive (got {sigma})")));
    }
    if v.ncols() == 0 {
        return Err(Error::InvalidArgument("sensitivity matrix has no columns".into()));
    }
    let weight = T::from_usize(replicates).unwrap() / (sigma * sigma);
    let gram = v.transpose() * v;
    let fim = (&gram + gram.transpose()) * (T::lit(0.5) * weight);
    from_fim(fim, sigma, rank_tolerance)
}

/// Eigen-analysis of an already assembled information matrix.
pub fn from_fim<T: Scalar>(fim: DMatrix<T>, sigma: T, rank_tolerance: T) -> Result<FimReport<T>> {
    if fim.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput("information matrix"));
    }
    if !fim.is_square() || fim.nrows() == 0 {
        return Err(Error::InvalidArgument("information matrix must be square and non-empty".into()));
    }
    let p = fim.nrows();
    let sym = (&fim + fim.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    for mut col in eigenvectors.column_iter_mut() {
        // Sign convention: largest-magnitude component positive.
        let mut best = 0;
        for k in 1..p {
            if col[k].abs() > col[best].abs() {
                best = k;
            }
        }
        if col[best] < T::zero() {
            col.neg_mut();
        }
    }
    let lmax = eigenvalues[0];
    let rank = if lmax > T::zero() {
        eigenvalues.iter().filter(|&&l| l > rank_tolerance * lmax).count()
    } else {
        0
    };
    let classification = if rank < p {
        Classification::RankDeficient
    } else {
        Classification::Identifiable
    };
    let mut report = FimReport {
        fim: sym,
        eigenvalues,
        eigenvectors,
        rank,
        classification,
        sloppiness: None,
        sigma,
        rank_tolerance,
    };
    report.sloppiness = detect_sloppiness(&report).ok();
    Ok(report)
}

/// Sensitivity at `theta` (best available method) assembled with the
/// design's noise level and replicate count.
pub fn fim_for_design<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta: &[T],
    rank_tolerance: T,
) -> Result<FimReport<T>> {
    let v = jacobian(model, design, theta)?;
    assemble_fim_weighted(&v.entries, design.sigma(), design.replicates(), rank_tolerance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalIdentifiability<T: Scalar> {
    pub classification: Classification,
    /// Eigenvectors whose eigenvalue falls below the tolerance.
    pub null_directions: Vec<DVector<T>>,
}

/// Rank-deficient iff `lambda_min / lambda_max < tolerance` or `lambda_max = 0`.
pub fn classify_local_identifiability<T: Scalar>(report: &FimReport<T>, tolerance: T) -> LocalIdentifiability<T> {
    let lmax = report.lambda_max();
    let null_directions: Vec<DVector<T>> = if lmax <= T::zero() {
        (0..report.dim()).map(|i| report.eigenvector(i)).collect()
    } else {
        (0..report.dim())
            .filter(|&i| report.eigenvalues[i] / lmax < tolerance)
            .map(|i| report.eigenvector(i))
            .collect()
    };
    LocalIdentifiability {
        classification: if null_directions.is_empty() {
            Classification::Identifiable
        } else {
            Classification::RankDeficient
        },
        null_directions,
    }
}

/// Log-linear spacing statistics with the default thresholds.
pub fn detect_sloppiness<T: Scalar>(report: &FimReport<T>) -> Result<Sloppiness> {
    detect_sloppiness_with(report, SloppinessThresholds::default())
}

pub fn detect_sloppiness_with<T: Scalar>(report: &FimReport<T>, thresholds: SloppinessThresholds) -> Result<Sloppiness> {
    let logs: Vec<f64> = report
        .eigenvalues
        .iter()
        .map(|&l| {
            let l = l.as_f64();
            if l > 0.0 {
                Ok(l.log10())
            } else {
                Err(Error::ZeroEigenvalue)
            }
        })
        .collect::<Result<_>>()?;
    let n = logs.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &y) in logs.iter().enumerate() {
        let dx = i as f64 - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = logs
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - (intercept + slope * i as f64);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Sloppiness {
        spread_decades: spread,
        slope,
        intercept,
        residual_sum_squares: rss,
        r_squared,
        sloppy: spread >= thresholds.min_spread_decades && r_squared >= thresholds.min_r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombinationVariance<T> {
    /// `a^T I^-1 a`; `pseudo_inverse` set when `I` is singular and `a`
    /// lies in its row space.
    Finite { variance: T, pseudo_inverse: bool },
    /// `a` has a component along a null direction of `I`.
    Infinite,
}

impl<T: Copy> CombinationVariance<T> {
    pub fn finite(&self) -> Option<T> {
        match *self {
            CombinationVariance::Finite { variance, .. } => Some(variance),
            CombinationVariance::Infinite => None,
        }
    }
}

/// Variance `a^T I^-1 a` of the linear combination `a^T theta_hat`.
pub fn combination_variance<T: Scalar>(report: &FimReport<T>, a: &[T]) -> Result<CombinationVariance<T>> {
    if a.len() != report.dim() {
        return Err(Error::Dimension {
            what: "combination direction",
            expected: report.dim(),
            got: a.len(),
        });
    }
    let a = DVector::from_column_slice(a);
    let norm = a.norm();
    if !(norm > T::zero()) {
        return Err(Error::InvalidArgument("combination direction must be nonzero".into()));
    }
    let coords = report.eigenvectors.transpose() * &a;
    let null_tol = T::lit(1e-8) * norm;
    let mut variance = T::zero();
    for i in 0..report.dim() {
        if i < report.rank {
            variance += coords[i] * coords[i] / report.eigenvalues[i];
        } else if coords[i].abs() > null_tol {
            return Ok(CombinationVariance::Infinite);
        }
    }
    Ok(CombinationVariance::Finite {
        variance,
        pseudo_inverse: report.rank < report.dim(),
    })
}

/// Chi-square quantile with `dof` degrees of freedom.
pub fn chi_square_quantile(dof: usize, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.inverse_cdf(level))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid<T: Scalar> {
    pub center: DVector<T>,
    /// Principal axes as columns.
    pub axes: DMatrix<T>,
    /// `sqrt(chi2_p(level) / lambda_i)` along each axis.
    pub semi_axes: Vec<T>,
    pub level: f64,
    pub quantile: f64,
}

impl<T: Scalar> Ellipsoid<T> {
    pub fn contains(&self, theta: &[T]) -> bool {
        let d = DVector::from_column_slice(theta) - &self.center;
        let proj = self.axes.transpose() * d;
        let s = proj
            .iter()
            .zip(&self.semi_axes)
            .fold(T::zero(), |acc, (&x, &r)| acc + (x / r) * (x / r));
        s <= T::one()
    }
}

/// Confidence region `{theta : (theta - center)^T I (theta - center) <= chi2_p(level)}`.
pub fn confidence_ellipsoid<T: Scalar>(report: &FimReport<T>, center: &[T], level: f64) -> Result<Ellipsoid<T>> {
    if !report.is_identifiable() {
        return Err(Error::RankDeficient);
    }
    if center.len() != report.dim() {
        return Err(Error::Dimension {
            what: "ellipsoid center",
            expected: report.dim(),
            got: center.len(),
        });
    }
    let quantile = chi_square_quantile(report.dim(), level)?;
    let q = T::lit(quantile);
    Ok(Ellipsoid {
        center: DVector::from_column_slice(center),
        axes: report.eigenvectors.clone(),
        semi_axes: report.eigenvalues.iter().map(|&l| (q / l).sqrt()).collect(),
        level,
        quantile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignCriterion {
    /// `det I`, higher is better.
    D,
    /// `trace I^-1`, lower is better.
    A,
    /// `lambda_min`, higher is better.
    E,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score<T> {
    Finite(T),
    Infinite,
}

impl<T: Copy> Score<T> {
    pub fn finite(&self) -> Option<T> {
        match *self {
            Score::Finite(v) => Some(v),
            Score::Infinite => None,
        }
    }
}

pub fn score_report<T: Scalar>(report: &FimReport<T>, criterion: DesignCriterion) -> Score<T> {
    match criterion {
        DesignCriterion::D => Score::Finite(report.fim.clone().determinant()),
        DesignCriterion::A => {
            if report.is_identifiable() {
                Score::Finite(report.eigenvalues.iter().fold(T::zero(), |acc, &l| acc + T::one() / l))
            } else {
                Score::Infinite
            }
        }
        DesignCriterion::E => Score::Finite(report.lambda_min()),
    }
}

/// Scores `design` at `theta` under `criterion`.
pub fn design_score<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta: &[T],
    criterion: DesignCriterion,
) -> Result<Score<T>> {
    let report = fim_for_design(model, design, theta, T::lit(DEFAULT_RANK_TOLERANCE))?;
    Ok(score_report(&report, criterion))
}
