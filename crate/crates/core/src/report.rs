//! Runs the analyses selected by a [`RunConfig`] and writes report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{validate, Analysis, Diagnostic, RunConfig};
use crate::error::{Error, Result};
use crate::estimation::{multi_start_fit, EstimateResult, Termination};
use crate::fim::{
    assemble_fim_weighted, classify_local_identifiability, confidence_ellipsoid, score_report, DesignCriterion,
    FimSummary,
};
use crate::model::{generate_data, Dataset, Design, IdentifiabilityLabel, Model};
use crate::profile::{profile_parameter, ProfileSummary};
use crate::recovery::{global_recovery, RecoveryReport};
use crate::sensitivity::{jacobian, SensitivityMethod};
use crate::sobol::{screen_unidentifiable, sobol_indices_with, SobolReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Diagnostic>),
    #[error("output directory {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("{analysis} failed: {source}")]
    Analysis { analysis: &'static str, source: Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) | RunError::Output { .. } => EXIT_VALIDATION,
            RunError::Analysis { .. } => EXIT_ANALYSIS,
        }
    }
}

fn failed(analysis: &'static str) -> impl Fn(Error) -> RunError {
    move |source| RunError::Analysis { analysis, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub parameters: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub ordering: Vec<(usize, usize)>,
    pub label: Option<IdentifiabilityLabel>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSummary {
    pub level: f64,
    pub quantile: f64,
    pub semi_axes: Vec<f64>,
    /// Principal axes, one vector per semi-axis.
    pub axes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimOutput {
    pub theta: Vec<f64>,
    pub sensitivity_method: SensitivityMethod,
    /// Columns computed with one-sided differences near a bound.
    pub one_sided_columns: Vec<usize>,
    #[serde(flatten)]
    pub summary: FimSummary,
    pub null_directions: Vec<Vec<f64>>,
    pub ellipsoid: Option<EllipsoidSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub sigma2_hat: Option<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub starts: usize,
    pub failed_starts: usize,
    pub clusters: Vec<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutput {
    #[serde(flatten)]
    pub summary: ProfileSummary,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolOutput {
    #[serde(flatten)]
    pub report: SobolReport,
    pub screen_threshold: f64,
    /// Parameters with both aggregate indices at or below the threshold.
    pub screened: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub criterion: DesignCriterion,
    /// `None` for an infinite A-score.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignScoreEntry {
    /// 0 is the base design; `k + 1` is candidate `k`.
    pub design: usize,
    pub times: Vec<f64>,
    pub sigma: f64,
    pub replicates: usize,
    pub classification: String,
    pub scores: Vec<CriterionValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRanking {
    pub criterion: DesignCriterion,
    /// Design indices, best first.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignScoreOutput {
    pub designs: Vec<DesignScoreEntry>,
    pub rankings: Vec<DesignRanking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
    pub analysis: Analysis,
    pub seed: u64,
    pub model: ModelInfo,
    pub design: Design<f64>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fim: Option<FimOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<ProfileOutput>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sobol: Option<SobolOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design_score: Option<DesignScoreOutput>,
}

fn to_vecs(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn fim_output(config: &RunConfig, model: &dyn Model<f64>, design: &Design<f64>) -> Result<FimOutput> {
    let theta = &config.model.theta;
    let v = jacobian(model, design, theta)?;
    let report = assemble_fim_weighted(&v.entries, design.sigma(), design.replicates(), config.fim.rank_tolerance)?;
    let local = classify_local_identifiability(&report, config.fim.rank_tolerance);
    let ellipsoid = if report.is_identifiable() {
        let e = confidence_ellipsoid(&report, theta, config.fim.level)?;
        Some(EllipsoidSummary {
            level: e.level,
            quantile: e.quantile,
            semi_axes: e.semi_axes,
            axes: to_vecs(&e.axes),
        })
    } else {
        None
    };
    Ok(FimOutput {
        theta: theta.clone(),
        sensitivity_method: v.method,
        one_sided_columns: v.one_sided,
        summary: report.summary(),
        null_directions: local.null_directions.iter().map(|d| d.iter().copied().collect()).collect(),
        ellipsoid,
    })
}

pub fn fit_dataset(
    config: &RunConfig,
    model: &dyn Model<f64>,
    data: &Dataset<f64>,
) -> Result<(EstimateResult<f64>, FitOutput)> {
    let ms = multi_start_fit(
        model,
        data,
        config.estimation.starts,
        config.seed,
        None,
        &config.estimation.fit_options(),
    );
    let best = ms
        .best()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("every start failed".into()))?;
    let out = FitOutput {
        theta: best.theta.clone(),
        objective: best.objective,
        sigma2_hat: best.sigma2_hat,
        converged: best.converged,
        termination: best.termination,
        iterations: best.iterations,
        starts: ms.outcomes.len(),
        failed_starts: ms.outcomes.iter().filter(|o| o.result.is_err()).count(),
        clusters: ms
            .clusters
            .iter()
            .map(|c| ClusterSummary {
                theta: c.theta.clone(),
                objective: c.objective,
                members: c.members.len(),
            })
            .collect(),
    };
    Ok((best, out))
}

pub fn design_score_output(config: &RunConfig, model: &dyn Model<f64>, base: &Design<f64>) -> Result<DesignScoreOutput> {
    let mut designs = vec![base.clone()];
    for c in &config.design_score.candidates {
        designs.push(config.build_candidate(c)?);
    }
    let criteria = &config.design_score.criteria;
    let entries: Vec<DesignScoreEntry> = designs
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let v = jacobian(model, d, &config.model.theta)?;
            let report = assemble_fim_weighted(&v.entries, d.sigma(), d.replicates(), config.fim.rank_tolerance)?;
            Ok(DesignScoreEntry {
                design: k,
                times: d.times().to_vec(),
                sigma: d.sigma(),
                replicates: d.replicates(),
                classification: report.classification.as_str().to_string(),
                scores: criteria
                    .iter()
                    .map(|&c| CriterionValue {
                        criterion: c,
                        value: score_report(&report, c).finite(),
                    })
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    let rankings = criteria
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            // Lower-is-better scores are negated so larger is always better.
            let key = |e: &DesignScoreEntry| match (c, e.scores[ci].value) {
                (DesignCriterion::A, Some(v)) => -v,
                (DesignCriterion::A, None) => f64::NEG_INFINITY,
                (_, v) => v.unwrap_or(f64::NEG_INFINITY),
            };
            let mut order: Vec<usize> = (0..entries.len()).collect();
            order.sort_by(|&a, &b| key(&entries[b]).total_cmp(&key(&entries[a])).then(a.cmp(&b)));
            DesignRanking { criterion: c, order }
        })
        .collect();
    Ok(DesignScoreOutput {
        designs: entries,
        rankings,
    })
}

/// Validates `config`, runs `analysis` and writes `summary.json` plus the
/// per-analysis files into `out`.
pub fn run(config: &RunConfig, analysis: Analysis, out: &Path) -> std::result::Result<Summary, RunError> {
    let diagnostics = validate(config);
    if !diagnostics.is_empty() {
        return Err(RunError::Validation(diagnostics));
    }
    let io_err = |source: std::io::Error| RunError::Output {
        path: out.to_path_buf(),
        source,
    };
    fs::create_dir_all(out).map_err(io_err)?;
    let write = |name: &str, f: &dyn Fn(fs::File) -> Result<()>| -> std::result::Result<(), RunError> {
        let path = out.join(name);
        let file = fs::File::create(&path).map_err(io_err)?;
        f(file).map_err(|e| match e {
            Error::Io(source) => io_err(source),
            other => RunError::Analysis {
                analysis: "report",
                source: other,
            },
        })
    };

    let model = config.build_model().map_err(failed("model"))?;
    let model = model.as_ref();
    let design = config.build_design().map_err(failed("design"))?;
    let data = generate_data(model, &design, &config.model.theta, config.seed).map_err(failed("dataset"))?;
    let space = model.space();
    let mut files = vec!["dataset.csv".to_string(), "dataset.json".to_string()];
    data.save(&out.join("dataset.csv"), &out.join("dataset.json")).map_err(|e| match e {
        Error::Io(source) => io_err(source),
        other => RunError::Analysis {
            analysis: "dataset",
            source: other,
        },
    })?;

    let mut summary = Summary {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        analysis,
        seed: config.seed,
        model: ModelInfo {
            name: model.name().to_string(),
            parameters: space.names().to_vec(),
            lower: space.lower().to_vec(),
            upper: space.upper().to_vec(),
            ordering: space.ordering().to_vec(),
            label: model.label(),
            theta: config.model.theta.clone(),
        },
        design: design.clone(),
        files: Vec::new(),
        fim: None,
        fit: None,
        profile: None,
        sobol: None,
        recovery: None,
        design_score: None,
    };

    if analysis.includes(Analysis::Fim) {
        summary.fim = Some(fim_output(config, model, &design).map_err(failed("fim"))?);
    }
    if analysis.includes(Analysis::Profile) {
        let (best, fit) = fit_dataset(config, model, &data).map_err(failed("estimation"))?;
        summary.fit = Some(fit);
        let indices = config
            .profile
            .parameters
            .clone()
            .unwrap_or_else(|| (0..space.dim()).collect());
        let options = config.profile_options();
        let curves = indices
            .par_iter()
            .map(|&i| profile_parameter(model, &data, &best, i, &config.profile.grid, &options))
            .collect::<Result<Vec<_>>>()
            .map_err(failed("profile"))?;
        let mut outputs = Vec::new();
        for c in &curves {
            let name = format!("profile_{}.csv", c.parameter);
            write(&name, &|f| c.write_csv(f))?;
            files.push(name.clone());
            outputs.push(ProfileOutput {
                summary: c.summary(),
                file: name,
            });
        }
        summary.profile = Some(outputs);
    }
    if analysis.includes(Analysis::Sobol) {
        let prior = config.sobol_prior(model).map_err(failed("sobol"))?;
        let report = sobol_indices_with(
            model,
            &design,
            &prior,
            config.sobol.n,
            config.sobol.aggregation,
            config.sobol.bootstrap,
        )
        .map_err(failed("sobol"))?;
        write("sobol.csv", &|f| report.write_csv(f))?;
        files.push("sobol.csv".into());
        summary.sobol = Some(SobolOutput {
            screened: screen_unidentifiable(&report, config.sobol.threshold),
            screen_threshold: config.sobol.threshold,
            report,
        });
    }
    if analysis.includes(Analysis::Recover) {
        let prior = config.recover_prior(model).map_err(failed("recover"))?;
        let report = global_recovery(
            model,
            &design,
            config.recover.k_trials,
            &prior,
            config.seed,
            &config.recovery_options(),
        )
        .map_err(failed("recover"))?;
        write("recovery.csv", &|f| report.write_csv(f))?;
        files.push("recovery.csv".into());
        summary.recovery = Some(report);
    }
    if analysis.includes(Analysis::DesignScore) {
        summary.design_score = Some(design_score_output(config, model, &design).map_err(failed("design-score"))?);
    }

    files.push("summary.json".into());
    summary.files = files;
    write("summary.json", &|f| {
        serde_json::to_writer_pretty(f, &summary)?;
        Ok(())
    })?;
    Ok(summary)
}

/// Registry listing for `--list-models`.
pub fn list_models() -> String {
    let mut out = String::from("name                   params  label                        box\n");
    for m in crate::model::builtin_registry::<f64>() {
        let label = m.label().map_or_else(|| "-".to_string(), |l| l.to_string());
        let space = m.space();
        let bounds: Vec<String> = (0..space.dim())
            .map(|j| {
                let (lo, hi) = space.bounds(j);
                format!("{} in [{lo}, {hi}]", space.names()[j])
            })
            .collect();
        out.push_str(&format!(
            "{:<22} {:>6}  {:<28} {}\n",
            m.name(),
            space.dim(),
            label,
            bounds.join(", ")
        ));
    }
    out
}
