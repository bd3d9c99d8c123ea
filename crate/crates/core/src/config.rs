//! Run configuration: a TOML document with one section per analysis.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitOptions;
use crate::fim::{DesignCriterion, DEFAULT_RANK_TOLERANCE};
use crate::model::{lookup, Design, Model, ModelConstants};
use crate::prior::{Marginal, Prior};
use crate::profile::{GridSpec, ProfileOptions};
use crate::recovery::{RecoveryOptions, VerdictThresholds};
use crate::sobol::{Aggregation, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_SCREEN_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Fim,
    Profile,
    Sobol,
    Recover,
    DesignScore,
    All,
}

impl Analysis {
    pub const ALL: [Analysis; 6] = [
        Analysis::Fim,
        Analysis::Profile,
        Analysis::Sobol,
        Analysis::Recover,
        Analysis::DesignScore,
        Analysis::All,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Analysis::Fim => "fim",
            Analysis::Profile => "profile",
            Analysis::Sobol => "sobol",
            Analysis::Recover => "recover",
            Analysis::DesignScore => "design-score",
            Analysis::All => "all",
        }
    }

    pub fn includes(&self, other: Analysis) -> bool {
        *self == other || *self == Analysis::All
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Analysis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown analysis `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Overridden by the command-line subcommand.
    #[serde(default)]
    pub analysis: Option<Analysis>,
    /// Overridden by `--out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub model: ModelSection,
    pub design: DesignSection,
    #[serde(default)]
    pub fim: FimSection,
    #[serde(default)]
    pub estimation: EstimationSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub sobol: SobolSection,
    #[serde(default)]
    pub recover: RecoverSection,
    #[serde(default)]
    pub design_score: DesignScoreSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub constants: ModelConstants,
    /// Parameter at which data are simulated and local analyses evaluated.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub linspace: Option<Linspace>,
    pub sigma: f64,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FimSection {
    pub rank_tolerance: f64,
    pub level: f64,
}

impl Default for FimSection {
    fn default() -> Self {
        Self {
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSection {
    pub starts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for EstimationSection {
    fn default() -> Self {
        let f = FitOptions::<f64>::default();
        Self {
            starts: 16,
            max_iter: f.max_iter,
            grad_tol: f.grad_tol,
            step_tol: f.step_tol,
            initial_damping: f.initial_damping,
        }
    }
}

impl EstimationSection {
    pub fn fit_options(&self) -> FitOptions<f64> {
        FitOptions {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            step_tol: self.step_tol,
            initial_damping: self.initial_damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    /// Parameters to profile; all when absent.
    pub parameters: Option<Vec<usize>>,
    pub grid: GridSpec,
    pub level: f64,
    pub flat_threshold: f64,
    pub refine_iterations: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let o = ProfileOptions::<f64>::default();
        Self {
            parameters: None,
            grid: GridSpec::default(),
            level: o.level,
            flat_threshold: o.flat_threshold,
            refine_iterations: o.refine_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolSection {
    pub n: usize,
    pub aggregation: Aggregation,
    /// One marginal per parameter; uniform over the parameter box when absent.
    pub prior: Option<Vec<Marginal>>,
    pub threshold: f64,
    pub bootstrap: usize,
}

impl Default for SobolSection {
    fn default() -> Self {
        Self {
            n: 1 << 12,
            aggregation: Aggregation::default(),
            prior: None,
            threshold: DEFAULT_SCREEN_THRESHOLD,
            bootstrap: DEFAULT_BOOTSTRAP_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverSection {
    pub k_trials: usize,
    pub starts: usize,
    pub tolerance: f64,
    pub absolute_tolerance: f64,
    pub prior: Option<Vec<Marginal>>,
    pub identifiable_rate: f64,
    pub marginal_rate: f64,
}

impl Default for RecoverSection {
    fn default() -> Self {
        let o = RecoveryOptions::<f64>::default();
        Self {
            k_trials: 20,
            starts: o.starts,
            tolerance: o.tolerance,
            absolute_tolerance: o.absolute_tolerance,
            prior: None,
            identifiable_rate: o.thresholds.identifiable,
            marginal_rate: o.thresholds.marginal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateDesign {
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub linspace: Option<Linspace>,
    /// Defaults to the base design's value.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignScoreSection {
    pub criteria: Vec<DesignCriterion>,
    /// Alternatives scored alongside the base design.
    pub candidates: Vec<CandidateDesign>,
}

impl Default for DesignScoreSection {
    fn default() -> Self {
        Self {
            criteria: vec![DesignCriterion::D, DesignCriterion::A, DesignCriterion::E],
            candidates: Vec::new(),
        }
    }
}

/// A validation failure tied to a config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is serializable")
    }

    pub fn build_model(&self) -> Result<Box<dyn Model<f64>>> {
        lookup(&self.model.name, &self.model.constants)
    }

    pub fn build_design(&self) -> Result<Design<f64>> {
        let times = times_from(self.design.times.as_ref(), self.design.linspace.as_ref())?;
        Design::with_replicates(times, self.design.sigma, self.design.replicates)
    }

    pub fn build_candidate(&self, c: &CandidateDesign) -> Result<Design<f64>> {
        let times = times_from(c.times.as_ref(), c.linspace.as_ref())?;
        Design::with_replicates(
            times,
            c.sigma.unwrap_or(self.design.sigma),
            c.replicates.unwrap_or(self.design.replicates),
        )
    }

    pub fn sobol_prior(&self, model: &dyn Model<f64>) -> Result<Prior> {
        match &self.sobol.prior {
            Some(m) => Prior::new(m.clone(), self.seed),
            None => Ok(Prior::uniform_over(model.space(), self.seed)),
        }
    }

    pub fn recover_prior(&self, model: &dyn Model<f64>) -> Result<Prior> {
        match &self.recover.prior {
            Some(m) => Prior::new(m.clone(), self.seed),
            None => Ok(Prior::uniform_over(model.space(), self.seed)),
        }
    }

    pub fn profile_options(&self) -> ProfileOptions<f64> {
        ProfileOptions {
            fit: self.estimation.fit_options(),
            level: self.profile.level,
            flat_threshold: self.profile.flat_threshold,
            refine_iterations: self.profile.refine_iterations,
            cold_starts: None,
        }
    }

    pub fn recovery_options(&self) -> RecoveryOptions<f64> {
        RecoveryOptions {
            starts: self.recover.starts,
            tolerance: self.recover.tolerance,
            absolute_tolerance: self.recover.absolute_tolerance,
            thresholds: VerdictThresholds {
                identifiable: self.recover.identifiable_rate,
                marginal: self.recover.marginal_rate,
            },
            fit: self.estimation.fit_options(),
            ..RecoveryOptions::default()
        }
    }
}

fn times_from(times: Option<&Vec<f64>>, linspace: Option<&Linspace>) -> Result<Vec<f64>> {
    match (times, linspace) {
        (Some(t), None) => Ok(t.clone()),
        (None, Some(l)) => Ok(Design::linspace(l.start, l.end, l.n, 1.0)?.times().to_vec()),
        (Some(_), Some(_)) => Err(Error::InvalidDesign("give either times or linspace, not both".into())),
        (None, None) => Err(Error::InvalidDesign("missing times or linspace".into())),
    }
}

/// Every problem that would stop [`crate::report::run`]; empty when the
/// config is runnable.
pub fn validate(config: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(Diagnostic {
            field: field.to_string(),
            message,
        })
    };
    let unit = |x: f64| x > 0.0 && x < 1.0;

    let model = match config.build_model() {
        Ok(m) => Some(m),
        Err(Error::ModelNotFound(name)) => {
            push("model.name", format!("unknown model `{name}`; see --list-models"));
            None
        }
        Err(e) => {
            push("model.constants", e.to_string());
            None
        }
    };
    if let Some(m) = &model {
        if let Err(e) = m.space().check(&config.model.theta) {
            push("model.theta", e.to_string());
        }
    }

    let d = &config.design;
    if !(d.sigma > 0.0 && d.sigma.is_finite()) {
        push("design.sigma", format!("must be positive and finite, got {}", d.sigma));
    }
    if d.replicates == 0 {
        push("design.replicates", "must be at least 1".into());
    }
    let design = match times_from(d.times.as_ref(), d.linspace.as_ref()) {
        Ok(times) => match Design::new(times, 1.0) {
            Ok(design) => Some(design),
            Err(e) => {
                push("design.times", e.to_string());
                None
            }
        },
        Err(e) => {
            push("design.times", e.to_string());
            None
        }
    };
    if let (Some(design), Some(rows)) = (&design, &config.model.constants.matrix) {
        if rows.len() != design.len() {
            push(
                "model.constants.matrix",
                format!("has {} rows but the design has {} time points", rows.len(), design.len()),
            );
        }
    }

    let f = &config.fim;
    if !unit(f.rank_tolerance) {
        push("fim.rank_tolerance", format!("must lie in (0, 1), got {}", f.rank_tolerance));
    }
    if !unit(f.level) {
        push("fim.level", format!("must lie in (0, 1), got {}", f.level));
    }

    let e = &config.estimation;
    if e.starts == 0 {
        push("estimation.starts", "must be at least 1".into());
    }
    if e.max_iter == 0 {
        push("estimation.max_iter", "must be at least 1".into());
    }
    for (name, v) in [
        ("estimation.grad_tol", e.grad_tol),
        ("estimation.step_tol", e.step_tol),
        ("estimation.initial_damping", e.initial_damping),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            push(name, format!("must be positive, got {v}"));
        }
    }

    let p = &config.profile;
    if !unit(p.level) {
        push("profile.level", format!("must lie in (0, 1), got {}", p.level));
    }
    if !(p.flat_threshold >= 0.0) {
        push("profile.flat_threshold", format!("must be non-negative, got {}", p.flat_threshold));
    }
    if let Some(m) = &model {
        let dim = m.space().dim();
        let indices: Vec<usize> = p.parameters.clone().unwrap_or_else(|| (0..dim).collect());
        if let Some(bad) = indices.iter().find(|&&i| i >= dim) {
            push("profile.parameters", format!("index {bad} out of range for {dim} parameters"));
        }
        let values: Option<Vec<f64>> = match &p.grid {
            GridSpec::Default { points, width_sd } => {
                if *points < 3 || !(*width_sd > 0.0) {
                    push("profile.grid", "default grid needs points >= 3 and width_sd > 0".into());
                }
                None
            }
            GridSpec::Range {
                lower,
                upper,
                points,
                log,
            } => {
                if !(lower < upper) || *points < 2 || (*log && *lower <= 0.0) {
                    push("profile.grid", format!("invalid range [{lower}, {upper}] with {points} points"));
                }
                Some(vec![*lower, *upper])
            }
            GridSpec::Values { values } => {
                if values.is_empty() {
                    push("profile.grid", "no grid values".into());
                }
                Some(values.clone())
            }
        };
        if let Some(values) = values {
            for &i in indices.iter().filter(|&&i| i < dim) {
                let (lo, hi) = m.space().bounds(i);
                if let Some(v) = values.iter().find(|&&v| !(v >= lo && v <= hi)) {
                    push(
                        "profile.grid",
                        format!("value {v} lies outside the slice [{lo}, {hi}] of parameter {i}"),
                    );
                }
            }
        }
    }

    let s = &config.sobol;
    if !s.n.is_power_of_two() || s.n < 1 << 10 {
        push("sobol.n", format!("must be a power of two no smaller than 1024, got {}", s.n));
    }
    if s.bootstrap < 2 {
        push("sobol.bootstrap", "needs at least 2 resamples".into());
    }
    if !(s.threshold >= 0.0) {
        push("sobol.threshold", format!("must be non-negative, got {}", s.threshold));
    }
    if let Some(m) = &model {
        if let Some(e) = config.sobol_prior(m.as_ref()).and_then(|pr| pr.check_against(m.space())).err() {
            push("sobol.prior", e.to_string());
        }
    }

    let r = &config.recover;
    if r.k_trials == 0 {
        push("recover.k_trials", "must be at least 1".into());
    }
    if r.starts == 0 {
        push("recover.starts", "must be at least 1".into());
    }
    if !(r.tolerance > 0.0) {
        push("recover.tolerance", format!("must be positive, got {}", r.tolerance));
    }
    if !(r.absolute_tolerance > 0.0) {
        push("recover.absolute_tolerance", format!("must be positive, got {}", r.absolute_tolerance));
    }
    if !(unit(r.marginal_rate) && r.marginal_rate <= r.identifiable_rate && r.identifiable_rate <= 1.0) {
        push(
            "recover.identifiable_rate",
            "rates must satisfy 0 < marginal_rate <= identifiable_rate <= 1".into(),
        );
    }
    if let Some(m) = &model {
        if let Some(e) = config.recover_prior(m.as_ref()).and_then(|pr| pr.check_against(m.space())).err() {
            push("recover.prior", e.to_string());
        }
    }

    let ds = &config.design_score;
    if ds.criteria.is_empty() {
        push("design_score.criteria", "list at least one of D, A, E".into());
    }
    for (k, c) in ds.candidates.iter().enumerate() {
        if let Err(e) = config.build_candidate(c) {
            push(&format!("design_score.candidates[{k}]"), e.to_string());
        }
    }
    out
}
