//! Identifiability analysis for parametric models fitted to noisy data.
//!
//! The numerical core is generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`.
//!
//! ```
//! use identikit::model::{generate_data, lookup, Design, ModelConstants};
//! use identikit::fim::{fim_for_design, Classification, DEFAULT_RANK_TOLERANCE};
//!
//! let model = lookup::<f64>("redundant-exponential", &ModelConstants::default()).unwrap();
//! let design = Design::linspace(0.0, 2.0, 10, 0.05).unwrap();
//! let report = fim_for_design(model.as_ref(), &design, &[2.0, -0.5, 0.3], DEFAULT_RANK_TOLERANCE).unwrap();
//! assert_eq!(report.classification, Classification::RankDeficient);
//! # let _ = generate_data(model.as_ref(), &design, &[2.0, -0.5, 0.3], 0).unwrap();
//! ```

pub mod config;
pub mod error;
pub mod estimation;
pub mod fim;
pub mod format;
pub mod model;
pub mod prior;
pub mod profile;
pub mod recovery;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod sensitivity;
pub mod sobol;

pub use error::{Error, Result};
pub use model::{Model, Symmetry};
pub use scalar::Scalar;

pub type ParameterSpace = model::ParameterSpace<f64>;
pub type Design = model::Design<f64>;
pub type Dataset = model::Dataset<f64>;
pub type SensitivityMatrix = sensitivity::SensitivityMatrix<f64>;
pub type FimReport = fim::FimReport<f64>;
pub type Ellipsoid = fim::Ellipsoid<f64>;
pub type EstimateResult = estimation::EstimateResult<f64>;
pub type FitOptions = estimation::FitOptions<f64>;
pub type MultiStart = estimation::MultiStart<f64>;
pub type ProfileCurve = profile::ProfileCurve<f64>;
pub type ProfileOptions = profile::ProfileOptions<f64>;
pub type RecoveryOptions = recovery::RecoveryOptions<f64>;
