use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{evaluate, Design, Model};
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

/// Observations on a design, stored time-major (all replicates of `t_0`,
/// then `t_1`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    design: Design<T>,
    observations: Vec<T>,
    generating: Option<Vec<T>>,
    seed: Option<u64>,
}

/// JSON sidecar written next to `dataset.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub times: Vec<f64>,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: Option<u64>,
    pub generating_parameter: Option<Vec<f64>>,
}

impl<T: Scalar> Dataset<T> {
    /// Wraps measured data. `observations` is time-major with length
    /// `n * replicates`.
    pub fn from_observations(design: Design<T>, observations: Vec<T>) -> Result<Self> {
        if observations.len() != design.observation_count() {
            return Err(Error::Dimension {
                what: "observations",
                expected: design.observation_count(),
                got: observations.len(),
            });
        }
        Ok(Self {
            design,
            observations,
            generating: None,
            seed: None,
        })
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn observations(&self) -> &[T] {
        &self.observations
    }

    pub fn observation(&self, time_index: usize, replicate: usize) -> T {
        self.observations[time_index * self.design.replicates() + replicate]
    }

    pub fn generating_parameter(&self) -> Option<&[T]> {
        self.generating.as_deref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Repeats per-time values once per replicate, matching the
    /// observation layout.
    pub fn expand(&self, per_time: &[T]) -> Vec<T> {
        let r = self.design.replicates();
        per_time.iter().flat_map(|&v| std::iter::repeat_n(v, r)).collect()
    }

    pub fn metadata(&self) -> DatasetMetadata {
        DatasetMetadata {
            times: self.design.times().iter().map(|t| t.as_f64()).collect(),
            sigma: self.design.sigma().as_f64(),
            replicates: self.design.replicates(),
            seed: self.seed,
            generating_parameter: self
                .generating
                .as_ref()
                .map(|g| g.iter().map(|v| v.as_f64()).collect()),
        }
    }

    /// CSV with header `time,replicate,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "replicate", "value"])?;
        let r = self.design.replicates();
        for (i, &t) in self.design.times().iter().enumerate() {
            for k in 0..r {
                w.write_record([
                    sig17(t.as_f64()),
                    k.to_string(),
                    sig17(self.observation(i, k).as_f64()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, metadata_path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(csv_path)?))?;
        let mut f = BufWriter::new(File::create(metadata_path)?);
        serde_json::to_writer_pretty(&mut f, &self.metadata())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Reads back a dataset written by [`Dataset::save`].
    pub fn load(csv_path: &Path, metadata_path: &Path) -> Result<Self> {
        let meta: DatasetMetadata = serde_json::from_reader(File::open(metadata_path)?)?;
        Self::from_parts(File::open(csv_path)?, meta)
    }

    pub fn from_parts<R: std::io::Read>(csv_source: R, meta: DatasetMetadata) -> Result<Self> {
        let design = Design::with_replicates(
            meta.times.iter().map(|&t| T::lit(t)).collect(),
            T::lit(meta.sigma),
            meta.replicates,
        )?;
        let mut obs = vec![T::zero(); design.observation_count()];
        let mut filled = vec![false; obs.len()];
        let mut reader = csv::Reader::from_reader(csv_source);
        for rec in reader.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("malformed dataset row {rec:?}")))
            };
            let (t, rep, v) = (parse(0)?, parse(1)? as usize, parse(2)?);
            let i = meta
                .times
                .iter()
                .position(|&x| x == t)
                .ok_or_else(|| Error::InvalidArgument(format!("time {t} not in metadata design")))?;
            if rep >= meta.replicates {
                return Err(Error::InvalidArgument(format!("replicate {rep} out of range")));
            }
            obs[i * meta.replicates + rep] = T::lit(v);
            filled[i * meta.replicates + rep] = true;
        }
        if filled.iter().any(|f| !f) {
            return Err(Error::InvalidArgument("dataset CSV is missing observations".into()));
        }
        let mut ds = Self::from_observations(design, obs)?;
        ds.seed = meta.seed;
        ds.generating = meta
            .generating_parameter
            .map(|g| g.into_iter().map(T::lit).collect());
        Ok(ds)
    }
}

/// Synthetic data `y = f(theta*) + sigma * z`, one standard-normal draw per
/// observation in time-major order from the seeded noise stream.
pub fn generate_data<T: Scalar>(
    model: &dyn Model<T>,
    design: &Design<T>,
    theta_true: &[T],
    seed: u64,
) -> Result<Dataset<T>> {
    let f = evaluate(model, design, theta_true)?;
    let mut rng = stream_rng(seed, Stream::Noise);
    let sigma = design.sigma();
    let r = design.replicates();
    let mut obs = Vec::with_capacity(design.observation_count());
    for &fi in &f {
        for _ in 0..r {
            let z: f64 = StandardNormal.sample(&mut rng);
            obs.push(fi + sigma * T::lit(z));
        }
    }
    let mut ds = Dataset::from_observations(design.clone(), obs)?;
    ds.generating = Some(theta_true.to_vec());
    ds.seed = Some(seed);
    Ok(ds)
}
