//! Seeded random streams and Latin-hypercube sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ParameterSpace;
use crate::scalar::Scalar;

/// Independent purposes draw from separate ChaCha streams of the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Noise = 0,
    Starts = 1,
    Prior = 2,
    Bootstrap = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Child seed number `index` of `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `k` Latin-hypercube points over the box of `space`. Points violating
/// ordering constraints are redrawn uniformly (up to 1000 tries each).
pub fn latin_hypercube<T: Scalar, R: Rng>(rng: &mut R, space: &ParameterSpace<T>, k: usize) -> Vec<Vec<T>> {
    let p = space.dim();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut strata: Vec<usize> = (0..k).collect();
        // Fisher–Yates
        for i in (1..k).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        columns.push(
            strata
                .into_iter()
                .map(|s| (s as f64 + rng.random::<f64>()) / k as f64)
                .collect(),
        );
    }
    let to_point = |u: &dyn Fn(usize) -> f64| -> Vec<T> {
        (0..p)
            .map(|j| {
                let (lo, hi) = space.bounds(j);
                lo + (hi - lo) * T::lit(u(j))
            })
            .collect()
    };
    (0..k)
        .map(|i| {
            let mut point = to_point(&|j| columns[j][i]);
            let mut tries = 0;
            while !space.contains(&point) && tries < 1000 {
                let u: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
                point = to_point(&|j| u[j]);
                tries += 1;
            }
            point
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin_hypercube_fills_every_stratum() {
        let space = ParameterSpace::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let mut rng = stream_rng(7, Stream::Starts);
        let pts = latin_hypercube(&mut rng, &space, 16);
        for j in 0..2 {
            let (lo, hi) = space.bounds(j);
            let mut seen = [false; 16];
            for p in &pts {
                let u: f64 = (p[j] - lo) / (hi - lo);
                seen[(u * 16.0).floor() as usize] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn ordered_space_points_are_members() {
        let space = ParameterSpace::new(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_ordering(0, 1)
            .unwrap();
        let mut rng = stream_rng(1, Stream::Starts);
        assert!(latin_hypercube(&mut rng, &space, 32).iter().all(|p| space.contains(p)));
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(0, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
    }
}
