//! Synthetic instances: uniform random point clouds and the symmetric
//! construction whose relaxation has a fully fractional vertex.

use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::instance::{DiscreteMeasure, Instance, LoadOptions};

/// `n,p,seed` as given on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomSpec {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl FromStr for RandomSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Generator(format!("expected n,p,seed, got `{s}`")));
        }
        let num = |x: &str| {
            x.parse::<u64>()
                .map_err(|_| Error::Generator(format!("`{x}` is not a nonnegative integer")))
        };
        let n = num(parts[0])? as usize;
        let p = num(parts[1])? as usize;
        let seed = num(parts[2])?;
        if n < 2 {
            return Err(Error::Generator("n must be at least 2".into()));
        }
        if p < 1 {
            return Err(Error::Generator("p must be at least 1".into()));
        }
        Ok(Self { n, p, seed })
    }
}

/// `n` measures of `p` points each, uniform in `[0,100]^d`, with masses from a
/// flat Dirichlet distribution and uniform weights.
pub fn random_instance(n: usize, p: usize, d: usize, seed: u64) -> Instance {
    let sizes = vec![p; n];
    random_instance_with_sizes(&sizes, d, seed)
}

pub fn random_instance_with_sizes(sizes: &[usize], d: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measures = sizes
        .iter()
        .map(|&p| {
            let points = (0..p)
                .map(|_| (0..d).map(|_| rng.random_range(0.0..100.0)).collect())
                .collect();
            let raw: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
            let total: f64 = raw.iter().sum();
            DiscreteMeasure::new(points, raw.iter().map(|v| v / total).collect())
        })
        .collect();
    Instance::new(measures, None, LoadOptions { renormalize: true })
        .expect("generated instance is valid")
}

/// `n` measures whose support sizes are drawn uniformly from `sizes`, then
/// filled as in [`random_instance_with_sizes`].
pub fn random_instance_mixed(n: usize, sizes: RangeInclusive<usize>, d: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn: Vec<usize> = (0..n).map(|_| rng.random_range(sizes.clone())).collect();
    random_instance_with_sizes(&drawn, d, rng.random())
}

/// Random instance from a parsed spec, in the plane.
pub fn from_spec(spec: RandomSpec) -> Instance {
    random_instance(spec.n, spec.p, 2, spec.seed)
}

/// `n` copies of the point set `{1 + e_k : k < p}` in `R^p` with uniform
/// masses. Every point has the same norm and every pair of distinct points
/// the same inner product, so the pricing relaxation is invariant under
/// simultaneous relabelling of the points.
pub fn symmetric_instance(n: usize, p: usize) -> Instance {
    let points: Vec<Vec<f64>> = (0..p)
        .map(|k| (0..p).map(|c| if c == k { 2.0 } else { 1.0 }).collect())
        .collect();
    let measures = (0..n)
        .map(|_| DiscreteMeasure::new(points.clone(), vec![1.0 / p as f64; p]))
        .collect();
    Instance::new(measures, None, LoadOptions { renormalize: true })
        .expect("symmetric instance is valid")
}

/// Random dual vector with one entry per support point, uniform in `[-scale, scale]`.
pub fn random_duals(inst: &Instance, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..inst.total_support())
        .map(|_| rng.random_range(-scale..scale))
        .collect()
}
