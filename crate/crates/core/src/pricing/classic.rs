//! Exhaustive pricing over all combinations in odometer order.
//!
//! Prefix values `Σ_{i<=l} (y_{i k_i} − Σ_{j<i} λ_j λ_i ||x_{j k_j} − x_{i k_i}||²)`
//! are cached per digit, so advancing the last digit costs `O(n)`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::instance::{Combination, Instance};
use crate::master::reduced_cost;

use super::{check_duals, PricingResult};

struct Tables {
    sizes: Vec<usize>,
    duals: Vec<Vec<f64>>,
    /// `pair[i][j]` for `j < i`, laid out `[k_j * |P_i| + k_i]`.
    pair: Vec<Vec<Vec<f64>>>,
}

impl Tables {
    fn new(inst: &Instance, y: &[f64]) -> Self {
        let sizes = inst.sizes();
        let off = inst.offsets();
        let lambda = inst.weights();
        let duals = (0..inst.n()).map(|i| y[off[i]..off[i + 1]].to_vec()).collect();
        let pair = (0..inst.n())
            .map(|i| {
                (0..i)
                    .map(|j| {
                        let mut t = Vec::with_capacity(sizes[j] * sizes[i]);
                        for kj in 0..sizes[j] {
                            for ki in 0..sizes[i] {
                                let d2: f64 = inst
                                    .point(j, kj)
                                    .iter()
                                    .zip(inst.point(i, ki))
                                    .map(|(a, b)| (a - b) * (a - b))
                                    .sum();
                                t.push(lambda[j] * lambda[i] * d2);
                            }
                        }
                        t
                    })
                    .collect()
            })
            .collect();
        Self { sizes, duals, pair }
    }

    fn prefix(&self, digits: &[usize], prefix: &mut [f64], from: usize) {
        for i in from..digits.len() {
            let ki = digits[i];
            let mut v = if i == 0 { 0.0 } else { prefix[i - 1] };
            v += self.duals[i][ki];
            for j in 0..i {
                v -= self.pair[i][j][digits[j] * self.sizes[i] + ki];
            }
            prefix[i] = v;
        }
    }

    fn decode(&self, mut index: u64, digits: &mut [usize]) {
        for i in (0..digits.len()).rev() {
            let p = self.sizes[i] as u64;
            digits[i] = (index % p) as usize;
            index /= p;
        }
    }

    /// Best `(value, index, digits)` over `[start, end)`, first index on ties.
    fn scan(
        &self,
        start: u64,
        end: u64,
        exclude: Option<&HashSet<Combination>>,
    ) -> Option<(f64, u64, Vec<usize>)> {
        let n = self.sizes.len();
        let mut digits = vec![0; n];
        let mut prefix = vec![0.0; n];
        let mut probe = Combination(vec![0; n]);
        self.decode(start, &mut digits);
        self.prefix(&digits, &mut prefix, 0);
        let mut best: Option<(f64, u64, Vec<usize>)> = None;
        let mut index = start;
        while index < end {
            let v = prefix[n - 1];
            if best.as_ref().is_none_or(|b| v > b.0) {
                let excluded = exclude.is_some_and(|ex| {
                    probe.0.copy_from_slice(&digits);
                    ex.contains(&probe)
                });
                if !excluded {
                    best = Some((v, index, digits.clone()));
                }
            }
            index += 1;
            if index == end {
                break;
            }
            let mut i = n - 1;
            loop {
                digits[i] += 1;
                if digits[i] < self.sizes[i] {
                    break;
                }
                digits[i] = 0;
                i -= 1;
            }
            self.prefix(&digits, &mut prefix, i);
        }
        best
    }
}

fn total(inst: &Instance) -> Result<u64> {
    u64::try_from(inst.num_combinations())
        .map_err(|_| Error::InvalidInstance("too many combinations to enumerate".into()))
}

fn finish(inst: &Instance, y: &[f64], best: Option<(f64, u64, Vec<usize>)>) -> Result<PricingResult> {
    let (_, _, digits) = best.ok_or(Error::AllExcluded)?;
    let combination = Combination(digits);
    let reduced_cost = reduced_cost(inst, y, &combination);
    Ok(PricingResult {
        combination,
        reduced_cost,
    })
}

/// Maximum reduced cost over every combination not in `exclude`; ties go
/// to the lexicographically smallest index tuple.
pub fn enumerate_best(
    inst: &Instance,
    y: &[f64],
    exclude: Option<&HashSet<Combination>>,
) -> Result<PricingResult> {
    check_duals(inst, y)?;
    let tables = Tables::new(inst, y);
    let best = tables.scan(0, total(inst)?, exclude);
    finish(inst, y, best)
}

/// [`enumerate_best`] with the index range split across `workers` threads.
/// The result does not depend on the worker count.
pub fn enumerate_best_parallel(
    inst: &Instance,
    y: &[f64],
    exclude: Option<&HashSet<Combination>>,
    workers: usize,
) -> Result<PricingResult> {
    check_duals(inst, y)?;
    let total = total(inst)?;
    let workers = (workers.max(1) as u64).min(total.max(1));
    if workers == 1 {
        return enumerate_best(inst, y, exclude);
    }
    let tables = Tables::new(inst, y);
    let chunk = total.div_ceil(workers);
    let partial: Vec<Option<(f64, u64, Vec<usize>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let tables = &tables;
                let start = (w * chunk).min(total);
                let end = ((w + 1) * chunk).min(total);
                scope.spawn(move || if start < end { tables.scan(start, end, exclude) } else { None })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pricing worker panicked"))
            .collect()
    });
    let best = partial.into_iter().flatten().fold(None, |acc: Option<(f64, u64, Vec<usize>)>, c| {
        match acc {
            Some(a) if a.0 > c.0 || (a.0 == c.0 && a.1 < c.1) => Some(a),
            _ => Some(c),
        }
    });
    finish(inst, y, best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_duals, random_instance};
    use crate::instance::{DiscreteMeasure, LoadOptions};

    fn line_pair() -> Instance {
        let m = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![4.0, 0.0]], vec![0.5, 0.5]);
        Instance::new(vec![m.clone(), m], None, LoadOptions::default()).unwrap()
    }

    #[test]
    fn zero_duals_tie_breaks_lexicographically() {
        let r = enumerate_best(&line_pair(), &[0.0; 4], None).unwrap();
        assert_eq!(r.combination.one_based(), vec![1, 1]);
        assert_eq!(r.reduced_cost, 0.0);
    }

    #[test]
    fn single_positive_dual() {
        let r = enumerate_best(&line_pair(), &[5.0, 0.0, 0.0, 0.0], None).unwrap();
        assert_eq!(r.combination.one_based(), vec![1, 1]);
        assert_eq!(r.reduced_cost, 5.0);
    }

    #[test]
    fn exclusion_and_exhaustion() {
        let inst = line_pair();
        let mut ex = HashSet::new();
        ex.insert(Combination(vec![0, 0]));
        let r = enumerate_best(&inst, &[0.0; 4], Some(&ex)).unwrap();
        assert_eq!(r.combination.one_based(), vec![2, 2]);
        for c in [[0, 1], [1, 0], [1, 1]] {
            ex.insert(Combination(c.to_vec()));
        }
        assert!(matches!(enumerate_best(&inst, &[0.0; 4], Some(&ex)), Err(Error::AllExcluded)));
        assert!(matches!(enumerate_best(&inst, &[0.0; 3], None), Err(Error::DualLength { .. })));
    }

    #[test]
    fn incremental_matches_direct_evaluation() {
        let inst = random_instance(4, 3, 2, 11);
        let y = random_duals(&inst, 3000.0, 5);
        let r = enumerate_best(&inst, &y, None).unwrap();
        let mut best = f64::NEG_INFINITY;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        best = best.max(reduced_cost(&inst, &y, &Combination(vec![a, b, c, d])));
                    }
                }
            }
        }
        assert!((r.reduced_cost - best).abs() < 1e-9);
    }

    #[test]
    fn parallel_is_worker_independent() {
        let inst = random_instance(5, 3, 2, 3);
        let y = random_duals(&inst, 2000.0, 9);
        let serial = enumerate_best(&inst, &y, None).unwrap();
        for w in [2, 3, 7, 500] {
            assert_eq!(enumerate_best_parallel(&inst, &y, None, w).unwrap(), serial);
        }
    }
}
