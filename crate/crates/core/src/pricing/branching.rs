//! Branching variable selection and fractionality measurement.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Distance from 0 or 1 below which a selection value counts as integral.
pub const INT_TOL: f64 = 1e-6;
/// Resolution at which fractional values are considered equal.
pub const BUCKET: f64 = 1e-7;
const CLOSEST_TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingStrategy {
    IndexOrder,
    ClosestToInteger,
    MostRepeated,
}

impl BranchingStrategy {
    pub const ALL: [BranchingStrategy; 3] = [
        BranchingStrategy::IndexOrder,
        BranchingStrategy::ClosestToInteger,
        BranchingStrategy::MostRepeated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BranchingStrategy::IndexOrder => "index_order",
            BranchingStrategy::ClosestToInteger => "closest_to_integer",
            BranchingStrategy::MostRepeated => "most_repeated",
        }
    }
}

impl fmt::Display for BranchingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BranchingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BranchingStrategy::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown branching strategy `{s}`")))
    }
}

pub fn is_fractional(v: f64, tol: f64) -> bool {
    v > tol && v < 1.0 - tol
}

fn bucket(v: f64) -> i64 {
    (v / BUCKET).round() as i64
}

/// Flat index of the selection variable to branch on.
pub fn select_branch_variable(z1: &[f64], strategy: BranchingStrategy, tol: f64) -> Result<usize> {
    let frac = z1.iter().enumerate().filter(|(_, &v)| is_fractional(v, tol));
    let chosen = match strategy {
        BranchingStrategy::IndexOrder => frac.map(|(j, _)| j).next(),
        BranchingStrategy::ClosestToInteger => {
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in frac {
                let d = v.min(1.0 - v);
                if best.is_none_or(|(_, bd)| d < bd - CLOSEST_TIE) {
                    best = Some((j, d));
                }
            }
            best.map(|(j, _)| j)
        }
        BranchingStrategy::MostRepeated => {
            // bucket -> (count, first index)
            let mut counts: HashMap<i64, (usize, usize)> = HashMap::new();
            for (j, &v) in frac {
                counts.entry(bucket(v)).or_insert((0, j)).0 += 1;
            }
            counts
                .into_values()
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                .map(|(_, first)| first)
        }
    };
    chosen.ok_or(Error::NoFractional)
}

/// Percentage of fractional entries and the number of distinct fractional
/// values at [`BUCKET`] resolution.
pub fn fractionality_stats(z1: &[f64], tol: f64) -> (f64, usize) {
    if z1.is_empty() {
        return (0.0, 0);
    }
    let frac: Vec<f64> = z1.iter().copied().filter(|&v| is_fractional(v, tol)).collect();
    let mut buckets: Vec<i64> = frac.iter().map(|&v| bucket(v)).collect();
    buckets.sort_unstable();
    buckets.dedup();
    (100.0 * frac.len() as f64 / z1.len() as f64, buckets.len())
}
