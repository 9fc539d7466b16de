//! Pricing: find the combination of maximum reduced cost `y^T A_h − c_h`.

pub mod bb;
pub mod branching;
pub mod classic;
pub mod genlp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Combination, Instance};
use crate::master::reduced_cost;

pub use bb::{branch_and_bound, solve_node, BbConfig, BbNode, RunStats};
pub use branching::{fractionality_stats, select_branch_variable, BranchingStrategy, INT_TOL};
pub use classic::{enumerate_best, enumerate_best_parallel};
pub use genlp::{build_gen_lp, GenLpModel, Var};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricingResult {
    pub combination: Combination,
    pub reduced_cost: f64,
}

pub(crate) fn check_duals(inst: &Instance, y: &[f64]) -> Result<()> {
    if y.len() != inst.total_support() {
        return Err(Error::DualLength {
            got: y.len(),
            expected: inst.total_support(),
        });
    }
    Ok(())
}

/// The combination taking the largest dual in every measure (first index on
/// ties) together with its reduced cost. A valid lower bound for pricing.
pub fn argmax_incumbent(inst: &Instance, y: &[f64]) -> Result<PricingResult> {
    check_duals(inst, y)?;
    let off = inst.offsets();
    let combination = Combination(
        inst.sizes()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                (0..p).fold(0, |best, k| {
                    if y[off[i] + k] > y[off[i] + best] {
                        k
                    } else {
                        best
                    }
                })
            })
            .collect(),
    );
    let reduced_cost = reduced_cost(inst, y, &combination);
    Ok(PricingResult {
        combination,
        reduced_cost,
    })
}
