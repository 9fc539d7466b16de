//! Column generation driver: greedy start, master/pricing loop and mapping of
//! the result back to the caller's instance.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Combination, Instance};
use crate::lp::Basis;
use crate::master::{build_and_solve_master, extract_barycenter, greedy_initial, weighted_mean, Barycenter, WorkingSet};
use crate::pricing::{
    argmax_incumbent, branch_and_bound, build_gen_lp, enumerate_best, enumerate_best_parallel, BbConfig,
    BranchingStrategy, PricingResult, RunStats,
};

/// Largest search space for which the optional certificate enumerates.
pub const CERTIFY_LIMIT: u128 = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingBackend {
    Classic,
    Mip,
}

impl fmt::Display for PricingBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PricingBackend::Classic => "classic",
            PricingBackend::Mip => "mip",
        })
    }
}

impl FromStr for PricingBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(PricingBackend::Classic),
            "mip" => Ok(PricingBackend::Mip),
            _ => Err(Error::Parse(format!("unknown pricing backend `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub pricing: PricingBackend,
    pub strategy: BranchingStrategy,
    pub sort_measures: bool,
    pub reduced_cost_tol: f64,
    pub max_iterations: Option<usize>,
    pub workers: usize,
    /// After an optimal stop, enumerate once to confirm no improving column.
    pub certify: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pricing: PricingBackend::Mip,
            strategy: BranchingStrategy::MostRepeated,
            sort_measures: false,
            reduced_cost_tol: 1e-7,
            max_iterations: None,
            workers: 1,
            certify: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Optimal,
    IterationCap,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub objective: f64,
    pub reduced_cost: f64,
    /// Priced combination, 1-based, in the caller's measure order.
    pub combination: Vec<usize>,
    pub pricing_ms: f64,
    pub stats: Option<RunStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub iterations: usize,
    pub final_cost: f64,
    pub terminated: Termination,
    pub initial_columns: usize,
    pub final_columns: usize,
    /// Maximum reduced cost over all combinations at the final duals, when
    /// certification ran.
    pub certificate: Option<f64>,
    pub per_iteration: Vec<IterationRecord>,
}

/// One pricing call on a preprocessed instance.
pub fn price(
    inst: &Instance,
    y: &[f64],
    ws: &WorkingSet,
    cfg: &SolverConfig,
) -> Result<(PricingResult, Option<RunStats>)> {
    match cfg.pricing {
        PricingBackend::Classic => {
            let r = if cfg.workers > 1 {
                enumerate_best_parallel(inst, y, Some(ws.members()), cfg.workers)
            } else {
                enumerate_best(inst, y, Some(ws.members()))
            };
            match r {
                Ok(r) => Ok((r, None)),
                Err(Error::AllExcluded) => Ok((
                    PricingResult {
                        combination: ws.combinations()[0].clone(),
                        reduced_cost: f64::NEG_INFINITY,
                    },
                    None,
                )),
                Err(e) => Err(e),
            }
        }
        PricingBackend::Mip => {
            let model = build_gen_lp(inst, y)?;
            let mut bb = BbConfig::new(cfg.strategy);
            bb.workers = cfg.workers;
            let (r, stats) = branch_and_bound(&model, &bb, argmax_incumbent(inst, y)?)?;
            Ok((r, Some(stats)))
        }
    }
}

struct Prepared {
    inst: Instance,
    perm: Vec<usize>,
}

impl Prepared {
    fn new(inst: &Instance, sort: bool) -> Self {
        let (sorted, perm) = if sort {
            inst.sort_measures_by_size()
        } else {
            (inst.clone(), (0..inst.n()).collect())
        };
        let (shifted, _) = sorted.shift_to_positive_orthant();
        Self { inst: shifted, perm }
    }

    fn to_original(&self, s: &Combination) -> Combination {
        let mut out = vec![0; s.0.len()];
        for (new, &orig) in self.perm.iter().enumerate() {
            out[orig] = s.0[new];
        }
        Combination(out)
    }
}

/// Runs column generation to optimality or the iteration cap.
pub fn run(inst: &Instance, cfg: &SolverConfig) -> Result<(Barycenter, RunReport)> {
    if !(cfg.reduced_cost_tol > 0.0) {
        return Err(Error::Parse("reduced-cost tolerance must be positive".into()));
    }
    let prep = Prepared::new(inst, cfg.sort_measures);
    let work = &prep.inst;
    let (mut ws, _) = greedy_initial(work);
    let initial_columns = ws.len();
    let mut basis: Option<Basis> = None;
    let mut records = Vec::new();
    let mut iteration = 0;
    let (terminated, sol) = loop {
        iteration += 1;
        let ctx = |source: Error| Error::Iteration {
            iteration,
            source: Box::new(source),
        };
        let sol = build_and_solve_master(work, &ws, basis.as_ref()).map_err(ctx)?;
        if cfg.max_iterations.is_some_and(|cap| iteration > cap) {
            break (Termination::IterationCap, sol);
        }
        let start = Instant::now();
        let (best, stats) = price(work, &sol.y, &ws, cfg).map_err(ctx)?;
        let pricing_ms = start.elapsed().as_secs_f64() * 1e3;
        debug!(
            "iteration {iteration}: objective {} reduced cost {} columns {}",
            sol.objective,
            best.reduced_cost,
            ws.len()
        );
        records.push(IterationRecord {
            objective: sol.objective,
            reduced_cost: best.reduced_cost,
            combination: prep.to_original(&best.combination).one_based(),
            pricing_ms,
            stats,
        });
        if best.reduced_cost <= cfg.reduced_cost_tol {
            break (Termination::Optimal, sol);
        }
        if ws.contains(&best.combination) {
            return Err(ctx(Error::InconsistentPricing {
                combination: prep.to_original(&best.combination).one_based(),
                reduced_cost: best.reduced_cost,
            }));
        }
        ws.add_column(work, best.combination).map_err(ctx)?;
        let mut b = sol.basis;
        b.push_column();
        basis = Some(b);
    };

    let certificate = if cfg.certify && terminated == Termination::Optimal && work.num_combinations() <= CERTIFY_LIMIT {
        Some(enumerate_best_parallel(work, &sol.y, None, cfg.workers)?.reduced_cost)
    } else {
        None
    };

    let mut bary = extract_barycenter(work, &ws, &sol);
    for entry in &mut bary.support {
        for src in &mut entry.sources {
            src.0 = prep.to_original(&src.0);
        }
        entry.point = weighted_mean(inst, &entry.sources[0].0);
    }
    info!(
        "column generation finished after {iteration} iterations with cost {} ({:?})",
        sol.objective, terminated
    );
    let report = RunReport {
        iterations: iteration,
        final_cost: sol.objective,
        terminated,
        initial_columns,
        final_columns: ws.len(),
        certificate,
        per_iteration: records,
    };
    Ok((bary, report))
}
