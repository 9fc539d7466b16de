//! Branching-strategy benchmark and root fractionality report.
//!
//! Duals come from one master solve over the greedy working set of the
//! unsorted instance. The sorted variant permutes both the instance and the
//! duals, so every strategy and sort mode prices the same problem.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::master::{build_and_solve_master, greedy_initial};
use crate::pricing::{
    argmax_incumbent, branch_and_bound, build_gen_lp, fractionality_stats, solve_node, BbConfig, BbNode,
    BranchingStrategy, INT_TOL,
};

pub const STATS_HEADER: [&str; 10] = [
    "strategy",
    "sorted",
    "n",
    "total_support",
    "nodes",
    "max_depth",
    "root_frac_pct",
    "root_unique",
    "lp_solves",
    "wall_ms",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub strategy: BranchingStrategy,
    pub sorted: bool,
    pub n: usize,
    pub total_support: usize,
    pub nodes: usize,
    pub max_depth: usize,
    pub root_frac_pct: f64,
    pub root_unique: usize,
    pub lp_solves: usize,
    pub wall_ms: f64,
    /// Optimal pricing value; not part of the CSV.
    #[serde(skip)]
    pub reduced_cost: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub repeats: usize,
    pub workers: usize,
    /// Record wall-clock time; when off, `wall_ms` is 0 and output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeats: 1,
            workers: 1,
            timing: true,
        }
    }
}

/// Duals of the master over the greedy working set.
pub fn pricing_duals(inst: &Instance) -> Result<Vec<f64>> {
    let (ws, _) = greedy_initial(inst);
    Ok(build_and_solve_master(inst, &ws, None)?.y)
}

/// All strategies × {unsorted, sorted} × repeats on one instance.
pub fn bench_instance(inst: &Instance, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let y = pricing_duals(inst)?;
    let (shifted, _) = inst.shift_to_positive_orthant();
    let (sorted, perm) = shifted.sort_measures_by_size();
    let y_sorted = shifted.permute_flat(&y, &perm);
    let variants = [(false, &shifted, &y), (true, &sorted, &y_sorted)];
    let mut rows = Vec::new();
    for strategy in BranchingStrategy::ALL {
        for &(is_sorted, work, duals) in &variants {
            let model = build_gen_lp(work, duals)?;
            let mut bb = BbConfig::new(strategy);
            bb.workers = cfg.workers;
            for _ in 0..cfg.repeats {
                let start = Instant::now();
                let (r, stats) = branch_and_bound(&model, &bb, argmax_incumbent(work, duals)?)?;
                let wall_ms = if cfg.timing {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                };
                rows.push(BenchRow {
                    strategy,
                    sorted: is_sorted,
                    n: work.n(),
                    total_support: work.total_support(),
                    nodes: stats.nodes_processed,
                    max_depth: stats.max_depth,
                    root_frac_pct: stats.root_fraction_pct,
                    root_unique: stats.root_unique_fractional,
                    lp_solves: stats.lp_solves,
                    wall_ms,
                    reduced_cost: r.reduced_cost,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Parse(format!("writing stats CSV: {e}"));
    w.write_record(STATS_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.sorted.to_string(),
            r.n.to_string(),
            r.total_support.to_string(),
            r.nodes.to_string(),
            r.max_depth.to_string(),
            format!("{:.4}", r.root_frac_pct),
            r.root_unique.to_string(),
            r.lp_solves.to_string(),
            format!("{:.3}", r.wall_ms),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("writing stats CSV: {e}")))?;
    Ok(())
}

pub fn csv_string(rows: &[BenchRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Median node count for one strategy and sort mode.
pub fn median_nodes(rows: &[BenchRow], strategy: BranchingStrategy, sorted: bool) -> Option<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.strategy == strategy && r.sorted == sorted)
        .map(|r| r.nodes as f64)
        .collect();
    median(&mut v)
}

/// Median nodes per strategy, one column per sort mode.
pub fn summary_table(rows: &[BenchRow]) -> String {
    let mut s = format!("{:<20} {:>12} {:>12}\n", "strategy", "unsorted", "sorted");
    for strategy in BranchingStrategy::ALL {
        let cell = |sorted| {
            median_nodes(rows, strategy, sorted)
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "-".into())
        };
        s.push_str(&format!("{:<20} {:>12} {:>12}\n", strategy.name(), cell(false), cell(true)));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FractionalityRow {
    pub n: usize,
    pub support: usize,
    pub frac_pct: f64,
    pub unique: usize,
}

impl FractionalityRow {
    pub const HEADER: &'static str = "n,support,frac_pct,unique";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.n, self.support, self.frac_pct, self.unique)
    }
}

/// Fractionality of the root relaxation for the given duals.
pub fn root_fractionality(inst: &Instance, y: &[f64]) -> Result<FractionalityRow> {
    let (shifted, _) = inst.shift_to_positive_orthant();
    let model = build_gen_lp(&shifted, y)?;
    let out = solve_node(&model, &BbNode::root(), None)?;
    let (frac_pct, unique) = fractionality_stats(&out.primal[..model.num_z1()], INT_TOL);
    Ok(FractionalityRow {
        n: inst.n(),
        support: inst.total_support(),
        frac_pct,
        unique,
    })
}

/// Greedy working set, master duals, then the root relaxation.
pub fn fractionality(inst: &Instance) -> Result<FractionalityRow> {
    root_fractionality(inst, &pricing_duals(inst)?)
}
