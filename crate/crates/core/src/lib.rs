//! Exact discrete Wasserstein barycenters by column generation.

pub mod bench;
pub mod colgen;
pub mod diagnostics;
pub mod error;
pub mod generate;
pub mod instance;
pub mod lp;
pub mod master;
pub mod pricing;

pub use colgen::{run, PricingBackend, RunReport, SolverConfig, Termination};
pub use error::{Error, Result};
pub use instance::{Combination, DiscreteMeasure, Instance, InstanceFormat, LoadOptions};
pub use master::{combination_cost, Barycenter, MasterSolution, WorkingSet};
pub use pricing::{BranchingStrategy, PricingResult, RunStats};
