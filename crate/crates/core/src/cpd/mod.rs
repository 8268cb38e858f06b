//! Canonical polyadic decomposition engines.
//!
//! [`als_fit`] and [`als_fit_regularized`] are iterative block least squares;
//! [`vs_fit`] is the closed-form solver that exploits the Vandermonde delay
//! factor. [`match_components`] aligns an estimate with ground truth for
//! evaluation.

mod als;
mod matching;
mod vandermonde;

use std::io::Write;

pub use als::{als_fit, als_fit_regularized};
pub use matching::{assign_max, match_components, ComponentMatch};
pub use vandermonde::vs_fit;

use crate::error::{Error, Result};
use crate::tensor::FactorTriple;

#[derive(Debug, Clone, PartialEq)]
pub struct AlsOptions {
    pub max_sweeps: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    /// Ridge weight on the factor energies; 0 gives plain ALS.
    pub mu: f64,
    /// Rank used by the regularized solver (an overestimate of the true rank).
    pub rank_overestimate: Option<usize>,
    /// Components with energy below this fraction of the largest are pruned
    /// after a regularized fit.
    pub prune_threshold: f64,
    /// Seed for the random fallback initialization.
    pub seed: u64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self { max_sweeps: 500, tol: 1e-8, mu: 0.0, rank_overestimate: None, prune_threshold: 1e-2, seed: 0 }
    }
}

impl AlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidParameter("mu must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CpdResult {
    pub factors: FactorTriple,
    /// Objective after each sweep (a single entry for closed-form fits).
    pub trace: Vec<f64>,
    pub converged: bool,
    pub effective_rank: usize,
    /// A ridge term was needed for at least one singular least-squares step.
    pub ridge_used: bool,
}

impl CpdResult {
    /// Writes the objective trace as CSV (`sweep,objective`).
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        write_trace_csv(&self.trace, out)
    }
}

/// Objective trace as CSV with a `sweep,objective` header, sweeps 1-based.
pub fn write_trace_csv<W: Write>(trace: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep", "objective"])?;
    for (k, v) in trace.iter().enumerate() {
        w.write_record([(k + 1).to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}
