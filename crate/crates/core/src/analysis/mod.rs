//! Monte Carlo strong-error estimation, order fitting, and empirical checks
//! of the second-moment and Wick–Milstein gap bounds.
//!
//! Paths are independent work units keyed by their index. They are grouped
//! into fixed blocks of [`PATH_BLOCK`] consecutive indices; each block is
//! accumulated sequentially and blocks are merged in index order, so every
//! statistic is bit-identical for any worker count and any partition of the
//! path range along block boundaries.

mod bounds;
mod convergence;
mod regression;

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

pub use bounds::{
    check_gap_rate, check_second_moment, second_moment_bound, second_moment_bound_dt,
    theoretical_gap_bound, theoretical_gap_bound_dt, BoundEntry, BoundQuantity, BoundReport,
    BoundViolation, GapReport,
};
pub use convergence::{
    check_exactness, convergence_study, strong_error, ConvergenceReport, ErrorPoint,
    ExactnessPoint, ExactnessReport, EXACT_ERROR_FLOOR,
};
pub use regression::{fit_order, fit_power_law, PowerLawFit};

/// Number of consecutive path indices reduced sequentially as one unit.
pub const PATH_BLOCK: u64 = 256;

/// Share of aborted paths above which a run fails.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Shared Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub n_paths: usize,
    pub seed: u64,
    pub horizon: f64,
}

impl MonteCarlo {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            horizon: 1.0,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(invalid(format!(
                "need at least 2 paths (got {})",
                self.n_paths
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon must be positive and finite (got {})",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Running count, mean, centred sum of squares and maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    max: f64,
}

impl Default for Moments {
    fn default() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        if x > self.max || x.is_nan() {
            self.max = x;
        }
    }

    /// Combines two disjoint samples (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
        if other.max > self.max || other.max.is_nan() {
            self.max = other.max;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Statistics of one block of consecutive paths.
#[derive(Debug, Clone, PartialEq)]
struct BlockTally {
    observables: Vec<Moments>,
    attempted: usize,
    failed: usize,
    first_failure: Option<(u64, Error)>,
}

/// Per-observable statistics over a range of paths, plus failure counts.
///
/// Block partials are kept in path order and only folded when a statistic
/// is read, so tallies of adjacent ranges can be concatenated with
/// [`Tally::merge`] without changing a single bit of the result.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    width: usize,
    blocks: Vec<BlockTally>,
}

impl Tally {
    /// Appends a tally covering the path range right after this one.
    pub fn merge(&mut self, other: Tally) {
        assert_eq!(self.width, other.width, "tally widths differ");
        self.blocks.extend(other.blocks);
    }

    pub fn observables(&self) -> Vec<Moments> {
        let mut total = vec![Moments::default(); self.width];
        for block in &self.blocks {
            for (t, b) in total.iter_mut().zip(&block.observables) {
                t.merge(b);
            }
        }
        total
    }

    pub fn attempted(&self) -> usize {
        self.blocks.iter().map(|b| b.attempted).sum()
    }

    pub fn failed(&self) -> usize {
        self.blocks.iter().map(|b| b.failed).sum()
    }

    /// The lowest-indexed failed path and its error.
    pub fn first_failure(&self) -> Option<&(u64, Error)> {
        self.blocks.iter().find_map(|b| b.first_failure.as_ref())
    }

    /// Fails when more than [`MAX_FAILURE_RATE`] of the paths aborted.
    pub fn check_failures(&self) -> Result<()> {
        let (failed, attempted) = (self.failed(), self.attempted());
        if failed as f64 > MAX_FAILURE_RATE * attempted as f64 {
            let (first_path, first_error) = self
                .first_failure()
                .cloned()
                .expect("failures recorded with their first cause");
            return Err(Error::TooManyFailures {
                failed,
                total: attempted,
                first_path,
                first_error: Box::new(first_error),
            });
        }
        Ok(())
    }
}

/// Evaluates `path_fn` on every path index in `paths` and accumulates the
/// `width` observables it writes. A path whose closure errors is counted as
/// failed and contributes nothing.
pub fn tally_paths<F>(paths: Range<u64>, width: usize, path_fn: F) -> Tally
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    if paths.is_empty() {
        return Tally {
            width,
            blocks: Vec::new(),
        };
    }
    let first_block = paths.start / PATH_BLOCK;
    let last_block = (paths.end - 1) / PATH_BLOCK;

    let blocks = (first_block..=last_block)
        .into_par_iter()
        .map(|block| {
            let lo = (block * PATH_BLOCK).max(paths.start);
            let hi = ((block + 1) * PATH_BLOCK).min(paths.end);
            let mut tally = BlockTally {
                observables: vec![Moments::default(); width],
                attempted: 0,
                failed: 0,
                first_failure: None,
            };
            let mut scratch = vec![0.0; width];
            for p in lo..hi {
                tally.attempted += 1;
                match path_fn(p, &mut scratch) {
                    Ok(()) => {
                        for (m, &x) in tally.observables.iter_mut().zip(&scratch) {
                            m.push(x);
                        }
                    }
                    Err(e) => {
                        tally.failed += 1;
                        if tally.first_failure.is_none() {
                            tally.first_failure = Some((p, e));
                        }
                    }
                }
            }
            tally
        })
        .collect();
    Tally { width, blocks }
}
