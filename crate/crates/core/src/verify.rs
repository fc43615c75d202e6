//! Table comparisons: exact, within a tolerance, and against sample counts.
//!
//! Total-variation distance is computed per settings tuple and the largest
//! value is reported.

use num_traits::Signed;
use serde::Serialize;

use crate::distribution::{OutcomeCounts, OutcomeDistribution, OutcomeTable};
use crate::error::{Error, Result};
use crate::{Probability, Rational};

/// Default entrywise tolerance for quantum quantities.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Per-cell acceptance width in standard deviations.
pub const SIGMA_MULTIPLIER: f64 = 3.0;
/// Smallest sample total [`statistical_match`] accepts.
pub const MIN_SAMPLES: u64 = 100;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub max_abs_error: f64,
    /// Label of the cell with the largest error (or largest excess over its
    /// allowance, for statistical checks).
    pub worst_cell: Option<String>,
    pub tv_distance: f64,
    pub n_samples: Option<u64>,
    /// Tolerance used, or the largest per-cell `3σ` for statistical checks.
    pub sigma_bound: f64,
    pub failing_cells: usize,
    pub pass: bool,
}

fn check_shape<A, B>(a: &OutcomeTable<A>, b: &OutcomeTable<B>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::IndexSetMismatch(format!(
            "alphabets {:?} vs {:?}",
            a.alphabets(),
            b.alphabets()
        )));
    }
    if a.settings_count() == 0 || a.is_empty() {
        return Err(Error::IndexSetMismatch("no settings in common".into()));
    }
    Ok(())
}

/// Passes iff every entry is the same rational.
pub fn compare_exact(
    a: &OutcomeDistribution<Rational>,
    b: &OutcomeDistribution<Rational>,
) -> Result<ComparisonReport> {
    check_shape(a, b)?;
    let mut worst: Option<(Rational, usize, usize)> = None;
    let mut failing = 0;
    let mut tv = Rational::default();
    for s in 0..a.settings_count() {
        let mut block_tv = Rational::default();
        for (o, (x, y)) in a.block(s).iter().zip(b.block(s)).enumerate() {
            let diff = (x - y).abs();
            if diff != Rational::default() {
                failing += 1;
                if worst.as_ref().is_none_or(|w| diff > w.0) {
                    worst = Some((diff.clone(), s, o));
                }
            }
            block_tv += diff;
        }
        block_tv /= Rational::from_integer(2.into());
        if block_tv > tv {
            tv = block_tv;
        }
    }
    Ok(ComparisonReport {
        max_abs_error: worst.as_ref().map_or(0.0, |w| w.0.to_f64()),
        worst_cell: worst.map(|(_, s, o)| a.cell_label(s, o)),
        tv_distance: tv.to_f64(),
        n_samples: None,
        sigma_bound: 0.0,
        failing_cells: failing,
        pass: failing == 0,
    })
}

/// Passes iff `|a - b| <= tol` in every cell.
pub fn compare_float<P: Probability, Q: Probability>(
    a: &OutcomeDistribution<P>,
    b: &OutcomeDistribution<Q>,
    tol: f64,
) -> Result<ComparisonReport> {
    check_shape(a, b)?;
    let mut max_err = 0.0f64;
    let mut worst = None;
    let mut failing = 0;
    let mut tv = 0.0f64;
    for s in 0..a.settings_count() {
        let mut block_tv = 0.0;
        for (o, (x, y)) in a.block(s).iter().zip(b.block(s)).enumerate() {
            let diff = (x.to_f64() - y.to_f64()).abs();
            if diff > tol || diff.is_nan() {
                failing += 1;
            }
            if diff > max_err || worst.is_none() {
                max_err = max_err.max(diff);
                worst = Some((s, o));
            }
            block_tv += diff;
        }
        tv = tv.max(block_tv / 2.0);
    }
    Ok(ComparisonReport {
        max_abs_error: max_err,
        worst_cell: worst.map(|(s, o)| a.cell_label(s, o)),
        tv_distance: tv,
        n_samples: None,
        sigma_bound: tol,
        failing_cells: failing,
        pass: failing == 0,
    })
}

/// Checks empirical frequencies against `target`, cell by cell, with a
/// `3σ` normal-approximation band, `σ = sqrt(p(1-p)/n)` from the target
/// probability and the number of draws for that settings tuple. Tuples
/// with no draws are skipped. No multiple-comparison correction is
/// applied; `failing_cells` tells isolated flukes from systematic misfits.
pub fn statistical_match<P: Probability>(
    counts: &OutcomeCounts,
    target: &OutcomeDistribution<P>,
) -> Result<ComparisonReport> {
    check_shape(counts, target)?;
    let total = counts.total();
    if total == 0 {
        return Err(Error::InsufficientSamples("no samples".into()));
    }
    if total < MIN_SAMPLES {
        return Err(Error::InsufficientSamples(format!("{total} < {MIN_SAMPLES}")));
    }
    let mut max_err = 0.0f64;
    let mut worst: Option<(f64, usize, usize)> = None;
    let mut failing = 0;
    let mut tv = 0.0f64;
    let mut sigma_bound = 0.0f64;
    for s in 0..counts.settings_count() {
        let n = counts.block_total(s);
        if n == 0 {
            continue;
        }
        let mut block_tv = 0.0;
        for (o, (c, p)) in counts.block(s).iter().zip(target.block(s)).enumerate() {
            let p = p.to_f64();
            let freq = *c as f64 / n as f64;
            let diff = (freq - p).abs();
            let band = SIGMA_MULTIPLIER * (p * (1.0 - p) / n as f64).max(0.0).sqrt();
            sigma_bound = sigma_bound.max(band);
            if diff > band {
                failing += 1;
            }
            let excess = diff - band;
            if worst.as_ref().is_none_or(|w| excess > w.0) {
                worst = Some((excess, s, o));
            }
            max_err = max_err.max(diff);
            block_tv += diff;
        }
        tv = tv.max(block_tv / 2.0);
    }
    Ok(ComparisonReport {
        max_abs_error: max_err,
        worst_cell: worst.map(|(_, s, o)| counts.cell_label(s, o)),
        tv_distance: tv,
        n_samples: Some(total),
        sigma_bound,
        failing_cells: failing,
        pass: failing == 0,
    })
}
