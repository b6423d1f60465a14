//! Consistency: the mean over bugs of the fraction of trials that triggered each bug.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsistencyError {
    #[error("empty bug set")]
    NoBugs,
    #[error("no trials")]
    NoTrials,
    #[error("bug triggered in {count} of {trials} trials")]
    CountExceedsTrials { count: u64, trials: u64 },
}

/// `(1/|B|) * sum_b c_b / T`, evaluated as the single division `sum c_b / (|B| T)`
/// so the result is the correctly rounded value of the exact fraction.
///
/// `counts` holds `c_b` for the bugs that were triggered; bugs of `B` missing
/// from it count as zero.
pub fn consistency(counts: &[u64], trials: u64, n_bugs: u64) -> Result<f64, ConsistencyError> {
    if n_bugs == 0 || counts.len() as u64 > n_bugs {
        return Err(ConsistencyError::NoBugs);
    }
    if trials == 0 {
        return Err(ConsistencyError::NoTrials);
    }
    if let Some(&c) = counts.iter().find(|c| **c > trials) {
        return Err(ConsistencyError::CountExceedsTrials { count: c, trials });
    }
    let num: u128 = counts.iter().map(|c| *c as u128).sum();
    let den = n_bugs as u128 * trials as u128;
    Ok(num as f64 / den as f64)
}
