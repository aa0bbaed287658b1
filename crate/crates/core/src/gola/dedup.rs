use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::density::{GaussianComponent, UnnormalizedTarget};
use crate::error::Result;
use crate::mathkit::{chi_square_survival, mahalanobis_distance};

use super::{laplace_at_mode, LocalMinimum};

/// Decision taken for one candidate minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupRecord {
    pub candidate: usize,
    /// Smallest chi-square survival against the accepted components
    /// (1 when nothing had been accepted yet).
    pub min_p_value: f64,
    /// Largest survival; the candidate is a duplicate when this reaches `t`.
    pub max_p_value: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub components: Vec<GaussianComponent>,
    /// Indices into the candidate list of the accepted minima.
    pub accepted: Vec<usize>,
    pub log: Vec<DedupRecord>,
}

/// Greedy Mahalanobis screen over candidates sorted best first.
///
/// A candidate duplicates accepted component `k` when the chi-square
/// survival of its squared Mahalanobis distance (dof = dimension) is at least
/// `t`; it becomes a new component only if it duplicates none of them.
pub fn dedup_modes(
    candidates: &[LocalMinimum],
    target: &UnnormalizedTarget,
    t: f64,
) -> Result<DedupOutcome> {
    let dof = target.dim() as u32;
    let mut out = DedupOutcome { components: Vec::new(), accepted: Vec::new(), log: Vec::new() };
    for (i, cand) in candidates.iter().enumerate() {
        let z = DVector::from_column_slice(&cand.location);
        let mut min_p = 1.0_f64;
        let mut max_p = 0.0_f64;
        for comp in &out.components {
            let dm = mahalanobis_distance(&z, comp.mean(), comp.chol())?;
            let p = chi_square_survival(dm * dm, dof);
            min_p = min_p.min(p);
            max_p = max_p.max(p);
        }
        if out.components.is_empty() {
            max_p = 0.0;
        }
        let accepted = max_p < t;
        if accepted {
            out.components.push(laplace_at_mode(target, &cand.location)?);
            out.accepted.push(i);
        }
        out.log.push(DedupRecord { candidate: i, min_p_value: min_p, max_p_value: max_p, accepted });
    }
    Ok(out)
}
