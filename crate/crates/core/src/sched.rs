//! Per-frame Lyapunov weights, the drift-plus-penalty objective, and the
//! model-based critic that scores candidate decisions.

use crate::config::SimConfig;
use crate::env::{frame_outcome, FrameObservation};
use crate::error::{OffloadError, Result};
use crate::resalloc::{solve_resource_allocation, OffloadDecision, ResourceAllocation};

/// Feasibility slack used when validating externally supplied allocations.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PerFrameWeights {
    /// Rate weight a_i = Q_i + V c_i.
    pub a: Vec<f64>,
    /// Energy penalty weight, equal to the virtual queue Y_i.
    pub yw: Vec<f64>,
}

pub fn per_frame_weights(obs: &FrameObservation, cfg: &SimConfig) -> PerFrameWeights {
    let a = obs
        .q
        .iter()
        .zip(&cfg.rate_weight)
        .map(|(q, c)| q + cfg.penalty_weight * c)
        .collect();
    PerFrameWeights {
        a,
        yw: obs.y.clone(),
    }
}

/// A scored candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEvaluation {
    pub x: OffloadDecision,
    pub y: ResourceAllocation,
    pub objective: f64,
    /// Position of `x` in the candidate list it was selected from.
    pub index: usize,
}

/// `G = Σ a_i r_i − Σ Y_i e_i` for an arbitrary feasible `(x, y)`.
pub fn evaluate_objective(
    x: &OffloadDecision,
    y: &ResourceAllocation,
    obs: &FrameObservation,
    cfg: &SimConfig,
) -> Result<f64> {
    y.check_feasible(x, obs, cfg, FEASIBILITY_SLACK)?;
    let w = per_frame_weights(obs, cfg);
    let out = frame_outcome(x, y, &obs.h, cfg)?;
    Ok((0..cfg.num_devices)
        .map(|i| w.a[i] * out.rate[i].min(cfg.rate_cap(obs.q[i])) - w.yw[i] * out.power[i])
        .sum())
}

/// Solve every candidate and keep the best; ties go to the lowest index.
pub fn critic_select(
    candidates: &[OffloadDecision],
    obs: &FrameObservation,
    cfg: &SimConfig,
) -> Result<CandidateEvaluation> {
    let mut best: Option<CandidateEvaluation> = None;
    for (index, x) in candidates.iter().enumerate() {
        let (y, objective) = solve_resource_allocation(x, obs, cfg)?;
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(CandidateEvaluation {
                x: x.clone(),
                y,
                objective,
                index,
            });
        }
    }
    best.ok_or(OffloadError::EmptyCandidates)
}
