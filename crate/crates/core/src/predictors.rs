//! Cost predictors `M_t`.

use serde::{Deserialize, Serialize};

use crate::amdp::{CostTable, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorKind {
    /// `M_t ≡ 0`.
    Zero,
    /// Oracle access to the true cost, `M_t = c_t`.
    Perfect,
    /// Last observed cost per pair, wiped every `reset_period` episodes.
    Latest { reset_period: Option<u64> },
}

impl PredictorKind {
    pub fn label(&self) -> String {
        match self {
            PredictorKind::Zero => "zero".into(),
            PredictorKind::Perfect => "perfect".into(),
            PredictorKind::Latest { reset_period: None } => "latest".into(),
            PredictorKind::Latest {
                reset_period: Some(p),
            } => format!("latest-{p}"),
        }
    }
}

/// A predictor together with the episode its table predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    kind: PredictorKind,
    table: CostTable,
    episode: u64,
}

impl PredictorState {
    /// Predictor for episode 1. The perfect predictor needs `c_1`.
    pub fn new(kind: PredictorKind, zero: CostTable, first_cost: Option<&CostTable>) -> Result<Self> {
        if let PredictorKind::Latest {
            reset_period: Some(0),
        } = kind
        {
            return Err(Error::InvalidParameter("reset period must be positive".into()));
        }
        let table = match kind {
            PredictorKind::Perfect => first_cost.ok_or(Error::MissingOracle)?.clone(),
            _ => zero,
        };
        Ok(Self {
            kind,
            table,
            episode: 1,
        })
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    /// Episode whose cost the current table predicts.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Current `M_t`.
    pub fn predict(&self) -> &CostTable {
        &self.table
    }

    /// Produces `M_{t+1}` from this episode's trajectory.
    ///
    /// `next_cost` is `c_{t+1}` and is only read by the perfect predictor.
    pub fn update(&self, trajectory: &Trajectory, next_cost: Option<&CostTable>) -> Result<Self> {
        let episode = self.episode + 1;
        let table = match self.kind {
            PredictorKind::Zero => self.table.clone(),
            PredictorKind::Perfect => next_cost.ok_or(Error::MissingOracle)?.clone(),
            PredictorKind::Latest { reset_period } => {
                let mut t = self.table.clone();
                if matches!(reset_period, Some(p) if episode % p == 0) {
                    t.values_mut().fill(0.0);
                } else {
                    for s in &trajectory.steps {
                        t.set(s.state, s.action, s.cost);
                    }
                }
                t
            }
        };
        Ok(Self {
            kind: self.kind,
            table,
            episode,
        })
    }
}

/// Audit of the optimistic-prediction assumption `M ≤ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimismAudit {
    /// `max (M − c)⁺` over all pairs.
    pub max_violation: f64,
    /// `Σ (c − M)` with unit weights.
    pub weighted_gap: f64,
}

pub fn optimism_violation(predictor: &CostTable, cost: &CostTable) -> OptimismAudit {
    let mut max_violation = 0.0_f64;
    let mut weighted_gap = 0.0;
    for (&m, &c) in predictor.values().iter().zip(cost.values()) {
        max_violation = max_violation.max(m - c);
        weighted_gap += c - m;
    }
    OptimismAudit {
        max_violation,
        weighted_gap,
    }
}
