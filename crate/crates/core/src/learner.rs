//! The episode loop of the policy-search family, one learner per run.
//!
//! A [`Learner`] exposes its current policy, then consumes the episode's
//! trajectory. Under bandit feedback it only ever sees the trajectory; the
//! full cost table is handed over only in full-information mode.

use serde::{Deserialize, Serialize};

use crate::amdp::{induce_policy, uniform_occupancy, CostTable, LayeredAmdp, OccupancyMeasure, Policy, Table, Trajectory};
use crate::anytime::{horizon_free_diameter, psi_increment_bandit, psi_increment_full, AnytimeMode, PhaseState};
use crate::error::{Error, Result};
use crate::estimators::{opix_estimate, uob_opix_estimate};
use crate::omd::{omd_step, DualPotential, UpdateConfig};
use crate::predictors::{PredictorKind, PredictorState};
use crate::unknown_transition::TransitionStats;

/// Pseudo-count mass per row of the kernel used for projection when the
/// transitions are unknown.
pub const KERNEL_PRIOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Oreps,
    OrepsIx,
    OrepsOpix,
    OrepsOpixAnytime,
    OrepsOpixUnknownTransition,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Oreps => "oreps",
            Algorithm::OrepsIx => "oreps-ix",
            Algorithm::OrepsOpix => "oreps-opix",
            Algorithm::OrepsOpixAnytime => "oreps-opix-anytime",
            Algorithm::OrepsOpixUnknownTransition => "oreps-opix-unknown-transition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Full,
    Bandit,
}

/// Fully resolved learner parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub algorithm: Algorithm,
    pub feedback: Feedback,
    pub predictor: PredictorKind,
    /// Fixed step size, or `η₀` for the anytime variant.
    pub eta: f64,
    /// Fixed exploration; ignored by the anytime variant.
    pub gamma: f64,
    pub kappa: u32,
    pub delta: f64,
    pub dual_tol: f64,
    pub dual_max_iters: usize,
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        match self.algorithm {
            Algorithm::Oreps | Algorithm::OrepsIx if self.predictor != PredictorKind::Zero => {
                bad(format!("{} has no predictor", self.algorithm.name()))
            }
            Algorithm::Oreps if self.gamma != 0.0 => bad("oreps uses gamma = 0".into()),
            Algorithm::OrepsIx if self.feedback == Feedback::Bandit && self.gamma == 0.0 => {
                bad("oreps-ix needs gamma > 0".into())
            }
            Algorithm::OrepsOpixAnytime if self.kappa != 2 && self.kappa != 3 => {
                bad(format!("kappa must be 2 or 3, got {}", self.kappa))
            }
            Algorithm::OrepsOpixUnknownTransition if !(self.delta > 0.0 && self.delta < 1.0) => {
                bad(format!("delta must lie in (0,1), got {}", self.delta))
            }
            _ => Ok(()),
        }
    }
}

/// What the learner did with one episode.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    /// `‖ĉ_t‖_∞` of the estimate (the cost itself under full information).
    pub estimate_norm: f64,
    pub dual_iterations: usize,
    pub collapsed: usize,
    pub clamped: usize,
    /// Phase, step size and exploration used for this episode's update.
    pub phase: u32,
    pub eta: f64,
    pub gamma: f64,
    /// Accumulated `Ψ` of the current phase after this episode.
    pub psi: f64,
    /// Upper occupancy bound `u_t` used as the estimator denominator.
    pub upper_bound: Option<Table>,
}

#[derive(Debug, Clone)]
pub struct Learner {
    mdp: LayeredAmdp,
    spec: LearnerSpec,
    rho: OccupancyMeasure,
    potential: Option<DualPotential>,
    predictor: PredictorState,
    phase: Option<PhaseState>,
    stats: Option<TransitionStats>,
}

impl Learner {
    /// `first_cost` is `c_1`, read only by the perfect predictor. Under
    /// unknown transitions only the layer structure of `mdp` is used.
    pub fn new(mdp: &LayeredAmdp, spec: LearnerSpec, horizon: u64, first_cost: Option<&CostTable>) -> Result<Self> {
        spec.validate()?;
        let predictor = PredictorState::new(spec.predictor, mdp.zero_table(), first_cost)?;
        let phase = match spec.algorithm {
            Algorithm::OrepsOpixAnytime => {
                let mode = match spec.feedback {
                    Feedback::Bandit => AnytimeMode::Bandit { kappa: spec.kappa },
                    Feedback::Full => AnytimeMode::FullInformation,
                };
                let d0 = horizon_free_diameter(mdp.layer_count(), mdp.n_states(), mdp.n_actions())?;
                Some(PhaseState::new(spec.eta, mode, d0)?)
            }
            _ => None,
        };
        let stats = match spec.algorithm {
            Algorithm::OrepsOpixUnknownTransition => Some(TransitionStats::new(mdp, horizon, spec.delta)?),
            _ => None,
        };
        Ok(Self {
            mdp: mdp.clone(),
            spec,
            rho: uniform_occupancy(mdp),
            potential: None,
            predictor,
            phase,
            stats,
        })
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    /// Current `ρ_t`.
    pub fn occupancy(&self) -> &OccupancyMeasure {
        &self.rho
    }

    /// `π_t` induced by `ρ_t`.
    pub fn policy(&self) -> Policy {
        induce_policy(&self.rho)
    }

    /// Current `M_t`.
    pub fn prediction(&self) -> &CostTable {
        self.predictor.predict()
    }

    pub fn phase(&self) -> Option<&PhaseState> {
        self.phase.as_ref()
    }

    pub fn transition_stats(&self) -> Option<&TransitionStats> {
        self.stats.as_ref()
    }

    /// Consumes episode `t`.
    ///
    /// `full_cost` must be `c_t` under full information and `None` under
    /// bandit feedback. `oracle_next` is `c_{t+1}` for the perfect predictor.
    pub fn learn(
        &mut self,
        t: u64,
        trajectory: &Trajectory,
        full_cost: Option<&CostTable>,
        oracle_next: Option<&CostTable>,
    ) -> Result<LearnOutcome> {
        let cost = match (self.spec.feedback, full_cost) {
            (Feedback::Full, Some(c)) => Some(c),
            (Feedback::Full, None) => {
                return Err(Error::InvalidParameter("full information needs the cost table".into()))
            }
            (Feedback::Bandit, Some(_)) => {
                return Err(Error::InvalidParameter("bandit learners only see trajectories".into()))
            }
            (Feedback::Bandit, None) => None,
        };
        let m_t = self.predictor.predict().clone();

        if let Some(phase) = self.phase.as_mut() {
            let inc = match cost {
                Some(c) => psi_increment_full(c, &m_t),
                None => psi_increment_bandit(trajectory, &self.rho, &m_t)?,
            };
            phase.accumulate(inc);
            *phase = phase.maybe_advance_phase(t);
        }
        let (eta, gamma) = match &self.phase {
            Some(p) => (p.eta, p.gamma),
            None => (self.spec.eta, self.spec.gamma),
        };

        let mut upper_bound = None;
        let c_hat = match cost {
            Some(c) => c.clone(),
            None => match &self.stats {
                Some(stats) => {
                    let u = stats.upper_occupancy_bound(&self.policy());
                    let est = uob_opix_estimate(trajectory, &u, &m_t, gamma)?;
                    upper_bound = Some(u);
                    est
                }
                None => opix_estimate(trajectory, &self.rho, &m_t, gamma)?,
            },
        };

        self.predictor = self.predictor.update(trajectory, oracle_next)?;
        let cfg = UpdateConfig::new(eta)?.with_solver(self.spec.dual_tol, self.spec.dual_max_iters);
        let projection_mdp;
        let target = match self.stats.as_mut() {
            Some(stats) => {
                stats.record(trajectory)?;
                projection_mdp = self.mdp.with_kernel(stats.smoothed_kernel(KERNEL_PRIOR))?;
                &projection_mdp
            }
            None => &self.mdp,
        };
        let step = omd_step(
            target,
            &self.rho,
            &c_hat,
            &m_t,
            self.predictor.predict(),
            &cfg,
            self.potential.as_ref(),
        )?;
        self.rho = step.next;
        self.potential = Some(step.potential);
        Ok(LearnOutcome {
            estimate_norm: c_hat.max_abs(),
            dual_iterations: step.iterations,
            collapsed: step.collapsed.len(),
            clamped: step.clamped,
            phase: self.phase.as_ref().map_or(1, |p| p.phase),
            eta,
            gamma,
            psi: self.phase.as_ref().map_or(0.0, |p| p.psi),
            upper_bound,
        })
    }
}
