//! Doubling-trick controller for running without a known horizon.
//!
//! Phase `i` runs with `η_i = 2^{-i} η₀` (and `γ_i = η_i^{1/κ}` under bandit
//! feedback). The phase ends once `D₀ / η_i` drops below the accumulated,
//! learner-observable statistic `Ψ` scaled by `η_i^{1/κ}` (bandit) or `η_i`
//! (full information).

use serde::{Deserialize, Serialize};

use crate::amdp::{CostTable, OccupancyMeasure, Trajectory};
use crate::error::{Error, Result};
use crate::estimators::opix_estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnytimeMode {
    /// `κ = 2` for expected regret, `κ = 3` for high probability.
    Bandit { kappa: u32 },
    FullInformation,
}

/// `D₀ = L log(|X||A| / L)`.
pub fn horizon_free_diameter(layers: usize, n_states: usize, n_actions: usize) -> Result<f64> {
    let ratio = (n_states * n_actions) as f64 / layers as f64;
    if layers == 0 || ratio <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "need |X||A| > L (got {} states x {} actions, L = {})",
            n_states, n_actions, layers
        )));
    }
    Ok(layers as f64 * ratio.ln())
}

/// `‖c̄_t − M_t‖₂²/2 + ‖c̄_t − M_t‖₁` with `c̄_t` the `γ = 0` estimate.
pub fn psi_increment_bandit(
    trajectory: &Trajectory,
    rho_t: &OccupancyMeasure,
    m_t: &CostTable,
) -> Result<f64> {
    let c_bar = opix_estimate(trajectory, rho_t, m_t, 0.0)?;
    let (mut l2, mut l1) = (0.0, 0.0);
    for (&c, &m) in c_bar.values().iter().zip(m_t.values()) {
        let d = c - m;
        l2 += d * d;
        l1 += d.abs();
    }
    Ok(l2 / 2.0 + l1)
}

/// `‖c_t − M_t‖_∞² / 2`.
pub fn psi_increment_full(cost: &CostTable, m_t: &CostTable) -> f64 {
    let gap = cost
        .values()
        .iter()
        .zip(m_t.values())
        .fold(0.0_f64, |m, (c, p)| m.max((c - p).abs()));
    gap * gap / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phase: u32,
    pub phase_start: u64,
    pub eta0: f64,
    pub eta: f64,
    pub gamma: f64,
    pub mode: AnytimeMode,
    pub psi: f64,
    pub d0: f64,
}

impl PhaseState {
    /// Phase 1 starting at episode 1 with `η₁ = η₀ / 2`.
    pub fn new(eta0: f64, mode: AnytimeMode, d0: f64) -> Result<Self> {
        if !(eta0 > 0.0) {
            return Err(Error::InvalidParameter(format!("eta0 must be positive, got {eta0}")));
        }
        if !(d0 > 0.0) {
            return Err(Error::InvalidParameter(format!("D0 must be positive, got {d0}")));
        }
        if let AnytimeMode::Bandit { kappa } = mode {
            if kappa != 2 && kappa != 3 {
                return Err(Error::InvalidParameter(format!("kappa must be 2 or 3, got {kappa}")));
            }
        }
        let mut s = Self {
            phase: 1,
            phase_start: 1,
            eta0,
            eta: 0.0,
            gamma: 0.0,
            mode,
            psi: 0.0,
            d0,
        };
        s.set_rates();
        Ok(s)
    }

    fn set_rates(&mut self) {
        self.eta = self.eta0 * 0.5_f64.powi(self.phase as i32);
        self.gamma = match self.mode {
            AnytimeMode::Bandit { kappa } => self.eta.powf(1.0 / kappa as f64),
            AnytimeMode::FullInformation => 0.0,
        };
    }

    /// Multiplier of `Ψ` in the phase-end test.
    fn psi_weight(&self) -> f64 {
        match self.mode {
            AnytimeMode::Bandit { kappa } => self.eta.powf(1.0 / kappa as f64),
            AnytimeMode::FullInformation => self.eta,
        }
    }

    /// Smallest accumulated `Ψ` that ends the current phase (exclusive).
    pub fn threshold(&self) -> f64 {
        self.d0 / self.eta / self.psi_weight()
    }

    pub fn accumulate(&mut self, increment: f64) {
        debug_assert!(increment >= 0.0);
        self.psi += increment;
    }

    /// Applies the phase-end test after episode `t`'s rollout.
    pub fn maybe_advance_phase(&self, t: u64) -> PhaseState {
        let mut next = self.clone();
        if self.d0 / self.eta < self.psi_weight() * self.psi {
            next.phase += 1;
            next.phase_start = t;
            next.set_rates();
            next.psi = 0.0;
        }
        next
    }
}
