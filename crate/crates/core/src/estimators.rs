//! Bandit cost estimators built from a single episode's trajectory.
//!
//! All three estimators share one formula: on a visited pair
//! `(c − M) / (w + γ) + M`, on an unvisited pair `M`, where `w` is the
//! occupancy (or its upper bound) used for importance weighting and `M` is the
//! predictor (zero for the plain implicit-exploration estimator).

use rand::Rng;

use crate::amdp::{CostTable, OccupancyMeasure, Table, Trajectory};
use crate::error::{Error, Result};

/// Implicit-exploration parameter `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub gamma: f64,
}

impl EstimatorConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// Scalar estimate for one pair.
#[inline]
pub fn pair_estimate(cost: f64, predictor: f64, weight: f64, gamma: f64, visited: bool) -> f64 {
    if visited {
        (cost - predictor) / (weight + gamma) + predictor
    } else {
        predictor
    }
}

fn weighted_estimate(
    trajectory: &Trajectory,
    weights: &Table,
    predictor: Option<&CostTable>,
    gamma: f64,
) -> Result<CostTable> {
    if gamma < 0.0 {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let mut out = match predictor {
        Some(m) => m.clone(),
        None => Table::zeros(weights.n_states(), weights.n_actions()),
    };
    for step in &trajectory.steps {
        let (x, a) = (step.state, step.action);
        let denom = weights.get(x, a) + gamma;
        if denom <= 0.0 {
            return Err(Error::ZeroDenominator { state: x, action: a });
        }
        let m = out.get(x, a);
        out.set(x, a, pair_estimate(step.cost, m, weights.get(x, a), gamma, true));
        debug_assert_eq!((step.cost - m) / denom + m, out.get(x, a));
    }
    Ok(out)
}

/// `c / (ρ + γ)` on visited pairs, zero elsewhere.
pub fn ix_estimate(trajectory: &Trajectory, rho: &OccupancyMeasure, gamma: f64) -> Result<CostTable> {
    weighted_estimate(trajectory, rho.table(), None, gamma)
}

/// Predictor-centred estimator: `(c − M)/(ρ + γ) + M` on visited pairs,
/// `M` elsewhere.
pub fn opix_estimate(
    trajectory: &Trajectory,
    rho: &OccupancyMeasure,
    predictor: &CostTable,
    gamma: f64,
) -> Result<CostTable> {
    weighted_estimate(trajectory, rho.table(), Some(predictor), gamma)
}

/// As [`opix_estimate`] with the upper occupancy bound as importance weight.
pub fn uob_opix_estimate(
    trajectory: &Trajectory,
    upper_occupancy: &Table,
    predictor: &CostTable,
    gamma: f64,
) -> Result<CostTable> {
    if upper_occupancy.values().iter().any(|&u| u < 0.0) {
        return Err(Error::InvalidParameter("upper occupancy bound must be nonnegative".into()));
    }
    weighted_estimate(trajectory, upper_occupancy, Some(predictor), gamma)
}

/// Sample moments of the single-pair estimator over Bernoulli(ρ) visitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub n_samples: usize,
    /// Sample mean of `ĉ`.
    pub mean: f64,
    /// Standard error of `mean`.
    pub mean_se: f64,
    /// Sample mean of `(ĉ − M)²`.
    pub second_moment: f64,
    /// Standard error of `second_moment`.
    pub second_moment_se: f64,
}

/// Monte-Carlo moments of the estimator for one pair visited with
/// probability `rho`.
pub fn moment_oracle<R: Rng + ?Sized>(
    cost: f64,
    predictor: f64,
    rho: f64,
    gamma: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    if !(0.0..=1.0).contains(&rho) || gamma < 0.0 || rho + gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need rho in [0,1], gamma >= 0 and rho + gamma > 0 (rho={rho}, gamma={gamma})"
        )));
    }
    let hit = pair_estimate(cost, predictor, rho, gamma, true);
    let miss = pair_estimate(cost, predictor, rho, gamma, false);
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    for _ in 0..n_samples {
        let visited = rng.gen::<f64>() < rho;
        let c_hat = if visited { hit } else { miss };
        let dev = (c_hat - predictor) * (c_hat - predictor);
        sum[0] += c_hat;
        sum_sq[0] += c_hat * c_hat;
        sum[1] += dev;
        sum_sq[1] += dev * dev;
    }
    let n = n_samples as f64;
    let se = |s: f64, sq: f64| {
        let mean = s / n;
        let var = if n_samples > 1 {
            ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        (var / n).sqrt()
    };
    Ok(MomentEstimate {
        n_samples,
        mean: sum[0] / n,
        mean_se: se(sum[0], sum_sq[0]),
        second_moment: sum[1] / n,
        second_moment_se: se(sum[1], sum_sq[1]),
    })
}
