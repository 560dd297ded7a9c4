//! Transition estimation when the kernel is unknown: visit counts, empirical
//! transitions, Bernstein-style confidence margins and upper occupancy bounds.
//!
//! Only the layer structure of the MDP is assumed known; the kernel of the
//! `LayeredAmdp` passed in is never read by this module.

use crate::amdp::{LayeredAmdp, Policy, StateId, Table, TransitionKernel, Trajectory};
use crate::error::{Error, Result};

/// Counts `N(x,a)` and `N(x,a,x')` over completed episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStats {
    mdp: LayeredAmdp,
    visits: Vec<u64>,
    /// Per pair, one counter per state of the next layer.
    transitions: Vec<Vec<u64>>,
    horizon: u64,
    delta: f64,
    log_term: f64,
}

impl TransitionStats {
    pub fn new(shape: &LayeredAmdp, horizon: u64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let n_actions = shape.n_actions();
        let mut transitions = vec![Vec::new(); shape.n_states() * n_actions];
        for x in shape.decision_states() {
            let width = shape.layer(shape.layer_of(x) + 1).len();
            for a in 0..n_actions {
                transitions[x * n_actions + a] = vec![0; width];
            }
        }
        let log_term = (horizon as f64 * (shape.n_states() * n_actions) as f64 / delta).ln();
        Ok(Self {
            mdp: shape.clone(),
            visits: vec![0; shape.n_states() * n_actions],
            transitions,
            horizon,
            delta,
            log_term,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `log(T |X| |A| / δ)`.
    pub fn log_term(&self) -> f64 {
        self.log_term
    }

    fn pair(&self, x: StateId, a: usize) -> usize {
        x * self.mdp.n_actions() + a
    }

    fn local(&self, x: StateId, next: StateId) -> Option<usize> {
        let range = self.mdp.layer(self.mdp.layer_of(x) + 1);
        range.contains(&next).then(|| next - range.start)
    }

    pub fn visits(&self, x: StateId, a: usize) -> u64 {
        self.visits[self.pair(x, a)]
    }

    pub fn transition_count(&self, x: StateId, a: usize, next: StateId) -> u64 {
        self.local(x, next)
            .map_or(0, |j| self.transitions[self.pair(x, a)][j])
    }

    /// Adds one episode's transitions.
    pub fn record(&mut self, trajectory: &Trajectory) -> Result<()> {
        let terminal = self.mdp.terminal_state();
        for (x, a, next) in trajectory.transitions(terminal) {
            let j = self.local(x, next).ok_or_else(|| {
                Error::InvalidParameter(format!("transition {x} -> {next} skips layers"))
            })?;
            let p = self.pair(x, a);
            self.visits[p] += 1;
            self.transitions[p][j] += 1;
        }
        Ok(())
    }

    /// `P̄(x'|x,a) = N(x,a,x') / max{1, N(x,a)}`.
    pub fn empirical_transition(&self, x: StateId, a: usize, next: StateId) -> f64 {
        self.transition_count(x, a, next) as f64 / self.visits(x, a).max(1) as f64
    }

    /// Confidence margin `ε(x'|x,a)`.
    pub fn confidence_margin(&self, x: StateId, a: usize, next: StateId) -> f64 {
        margin(
            self.empirical_transition(x, a, next),
            self.visits(x, a),
            self.log_term,
        )
    }

    /// Empirical kernel; rows of unvisited pairs are empty.
    pub fn empirical_kernel(&self) -> TransitionKernel {
        self.kernel_with(|_, counts, total| {
            counts
                .iter()
                .map(|&c| c as f64 / total.max(1) as f64)
                .collect()
        })
    }

    /// Empirical kernel with `prior` pseudo-counts spread uniformly over the
    /// next layer, so every row is a full-support distribution.
    pub fn smoothed_kernel(&self, prior: f64) -> TransitionKernel {
        self.kernel_with(|_, counts, total| {
            let width = counts.len() as f64;
            counts
                .iter()
                .map(|&c| (c as f64 + prior / width) / (total as f64 + prior))
                .collect()
        })
    }

    fn kernel_with(&self, row: impl Fn(usize, &[u64], u64) -> Vec<f64>) -> TransitionKernel {
        let n_actions = self.mdp.n_actions();
        let mut rows = vec![Vec::new(); self.mdp.n_states() * n_actions];
        for x in self.mdp.decision_states() {
            let start = self.mdp.layer(self.mdp.layer_of(x) + 1).start;
            for a in 0..n_actions {
                let p = self.pair(x, a);
                rows[p] = row(p, &self.transitions[p], self.visits[p])
                    .into_iter()
                    .enumerate()
                    .filter(|(_, q)| *q > 0.0)
                    .map(|(j, q)| (start + j, q))
                    .collect();
            }
        }
        TransitionKernel::new(n_actions, rows)
    }

    /// Whether `candidate` lies within every confidence margin.
    pub fn in_confidence_set(&self, candidate: &TransitionKernel) -> bool {
        let n_actions = self.mdp.n_actions();
        self.mdp.decision_states().all(|x| {
            let next_layer = self.mdp.layer(self.mdp.layer_of(x) + 1);
            (0..n_actions).all(|a| {
                next_layer.clone().all(|n| {
                    let dev = (candidate.prob(x, a, n) - self.empirical_transition(x, a, n)).abs();
                    dev <= self.confidence_margin(x, a, n)
                })
            })
        })
    }

    /// Per-successor `[lower, upper]` boxes of the confidence set, clipped to `[0,1]`.
    fn boxes(&self, x: StateId, a: usize) -> Vec<(f64, f64)> {
        let next_layer = self.mdp.layer(self.mdp.layer_of(x) + 1);
        next_layer
            .map(|n| {
                let p = self.empirical_transition(x, a, n);
                let e = self.confidence_margin(x, a, n);
                ((p - e).max(0.0), (p + e).min(1.0))
            })
            .collect()
    }

    /// `u(x,a) = max_{P ∈ 𝒫} ρ^{P,π}(x,a)`.
    ///
    /// For each target state a backward pass computes the largest probability
    /// of reaching it from every earlier state; the confidence set is a product
    /// of per-pair boxes intersected with the simplex, so each pair's inner
    /// maximization is a fractional knapsack solved greedily.
    pub fn upper_occupancy_bound(&self, policy: &Policy) -> Table {
        let mdp = &self.mdp;
        let n_actions = mdp.n_actions();
        let boxes: Vec<Vec<(f64, f64)>> = (0..mdp.n_states() * n_actions)
            .map(|p| {
                let (x, a) = (p / n_actions, p % n_actions);
                if mdp.decision_states().contains(&x) {
                    self.boxes(x, a)
                } else {
                    Vec::new()
                }
            })
            .collect();
        let mut out = mdp.zero_table();
        let mut reach = vec![0.0_f64; mdp.n_states()];
        let mut order: Vec<usize> = Vec::new();
        for target in mdp.decision_states() {
            let k = mdp.layer_of(target);
            let upper = if k == 0 {
                1.0
            } else {
                reach.iter_mut().for_each(|r| *r = 0.0);
                reach[target] = 1.0;
                for m in (0..k).rev() {
                    let next = mdp.layer(m + 1);
                    let values = &reach[next.clone()].to_vec();
                    order.clear();
                    order.extend(0..values.len());
                    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
                    for x in mdp.layer(m) {
                        let mut total = 0.0;
                        for a in 0..n_actions {
                            let pi = policy.prob(x, a);
                            if pi > 0.0 {
                                total += pi * knapsack_max(&boxes[x * n_actions + a], values, &order);
                            }
                        }
                        reach[x] = total;
                    }
                }
                reach[mdp.initial_state()]
            };
            for a in 0..n_actions {
                out.set(target, a, upper * policy.prob(target, a));
            }
        }
        out
    }
}

/// `2√(P̄ log / max{1,N−1}) + 14 log / (3 max{1,N−1})`.
pub fn margin(p_bar: f64, visits: u64, log_term: f64) -> f64 {
    let n = visits.saturating_sub(1).max(1) as f64;
    2.0 * (p_bar * log_term / n).sqrt() + 14.0 * log_term / (3.0 * n)
}

/// `max Σ_j p_j f_j` over `p` in the boxes intersected with the simplex.
///
/// `order` lists successors by decreasing `f`. Starts every coordinate at its
/// lower bound and spends the remaining mass on the best successors first.
fn knapsack_max(bounds: &[(f64, f64)], values: &[f64], order: &[usize]) -> f64 {
    let mut remaining = 1.0 - bounds.iter().map(|b| b.0).sum::<f64>();
    let mut total: f64 = bounds.iter().zip(values).map(|(b, v)| b.0 * v).sum();
    for &j in order {
        if remaining <= 0.0 {
            break;
        }
        let add = (bounds[j].1 - bounds[j].0).min(remaining);
        total += add * values[j];
        remaining -= add;
    }
    total
}
