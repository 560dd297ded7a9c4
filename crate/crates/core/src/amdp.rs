//! Layered loop-free MDPs, occupancy measures and regret accounting.
//!
//! States carry dense global ids assigned layer by layer, so layer `l` is the
//! contiguous range `layer(l)`. Every table over state-action pairs is a dense
//! `n_states * n_actions` array; entries of the terminal state are kept at zero.

use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};

pub type StateId = usize;

/// Tolerance for `Δ(M)` membership checks.
pub const OCCUPANCY_TOL: f64 = 1e-8;

/// Tolerance for transition rows summing to one.
pub const KERNEL_TOL: f64 = 1e-12;

/// Dense real-valued table over state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    n_actions: usize,
    values: Vec<f64>,
}

/// True costs, predictors and cost estimates all share this representation.
pub type CostTable = Table;

impl Table {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn from_values(n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || values.len() % n_actions != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values cannot form rows of {} actions",
                values.len(),
                n_actions
            )));
        }
        Ok(Self { n_actions, values })
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, state: StateId, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: StateId, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &Table) -> bool {
        self.n_actions == other.n_actions && self.values.len() == other.values.len()
    }

    /// Euclidean inner product.
    pub fn dot(&self, other: &Table) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Elementwise `self + rhs`.
    pub fn add(&self, rhs: &Table) -> Table {
        self.zip_with(rhs, |a, b| a + b)
    }

    /// Elementwise `self - rhs`.
    pub fn sub(&self, rhs: &Table) -> Table {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn zip_with(&self, rhs: &Table, f: impl Fn(f64, f64) -> f64) -> Table {
        debug_assert!(self.same_shape(rhs));
        Table {
            n_actions: self.n_actions,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Transition probabilities, one sparse successor row per state-action pair.
///
/// Rows of the terminal state are empty. Rows are not required to be
/// normalized here (empirical kernels of unvisited pairs are all-zero);
/// [`LayeredAmdp`] validates the kernels it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n_actions: usize,
    rows: Vec<Vec<(StateId, f64)>>,
}

impl TransitionKernel {
    pub fn new(n_actions: usize, rows: Vec<Vec<(StateId, f64)>>) -> Self {
        Self { n_actions, rows }
    }

    #[inline]
    pub fn successors(&self, state: StateId, action: usize) -> &[(StateId, f64)] {
        &self.rows[state * self.n_actions + action]
    }

    pub fn prob(&self, state: StateId, action: usize, next: StateId) -> f64 {
        self.successors(state, action)
            .iter()
            .filter(|(s, _)| *s == next)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Episodic loop-free MDP with singleton first and last layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredAmdp {
    offsets: Vec<usize>,
    layer_of: Vec<usize>,
    n_actions: usize,
    kernel: TransitionKernel,
}

impl LayeredAmdp {
    /// Builds an MDP from per-layer state counts and a successor function.
    ///
    /// `layer_sizes` has `L + 1` entries; `successors(x, a)` is called for every
    /// state outside the last layer and returns `(next_state, probability)`
    /// pairs using global ids. Duplicate successors are merged and zero
    /// probabilities dropped.
    pub fn new<F>(layer_sizes: &[usize], n_actions: usize, mut successors: F) -> Result<Self>
    where
        F: FnMut(StateId, usize) -> Vec<(StateId, f64)>,
    {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidMdp("need at least two layers".into()));
        }
        if n_actions == 0 {
            return Err(Error::InvalidMdp("need at least one action".into()));
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len() + 1);
        offsets.push(0);
        for &size in layer_sizes {
            offsets.push(offsets.last().unwrap() + size);
        }
        let n_states = *offsets.last().unwrap();
        let terminal_start = offsets[layer_sizes.len() - 1];
        let mut rows = vec![Vec::new(); n_states * n_actions];
        for x in 0..terminal_start {
            for a in 0..n_actions {
                let mut row: Vec<(StateId, f64)> = Vec::new();
                for (next, p) in successors(x, a) {
                    if p == 0.0 {
                        continue;
                    }
                    match row.iter_mut().find(|(s, _)| *s == next) {
                        Some(entry) => entry.1 += p,
                        None => row.push((next, p)),
                    }
                }
                row.sort_by_key(|(s, _)| *s);
                rows[x * n_actions + a] = row;
            }
        }
        Self::from_parts(offsets, n_actions, TransitionKernel::new(n_actions, rows))
    }

    fn from_parts(offsets: Vec<usize>, n_actions: usize, kernel: TransitionKernel) -> Result<Self> {
        let mut layer_of = Vec::with_capacity(*offsets.last().unwrap());
        for l in 0..offsets.len() - 1 {
            for _ in offsets[l]..offsets[l + 1] {
                layer_of.push(l);
            }
        }
        let mdp = Self {
            offsets,
            layer_of,
            n_actions,
            kernel,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Same layer structure with a different (validated) kernel.
    pub fn with_kernel(&self, kernel: TransitionKernel) -> Result<Self> {
        Self::from_parts(self.offsets.clone(), self.n_actions, kernel)
    }

    fn validate(&self) -> Result<()> {
        let big_l = self.layer_count();
        if self.layer(0).len() != 1 || self.layer(big_l).len() != 1 {
            return Err(Error::InvalidMdp("first and last layers must be singletons".into()));
        }
        if (0..=big_l).any(|l| self.layer(l).is_empty()) {
            return Err(Error::InvalidMdp("empty layer".into()));
        }
        for x in self.decision_states() {
            let next_layer = self.layer(self.layer_of[x] + 1);
            for a in 0..self.n_actions {
                let row = self.kernel.successors(x, a);
                let mut total = 0.0;
                for &(next, p) in row {
                    if !next_layer.contains(&next) {
                        return Err(Error::InvalidMdp(format!(
                            "edge ({x}, {a}) -> {next} skips layers"
                        )));
                    }
                    if !(0.0..=1.0 + KERNEL_TOL).contains(&p) {
                        return Err(Error::InvalidMdp(format!(
                            "edge ({x}, {a}) -> {next} has probability {p}"
                        )));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > KERNEL_TOL {
                    return Err(Error::InvalidMdp(format!(
                        "row ({x}, {a}) sums to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of layers `L` (the terminal layer has index `L`).
    pub fn layer_count(&self) -> usize {
        self.offsets.len() - 2
    }

    pub fn n_states(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn layer(&self, l: usize) -> Range<StateId> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn layer_of(&self, state: StateId) -> usize {
        self.layer_of[state]
    }

    /// States of layers `0..L`, i.e. every state where an action is taken.
    pub fn decision_states(&self) -> Range<StateId> {
        0..self.offsets[self.layer_count()]
    }

    pub fn initial_state(&self) -> StateId {
        0
    }

    pub fn terminal_state(&self) -> StateId {
        self.n_states() - 1
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    #[inline]
    pub fn successors(&self, state: StateId, action: usize) -> &[(StateId, f64)] {
        self.kernel.successors(state, action)
    }

    pub fn transition(&self, state: StateId, action: usize, next: StateId) -> f64 {
        self.kernel.prob(state, action, next)
    }

    pub fn zero_table(&self) -> Table {
        Table::zeros(self.n_states(), self.n_actions)
    }
}

/// A nonnegative table satisfying per-layer normalization and flow
/// conservation (up to solver slack), or the per-layer uniform start.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure(Table);

/// Largest constraint violations of a candidate occupancy measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub normalization: f64,
    pub flow: f64,
    pub negativity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.normalization.max(self.flow).max(self.negativity)
    }
}

impl OccupancyMeasure {
    /// Validated constructor.
    pub fn new(mdp: &LayeredAmdp, table: Table, tol: f64) -> Result<Self> {
        let rho = Self(table);
        rho.validate(mdp, tol)?;
        Ok(rho)
    }

    pub fn from_table_unchecked(table: Table) -> Self {
        Self(table)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn into_table(self) -> Table {
        self.0
    }

    #[inline]
    pub fn get(&self, state: StateId, action: usize) -> f64 {
        self.0.get(state, action)
    }

    pub fn residuals(&self, mdp: &LayeredAmdp) -> Residuals {
        let big_l = mdp.layer_count();
        let n_actions = mdp.n_actions();
        let negativity = self.0.values().iter().fold(0.0_f64, |m, &v| m.max(-v));
        let mut normalization = 0.0_f64;
        for l in 0..big_l {
            let mass: f64 = mdp.layer(l).map(|x| self.0.row(x).iter().sum::<f64>()).sum();
            normalization = normalization.max((mass - 1.0).abs());
        }
        let mut inflow = vec![0.0; mdp.n_states()];
        for x in mdp.decision_states() {
            for a in 0..n_actions {
                let mass = self.0.get(x, a);
                for &(next, p) in mdp.successors(x, a) {
                    inflow[next] += p * mass;
                }
            }
        }
        let mut flow = 0.0_f64;
        for l in 1..big_l {
            for x in mdp.layer(l) {
                let out: f64 = self.0.row(x).iter().sum();
                flow = flow.max((out - inflow[x]).abs());
            }
        }
        Residuals {
            normalization,
            flow,
            negativity,
        }
    }

    pub fn validate(&self, mdp: &LayeredAmdp, tol: f64) -> Result<()> {
        if self.0.n_states() != mdp.n_states() || self.0.n_actions() != mdp.n_actions() {
            return Err(Error::InvalidOccupancy {
                constraint: "shape",
                residual: f64::INFINITY,
            });
        }
        let r = self.residuals(mdp);
        let checks = [
            ("nonnegativity", r.negativity),
            ("per-layer normalization", r.normalization),
            ("flow conservation", r.flow),
        ];
        for (constraint, residual) in checks {
            if residual > tol || residual.is_nan() {
                return Err(Error::InvalidOccupancy {
                    constraint,
                    residual,
                });
            }
        }
        Ok(())
    }
}

/// Stationary stochastic policy, one simplex row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(Table);

impl Policy {
    pub fn from_table_unchecked(table: Table) -> Self {
        Self(table)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self(Table::filled(n_states, n_actions, 1.0 / n_actions as f64))
    }

    pub fn deterministic(n_actions: usize, choice: &[usize]) -> Self {
        let mut t = Table::zeros(choice.len(), n_actions);
        for (x, &a) in choice.iter().enumerate() {
            t.set(x, a, 1.0);
        }
        Self(t)
    }

    #[inline]
    pub fn prob(&self, state: StateId, action: usize) -> f64 {
        self.0.get(state, action)
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        self.0.row(state)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }
}

/// `π(a|x) = ρ(x,a) / Σ_a' ρ(x,a')`, uniform where a state carries no mass.
pub fn induce_policy(rho: &OccupancyMeasure) -> Policy {
    let table = rho.table();
    let n_actions = table.n_actions();
    let uniform = 1.0 / n_actions as f64;
    let mut out = Table::zeros(table.n_states(), n_actions);
    for x in 0..table.n_states() {
        let row = table.row(x);
        let total: f64 = row.iter().sum();
        for (a, &v) in row.iter().enumerate() {
            let p = if total > 0.0 { v / total } else { uniform };
            out.set(x, a, p);
        }
    }
    Policy(out)
}

/// Per-layer uniform initialization `ρ₁(x,a) = 1 / (|X_l| |A|)`.
///
/// This satisfies normalization but generally not flow conservation; the
/// first update projects it onto `Δ(M)`.
pub fn uniform_occupancy(mdp: &LayeredAmdp) -> OccupancyMeasure {
    let mut t = mdp.zero_table();
    let n_actions = mdp.n_actions();
    for l in 0..mdp.layer_count() {
        let range = mdp.layer(l);
        let w = 1.0 / (range.len() * n_actions) as f64;
        for x in range {
            for a in 0..n_actions {
                t.set(x, a, w);
            }
        }
    }
    OccupancyMeasure(t)
}

/// Forward flow of `policy` under `kernel`, using the layer layout of `mdp`.
pub fn occupancy_with_kernel(
    mdp: &LayeredAmdp,
    kernel: &TransitionKernel,
    policy: &Policy,
) -> OccupancyMeasure {
    let n_actions = mdp.n_actions();
    let mut state_mass = vec![0.0; mdp.n_states()];
    state_mass[mdp.initial_state()] = 1.0;
    let mut t = mdp.zero_table();
    for x in mdp.decision_states() {
        let q = state_mass[x];
        if q == 0.0 {
            continue;
        }
        for a in 0..n_actions {
            let mass = q * policy.prob(x, a);
            t.set(x, a, mass);
            if mass == 0.0 {
                continue;
            }
            for &(next, p) in kernel.successors(x, a) {
                state_mass[next] += p * mass;
            }
        }
    }
    OccupancyMeasure(t)
}

/// Occupancy measure of `policy` under the MDP's own kernel.
pub fn occupancy_from_policy(mdp: &LayeredAmdp, policy: &Policy) -> OccupancyMeasure {
    occupancy_with_kernel(mdp, mdp.kernel(), policy)
}

/// One layer of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub layer: usize,
    pub state: StateId,
    pub action: usize,
    pub cost: f64,
}

/// The observed history of one episode: one step per layer `0..L`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn contains(&self, state: StateId, action: usize) -> bool {
        self.steps
            .iter()
            .any(|s| s.state == state && s.action == action)
    }

    /// `(x, a, x')` triples, ending in the terminal state.
    pub fn transitions(&self, terminal: StateId) -> impl Iterator<Item = (StateId, usize, StateId)> + '_ {
        self.steps.iter().enumerate().map(move |(i, s)| {
            let next = self.steps.get(i + 1).map_or(terminal, |n| n.state);
            (s.state, s.action, next)
        })
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }
}

fn sample_index(weights: impl Iterator<Item = f64>, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// Samples one episode following `policy` from the initial state.
pub fn rollout_policy<R: Rng + ?Sized>(
    mdp: &LayeredAmdp,
    policy: &Policy,
    cost: &CostTable,
    rng: &mut R,
) -> Trajectory {
    let big_l = mdp.layer_count();
    let mut steps = Vec::with_capacity(big_l);
    let mut x = mdp.initial_state();
    for layer in 0..big_l {
        let u: f64 = rng.gen();
        let action = sample_index(policy.row(x).iter().copied(), u).unwrap_or(0);
        steps.push(Step {
            layer,
            state: x,
            action,
            cost: cost.get(x, action),
        });
        let succ = mdp.successors(x, action);
        let u: f64 = rng.gen();
        let k = sample_index(succ.iter().map(|(_, p)| *p), u).expect("validated kernel row");
        x = succ[k].0;
    }
    Trajectory { steps }
}

/// Samples one episode following the policy induced by `rho`.
pub fn rollout<R: Rng + ?Sized>(
    mdp: &LayeredAmdp,
    rho: &OccupancyMeasure,
    cost: &CostTable,
    rng: &mut R,
) -> Trajectory {
    rollout_policy(mdp, &induce_policy(rho), cost, rng)
}

/// `R(ρ) = Σ ρ log ρ − Σ ρ` with `0 log 0 = 0`.
pub fn negative_entropy(rho: &OccupancyMeasure) -> f64 {
    rho.table()
        .values()
        .iter()
        .map(|&p| if p > 0.0 { p * p.ln() - p } else { 0.0 })
        .sum()
}

/// Unnormalized KL divergence `Σ ρ log(ρ/ρ') − Σ (ρ − ρ')`.
pub fn kl_divergence(rho: &OccupancyMeasure, reference: &OccupancyMeasure) -> Result<f64> {
    let (p, q) = (rho.table(), reference.table());
    if !p.same_shape(q) {
        return Err(Error::LengthMismatch {
            left: p.values().len(),
            right: q.values().len(),
        });
    }
    let n_actions = p.n_actions();
    let mut total = 0.0;
    for (i, (&a, &b)) in p.values().iter().zip(q.values()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation {
                    state: i / n_actions,
                    action: i % n_actions,
                });
            }
            total += a * (a / b).ln();
        }
        total -= a - b;
    }
    Ok(total)
}

/// `⟨ρ, c⟩`.
pub fn total_cost(rho: &OccupancyMeasure, cost: &CostTable) -> f64 {
    rho.table().dot(cost)
}

/// Fixed comparator minimizing a linear objective over `Δ(M)`.
#[derive(Debug, Clone)]
pub struct BestInHindsight {
    pub policy: Policy,
    pub occupancy: OccupancyMeasure,
    pub value: f64,
}

/// Backward dynamic program over the layered DAG followed by a forward flow.
pub fn best_in_hindsight(mdp: &LayeredAmdp, cost_sum: &CostTable) -> BestInHindsight {
    let n_actions = mdp.n_actions();
    let mut value = vec![0.0; mdp.n_states()];
    let mut choice = vec![0usize; mdp.n_states()];
    for l in (0..mdp.layer_count()).rev() {
        for x in mdp.layer(l) {
            let mut best = f64::INFINITY;
            for a in 0..n_actions {
                let q = cost_sum.get(x, a)
                    + mdp
                        .successors(x, a)
                        .iter()
                        .map(|&(n, p)| p * value[n])
                        .sum::<f64>();
                if q < best {
                    best = q;
                    choice[x] = a;
                }
            }
            value[x] = best;
        }
    }
    let policy = Policy::deterministic(n_actions, &choice);
    let occupancy = occupancy_from_policy(mdp, &policy);
    BestInHindsight {
        policy,
        occupancy,
        value: value[mdp.initial_state()],
    }
}

/// Cumulative sums of `learner[t] − comparator[t]`.
pub fn regret_trace(learner: &[f64], comparator: &[f64]) -> Result<Vec<f64>> {
    if learner.len() != comparator.len() {
        return Err(Error::LengthMismatch {
            left: learner.len(),
            right: comparator.len(),
        });
    }
    let mut acc = 0.0;
    Ok(learner
        .iter()
        .zip(comparator)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect())
}
