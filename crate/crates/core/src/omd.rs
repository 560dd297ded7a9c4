//! Single-projection optimistic mirror-descent update.
//!
//! The update minimizes `η⟨ρ, ℓ⟩ + D_R(ρ‖ρ_t)` over `Δ(M)` with the effective
//! loss `ℓ = ĉ_t + M_{t+1} − M_t`. Its solution is the per-layer normalized
//! exponential reweighting `ρ_t(x,a) e^{β(x,a)}`, where `β` depends on a dual
//! potential `v` minimizing the layered log-sum-exp objective
//! `Σ_l ln Σ_{x∈X_l,a} ρ_t(x,a) e^{β(x,a|v)}`.
//!
//! The gradient of that objective at `v(y)` is the flow residual of the
//! candidate update at `y` (outflow minus inflow), so the dual solve stops on
//! the same quantity the `Δ(M)` validator measures.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::amdp::{CostTable, LayeredAmdp, OccupancyMeasure, StateId, Table};
use crate::error::{Error, Result};

/// Occupancy entries are clamped to this floor before reweighting.
pub const OCCUPANCY_FLOOR: f64 = 1e-300;

/// Dual potential over states. Entries for the first and terminal state are
/// pinned at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    values: Vec<f64>,
}

impl DualPotential {
    pub fn zeros(mdp: &LayeredAmdp) -> Self {
        Self {
            values: vec![0.0; mdp.n_states()],
        }
    }

    /// Builds a potential from per-state values; gauge entries are zeroed.
    pub fn from_values(mdp: &LayeredAmdp, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != mdp.n_states() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: mdp.n_states(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dual potential must be finite".into()));
        }
        values[mdp.initial_state()] = 0.0;
        values[mdp.terminal_state()] = 0.0;
        Ok(Self { values })
    }

    #[inline]
    pub fn get(&self, state: StateId) -> f64 {
        self.values[state]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `k` to every potential of interior layer `l`.
    pub fn shift_layer(&mut self, mdp: &LayeredAmdp, l: usize, k: f64) {
        assert!(l > 0 && l < mdp.layer_count(), "only interior layers are free");
        for x in mdp.layer(l) {
            self.values[x] += k;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateConfig {
    pub eta: f64,
    pub dual_tol: f64,
    pub dual_max_iters: usize,
}

impl UpdateConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        Ok(Self {
            eta,
            dual_tol: 1e-9,
            dual_max_iters: 100_000,
        })
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Ok(Self::new(eta)?.with_solver(self.dual_tol, self.dual_max_iters))
    }

    pub fn with_solver(mut self, dual_tol: f64, dual_max_iters: usize) -> Self {
        self.dual_tol = dual_tol;
        self.dual_max_iters = dual_max_iters;
        self
    }
}

/// `ĉ_t + M_{t+1} − M_t`.
pub fn effective_loss(c_hat: &CostTable, m_t: &CostTable, m_next: &CostTable) -> CostTable {
    c_hat.add(m_next).sub(m_t)
}

#[inline]
fn expected_next_potential(mdp: &LayeredAmdp, v: &[f64], x: StateId, a: usize) -> f64 {
    mdp.successors(x, a).iter().map(|&(n, p)| p * v[n]).sum()
}

/// `β(x,a) = −η ℓ(x,a) − Σ_{x'} v(x') Pr(x'|x,a) + v(x)`.
pub fn beta(
    mdp: &LayeredAmdp,
    v: &DualPotential,
    loss: &CostTable,
    eta: f64,
    x: StateId,
    a: usize,
) -> f64 {
    -eta * loss.get(x, a) - expected_next_potential(mdp, &v.values, x, a) + v.values[x]
}

struct DualProblem<'a> {
    mdp: &'a LayeredAmdp,
    log_rho: Vec<f64>,
    scaled_loss: Vec<f64>,
}

struct Evaluation {
    value: f64,
    /// Candidate update, per pair.
    candidate: Vec<f64>,
    outflow: Vec<f64>,
    inflow: Vec<f64>,
}

impl Evaluation {
    fn gradient(&self, mdp: &LayeredAmdp) -> Vec<f64> {
        let mut g = vec![0.0; mdp.n_states()];
        for l in 1..mdp.layer_count() {
            for y in mdp.layer(l) {
                g[y] = self.outflow[y] - self.inflow[y];
            }
        }
        g
    }

    fn residual(&self, mdp: &LayeredAmdp) -> f64 {
        let mut r = 0.0_f64;
        for l in 1..mdp.layer_count() {
            for y in mdp.layer(l) {
                r = r.max((self.outflow[y] - self.inflow[y]).abs());
            }
        }
        r
    }
}

impl<'a> DualProblem<'a> {
    fn new(mdp: &'a LayeredAmdp, rho_t: &Table, loss: &CostTable, eta: f64) -> Self {
        let log_rho = rho_t
            .values()
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        let scaled_loss = loss.values().iter().map(|&l| eta * l).collect();
        Self {
            mdp,
            log_rho,
            scaled_loss,
        }
    }

    fn evaluate(&self, v: &[f64]) -> Evaluation {
        let mdp = self.mdp;
        let n_actions = mdp.n_actions();
        let mut candidate = vec![0.0; mdp.n_states() * n_actions];
        let mut outflow = vec![0.0; mdp.n_states()];
        let mut inflow = vec![0.0; mdp.n_states()];
        let mut value = 0.0;
        for l in 0..mdp.layer_count() {
            let range = mdp.layer(l);
            let pairs = range.start * n_actions..range.end * n_actions;
            let mut max = f64::NEG_INFINITY;
            for x in range.clone() {
                for a in 0..n_actions {
                    let p = x * n_actions + a;
                    let lw = if self.log_rho[p] == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        self.log_rho[p] - self.scaled_loss[p] - expected_next_potential(mdp, v, x, a)
                            + v[x]
                    };
                    candidate[p] = lw;
                    max = max.max(lw);
                }
            }
            if max == f64::NEG_INFINITY {
                // only reachable when every weight underflowed
                value = f64::INFINITY;
                continue;
            }
            let sum: f64 = candidate[pairs.clone()]
                .iter()
                .map(|&lw| (lw - max).exp())
                .sum();
            let log_z = max + sum.ln();
            value += log_z;
            for x in range {
                for a in 0..n_actions {
                    let p = x * n_actions + a;
                    let d = candidate[p] - log_z;
                    // flush instead of producing subnormals
                    let q = if d < LOG_UNDERFLOW { 0.0 } else { d.exp() };
                    candidate[p] = q;
                    outflow[x] += q;
                    if q > 0.0 {
                        for &(n, prob) in mdp.successors(x, a) {
                            inflow[n] += prob * q;
                        }
                    }
                }
            }
        }
        Evaluation {
            value,
            candidate,
            outflow,
            inflow,
        }
    }
}

/// Layered log-sum-exp dual objective.
pub fn dual_objective(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    loss: &CostTable,
    eta: f64,
    v: &DualPotential,
) -> f64 {
    DualProblem::new(mdp, rho_t.table(), loss, eta)
        .evaluate(&v.values)
        .value
}

/// Analytic gradient of [`dual_objective`], per state (zero at gauge states).
pub fn dual_gradient(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    loss: &CostTable,
    eta: f64,
    v: &DualPotential,
) -> Vec<f64> {
    DualProblem::new(mdp, rho_t.table(), loss, eta)
        .evaluate(&v.values)
        .gradient(mdp)
}

/// Largest change of any `β(x,a)` in one solver iteration. Keeps the
/// exponentials in the line search finite when some occupancies are tiny.
const MAX_LOG_STEP: f64 = 30.0;
/// Consecutive iterations without a clear residual improvement before the
/// solver gives up.
const STALL_LIMIT: usize = 50;
/// Largest move of one potential in a rebalancing step.
const MAX_BALANCE_SHIFT: f64 = 300.0;

/// Weights below `e^LOG_UNDERFLOW` are stored as exact zeros.
const LOG_UNDERFLOW: f64 = -700.0;

/// Result of a dual solve.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub potential: DualPotential,
    /// `ρ_{t+1}` induced by `potential`.
    pub next: OccupancyMeasure,
    pub iterations: usize,
    /// Largest flow residual of `next`.
    pub residual: f64,
    pub objective: f64,
}

/// Minimizes the dual objective by damped Newton iterations.
///
/// The Hessian is block tridiagonal in the layers, so each Newton system is
/// solved by block elimination. A small ridge handles the per-layer gauge
/// directions. Steps are backtracked until the Armijo condition holds, with
/// objective differences evaluated directly (not as a difference of two
/// objective values) so the test stays meaningful near the optimum. Every
/// accepted step is non-increasing in the objective. When a Newton step has
/// to be shortened, states far from balance are first offered exact moves
/// along their own coordinates. Stops once the flow residual is at most `cfg.dual_tol`,
/// or when the residual stops improving at the rounding floor.
pub fn solve_dual(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    loss: &CostTable,
    cfg: &UpdateConfig,
    warm_start: Option<&DualPotential>,
) -> Result<DualSolution> {
    solve_dual_traced(mdp, rho_t, loss, cfg, warm_start, |_| {})
}

/// Increment `δβ(x,a) = d(x) − Σ_{x'} P(x'|x,a) d(x')` of every pair.
fn beta_increment(mdp: &LayeredAmdp, d: &[f64], out: &mut [f64]) {
    let n_actions = mdp.n_actions();
    for x in mdp.decision_states() {
        for a in 0..n_actions {
            out[x * n_actions + a] = d[x] - expected_next_potential(mdp, d, x, a);
        }
    }
}

/// Exact `f(v + t d) − f(v)` from the normalized weights `q` at `v`.
fn objective_change(mdp: &LayeredAmdp, q: &[f64], increment: &[f64], t: f64) -> f64 {
    let n_actions = mdp.n_actions();
    let mut total = 0.0;
    for l in 0..mdp.layer_count() {
        let range = mdp.layer(l);
        let pairs = range.start * n_actions..range.end * n_actions;
        let mut s = 0.0;
        for p in pairs.clone() {
            if q[p] > 0.0 {
                s += q[p] * (t * increment[p]).exp_m1();
            }
        }
        total += if s > -0.5 {
            s.ln_1p()
        } else {
            // most of the mass shrinks; 1 + s would cancel
            let m = pairs
                .clone()
                .filter(|&p| q[p] > 0.0)
                .map(|p| q[p].ln() + t * increment[p])
                .fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = pairs
                .filter(|&p| q[p] > 0.0)
                .map(|p| (q[p].ln() + t * increment[p] - m).exp())
                .sum();
            m + sum.ln()
        };
    }
    total
}

type CoordinatePairs = (Vec<(usize, f64)>, Vec<(usize, f64)>);

/// Pairs whose `β` moves with the potential of each state, at rate `+1` for
/// its own actions (first list) and `−P(y|x,a)` for pairs leading into it.
fn coordinate_pairs(mdp: &LayeredAmdp) -> Vec<CoordinatePairs> {
    let n_actions = mdp.n_actions();
    let mut pairs = vec![(Vec::new(), Vec::new()); mdp.n_states()];
    for x in mdp.decision_states() {
        for a in 0..n_actions {
            pairs[x].0.push((x * n_actions + a, 1.0));
            for &(y, p) in mdp.successors(x, a) {
                pairs[y].1.push((x * n_actions + a, -p));
            }
        }
    }
    pairs
}

/// One layer of the objective when only `pairs` move: the shift `m`, then
/// `Σ r q e^{t r − m}` and `Σ q e^{t r − m}` including the unmoved rest.
fn moved_layer(q: &[f64], pairs: &[(usize, f64)], t: f64) -> (f64, f64, f64) {
    let rest = (1.0 - pairs.iter().map(|&(p, _)| q[p]).sum::<f64>()).max(0.0);
    let m = pairs
        .iter()
        .filter(|&&(p, _)| q[p] > 0.0)
        .map(|&(p, r)| q[p].ln() + t * r)
        .fold(rest.ln(), f64::max);
    let (mut num, mut den) = (0.0, rest * (-m).exp());
    for &(p, r) in pairs {
        if q[p] > 0.0 {
            let w = (q[p].ln() + t * r - m).exp();
            num += r * w;
            den += w;
        }
    }
    (m, num, den)
}

/// Minimizer of the objective along one coordinate, from the weights `q`.
fn coordinate_minimizer(q: &[f64], own: &[(usize, f64)], into: &[(usize, f64)]) -> f64 {
    let slope = |t: f64| {
        let (_, n1, d1) = moved_layer(q, own, t);
        let (_, n2, d2) = moved_layer(q, into, t);
        n1 / d1 + n2 / d2
    };
    let s0 = slope(0.0);
    if !(s0 != 0.0) {
        return 0.0;
    }
    let dir = -s0.signum();
    let mut hi = 1.0;
    while slope(dir * hi) * s0 > 0.0 {
        if hi >= MAX_BALANCE_SHIFT {
            return dir * MAX_BALANCE_SHIFT;
        }
        hi *= 2.0;
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(dir * mid) * s0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    dir * (0.5 * (lo + hi)).min(MAX_BALANCE_SHIFT)
}

/// Moves states whose own potential is far from balancing them, each by the
/// exact minimizer along its coordinate. Newton steps cover such states only
/// a little at a time, since they share one step length with the rest. The
/// moves are tried jointly, then the most promising one alone.
fn balance_states(
    problem: &DualProblem,
    interior: &[StateId],
    pairs: &[CoordinatePairs],
    eval: &Evaluation,
    v: &[f64],
) -> Option<(Vec<f64>, Evaluation)> {
    let q = &eval.candidate;
    let mut moves = Vec::new();
    for &y in interior {
        let (own, into) = (&pairs[y].0, &pairs[y].1);
        let t = coordinate_minimizer(q, own, into);
        if t.abs() > 1.0 {
            let (m1, _, d1) = moved_layer(q, own, t);
            let (m2, _, d2) = moved_layer(q, into, t);
            moves.push((y, t, m1 + d1.ln() + m2 + d2.ln()));
        }
    }
    if moves.is_empty() {
        return None;
    }
    let mut scale = 1.0;
    for _ in 0..6 {
        let mut trial = v.to_vec();
        for &(y, t, _) in &moves {
            trial[y] += scale * t;
        }
        let cand = problem.evaluate(&trial);
        if cand.value < eval.value {
            return Some((trial, cand));
        }
        scale *= 0.5;
    }
    let &(y, t, _) = moves.iter().min_by(|a, b| a.2.total_cmp(&b.2))?;
    let mut trial = v.to_vec();
    trial[y] += t;
    let cand = problem.evaluate(&trial);
    (cand.value < eval.value).then_some((trial, cand))
}

/// Hessian of the dual objective over the interior layers, in blocks.
struct BlockHessian {
    /// First state id of each interior layer, plus the end.
    starts: Vec<StateId>,
    diag: Vec<DMatrix<f64>>,
    /// Coupling between interior layers `i` and `i + 1`.
    upper: Vec<DMatrix<f64>>,
}

impl BlockHessian {
    /// Covariance of the pair features under the candidate weights. Features
    /// are shifted by those of the heaviest pair in the layer, which keeps
    /// each term sparse and leaves little to cancel in nearly deterministic
    /// layers.
    fn assemble(mdp: &LayeredAmdp, eval: &Evaluation) -> Self {
        let big_l = mdp.layer_count();
        let n_actions = mdp.n_actions();
        let starts: Vec<StateId> = (1..=big_l).map(|l| mdp.layer(l).start).collect();
        let width = |i: usize| starts[i + 1] - starts[i];
        let n_blocks = big_l - 1;
        let mut diag: Vec<DMatrix<f64>> = (0..n_blocks).map(|i| DMatrix::zeros(width(i), width(i))).collect();
        let mut upper: Vec<DMatrix<f64>> = (0..n_blocks.saturating_sub(1))
            .map(|i| DMatrix::zeros(width(i), width(i + 1)))
            .collect();
        let mut own_part: Vec<(usize, f64)> = Vec::new();
        let mut next_part: Vec<(usize, f64)> = Vec::new();
        for m in 0..big_l {
            // block index of layer m is m - 1; its successors live in block m
            let own = m.checked_sub(1);
            let next = (m + 1 < big_l).then_some(m);
            let pairs = mdp.layer(m).start * n_actions..mdp.layer(m).end * n_actions;
            let Some(heaviest) = pairs.clone().max_by(|&a, &b| eval.candidate[a].total_cmp(&eval.candidate[b])) else {
                continue;
            };
            let (hx, ha) = (heaviest / n_actions, heaviest % n_actions);
            // summed from the light pairs directly; mean minus heaviest would cancel
            let mut nu_own = own.map(|i| DVector::zeros(width(i)));
            let mut nu_next = next.map(|j| DVector::zeros(width(j)));
            for p in pairs {
                let q = eval.candidate[p];
                if q == 0.0 || p == heaviest {
                    continue;
                }
                let (x, a) = (p / n_actions, p % n_actions);
                own_part.clear();
                next_part.clear();
                if let Some(i) = own {
                    if x != hx {
                        own_part.push((x - starts[i], 1.0));
                        own_part.push((hx - starts[i], -1.0));
                    }
                }
                if let Some(j) = next {
                    for &(n, pr) in mdp.successors(x, a) {
                        next_part.push((n - starts[j], -pr));
                    }
                    for &(n, pr) in mdp.successors(hx, ha) {
                        next_part.push((n - starts[j], pr));
                    }
                }
                if let Some(nu) = nu_own.as_mut() {
                    for &(r, u) in &own_part {
                        nu[r] += q * u;
                    }
                }
                if let Some(nu) = nu_next.as_mut() {
                    for &(r, u) in &next_part {
                        nu[r] += q * u;
                    }
                }
                if let Some(i) = own {
                    for &(r, u) in &own_part {
                        for &(c, w) in &own_part {
                            diag[i][(r, c)] += q * u * w;
                        }
                        if next.is_some() {
                            for &(c, w) in &next_part {
                                upper[i][(r, c)] += q * u * w;
                            }
                        }
                    }
                }
                if let Some(j) = next {
                    for &(r, u) in &next_part {
                        for &(c, w) in &next_part {
                            diag[j][(r, c)] += q * u * w;
                        }
                    }
                }
            }
            // subtract the outer product of the shifted mean
            if let (Some(i), Some(d)) = (own, &nu_own) {
                diag[i].ger(-1.0, d, d, 1.0);
                if let Some(e) = &nu_next {
                    upper[i].ger(-1.0, d, e, 1.0);
                }
            }
            if let (Some(j), Some(e)) = (next, &nu_next) {
                diag[j].ger(-1.0, e, e, 1.0);
            }
        }
        Self { starts, diag, upper }
    }

    /// Solves `(H + ridge) d = rhs` by block elimination, or `None` if a
    /// pivot block is not positive definite.
    fn solve(&self, rhs: &[f64], relative_ridge: f64) -> Option<Vec<f64>> {
        let n = self.diag.len();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut factors = Vec::with_capacity(n);
        let mut coupled: Vec<DMatrix<f64>> = Vec::with_capacity(n.saturating_sub(1));
        // rounding noise follows the heaviest entries, so nearly empty blocks
        // get a ridge sized by the whole matrix
        let scale = self
            .diag
            .iter()
            .flat_map(|d| d.diagonal().iter().copied().collect::<Vec<_>>())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut schur = self.diag[0].clone();
        for i in 0..n {
            let ridge = relative_ridge * scale + 1e-300;
            for k in 0..schur.nrows() {
                schur[(k, k)] += ridge;
            }
            let chol = schur.clone().cholesky()?;
            if i + 1 < n {
                let x = chol.solve(&self.upper[i]);
                schur = &self.diag[i + 1] - self.upper[i].transpose() * &x;
                coupled.push(x);
            }
            factors.push(chol);
        }
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let b = DVector::from_column_slice(&rhs[self.starts[i] - self.starts[0]..self.starts[i + 1] - self.starts[0]]);
            let yi = match i {
                0 => b,
                _ => b - coupled[i - 1].transpose() * &y[i - 1],
            };
            y.push(yi);
        }
        let mut x: Vec<DVector<f64>> = vec![DVector::zeros(0); n];
        for i in (0..n).rev() {
            let mut xi = factors[i].solve(&y[i]);
            if i + 1 < n {
                xi -= &coupled[i] * &x[i + 1];
            }
            x[i] = xi;
        }
        let out: Vec<f64> = x.iter().flat_map(|b| b.iter().copied()).collect();
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// [`solve_dual`] reporting the objective after every accepted iterate,
/// starting with the initial point.
pub fn solve_dual_traced(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    loss: &CostTable,
    cfg: &UpdateConfig,
    warm_start: Option<&DualPotential>,
    mut on_iterate: impl FnMut(f64),
) -> Result<DualSolution> {
    if loss.values().iter().any(|l| l.is_nan()) {
        return Err(Error::InvalidParameter("loss contains NaN".into()));
    }
    let problem = DualProblem::new(mdp, rho_t.table(), loss, cfg.eta);
    let mut v = match warm_start {
        Some(w) if w.values.len() == mdp.n_states() => w.values.clone(),
        _ => vec![0.0; mdp.n_states()],
    };
    v[mdp.initial_state()] = 0.0;
    v[mdp.terminal_state()] = 0.0;
    let interior: Vec<StateId> = (1..mdp.layer_count()).flat_map(|l| mdp.layer(l)).collect();
    let pairs = coordinate_pairs(mdp);

    let mut eval = problem.evaluate(&v);
    if warm_start.is_some() {
        // a stale potential can be far worse than none
        let cold = problem.evaluate(&vec![0.0; mdp.n_states()]);
        if !(eval.value <= cold.value) {
            v.iter_mut().for_each(|x| *x = 0.0);
            eval = cold;
        }
    }
    let mut objective = eval.value;
    on_iterate(objective);
    let mut residual = eval.residual(mdp);
    let mut iterations = 0;
    let mut direction = vec![0.0; mdp.n_states()];
    let mut increment = vec![0.0; mdp.n_states() * mdp.n_actions()];
    let mut trial = v.clone();
    let mut stalled = 0;
    let mut best_residual = residual;
    while residual > cfg.dual_tol && iterations < cfg.dual_max_iters {
        let grad = eval.gradient(mdp);
        let rhs: Vec<f64> = interior.iter().map(|&y| -grad[y]).collect();
        let hessian = BlockHessian::assemble(mdp, &eval);
        let newton = [1e-10, 1e-7, 1e-4]
            .iter()
            .find_map(|&ridge| hessian.solve(&rhs, ridge));
        let mut slope = 0.0;
        if let Some(d) = &newton {
            for (k, &y) in interior.iter().enumerate() {
                direction[y] = d[k].clamp(-MAX_LOG_STEP / 2.0, MAX_LOG_STEP / 2.0);
                slope += grad[y] * direction[y];
            }
        }
        if newton.is_none() || !(slope < 0.0) {
            // fall back to a diagonally scaled gradient step
            slope = 0.0;
            for &y in &interior {
                let scale = eval.outflow[y] + eval.inflow[y];
                direction[y] = if scale > 0.0 { -grad[y] / scale } else { 0.0 };
                slope += grad[y] * direction[y];
            }
        }
        if !(slope < 0.0) {
            break;
        }
        beta_increment(mdp, &direction, &mut increment);
        let largest = increment.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let mut step = if largest > MAX_LOG_STEP { MAX_LOG_STEP / largest } else { 1.0 };
        let mut accepted = None;
        for _ in 0..80 {
            let change = objective_change(mdp, &eval.candidate, &increment, step);
            if change <= 1e-4 * step * slope {
                for &y in &interior {
                    trial[y] = v[y] + step * direction[y];
                }
                accepted = Some((problem.evaluate(&trial), change));
                break;
            }
            step *= 0.5;
        }
        // None keeps the Newton trial point
        let mut chosen = accepted.map(|(cand, change)| (None, cand, change));
        if step < 1.0 || chosen.is_none() || stalled > 0 {
            if let Some((shifted, cand)) = balance_states(&problem, &interior, &pairs, &eval, &v) {
                let change = cand.value - eval.value;
                if chosen.as_ref().is_none_or(|c| change < c.2) {
                    chosen = Some((Some(shifted), cand, change));
                }
            }
        }
        let Some((shifted, cand, change)) = chosen else { break };
        match shifted {
            Some(p) => v = p,
            None => std::mem::swap(&mut v, &mut trial),
        }
        trial.copy_from_slice(&v);
        eval = cand;
        objective += change;
        residual = eval.residual(mdp);
        iterations += 1;
        on_iterate(objective);
        // at the rounding floor accepted steps stop improving either measure
        if residual < 0.9 * best_residual || change < -1e-10 * (1.0 + objective.abs()) {
            best_residual = best_residual.min(residual);
            stalled = 0;
        } else {
            stalled += 1;
        }
        if stalled >= STALL_LIMIT {
            break;
        }
    }
    if residual > cfg.dual_tol && (residual > 10.0 * cfg.dual_tol || !residual.is_finite()) {
        return Err(Error::DualNotConverged {
            iterations,
            residual,
        });
    }
    let mut next = Table::zeros(mdp.n_states(), mdp.n_actions());
    let limit = mdp.decision_states().end * mdp.n_actions();
    next.values_mut()[..limit].copy_from_slice(&eval.candidate[..limit]);
    Ok(DualSolution {
        potential: DualPotential { values: v },
        next: OccupancyMeasure::from_table_unchecked(next),
        iterations,
        residual,
        objective: eval.value,
    })
}

/// Outcome of one mirror-descent update.
#[derive(Debug, Clone)]
pub struct OmdStep {
    pub next: OccupancyMeasure,
    pub potential: DualPotential,
    pub iterations: usize,
    pub residual: f64,
    /// Pairs whose occupancy was raised to [`OCCUPANCY_FLOOR`] before the update.
    pub clamped: usize,
    /// Pairs that fell below [`OCCUPANCY_FLOOR`] in this update.
    pub collapsed: Vec<(StateId, usize)>,
}

fn step_with_loss(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    loss: &CostTable,
    cfg: &UpdateConfig,
    warm_start: Option<&DualPotential>,
) -> Result<OmdStep> {
    let n_actions = mdp.n_actions();
    let mut base = rho_t.table().clone();
    let mut clamped = 0;
    for x in mdp.decision_states() {
        for a in 0..n_actions {
            if base.get(x, a) < OCCUPANCY_FLOOR {
                base.set(x, a, OCCUPANCY_FLOOR);
                clamped += 1;
            }
        }
    }
    let base = OccupancyMeasure::from_table_unchecked(base);
    let sol = solve_dual(mdp, &base, loss, cfg, warm_start)?;
    let mut collapsed = Vec::new();
    for x in mdp.decision_states() {
        for a in 0..n_actions {
            if sol.next.get(x, a) < OCCUPANCY_FLOOR && rho_t.get(x, a) >= OCCUPANCY_FLOOR {
                collapsed.push((x, a));
            }
        }
    }
    if !collapsed.is_empty() {
        warn!("{} occupancy entries collapsed below {OCCUPANCY_FLOOR:e}", collapsed.len());
    }
    Ok(OmdStep {
        next: sol.next,
        potential: sol.potential,
        iterations: sol.iterations,
        residual: sol.residual,
        clamped,
        collapsed,
    })
}

/// Bandit-feedback update on the estimate `ĉ_t` and predictors `M_t`, `M_{t+1}`.
pub fn omd_step(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    c_hat: &CostTable,
    m_t: &CostTable,
    m_next: &CostTable,
    cfg: &UpdateConfig,
    warm_start: Option<&DualPotential>,
) -> Result<OmdStep> {
    step_with_loss(mdp, rho_t, &effective_loss(c_hat, m_t, m_next), cfg, warm_start)
}

/// Full-information update: the observed `c_t` replaces the estimate.
pub fn omd_step_full_info(
    mdp: &LayeredAmdp,
    rho_t: &OccupancyMeasure,
    cost: &CostTable,
    m_t: &CostTable,
    m_next: &CostTable,
    cfg: &UpdateConfig,
    warm_start: Option<&DualPotential>,
) -> Result<OmdStep> {
    omd_step(mdp, rho_t, cost, m_t, m_next, cfg, warm_start)
}
