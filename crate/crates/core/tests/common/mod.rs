//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::Rng;

use oreps_opix::amdp::TransitionKernel;
use oreps_opix::{CostTable, LayeredAmdp, OccupancyMeasure, Policy, Table};

/// Random layered MDP with full-support kernel rows.
pub fn random_mdp<R: Rng>(rng: &mut R, layers: usize, max_width: usize, max_actions: usize) -> LayeredAmdp {
    let mut sizes = vec![1];
    for _ in 1..layers {
        sizes.push(rng.gen_range(1..=max_width));
    }
    sizes.push(1);
    let n_actions = rng.gen_range(2..=max_actions.max(2));
    let mut offsets = vec![0];
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let layer_of = |x: usize| offsets.iter().rposition(|&o| o <= x).unwrap();
    let weights: Vec<Vec<f64>> = (0..offsets[sizes.len()] * n_actions)
        .map(|_| (0..max_width).map(|_| rng.gen_range(0.05..1.0)).collect())
        .collect();
    LayeredAmdp::new(&sizes, n_actions, |x, a| {
        let l = layer_of(x);
        let next = offsets[l + 1]..offsets[l + 2];
        let w = &weights[x * n_actions + a][..next.len()];
        let total: f64 = w.iter().sum();
        next.zip(w).map(|(n, &p)| (n, p / total)).collect()
    })
    .unwrap()
}

pub fn random_table<R: Rng>(rng: &mut R, mdp: &LayeredAmdp, lo: f64, hi: f64) -> CostTable {
    let mut t = mdp.zero_table();
    for x in mdp.decision_states() {
        for a in 0..mdp.n_actions() {
            t.set(x, a, rng.gen_range(lo..hi));
        }
    }
    t
}

pub fn random_policy<R: Rng>(rng: &mut R, mdp: &LayeredAmdp) -> Policy {
    let mut t = mdp.zero_table();
    for x in mdp.decision_states() {
        let w: Vec<f64> = (0..mdp.n_actions()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        for (a, v) in w.into_iter().enumerate() {
            t.set(x, a, v / s);
        }
    }
    Policy::from_table_unchecked(t)
}

/// State distribution and pair occupancy of `policy`, by forward recursion.
pub fn flow(mdp: &LayeredAmdp, kernel: &TransitionKernel, policy: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let na = mdp.n_actions();
    let mut q = vec![0.0; mdp.n_states()];
    q[mdp.initial_state()] = 1.0;
    let mut rho = vec![0.0; mdp.n_states() * na];
    for x in mdp.decision_states() {
        for a in 0..na {
            let m = q[x] * policy[x * na + a];
            rho[x * na + a] = m;
            for &(n, p) in kernel.successors(x, a) {
                q[n] += p * m;
            }
        }
    }
    (q, rho)
}

fn softmax_policy(mdp: &LayeredAmdp, theta: &[f64]) -> Vec<f64> {
    let na = mdp.n_actions();
    let mut pi = vec![0.0; theta.len()];
    for x in mdp.decision_states() {
        let row = &theta[x * na..(x + 1) * na];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|t| (t - m).exp()).sum();
        for a in 0..na {
            pi[x * na + a] = (row[a] - m).exp() / z;
        }
    }
    pi
}

/// `η⟨ρ,ℓ⟩ + Σ ρ log(ρ/ρ_t)`, the objective of one mirror-descent step.
pub fn primal_objective(eta: f64, loss: &[f64], rho_t: &[f64], rho: &[f64]) -> f64 {
    rho.iter()
        .zip(rho_t)
        .zip(loss)
        .map(|((&r, &r0), &l)| {
            let ent = if r > 0.0 { r * (r / r0).ln() } else { 0.0 };
            eta * r * l + ent
        })
        .sum()
}

/// Objective and gradient with respect to softmax logits, via the policy
/// gradient identity with pair costs `∂F/∂ρ = ηℓ + log(ρ/ρ_t) + 1`.
fn objective_and_gradient(mdp: &LayeredAmdp, eta: f64, loss: &[f64], rho_t: &[f64], theta: &[f64]) -> (f64, Vec<f64>) {
    let na = mdp.n_actions();
    let pi = softmax_policy(mdp, theta);
    let (q, rho) = flow(mdp, mdp.kernel(), &pi);
    let f = primal_objective(eta, loss, rho_t, &rho);
    let g: Vec<f64> = (0..rho.len())
        .map(|p| if rho_t[p] > 0.0 { eta * loss[p] + (rho[p] / rho_t[p]).ln() + 1.0 } else { 0.0 })
        .collect();
    let mut value = vec![0.0; mdp.n_states()];
    let mut qf = vec![0.0; rho.len()];
    for x in mdp.decision_states().rev() {
        let mut v = 0.0;
        for a in 0..na {
            let next: f64 = mdp.successors(x, a).iter().map(|&(n, p)| p * value[n]).sum();
            qf[x * na + a] = g[x * na + a] + next;
            v += pi[x * na + a] * qf[x * na + a];
        }
        value[x] = v;
    }
    let mut grad = vec![0.0; theta.len()];
    for x in mdp.decision_states() {
        for a in 0..na {
            grad[x * na + a] = q[x] * pi[x * na + a] * (qf[x * na + a] - value[x]);
        }
    }
    (f, grad)
}

pub struct PrimalSolution {
    pub rho: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
}

/// Minimizes the step objective over softmax policies with BFGS and a
/// backtracking line search, starting from the policy of `ρ_t`.
pub fn primal_oracle(mdp: &LayeredAmdp, rho_t: &OccupancyMeasure, loss: &CostTable, eta: f64) -> PrimalSolution {
    let na = mdp.n_actions();
    let r0 = rho_t.table().values();
    let n = r0.len();
    let warm: Vec<f64> = (0..n)
        .map(|p| {
            let x = p / na;
            let row: f64 = r0[x * na..(x + 1) * na].iter().sum();
            if row > 0.0 { (r0[p] / row).ln().max(-30.0) } else { 0.0 }
        })
        .collect();
    // softmax logits have flat saturated regions, so a second start guards against stalling in one
    let a = bfgs(mdp, r0, loss.values(), eta, warm);
    let b = bfgs(mdp, r0, loss.values(), eta, vec![0.0; n]);
    if a.objective <= b.objective { a } else { b }
}

fn bfgs(mdp: &LayeredAmdp, r0: &[f64], l: &[f64], eta: f64, mut theta: Vec<f64>) -> PrimalSolution {
    let n = r0.len();
    let (mut f, mut g) = objective_and_gradient(mdp, eta, l, r0, &theta);
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    let mut reset = false;
    for _ in 0..5000 {
        let gn = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gn < 1e-13 {
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            for i in 0..n * n {
                h[i] = if i % (n + 1) == 0 { 1.0 } else { 0.0 };
            }
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let longest = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut step = (4.0 / longest).min(1.0);
        let (mut th_new, mut f_new, mut g_new);
        loop {
            th_new = theta.iter().zip(&d).map(|(t, d)| t + step * d).collect::<Vec<_>>();
            (f_new, g_new) = objective_and_gradient(mdp, eta, l, r0, &th_new);
            if f_new <= f + 1e-4 * step * slope || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }
        if step < 1e-20 {
            // a stale curvature model can stall the search; retry from identity once
            if reset {
                break;
            }
            reset = true;
            for i in 0..n * n {
                h[i] = if i % (n + 1) == 0 { 1.0 } else { 0.0 };
            }
            continue;
        }
        reset = false;
        let s: Vec<f64> = th_new.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        theta = th_new;
        f = f_new;
        g = g_new;
    }
    let pi = softmax_policy(mdp, &theta);
    let (_, rho) = flow(mdp, mdp.kernel(), &pi);
    PrimalSolution {
        objective: primal_objective(eta, l, r0, &rho),
        rho,
        grad_norm: g.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    }
}

/// Brute-force minimum of `⟨ρ^π, c⟩` over every deterministic policy.
pub fn brute_force_best(mdp: &LayeredAmdp, cost: &CostTable) -> f64 {
    let na = mdp.n_actions();
    let states: Vec<usize> = mdp.decision_states().collect();
    let mut choice = vec![0usize; mdp.n_states()];
    let mut best = f64::INFINITY;
    loop {
        let policy = Policy::deterministic(na, &choice);
        let (_, rho) = flow(mdp, mdp.kernel(), policy.table().values());
        best = best.min(rho.iter().zip(cost.values()).map(|(r, c)| r * c).sum());
        let mut i = 0;
        loop {
            if i == states.len() {
                return best;
            }
            choice[states[i]] += 1;
            if choice[states[i]] < na {
                break;
            }
            choice[states[i]] = 0;
            i += 1;
        }
    }
}

/// Largest `p[target]` over a discretized simplex intersected with `boxes`.
pub fn grid_search_max(boxes: &[(f64, f64)], target: usize, resolution: usize) -> f64 {
    let k = boxes.len();
    let mut best = f64::NEG_INFINITY;
    let mut counts = vec![0usize; k];
    fn rec(
        j: usize,
        left: usize,
        counts: &mut Vec<usize>,
        boxes: &[(f64, f64)],
        target: usize,
        res: usize,
        best: &mut f64,
    ) {
        let k = boxes.len();
        if j == k - 1 {
            counts[j] = left;
            let ok = counts.iter().zip(boxes).all(|(&c, &(lo, hi))| {
                let p = c as f64 / res as f64;
                p >= lo - 1e-12 && p <= hi + 1e-12
            });
            if ok {
                *best = best.max(counts[target] as f64 / res as f64);
            }
            return;
        }
        for c in 0..=left {
            counts[j] = c;
            rec(j + 1, left - c, counts, boxes, target, res, best);
        }
    }
    rec(0, resolution, &mut counts, boxes, target, resolution, &mut best);
    best
}

pub fn table_from(mdp: &LayeredAmdp, values: Vec<f64>) -> Table {
    Table::from_values(mdp.n_actions(), values).unwrap()
}
