//! Occupancy measures on a small layered MDP: forward flow of a policy, the
//! induced policy, flow residuals and the best fixed policy for a cost.
//!
//! cargo run --example occupancy_basics

use oreps_opix::amdp::uniform_occupancy;
use oreps_opix::{best_in_hindsight, induce_policy, occupancy_from_policy, LayeredAmdp, Policy, Table};

fn main() -> oreps_opix::Result<()> {
    // 0 -> {1, 2} -> 3, two actions; action 0 mostly reaches state 1.
    let mdp = LayeredAmdp::new(&[1, 2, 1], 2, |x, a| match (x, a) {
        (0, 0) => vec![(1, 0.8), (2, 0.2)],
        (0, 1) => vec![(1, 0.3), (2, 0.7)],
        _ => vec![(3, 1.0)],
    })?;
    println!("layers L = {}, |X| = {}, |A| = {}", mdp.layer_count(), mdp.n_states(), mdp.n_actions());

    let policy = Policy::from_table_unchecked(Table::from_values(2, vec![0.9, 0.1, 0.5, 0.5, 0.2, 0.8, 0.5, 0.5])?);
    let rho = occupancy_from_policy(&mdp, &policy);
    for x in mdp.decision_states() {
        println!("rho({x}, .) = {:?}", rho.table().row(x));
    }
    println!("max flow residual {:.2e}", rho.residuals(&mdp).max());

    let back = induce_policy(&rho);
    println!("induced policy at 1: {:?}", back.row(1));

    let uniform = uniform_occupancy(&mdp);
    println!("uniform occupancy at 2: {:?}", uniform.table().row(2));

    let mut cost = mdp.zero_table();
    cost.set(0, 0, 0.1);
    cost.set(1, 0, 1.0);
    cost.set(1, 1, 0.9);
    cost.set(2, 1, 0.2);
    let best = best_in_hindsight(&mdp, &cost);
    println!("best fixed policy value {:.4}", best.value);
    for x in mdp.decision_states() {
        println!("  state {x}: {:?}", best.policy.row(x));
    }
    Ok(())
}
