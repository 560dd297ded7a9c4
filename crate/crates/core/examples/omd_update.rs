//! One mirror-descent update: exponential weights on a two-armed bandit, and
//! a layered update whose dual solve is traced iterate by iterate.
//!
//! cargo run --example omd_update

use oreps_opix::amdp::uniform_occupancy;
use oreps_opix::omd::solve_dual_traced;
use oreps_opix::{omd_step, LayeredAmdp, Table, UpdateConfig};

fn main() -> oreps_opix::Result<()> {
    let bandit = LayeredAmdp::new(&[1, 1], 2, |_, _| vec![(1, 1.0)])?;
    let rho = uniform_occupancy(&bandit);
    let loss = Table::from_values(2, vec![1.0, 0.0, 0.0, 0.0])?;
    let zero = bandit.zero_table();
    let step = omd_step(&bandit, &rho, &loss, &zero, &zero, &UpdateConfig::new(1.0)?, None)?;
    println!("bandit: {:?} (expected [1, e] / (1 + e))", step.next.table().row(0));

    let mdp = LayeredAmdp::new(&[1, 3, 3, 1], 3, |x, a| match x {
        0 => vec![(1 + a, 0.6), (1 + (a + 1) % 3, 0.4)],
        1..=3 => vec![(4 + (x + a) % 3, 0.5), (4 + (x + 2 * a + 1) % 3, 0.5)],
        _ => vec![(7, 1.0)],
    })?;
    let rho = uniform_occupancy(&mdp);
    let mut loss = mdp.zero_table();
    for (i, v) in loss.values_mut().iter_mut().enumerate() {
        *v = ((i * 37) % 11) as f64 / 5.0;
    }
    let cfg = UpdateConfig::new(2.0)?;
    let mut trace = Vec::new();
    let sol = solve_dual_traced(&mdp, &rho, &loss, &cfg, None, |f| trace.push(f))?;
    println!("\nlayered: {} Newton iterations, residual {:.1e}", sol.iterations, sol.residual);
    for (k, f) in trace.iter().enumerate() {
        println!("  iterate {k}: objective {f:.12}");
    }
    for x in mdp.decision_states() {
        println!("  rho({x}, .) = {:.4?}", sol.next.table().row(x));
    }
    Ok(())
}
