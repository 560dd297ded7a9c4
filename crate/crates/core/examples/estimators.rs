//! Bandit cost estimates from one trajectory, and Monte-Carlo moments of the
//! single-pair estimator.
//!
//! cargo run --example estimators

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oreps_opix::amdp::uniform_occupancy;
use oreps_opix::estimators::{ix_estimate, moment_oracle, opix_estimate};
use oreps_opix::{rollout, LayeredAmdp};

fn main() -> oreps_opix::Result<()> {
    let mdp = LayeredAmdp::new(&[1, 3, 1], 2, |x, a| match x {
        0 => vec![(1 + a, 0.7), (3, 0.3)],
        _ => vec![(4, 1.0)],
    })?;
    let rho = uniform_occupancy(&mdp);
    let mut cost = mdp.zero_table();
    for (i, v) in cost.values_mut().iter_mut().enumerate() {
        *v = 0.1 * (i % 7) as f64;
    }
    let mut predictor = cost.clone();
    predictor.values_mut().iter_mut().for_each(|m| *m *= 0.8);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let traj = rollout(&mdp, &rho, &cost, &mut rng);
    let path: Vec<_> = traj.steps.iter().map(|s| (s.state, s.action)).collect();
    println!("visited {path:?}");

    let gamma = 0.05;
    let ix = ix_estimate(&traj, &rho, gamma)?;
    let opix = opix_estimate(&traj, &rho, &predictor, gamma)?;
    for x in mdp.decision_states() {
        println!("state {x}: ix {:?}  opix {:?}", ix.row(x), opix.row(x));
    }

    println!("\n rho  gamma  c-M   mean (formula)      E(c^-M)^2 (bound)");
    for &(rho, gamma, gap) in &[(0.5, 0.0, 0.4), (0.1, 0.05, 0.8), (0.02, 0.1, -0.3)] {
        let (c, m) = (0.5 + gap / 2.0, 0.5 - gap / 2.0);
        let mo = moment_oracle(c, m, rho, gamma, 200_000, &mut rng)?;
        let mean = (rho * c + gamma * m) / (rho + gamma);
        let bound = gap * gap / (rho + gamma);
        println!(
            "{rho:5.2} {gamma:5.2} {gap:5.2}  {:.4}±{:.4} ({mean:.4})  {:.4} ({bound:.4})",
            mo.mean, mo.mean_se, mo.second_moment
        );
    }
    Ok(())
}
