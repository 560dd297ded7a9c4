//! Learning the kernel of a noisy MDP: confidence set coverage and the upper
//! occupancy bound as counts accumulate.
//!
//! cargo run --release --example unknown_transition

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oreps_opix::amdp::rollout_policy;
use oreps_opix::environment::{random_cost, EnvironmentConfig, ToyConfig};
use oreps_opix::unknown_transition::TransitionStats;
use oreps_opix::{occupancy_from_policy, Policy};

fn main() -> oreps_opix::Result<()> {
    let toy = EnvironmentConfig::Toy(ToyConfig {
        layer_sizes: vec![1, 3, 3, 1],
        n_actions: 2,
        noise: 0.3,
        change_period: 100,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let env = toy.instantiate(1, &mut rng, &mut ChaCha8Rng::seed_from_u64(6))?;
    let mdp = &env.mdp;
    let horizon = 5000;
    let mut stats = TransitionStats::new(mdp, horizon, 0.1)?;
    let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let rho = occupancy_from_policy(mdp, &policy);
    let cost = random_cost(mdp, &mut rng);

    println!("episode  covered  max u-rho  sum u");
    for t in 1..=horizon {
        if t.is_power_of_two() || t == horizon {
            let u = stats.upper_occupancy_bound(&policy);
            let gap = u
                .values()
                .iter()
                .zip(rho.table().values())
                .fold(0.0_f64, |m, (u, r)| m.max(u - r));
            println!(
                "{t:>7}  {:>7}  {gap:9.4}  {:5.2}",
                stats.in_confidence_set(mdp.kernel()),
                u.sum()
            );
        }
        stats.record(&rollout_policy(mdp, &policy, &cost, &mut rng))?;
    }
    Ok(())
}
