mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oreps_opix::amdp::{kl_divergence, regret_trace, uniform_occupancy, OCCUPANCY_TOL};
use oreps_opix::estimators::{ix_estimate, opix_estimate, uob_opix_estimate};
use oreps_opix::omd::effective_loss;
use oreps_opix::{best_in_hindsight, induce_policy, occupancy_from_policy, omd_step, rollout, UpdateConfig};

use common::{brute_force_best, flow, primal_oracle, random_mdp, random_policy, random_table};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn policy_occupancy_lies_in_polytope(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 4, 4, 3);
        let pi = random_policy(&mut rng, &mdp);
        let rho = occupancy_from_policy(&mdp, &pi);
        prop_assert!(rho.residuals(&mdp).max() <= OCCUPANCY_TOL);
        let (_, reference) = flow(&mdp, mdp.kernel(), pi.table().values());
        for (a, b) in rho.table().values().iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn induced_policy_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 3, 4, 3);
        let pi = random_policy(&mut rng, &mdp);
        let back = induce_policy(&occupancy_from_policy(&mdp, &pi));
        for x in mdp.decision_states() {
            for a in 0..mdp.n_actions() {
                prop_assert!((back.prob(x, a) - pi.prob(x, a)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dynamic_program_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 3, 3, 2);
        let cost = random_table(&mut rng, &mdp, -1.0, 1.0);
        let best = best_in_hindsight(&mdp, &cost);
        prop_assert!((best.value - brute_force_best(&mdp, &cost)).abs() <= 1e-12);
        prop_assert!((best.occupancy.table().dot(&cost) - best.value).abs() <= 1e-12);
    }

    #[test]
    fn update_stays_in_polytope(seed in any::<u64>(), eta in 0.01f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 4, 4, 3);
        let rho = occupancy_from_policy(&mdp, &random_policy(&mut rng, &mdp));
        let c_hat = random_table(&mut rng, &mdp, 0.0, 5.0);
        let m_t = random_table(&mut rng, &mdp, 0.0, 1.0);
        let m_next = random_table(&mut rng, &mdp, 0.0, 1.0);
        let step = omd_step(&mdp, &rho, &c_hat, &m_t, &m_next, &UpdateConfig::new(eta).unwrap(), None).unwrap();
        prop_assert!(step.next.residuals(&mdp).max() <= 1e-8);
        prop_assert!(step.collapsed.is_empty());
    }

    #[test]
    fn estimators_agree_on_shared_cases(seed in any::<u64>(), gamma in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, 3, 3, 3);
        let rho = occupancy_from_policy(&mdp, &random_policy(&mut rng, &mdp));
        let cost = random_table(&mut rng, &mdp, 0.0, 1.0);
        let traj = rollout(&mdp, &rho, &cost, &mut rng);
        let zero = mdp.zero_table();
        prop_assert_eq!(opix_estimate(&traj, &rho, &zero, gamma).unwrap(), ix_estimate(&traj, &rho, gamma).unwrap());
        let m = random_table(&mut rng, &mdp, 0.0, 1.0);
        prop_assert_eq!(
            uob_opix_estimate(&traj, rho.table(), &m, gamma).unwrap(),
            opix_estimate(&traj, &rho, &m, gamma).unwrap()
        );
        let est = opix_estimate(&traj, &rho, &m, gamma).unwrap();
        for x in mdp.decision_states() {
            for a in 0..mdp.n_actions() {
                let expect = if traj.contains(x, a) {
                    (cost.get(x, a) - m.get(x, a)) / (rho.get(x, a) + gamma) + m.get(x, a)
                } else {
                    m.get(x, a)
                };
                prop_assert_eq!(est.get(x, a), expect);
            }
        }
    }
}

#[test]
fn update_minimizes_step_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let mdp = random_mdp(&mut rng, 2, 3, 3);
        let rho = occupancy_from_policy(&mdp, &random_policy(&mut rng, &mdp));
        let loss = random_table(&mut rng, &mdp, 0.0, 2.0);
        let zero = mdp.zero_table();
        let eta = 0.7;
        let step = omd_step(&mdp, &rho, &loss, &zero, &zero, &UpdateConfig::new(eta).unwrap(), None).unwrap();
        let oracle = primal_oracle(&mdp, &rho, &loss, eta);
        for (a, b) in step.next.table().values().iter().zip(&oracle.rho) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        // the update never does worse than the previous iterate on the step objective
        let kl = kl_divergence(&step.next, &rho).unwrap();
        assert!(eta * step.next.table().dot(&loss) + kl <= eta * rho.table().dot(&loss) + 1e-12);
    }
}

#[test]
fn predictor_shift_enters_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mdp = random_mdp(&mut rng, 3, 3, 2);
    let c = random_table(&mut rng, &mdp, 0.0, 1.0);
    let m0 = random_table(&mut rng, &mdp, 0.0, 1.0);
    let m1 = random_table(&mut rng, &mdp, 0.0, 1.0);
    let loss = effective_loss(&c, &m0, &m1);
    let cfg = UpdateConfig::new(0.5).unwrap();
    let rho = uniform_occupancy(&mdp);
    let a = omd_step(&mdp, &rho, &c, &m0, &m1, &cfg, None).unwrap();
    let b = omd_step(&mdp, &rho, &loss, &mdp.zero_table(), &mdp.zero_table(), &cfg, None).unwrap();
    assert_eq!(a.next, b.next);
}

#[test]
fn regret_trace_accumulates() {
    let r = regret_trace(&[1.0, 0.5, 2.0], &[0.5, 0.5, 1.0]).unwrap();
    assert_eq!(r, vec![0.5, 0.5, 1.5]);
    assert!(regret_trace(&[1.0], &[]).is_err());
}
