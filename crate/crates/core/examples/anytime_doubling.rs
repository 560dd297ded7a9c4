//! The doubling-trick controller on the gridworld: phases, step sizes and
//! the accumulated statistic, with zero and perfect predictors.
//!
//! cargo run --release --example anytime_doubling

use oreps_opix::environment::EnvironmentConfig;
use oreps_opix::gridworld::GridConfig;
use oreps_opix::harness::{run_experiment, ExperimentConfig, SolverConfig, VariantConfig};
use oreps_opix::learner::{Algorithm, Feedback};
use oreps_opix::predictors::PredictorKind;

fn main() -> oreps_opix::Result<()> {
    let mut variants = Vec::new();
    for predictor in [PredictorKind::Zero, PredictorKind::Perfect] {
        let mut v = VariantConfig::new(Algorithm::OrepsOpixAnytime, Feedback::Bandit, predictor);
        v.eta0 = Some(1.0);
        v.kappa = Some(2);
        variants.push(v);
    }
    let cfg = ExperimentConfig {
        episodes: 3000,
        repetitions: 1,
        seed: 11,
        output_dir: None,
        solver: SolverConfig::default(),
        environment: EnvironmentConfig::Grid(GridConfig::default()),
        variants,
    };
    let report = run_experiment(&cfg)?;
    for v in &report.variants {
        println!("{}", v.label);
        let records = &v.repetitions[0].records;
        let mut last_phase = 0;
        for r in records {
            if r.phase != last_phase {
                println!("  episode {:>5}: phase {} eta {:.5} gamma {:.5}", r.episode, r.phase, r.eta, r.gamma);
                last_phase = r.phase;
            }
        }
        let end = records.last().unwrap();
        println!("  final average regret {:.4}, psi {:.1}", end.average_regret, end.psi);
    }
    Ok(())
}
