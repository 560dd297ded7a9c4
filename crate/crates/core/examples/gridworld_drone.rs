//! The drone gridworld: layout of the turbulence cells, a short experiment
//! comparing the algorithms, and CSV/SVG outputs.
//!
//! cargo run --release --example gridworld_drone -- [output-dir]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oreps_opix::environment::EnvironmentConfig;
use oreps_opix::gridworld::{GridConfig, GridWorld, StartMode};
use oreps_opix::harness::{emit_outputs, run_experiment, ExperimentConfig, SolverConfig, VariantConfig};
use oreps_opix::learner::{Algorithm, Feedback};
use oreps_opix::predictors::PredictorKind;

fn main() -> oreps_opix::Result<()> {
    let grid = GridConfig {
        change_period: 250,
        start: StartMode::Random,
        ..GridConfig::default()
    };
    let world = GridWorld::new(grid.clone())?;
    let layout = world.initial_layout(&mut ChaCha8Rng::seed_from_u64(1))?;
    for y in (0..grid.height).rev() {
        let row: String = (0..grid.width)
            .map(|x| {
                if [x, y] == grid.goal {
                    'G'
                } else if layout.cells.contains(&(x, y)) {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{row}");
    }
    println!("{} states, {} layers", world.mdp().n_states(), world.mdp().layer_count());

    let perfect = VariantConfig::new(Algorithm::OrepsOpix, Feedback::Bandit, PredictorKind::Perfect)
        .with_eta(0.2)
        .with_gamma(0.1);
    let latest = VariantConfig::new(
        Algorithm::OrepsOpix,
        Feedback::Bandit,
        PredictorKind::Latest { reset_period: Some(250) },
    )
    .with_eta(0.2)
    .with_gamma(0.1);
    let ix = VariantConfig::new(Algorithm::OrepsIx, Feedback::Bandit, PredictorKind::Zero);
    let cfg = ExperimentConfig {
        episodes: 1500,
        repetitions: 2,
        seed: 2024,
        output_dir: None,
        solver: SolverConfig::default(),
        environment: EnvironmentConfig::Grid(grid),
        variants: vec![perfect, latest, ix],
    };
    let report = run_experiment(&cfg)?;
    for v in &report.variants {
        println!("{:<32} mean final average regret {:.4}", v.label, v.mean_final_average_regret(cfg.episodes).unwrap());
    }
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out/gridworld_drone".into());
    let paths = emit_outputs(&report, dir.as_ref())?;
    println!("wrote {} and {}", paths.trace.display(), paths.regret_plot.display());
    Ok(())
}
