//! The three cost predictors on a cost sequence that changes every 4
//! episodes, with the optimism audit `M ≤ c`.
//!
//! cargo run --example predictors

use oreps_opix::amdp::Step;
use oreps_opix::predictors::{optimism_violation, PredictorKind, PredictorState};
use oreps_opix::{CostTable, Table, Trajectory};

fn cost_at(t: u64) -> CostTable {
    // one state, two actions; the cheap action swaps every 4 episodes
    let low = (t - 1) / 4 % 2 == 0;
    Table::from_values(2, if low { vec![0.2, 0.9, 0.0, 0.0] } else { vec![0.9, 0.2, 0.0, 0.0] }).unwrap()
}

fn main() -> oreps_opix::Result<()> {
    let zero = Table::zeros(2, 2);
    let kinds = [
        PredictorKind::Zero,
        PredictorKind::Perfect,
        PredictorKind::Latest { reset_period: None },
        PredictorKind::Latest { reset_period: Some(4) },
    ];
    for kind in kinds {
        let mut p = PredictorState::new(kind, zero.clone(), Some(&cost_at(1)))?;
        let mut line = Vec::new();
        for t in 1..=12u64 {
            let c = cost_at(t);
            let audit = optimism_violation(p.predict(), &c);
            line.push(if audit.max_violation > 0.0 { 'x' } else { '.' });
            let action = (t % 2) as usize;
            let traj = Trajectory {
                steps: vec![Step { layer: 0, state: 0, action, cost: c.get(0, action) }],
            };
            p = p.update(&traj, Some(&cost_at(t + 1)))?;
        }
        println!("{:<10} violations {}", kind.label(), line.iter().collect::<String>());
    }
    Ok(())
}
