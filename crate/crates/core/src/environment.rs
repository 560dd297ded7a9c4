//! Environments the harness can run: the drone gridworld and small random
//! layered MDPs. Each one expands into a fixed MDP plus a piecewise-constant
//! cost schedule, so every algorithm in an experiment faces the same costs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::amdp::{CostTable, LayeredAmdp};
use crate::error::{Error, Result};
use crate::gridworld::{GridConfig, GridWorld};

/// Random layered MDP with costs redrawn uniformly from `[0,1]` every
/// `change_period` episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    /// Sizes of all layers, first and last must be 1.
    pub layer_sizes: Vec<usize>,
    pub n_actions: usize,
    /// Probability mass spread over the whole next layer. Zero gives a
    /// deterministic kernel.
    #[serde(default)]
    pub noise: f64,
    pub change_period: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvironmentConfig {
    Grid(GridConfig),
    Toy(ToyConfig),
}

/// Costs `c_t` for `t = 1..=T`, stored once per change.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    starts: Vec<u64>,
    tables: Vec<CostTable>,
    horizon: u64,
}

impl CostSchedule {
    pub fn new(segments: Vec<(u64, CostTable)>, horizon: u64) -> Result<Self> {
        if segments.first().map(|s| s.0) != Some(1) {
            return Err(Error::InvalidParameter("cost schedule must start at episode 1".into()));
        }
        if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter("segment starts must increase".into()));
        }
        let (starts, tables) = segments.into_iter().unzip();
        Ok(Self {
            starts,
            tables,
            horizon,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Cost of episode `t` (1-based).
    pub fn at(&self, t: u64) -> &CostTable {
        let i = self.starts.partition_point(|&s| s <= t);
        &self.tables[i.max(1) - 1]
    }

    /// Episodes at which the cost changes, excluding episode 1.
    pub fn change_points(&self) -> &[u64] {
        &self.starts[1..]
    }

    pub fn segments(&self) -> impl Iterator<Item = (u64, &CostTable)> {
        self.starts.iter().copied().zip(&self.tables)
    }
}

/// An environment expanded for one repetition.
#[derive(Debug, Clone)]
pub struct Environment {
    pub mdp: LayeredAmdp,
    pub schedule: CostSchedule,
    /// Episodes at which a due turbulence move found no valid placement.
    pub failed_moves: Vec<u64>,
}

fn toy_mdp<R: Rng + ?Sized>(cfg: &ToyConfig, rng: &mut R) -> Result<LayeredAmdp> {
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidParameter(format!("noise must lie in [0,1], got {}", cfg.noise)));
    }
    if cfg.change_period == 0 {
        return Err(Error::InvalidParameter("change period must be positive".into()));
    }
    let mut offsets = vec![0];
    for &s in &cfg.layer_sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let layer_of = |x: usize| offsets.partition_point(|&o| o <= x) - 1;
    LayeredAmdp::new(&cfg.layer_sizes, cfg.n_actions, |x, _| {
        let l = layer_of(x);
        let (start, end) = (offsets[l + 1], offsets[l + 2]);
        let width = end - start;
        let target = start + rng.gen_range(0..width);
        let weights: Vec<f64> = (0..width).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        (start..end)
            .zip(weights)
            .map(|(n, w)| {
                let base = if n == target { 1.0 - cfg.noise } else { 0.0 };
                (n, base + cfg.noise * w / total)
            })
            .collect()
    })
}

/// Uniform `[0,1)` costs on decision states.
pub fn random_cost<R: Rng + ?Sized>(mdp: &LayeredAmdp, rng: &mut R) -> CostTable {
    let mut t = mdp.zero_table();
    for x in mdp.decision_states() {
        for a in 0..mdp.n_actions() {
            t.set(x, a, rng.gen());
        }
    }
    t
}

impl EnvironmentConfig {
    /// Builds the MDP from `structure_rng` and the cost schedule for
    /// `horizon` episodes from `cost_rng`.
    pub fn instantiate<R: Rng + ?Sized, S: Rng + ?Sized>(
        &self,
        horizon: u64,
        structure_rng: &mut R,
        cost_rng: &mut S,
    ) -> Result<Environment> {
        match self {
            EnvironmentConfig::Grid(cfg) => {
                let world = GridWorld::new(cfg.clone())?;
                let mut layout = world.initial_layout(cost_rng)?;
                let mut segments = vec![(1, world.cost_table(&layout))];
                let mut failed_moves = Vec::new();
                for t in 2..=horizon {
                    let m = world.advance_turbulence(&layout, t, cost_rng);
                    if m.failed {
                        failed_moves.push(t);
                    }
                    if m.moved && m.layout != layout {
                        layout = m.layout;
                        segments.push((t, world.cost_table(&layout)));
                    }
                }
                Ok(Environment {
                    mdp: world.mdp().clone(),
                    schedule: CostSchedule::new(segments, horizon)?,
                    failed_moves,
                })
            }
            EnvironmentConfig::Toy(cfg) => {
                let mdp = toy_mdp(cfg, structure_rng)?;
                let mut segments = Vec::new();
                let mut t = 1;
                while t <= horizon.max(1) {
                    segments.push((t, random_cost(&mdp, cost_rng)));
                    t += cfg.change_period;
                }
                Ok(Environment {
                    schedule: CostSchedule::new(segments, horizon)?,
                    mdp,
                    failed_moves: Vec::new(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_lookup() {
        let a = CostTable::filled(2, 1, 0.1);
        let b = CostTable::filled(2, 1, 0.2);
        let s = CostSchedule::new(vec![(1, a.clone()), (4, b.clone())], 6).unwrap();
        assert_eq!(s.at(1), &a);
        assert_eq!(s.at(3), &a);
        assert_eq!(s.at(4), &b);
        assert_eq!(s.at(6), &b);
        assert_eq!(s.change_points(), &[4]);
        assert!(CostSchedule::new(vec![(2, a)], 3).is_err());
    }

    #[test]
    fn toy_environment_is_valid_and_piecewise_constant() {
        let cfg = EnvironmentConfig::Toy(ToyConfig {
            layer_sizes: vec![1, 3, 2, 1],
            n_actions: 2,
            noise: 0.3,
            change_period: 10,
        });
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let env = cfg.instantiate(35, &mut r1, &mut r2).unwrap();
        assert_eq!(env.mdp.layer_count(), 3);
        assert_eq!(env.schedule.change_points(), &[11, 21, 31]);
        for x in env.mdp.decision_states() {
            for a in 0..2 {
                // noisy rows reach every state of the next layer
                let width = env.mdp.layer(env.mdp.layer_of(x) + 1).len();
                assert_eq!(env.mdp.successors(x, a).len(), width);
            }
        }
    }

    #[test]
    fn grid_schedule_changes_at_period_multiples() {
        let cfg = EnvironmentConfig::Grid(GridConfig {
            timeout: 8,
            change_period: 100,
            ..GridConfig::default()
        });
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(4);
        let env = cfg.instantiate(450, &mut r1, &mut r2).unwrap();
        assert!(env.schedule.change_points().iter().all(|t| t % 100 == 0));
        assert!(!env.schedule.change_points().is_empty());
    }

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
            kind = "grid"
            width = 4
            height = 3
            n_obstacles = 2
            default_cost = 0.01
            timeout = 12
            change_period = 500
            goal = [3, 2]
            start = "random"
        "#;
        let cfg: EnvironmentConfig = toml::from_str(text).unwrap();
        assert!(matches!(cfg, EnvironmentConfig::Grid(ref g) if g.width == 4));
        let fixed: EnvironmentConfig = toml::from_str(&text.replace("\"random\"", "{ fixed = [0, 0] }")).unwrap();
        assert!(matches!(fixed, EnvironmentConfig::Grid(ref g) if g.start == crate::gridworld::StartMode::Fixed([0, 0])));
    }
}
