//! Drone navigation on a 2D grid with drifting turbulence.
//!
//! States are grid cells tagged with the time step; reaching the goal routes
//! the agent into an absorbing terminal chain. Transitions are deterministic
//! and moves that would leave the grid keep the agent in place. Turbulence
//! only changes costs, never transitions.

use std::collections::{BTreeSet, HashMap, VecDeque};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::amdp::{CostTable, LayeredAmdp, StateId};
use crate::error::{Error, Result};

pub type Cell = (usize, usize);

pub const ACTIONS: [&str; 4] = ["left", "right", "up", "down"];

/// Retries when resampling turbulence positions.
const PLACEMENT_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    Fixed([usize; 2]),
    /// Uniform over non-goal cells, drawn by a spawn transition out of a
    /// dummy first layer.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub n_obstacles: usize,
    /// Cost `ε` of an ordinary move.
    pub default_cost: f64,
    /// Number of moves per episode.
    pub timeout: usize,
    /// Episodes between turbulence moves.
    pub change_period: u64,
    pub goal: [usize; 2],
    pub start: StartMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            n_obstacles: 3,
            default_cost: 0.01,
            timeout: 20,
            change_period: 500,
            goal: [4, 4],
            start: StartMode::Fixed([0, 0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateKind {
    Spawn,
    Cell(Cell),
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Landing {
    Goal,
    Cell(Cell),
    Nowhere,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurbulenceLayout {
    pub cells: Vec<Cell>,
}

/// Outcome of a turbulence update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurbulenceMove {
    pub layout: TurbulenceLayout,
    pub moved: bool,
    /// A move was due but no valid placement was found.
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    cfg: GridConfig,
    mdp: LayeredAmdp,
    kinds: Vec<StateKind>,
    landing: Vec<Landing>,
}

fn step_cell(cfg: &GridConfig, (x, y): Cell, action: usize) -> Cell {
    match action {
        0 if x > 0 => (x - 1, y),
        1 if x + 1 < cfg.width => (x + 1, y),
        2 if y + 1 < cfg.height => (x, y + 1),
        3 if y > 0 => (x, y - 1),
        _ => (x, y),
    }
}

fn neighbors(cfg: &GridConfig, cell: Cell) -> Vec<Cell> {
    (0..4)
        .map(|a| step_cell(cfg, cell, a))
        .filter(|&c| c != cell)
        .collect()
}

/// Validates geometry and builds the layered MDP.
pub fn build_amdp(cfg: &GridConfig) -> Result<GridWorld> {
    GridWorld::new(cfg.clone())
}

impl GridWorld {
    pub fn new(cfg: GridConfig) -> Result<Self> {
        if cfg.width == 0 || cfg.height == 0 {
            return Err(Error::InvalidGrid("grid must be non-empty".into()));
        }
        let inside = |c: [usize; 2]| c[0] < cfg.width && c[1] < cfg.height;
        if !inside(cfg.goal) {
            return Err(Error::InvalidGrid(format!("goal {:?} outside the grid", cfg.goal)));
        }
        if let StartMode::Fixed(s) = cfg.start {
            if !inside(s) {
                return Err(Error::InvalidGrid(format!("start {s:?} outside the grid")));
            }
            if s == cfg.goal {
                return Err(Error::InvalidGrid("start equals goal".into()));
            }
        }
        if cfg.width * cfg.height < 2 {
            return Err(Error::InvalidGrid("grid needs at least two cells".into()));
        }
        if !(cfg.default_cost > 0.0 && cfg.default_cost < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "default cost must lie in (0,1), got {}",
                cfg.default_cost
            )));
        }
        if cfg.timeout == 0 || cfg.change_period == 0 {
            return Err(Error::InvalidGrid("timeout and change period must be positive".into()));
        }
        let reserved = 1 + usize::from(matches!(cfg.start, StartMode::Fixed(_)));
        if cfg.n_obstacles + reserved > cfg.width * cfg.height {
            return Err(Error::InvalidGrid("too many obstacles for the grid".into()));
        }

        let goal = (cfg.goal[0], cfg.goal[1]);
        let mut layers: Vec<Vec<StateKind>> = Vec::new();
        match cfg.start {
            StartMode::Fixed(s) => layers.push(vec![StateKind::Cell((s[0], s[1]))]),
            StartMode::Random => {
                layers.push(vec![StateKind::Spawn]);
                let mut cells = Vec::new();
                for y in 0..cfg.height {
                    for x in 0..cfg.width {
                        if (x, y) != goal {
                            cells.push(StateKind::Cell((x, y)));
                        }
                    }
                }
                layers.push(cells);
            }
        }
        let first_move_layer = layers.len() - 1;
        let decision_layers = first_move_layer + cfg.timeout;
        while layers.len() < decision_layers {
            let mut next = BTreeSet::new();
            for kind in layers.last().unwrap() {
                match *kind {
                    StateKind::Cell(c) => {
                        for a in 0..4 {
                            let d = step_cell(&cfg, c, a);
                            next.insert(if d == goal {
                                StateKind::Terminal
                            } else {
                                StateKind::Cell(d)
                            });
                        }
                    }
                    StateKind::Terminal => {
                        next.insert(StateKind::Terminal);
                    }
                    StateKind::Spawn => unreachable!("spawn only in layer 0"),
                }
            }
            layers.push(next.into_iter().collect());
        }
        layers.push(vec![StateKind::Terminal]);

        let kinds: Vec<StateKind> = layers.iter().flatten().copied().collect();
        let mut index: Vec<HashMap<StateKind, StateId>> = Vec::new();
        let mut offset = 0;
        for layer in &layers {
            index.push(layer.iter().enumerate().map(|(i, k)| (*k, offset + i)).collect());
            offset += layer.len();
        }
        let layer_of: Vec<usize> = layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| std::iter::repeat(l).take(layer.len()))
            .collect();
        let sizes: Vec<usize> = layers.iter().map(Vec::len).collect();
        let last = layers.len() - 1;
        let mut landing = vec![Landing::Nowhere; kinds.len() * 4];
        let mdp = LayeredAmdp::new(&sizes, 4, |x, a| {
            let l = layer_of[x];
            let next_index = &index[l + 1];
            match kinds[x] {
                StateKind::Spawn => {
                    let w = 1.0 / next_index.len() as f64;
                    next_index.values().map(|&n| (n, w)).collect()
                }
                StateKind::Terminal => vec![(next_index[&StateKind::Terminal], 1.0)],
                StateKind::Cell(c) => {
                    let d = step_cell(&cfg, c, a);
                    let (land, kind) = if d == goal {
                        (Landing::Goal, StateKind::Terminal)
                    } else {
                        (Landing::Cell(d), StateKind::Cell(d))
                    };
                    landing[x * 4 + a] = land;
                    let target = if l + 1 == last {
                        StateKind::Terminal
                    } else {
                        kind
                    };
                    vec![(next_index[&target], 1.0)]
                }
            }
        })?;
        Ok(Self {
            cfg,
            mdp,
            kinds,
            landing,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn mdp(&self) -> &LayeredAmdp {
        &self.mdp
    }

    pub fn kind(&self, state: StateId) -> StateKind {
        self.kinds[state]
    }

    fn goal(&self) -> Cell {
        (self.cfg.goal[0], self.cfg.goal[1])
    }

    /// Three-case cost of taking `action` in `state` under `layout`.
    pub fn cost_at(&self, layout: &TurbulenceLayout, state: StateId, action: usize) -> f64 {
        match self.landing[state * 4 + action] {
            Landing::Goal | Landing::Nowhere => 0.0,
            Landing::Cell(c) if layout.cells.contains(&c) => 1.0,
            Landing::Cell(_) => self.cfg.default_cost,
        }
    }

    pub fn cost_table(&self, layout: &TurbulenceLayout) -> CostTable {
        let mut t = self.mdp.zero_table();
        for x in self.mdp.decision_states() {
            for a in 0..4 {
                t.set(x, a, self.cost_at(layout, x, a));
            }
        }
        t
    }

    /// Obstacles are distinct, avoid the goal (and a fixed start) and leave a
    /// turbulence-free path to the goal from every possible start.
    pub fn layout_is_valid(&self, layout: &TurbulenceLayout) -> bool {
        let cfg = &self.cfg;
        let goal = self.goal();
        let blocked: BTreeSet<Cell> = layout.cells.iter().copied().collect();
        if blocked.len() != layout.cells.len() || blocked.contains(&goal) {
            return false;
        }
        if blocked.iter().any(|&(x, y)| x >= cfg.width || y >= cfg.height) {
            return false;
        }
        let mut seen = vec![false; cfg.width * cfg.height];
        let mut queue = VecDeque::from([goal]);
        seen[goal.1 * cfg.width + goal.0] = true;
        while let Some(c) = queue.pop_front() {
            for n in neighbors(cfg, c) {
                let i = n.1 * cfg.width + n.0;
                if !seen[i] && !blocked.contains(&n) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        match cfg.start {
            StartMode::Fixed(s) => !blocked.contains(&(s[0], s[1])) && seen[s[1] * cfg.width + s[0]],
            StartMode::Random => (0..cfg.height)
                .flat_map(|y| (0..cfg.width).map(move |x| (x, y)))
                .all(|c| blocked.contains(&c) || seen[c.1 * cfg.width + c.0]),
        }
    }

    pub fn initial_layout<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TurbulenceLayout> {
        let mut cells: Vec<Cell> = (0..self.cfg.height)
            .flat_map(|y| (0..self.cfg.width).map(move |x| (x, y)))
            .collect();
        for _ in 0..PLACEMENT_RETRIES {
            cells.shuffle(rng);
            let layout = TurbulenceLayout {
                cells: cells[..self.cfg.n_obstacles].to_vec(),
            };
            if self.layout_is_valid(&layout) {
                return Ok(layout);
            }
        }
        Err(Error::InvalidGrid("no valid obstacle placement found".into()))
    }

    /// Moves every obstacle to a random neighbor at multiples of the change
    /// period, resampling until the layout is valid.
    pub fn advance_turbulence<R: Rng + ?Sized>(
        &self,
        layout: &TurbulenceLayout,
        t: u64,
        rng: &mut R,
    ) -> TurbulenceMove {
        if t == 0 || t % self.cfg.change_period != 0 {
            return TurbulenceMove {
                layout: layout.clone(),
                moved: false,
                failed: false,
            };
        }
        for _ in 0..PLACEMENT_RETRIES {
            let cells = layout
                .cells
                .iter()
                .map(|&c| *neighbors(&self.cfg, c).choose(rng).unwrap_or(&c))
                .collect();
            let candidate = TurbulenceLayout { cells };
            if self.layout_is_valid(&candidate) {
                return TurbulenceMove {
                    layout: candidate,
                    moved: true,
                    failed: false,
                };
            }
        }
        warn!("episode {t}: no valid turbulence move, keeping previous layout");
        TurbulenceMove {
            layout: layout.clone(),
            moved: false,
            failed: true,
        }
    }
}
