//! Experiment configuration, execution and aggregation.
//!
//! An experiment is one environment, a horizon, a number of repetitions and
//! a list of algorithm variants. Every variant of a repetition sees the same
//! MDP, the same cost sequence and the same rollout randomness.

mod output;

use std::path::PathBuf;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amdp::{best_in_hindsight, occupancy_from_policy, occupancy_with_kernel, rollout_policy, total_cost, CostTable, LayeredAmdp};
use crate::environment::{Environment, EnvironmentConfig};
use crate::error::{Error, Result};
use crate::learner::{Algorithm, Feedback, Learner, LearnerSpec};
use crate::predictors::{optimism_violation, PredictorKind};

pub use output::{
    aggregate, emit_outputs, emit_records, read_aggregate, read_trace, render_plot, write_aggregate, write_summary,
    write_sweep, write_trace, AggregateRow, OutputPaths, SWEEP_SCHEMA,
    AGGREGATE_SCHEMA, TRACE_SCHEMA,
};

/// Independent random streams of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// MDP structure (random toy kernels).
    Environment = 0,
    /// Turbulence moves and cost draws.
    Costs = 1,
    /// Action and transition sampling during rollouts.
    Rollout = 2,
}

/// Stream `stream` of repetition `repetition` under the root `seed`.
pub fn stream_rng(seed: u64, repetition: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repetition as u64 * 16 + stream as u64);
    rng
}

/// `√(L log(|X||A|/L) / (T |X||A|))`.
pub fn default_eta_oreps(layers: usize, n_states: usize, n_actions: usize, episodes: u64) -> Result<f64> {
    let xa = (n_states * n_actions) as f64;
    if layers == 0 || episodes == 0 || xa <= layers as f64 {
        return Err(Error::InvalidParameter(format!(
            "need positive L, T and |X||A| > L (L = {layers}, |X||A| = {xa}, T = {episodes})"
        )));
    }
    let l = layers as f64;
    Ok((l * (xa / l).ln() / (episodes as f64 * xa)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub algorithm: Algorithm,
    pub feedback: Feedback,
    #[serde(default = "zero_predictor")]
    pub predictor: PredictorKind,
    /// Defaults to the OREPS rate for `oreps` and `oreps-ix`; required otherwise.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Defaults to `η/2` for estimators with implicit exploration.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// `η₀` of the anytime variant.
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default)]
    pub kappa: Option<u32>,
    #[serde(default)]
    pub delta: Option<f64>,
}

fn zero_predictor() -> PredictorKind {
    PredictorKind::Zero
}

impl VariantConfig {
    pub fn new(algorithm: Algorithm, feedback: Feedback, predictor: PredictorKind) -> Self {
        Self {
            label: None,
            algorithm,
            feedback,
            predictor,
            eta: None,
            gamma: None,
            eta0: None,
            kappa: None,
            delta: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!(
                "{}-{}-{}",
                self.algorithm.name(),
                match self.feedback {
                    Feedback::Full => "full",
                    Feedback::Bandit => "bandit",
                },
                self.predictor.label()
            )
        })
    }

    /// Fills defaults against the MDP size and horizon.
    pub fn resolve(&self, mdp: &LayeredAmdp, episodes: u64, solver: &SolverConfig) -> Result<LearnerSpec> {
        let eta = match self.algorithm {
            Algorithm::OrepsOpixAnytime => self
                .eta0
                .ok_or_else(|| Error::Config("oreps-opix-anytime needs eta0".into()))?,
            Algorithm::Oreps | Algorithm::OrepsIx => match self.eta {
                Some(e) => e,
                None => default_eta_oreps(mdp.layer_count(), mdp.n_states(), mdp.n_actions(), episodes)?,
            },
            _ => self
                .eta
                .ok_or_else(|| Error::Config(format!("{} needs eta", self.algorithm.name())))?,
        };
        let gamma = match (self.algorithm, self.feedback) {
            (Algorithm::Oreps, _) => self.gamma.unwrap_or(0.0),
            (_, Feedback::Full) => self.gamma.unwrap_or(0.0),
            _ => self.gamma.unwrap_or(eta / 2.0),
        };
        let spec = LearnerSpec {
            algorithm: self.algorithm,
            feedback: self.feedback,
            predictor: self.predictor,
            eta,
            gamma,
            kappa: self.kappa.unwrap_or(2),
            delta: self.delta.unwrap_or(0.1),
            dual_tol: solver.dual_tol,
            dual_max_iters: solver.dual_max_iters,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dual_tol: f64,
    pub dual_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dual_tol: 1e-9,
            dual_max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub episodes: u64,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub environment: EnvironmentConfig,
    #[serde(rename = "variant")]
    pub variants: Vec<VariantConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<()> {
        if self.episodes == 0 || self.repetitions == 0 {
            return Err(Error::Config("episodes and repetitions must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        let mut labels: Vec<String> = self.variants.iter().map(VariantConfig::display_label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("variant labels must be unique".into()));
        }
        Ok(())
    }
}

/// One row of the per-episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub variant: String,
    pub repetition: usize,
    pub episode: u64,
    /// `⟨ρ^{π_t}, c_t⟩`.
    pub learner_cost: f64,
    /// Cost along the sampled trajectory.
    pub realized_cost: f64,
    /// `min_π Σ_{s≤t} ⟨ρ^π, c_s⟩`.
    pub comparator: f64,
    pub regret: f64,
    pub average_regret: f64,
    pub estimate_norm: f64,
    pub psi: f64,
    pub phase: u32,
    pub eta: f64,
    pub gamma: f64,
    /// `Σ (c_t − M_t)`.
    pub predictor_error: f64,
    /// `max (M_t − c_t)⁺`.
    pub optimism_violation: f64,
    pub dual_iterations: usize,
    pub collapsed: usize,
    /// Unknown transitions only: whether the true kernel lies in the
    /// confidence set at the start of the episode.
    pub kernel_covered: Option<bool>,
    /// Unknown transitions only: whether `u_t ≥ ρ^{P̄,π_t}` pointwise, with `P̄`
    /// the empirical kernel at the start of the episode.
    pub bound_dominates: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseEvent {
    pub episode: u64,
    pub pairs: usize,
}

/// One repetition of one variant.
#[derive(Debug, Clone)]
pub struct RepetitionTrace {
    pub repetition: usize,
    pub records: Vec<EpisodeRecord>,
    pub collapses: Vec<CollapseEvent>,
    /// Episode and error that stopped the repetition early.
    pub aborted: Option<(u64, String)>,
}

impl RepetitionTrace {
    pub fn final_average_regret(&self) -> Option<f64> {
        self.records.last().map(|r| r.average_regret)
    }
}

#[derive(Debug, Clone)]
pub struct VariantReport {
    pub label: String,
    pub config: VariantConfig,
    pub repetitions: Vec<RepetitionTrace>,
}

impl VariantReport {
    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.repetitions.iter().flat_map(|r| &r.records)
    }

    /// Mean final average regret over repetitions that ran to completion.
    pub fn mean_final_average_regret(&self, episodes: u64) -> Option<f64> {
        let done: Vec<f64> = self
            .repetitions
            .iter()
            .filter(|r| r.records.len() as u64 == episodes)
            .filter_map(RepetitionTrace::final_average_regret)
            .collect();
        (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub episodes: u64,
    pub variants: Vec<VariantReport>,
}

impl RunReport {
    pub fn variant(&self, label: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.label == label)
    }

    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.variants.iter().flat_map(VariantReport::records)
    }
}

/// Builds the environment of repetition `repetition`.
pub fn environment_for(cfg: &ExperimentConfig, repetition: usize) -> Result<Environment> {
    cfg.environment.instantiate(
        cfg.episodes,
        &mut stream_rng(cfg.seed, repetition, Stream::Environment),
        &mut stream_rng(cfg.seed, repetition, Stream::Costs),
    )
}

/// Runs one variant through one instantiated environment.
pub fn run_repetition(
    env: &Environment,
    variant: &VariantConfig,
    episodes: u64,
    seed: u64,
    repetition: usize,
    solver: &SolverConfig,
) -> Result<RepetitionTrace> {
    let label = variant.display_label();
    let mdp = &env.mdp;
    let spec = variant.resolve(mdp, episodes, solver)?;
    let mut learner = Learner::new(mdp, spec, episodes, Some(env.schedule.at(1)))?;
    let mut rng = stream_rng(seed, repetition, Stream::Rollout);
    let mut cost_sum = mdp.zero_table();
    let mut learner_total = 0.0;
    let zero = mdp.zero_table();
    let mut trace = RepetitionTrace {
        repetition,
        records: Vec::with_capacity(episodes as usize),
        collapses: Vec::new(),
        aborted: None,
    };
    for t in 1..=episodes {
        let cost = env.schedule.at(t);
        let policy = learner.policy();
        let learner_cost = total_cost(&occupancy_from_policy(mdp, &policy), cost);
        let audit = optimism_violation(learner.prediction(), cost);
        let (kernel_covered, empirical_occupancy) = match learner.transition_stats() {
            Some(stats) => (
                Some(stats.in_confidence_set(mdp.kernel())),
                Some(occupancy_with_kernel(mdp, &stats.empirical_kernel(), &policy)),
            ),
            None => (None, None),
        };
        let trajectory = rollout_policy(mdp, &policy, cost, &mut rng);
        let next: &CostTable = if t < episodes { env.schedule.at(t + 1) } else { &zero };
        let full = (spec.feedback == Feedback::Full).then_some(cost);
        let outcome = match learner.learn(t, &trajectory, full, Some(next)) {
            Ok(o) => o,
            Err(e) => {
                warn!("{label} repetition {repetition}: aborted at episode {t}: {e}");
                trace.aborted = Some((t, e.to_string()));
                break;
            }
        };
        let bound_dominates = match (&outcome.upper_bound, &empirical_occupancy) {
            (Some(u), Some(rho_bar)) => Some(
                u.values()
                    .iter()
                    .zip(rho_bar.table().values())
                    .all(|(&u, &r)| u >= r - 1e-12),
            ),
            _ => None,
        };
        if outcome.collapsed > 0 {
            warn!(
                "{label} repetition {repetition}: {} occupancy entries collapsed at episode {t}",
                outcome.collapsed
            );
            trace.collapses.push(CollapseEvent {
                episode: t,
                pairs: outcome.collapsed,
            });
        }
        cost_sum = cost_sum.add(cost);
        learner_total += learner_cost;
        let comparator = best_in_hindsight(mdp, &cost_sum).value;
        let regret = learner_total - comparator;
        trace.records.push(EpisodeRecord {
            variant: label.clone(),
            repetition,
            episode: t,
            learner_cost,
            realized_cost: trajectory.total_cost(),
            comparator,
            regret,
            average_regret: regret / t as f64,
            estimate_norm: outcome.estimate_norm,
            psi: outcome.psi,
            phase: outcome.phase,
            eta: outcome.eta,
            gamma: outcome.gamma,
            predictor_error: audit.weighted_gap,
            optimism_violation: audit.max_violation,
            dual_iterations: outcome.dual_iterations,
            collapsed: outcome.collapsed,
            kernel_covered,
            bound_dominates,
        });
    }
    Ok(trace)
}

/// Runs every variant and repetition of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.check()?;
    let envs: Vec<Environment> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| environment_for(cfg, r))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.variants.len())
        .flat_map(|v| (0..cfg.repetitions).map(move |r| (v, r)))
        .collect();
    let traces: Vec<RepetitionTrace> = jobs
        .par_iter()
        .map(|&(v, r)| {
            let trace = run_repetition(&envs[r], &cfg.variants[v], cfg.episodes, cfg.seed, r, &cfg.solver)?;
            info!(
                "{} repetition {r}: final average regret {:?}",
                cfg.variants[v].display_label(),
                trace.final_average_regret()
            );
            Ok(trace)
        })
        .collect::<Result<_>>()?;
    let mut traces = traces.into_iter();
    let variants = cfg
        .variants
        .iter()
        .map(|v| VariantReport {
            label: v.display_label(),
            config: v.clone(),
            repetitions: traces.by_ref().take(cfg.repetitions).collect(),
        })
        .collect();
    Ok(RunReport {
        episodes: cfg.episodes,
        variants,
    })
}

/// One cell of a step-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub eta: f64,
    pub gamma: Option<f64>,
    pub mean_final_average_regret: Option<f64>,
    pub aborted_repetitions: usize,
}

/// Runs every variant of `cfg` once per `(η, γ)` in the grid. An empty
/// `gammas` keeps each variant's own exploration setting.
pub fn sweep(cfg: &ExperimentConfig, etas: &[f64], gammas: &[f64]) -> Result<(RunReport, Vec<SweepRow>)> {
    if etas.is_empty() {
        return Err(Error::Config("sweep needs at least one eta".into()));
    }
    let gamma_grid: Vec<Option<f64>> = if gammas.is_empty() {
        vec![None]
    } else {
        gammas.iter().copied().map(Some).collect()
    };
    let mut expanded = cfg.clone();
    expanded.variants.clear();
    let mut cells = Vec::new();
    for v in &cfg.variants {
        for &eta in etas {
            for &gamma in &gamma_grid {
                let mut cell = v.clone();
                cell.eta = Some(eta);
                if v.algorithm == Algorithm::OrepsOpixAnytime {
                    cell.eta0 = Some(eta);
                }
                if gamma.is_some() {
                    cell.gamma = gamma;
                }
                let mut label = format!("{}-eta{eta}", v.display_label());
                if let Some(g) = gamma {
                    label.push_str(&format!("-gamma{g}"));
                }
                cell.label = Some(label);
                cells.push((eta, gamma));
                expanded.variants.push(cell);
            }
        }
    }
    let report = run_experiment(&expanded)?;
    let rows = report
        .variants
        .iter()
        .zip(cells)
        .map(|(v, (eta, gamma))| SweepRow {
            variant: v.label.clone(),
            eta,
            gamma,
            mean_final_average_regret: v.mean_final_average_regret(report.episodes),
            aborted_repetitions: v.repetitions.iter().filter(|r| r.aborted.is_some()).count(),
        })
        .collect();
    Ok((report, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ToyConfig;

    #[test]
    fn default_eta_examples() {
        let e = default_eta_oreps(2, 4, 2, 100).unwrap();
        assert!((e - (2.0 * 4f64.ln() / 800.0).sqrt()).abs() < 1e-15);
        assert!((e - 0.0589).abs() < 1e-4);
        assert!(default_eta_oreps(8, 4, 2, 100).is_err());
        assert!(default_eta_oreps(2, 4, 2, u64::MAX).unwrap() < 1e-8);
    }

    fn toy() -> ExperimentConfig {
        ExperimentConfig {
            episodes: 40,
            repetitions: 2,
            seed: 3,
            output_dir: None,
            solver: SolverConfig::default(),
            environment: EnvironmentConfig::Toy(ToyConfig {
                layer_sizes: vec![1, 2, 3, 1],
                n_actions: 2,
                noise: 0.2,
                change_period: 10,
            }),
            variants: vec![
                VariantConfig::new(Algorithm::OrepsIx, Feedback::Bandit, PredictorKind::Zero),
                VariantConfig::new(Algorithm::OrepsOpix, Feedback::Full, PredictorKind::Perfect).with_eta(0.5),
            ],
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&toy()).unwrap();
        let b = run_experiment(&toy()).unwrap();
        let ra: Vec<_> = a.records().cloned().collect();
        let rb: Vec<_> = b.records().cloned().collect();
        assert_eq!(ra.len(), 160);
        assert_eq!(ra, rb);
    }

    #[test]
    fn regret_is_consistent_with_costs() {
        let r = run_experiment(&toy()).unwrap();
        for v in &r.variants {
            for rep in &v.repetitions {
                let mut total = 0.0;
                for rec in &rep.records {
                    total += rec.learner_cost;
                    assert!((rec.regret - (total - rec.comparator)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let text = r#"
            episodes = 100
            repetitions = 3
            seed = 9

            [environment]
            kind = "toy"
            layer_sizes = [1, 2, 1]
            n_actions = 2
            change_period = 5

            [[variant]]
            algorithm = "oreps-opix"
            feedback = "bandit"
            predictor = { kind = "latest", reset_period = 5 }
            eta = 0.2
            gamma = 0.05

            [[variant]]
            algorithm = "oreps"
            feedback = "bandit"
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.variants.len(), 2);
        assert_eq!(
            cfg.variants[0].predictor,
            PredictorKind::Latest { reset_period: Some(5) }
        );
        let again = ExperimentConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(ExperimentConfig::from_toml(&text.replace("seed = 9", "seed = 9\nbogus = 1")).is_err());
    }

    #[test]
    fn incompatible_variants_are_rejected() {
        let env = environment_for(&toy(), 0).unwrap();
        let s = SolverConfig::default();
        let v = VariantConfig::new(Algorithm::Oreps, Feedback::Bandit, PredictorKind::Perfect);
        assert!(v.resolve(&env.mdp, 10, &s).is_err());
        let v = VariantConfig::new(Algorithm::OrepsOpix, Feedback::Bandit, PredictorKind::Zero);
        assert!(matches!(v.resolve(&env.mdp, 10, &s), Err(Error::Config(_))));
        let v = VariantConfig::new(Algorithm::OrepsIx, Feedback::Bandit, PredictorKind::Zero).with_gamma(0.0);
        assert!(v.resolve(&env.mdp, 10, &s).is_err());
    }
}
