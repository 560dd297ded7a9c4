//! Optimistic online mirror descent over occupancy measures for episodic
//! adversarial MDPs, with cost predictors, importance-weighted estimators,
//! a doubling-trick controller and confidence sets for unknown transitions.

pub mod amdp;
pub mod anytime;
pub mod environment;
pub mod error;
pub mod estimators;
pub mod gridworld;
pub mod harness;
pub mod learner;
pub mod omd;
pub mod predictors;
pub mod unknown_transition;

pub use amdp::{
    best_in_hindsight, induce_policy, occupancy_from_policy, rollout, CostTable, LayeredAmdp,
    OccupancyMeasure, Policy, StateId, Table, Trajectory,
};
pub use error::{Error, Result};
pub use omd::{omd_step, omd_step_full_info, OmdStep, UpdateConfig};
