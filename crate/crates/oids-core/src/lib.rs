//! Optimistic information-directed sampling for parametric contextual
//! bandits with a finite model class.
//!
//! The crate is organized around the round loop: [`model`] defines model
//! classes and environments, [`posterior`] maintains the optimistic
//! posterior over parameters, [`objectives`] turns a posterior into the
//! per-round decision objectives, [`policy`] maps objectives to action
//! distributions (the optimistic IDS variants plus their baselines), and
//! [`sim`] runs the interaction protocol, aggregates over seeds and checks
//! the closed-form regret bounds. [`envs`] builds the structured example
//! instances and random tables, and [`dist`] supplies the loss-law families
//! with exact divergences underneath everything.

pub mod dist;
pub mod envs;
pub mod model;
pub mod objectives;
pub mod policy;
pub mod posterior;
pub mod sim;

pub use dist::{hellinger_sq, kl, mixture, total_variation, Family, LossDistribution};
pub use model::{EnvOracle, Environment, ModelClass};
pub use objectives::{GainMetric, RoundObjectives};
pub use policy::{AlgoKind, AlgorithmSpec, PolicyDistribution};
pub use posterior::OptimisticPosterior;
pub use sim::{run_batch, run_episode, BatchConfig, BoundTag, InstanceMeta, RunTrace};
