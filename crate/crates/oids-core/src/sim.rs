//! Interaction protocol, trace recording, cross-seed aggregation and
//! closed-form bound checks.
//!
//! Determinism contract: an episode is a pure function of `(environment,
//! algorithm, horizon, seed)`. The per-round draw order is fixed (context,
//! action, loss; binarized environments draw the source loss and then the
//! rounding bit) and every draw is a 53-bit uniform from a ChaCha8 stream.
//! Batch repetitions derive their seeds with [`derive_seed`], so any
//! scheduler ordering reproduces the same traces; aggregation reduces the
//! per-repetition results in repetition order.

use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{Family, LossDistribution};
use crate::model::{Environment, ModelError};
use crate::objectives::{self, GainMetric, ObjectiveError, RoundObjectives};
use crate::policy::{
    self, AlgoKind, AlgorithmSpec, PolicyDistribution, PolicyError, ResolvedAlgorithm,
};
use crate::posterior::{OptimisticPosterior, PosteriorError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("episode failed: algorithm {algorithm}, seed {seed}, round {round}: {source}")]
    Episode {
        algorithm: String,
        seed: u64,
        round: usize,
        #[source]
        source: Box<SimError>,
    },
    #[error("bound check: {0}")]
    Bound(String),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
}

/// SplitMix64 mix of `(base, index)`: the documented derivation of
/// per-repetition seeds from a batch base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Optional per-round diagnostics, computed against the round's posterior
/// before the observation is folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDiagnostics {
    /// Information ratio of the played policy; undefined on a collapsed
    /// posterior.
    pub ir: Option<f64>,
    /// Averaged DEC of the played policy at the algorithm's exploration
    /// weight (zero when the algorithm has none).
    pub adec: f64,
    /// Policy-averaged surrogate information gain.
    pub sig: f64,
    /// Policy-averaged true information gain.
    pub tig: f64,
    pub ue: f64,
    pub og: f64,
    pub posterior_entropy: f64,
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub t: usize,
    pub context: usize,
    pub action: usize,
    pub loss: f64,
    pub regret_policy: f64,
    pub regret_action: f64,
    pub cum_regret_policy: f64,
    pub cum_regret_action: f64,
    /// Posterior support size after the round's update; the model-class
    /// size for algorithms that keep no posterior.
    pub support_size: usize,
    /// The full played distribution; recorded when diagnostics are on.
    pub policy: Option<PolicyDistribution>,
    pub diagnostics: Option<RoundDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: String,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
}

pub const TRACE_HEADER_BASE: &str =
    "run_id,seed,t,context,action,loss,regret_policy,regret_action,cum_regret_policy,cum_regret_action";
pub const TRACE_HEADER_DIAG: &str = ",ir,adec,sig,tig,ue,og,posterior_entropy";

impl RunTrace {
    pub fn final_regret_policy(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret_policy)
    }

    pub fn final_regret_action(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret_action)
    }

    /// Cumulative expected-policy regret after each round.
    pub fn policy_regret_curve(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.cum_regret_policy).collect()
    }

    /// Write the trace in the fixed CSV schema. Diagnostics columns appear
    /// when `with_diagnostics` is set; rows without diagnostics leave the
    /// cells empty.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        run_id: &str,
        with_diagnostics: bool,
    ) -> Result<(), SimError> {
        writeln!(
            out,
            "{}{}",
            TRACE_HEADER_BASE,
            if with_diagnostics { TRACE_HEADER_DIAG } else { "" }
        )?;
        for r in &self.rounds {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                run_id,
                self.seed,
                r.t,
                r.context,
                r.action,
                r.loss,
                r.regret_policy,
                r.regret_action,
                r.cum_regret_policy,
                r.cum_regret_action
            )?;
            if with_diagnostics {
                match &r.diagnostics {
                    Some(d) => {
                        match d.ir {
                            Some(ir) => write!(out, ",{ir}")?,
                            None => write!(out, ",")?,
                        }
                        write!(
                            out,
                            ",{},{},{},{},{},{}",
                            d.adec, d.sig, d.tig, d.ue, d.og, d.posterior_entropy
                        )?;
                    }
                    None => write!(out, ",,,,,,,")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Per-algorithm mutable state across rounds.
enum AlgoState {
    Oids {
        post: OptimisticPosterior,
        kind: AlgoKind,
        mu: Option<f64>,
        metric: GainMetric,
    },
    InducedSampling {
        post: OptimisticPosterior,
    },
    BayesIds {
        post: OptimisticPosterior,
    },
    Igw {
        post: OptimisticPosterior,
        gamma: f64,
    },
    E2d {
        post: OptimisticPosterior,
        gamma: f64,
    },
    Greedy {
        post: OptimisticPosterior,
    },
    Uniform {
        k: usize,
    },
}

impl AlgoState {
    fn init(resolved: &ResolvedAlgorithm, env: &Environment) -> Result<Self, SimError> {
        let model = Arc::clone(env.model());
        let k = model.num_actions();
        let plain = || OptimisticPosterior::uniform(Arc::clone(&model), 1.0, 0.0);
        Ok(match resolved.kind {
            AlgoKind::Voids | AlgoKind::Roids => AlgoState::Oids {
                post: OptimisticPosterior::uniform(model, resolved.eta, resolved.lambda)?,
                kind: resolved.kind,
                mu: resolved.mu,
                metric: GainMetric::Hellinger,
            },
            AlgoKind::VoidsSg | AlgoKind::RoidsSg => AlgoState::Oids {
                post: OptimisticPosterior::uniform(model, resolved.eta, resolved.lambda)?
                    .with_gaussian_likelihood(),
                kind: resolved.kind,
                mu: resolved.mu,
                metric: GainMetric::SquaredLoss,
            },
            AlgoKind::Fgts => AlgoState::InducedSampling {
                post: OptimisticPosterior::uniform(model, resolved.eta, resolved.lambda)?,
            },
            AlgoKind::Thompson => AlgoState::InducedSampling { post: plain()? },
            AlgoKind::BayesIds => AlgoState::BayesIds { post: plain()? },
            AlgoKind::Igw => AlgoState::Igw {
                post: OptimisticPosterior::uniform(model, resolved.eta, resolved.lambda)?,
                gamma: resolved.gamma.expect("resolved igw carries gamma"),
            },
            AlgoKind::E2d => AlgoState::E2d {
                post: plain()?,
                gamma: resolved.gamma.expect("resolved e2d carries gamma"),
            },
            AlgoKind::Greedy => AlgoState::Greedy { post: plain()? },
            AlgoKind::Uniform => AlgoState::Uniform { k },
        })
    }

    fn posterior(&self) -> Option<&OptimisticPosterior> {
        match self {
            AlgoState::Oids { post, .. }
            | AlgoState::InducedSampling { post }
            | AlgoState::BayesIds { post }
            | AlgoState::Igw { post, .. }
            | AlgoState::E2d { post, .. }
            | AlgoState::Greedy { post } => Some(post),
            AlgoState::Uniform { .. } => None,
        }
    }

    fn mu(&self) -> Option<f64> {
        match self {
            AlgoState::Oids { mu, .. } => *mu,
            _ => None,
        }
    }

    fn metric(&self) -> Option<GainMetric> {
        match self {
            AlgoState::Oids { metric, .. } => Some(*metric),
            AlgoState::Uniform { .. } => None,
            _ => self.posterior().map(|p| {
                if p.model().family() == Family::Gaussian {
                    GainMetric::SquaredLoss
                } else {
                    GainMetric::Hellinger
                }
            }),
        }
    }

    /// Greedy fallback used when every surrogate gain is below the
    /// zero-information threshold: lowest-index argmin of the surrogate
    /// losses.
    fn greedy(post: &OptimisticPosterior, x: usize) -> Result<PolicyDistribution, PolicyError> {
        let ell = post.surrogate_losses(x);
        PolicyDistribution::delta(ell.len(), policy::argmin(&ell))
    }

    fn policy(&self, x: usize) -> Result<PolicyDistribution, SimError> {
        match self {
            AlgoState::Oids { post, kind, mu, metric } => {
                let obj = RoundObjectives::compute(post, x, *metric)?;
                match kind {
                    AlgoKind::Voids | AlgoKind::VoidsSg => {
                        match policy::voids(&obj.delta_bar, &obj.gain_bar) {
                            Ok(pi) => Ok(pi),
                            Err(PolicyError::NoInformation) => Ok(Self::greedy(post, x)?),
                            Err(e) => Err(e.into()),
                        }
                    }
                    _ => Ok(policy::roids(
                        &obj.delta_bar,
                        &obj.gain_bar,
                        mu.expect("roids carries mu"),
                    )?),
                }
            }
            AlgoState::InducedSampling { post } => Ok(policy::fgts_policy(post, x)?),
            AlgoState::BayesIds { post } => {
                let delta = objectives::delta_bar(post, x);
                let gains = objectives::bayes_info_gain(post, x)?;
                match policy::voids(&delta, &gains) {
                    Ok(pi) => Ok(pi),
                    Err(PolicyError::NoInformation) => Ok(Self::greedy(post, x)?),
                    Err(e) => Err(e.into()),
                }
            }
            AlgoState::Igw { post, gamma } => {
                Ok(policy::igw_policy(&post.surrogate_losses(x), *gamma)?)
            }
            AlgoState::E2d { post, gamma } => {
                let model = post.model();
                let k = model.num_actions();
                let mut p_hat = Vec::with_capacity(k);
                for a in 0..k {
                    p_hat.push(match model.family() {
                        Family::Gaussian => LossDistribution::Gaussian {
                            mean: post.surrogate_loss(x, a),
                        },
                        _ => post.predictive(x, a).map_err(ObjectiveError::from)?,
                    });
                }
                Ok(policy::e2d_policy(model, x, *gamma, &p_hat)?)
            }
            AlgoState::Greedy { post } => Ok(Self::greedy(post, x)?),
            AlgoState::Uniform { k } => Ok(PolicyDistribution::uniform(*k)?),
        }
    }

    fn observe(&mut self, x: usize, a: usize, loss: f64) -> Result<(), SimError> {
        match self {
            AlgoState::Oids { post, .. }
            | AlgoState::InducedSampling { post }
            | AlgoState::BayesIds { post }
            | AlgoState::Igw { post, .. }
            | AlgoState::E2d { post, .. }
            | AlgoState::Greedy { post } => {
                *post = post.update(x, a, loss)?;
                Ok(())
            }
            AlgoState::Uniform { .. } => Ok(()),
        }
    }

    fn diagnostics(
        &self,
        env: &Environment,
        x: usize,
        pi: &PolicyDistribution,
    ) -> Result<Option<RoundDiagnostics>, SimError> {
        let (post, metric) = match (self.posterior(), self.metric()) {
            (Some(p), Some(m)) => (p, m),
            _ => return Ok(None),
        };
        let obj = RoundObjectives::compute(post, x, metric)?;
        let ir = match objectives::information_ratio(&obj.delta_bar, &obj.gain_bar, pi) {
            Ok(v) => Some(v),
            Err(ObjectiveError::NoInformation) => None,
            Err(e) => return Err(e.into()),
        };
        let mu = self.mu().unwrap_or(0.0);
        let adec = objectives::adec(&obj.delta_bar, &obj.gain_bar, pi, mu);
        let oracle = env.oracle();
        let tig_vec = objectives::true_gain(post, oracle, x, metric)?;
        let tig = pi
            .probs()
            .iter()
            .zip(&tig_vec)
            .map(|(p, g)| p * g)
            .sum();
        let (ue, og) = objectives::diagnostics_ue_og(post, oracle, x, pi);
        Ok(Some(RoundDiagnostics {
            ir,
            adec,
            sig: obj.policy_gain(pi),
            tig,
            ue,
            og,
            posterior_entropy: post.entropy(),
        }))
    }
}

/// Run one episode of the interaction protocol. Fully deterministic given
/// the arguments; regret increments use expected losses under the true
/// parameter, not realized draws.
pub fn run_episode(
    env: &Environment,
    spec: &AlgorithmSpec,
    horizon: usize,
    seed: u64,
    diagnostics: bool,
) -> Result<RunTrace, SimError> {
    let algorithm = spec.kind.name().to_string();
    let wrap = |round: usize, source: SimError| SimError::Episode {
        algorithm: spec.kind.name().to_string(),
        seed,
        round,
        source: Box::new(source),
    };
    let resolved = spec
        .resolve(
            env.model().num_actions(),
            env.model().n_params(),
            horizon.max(1),
        )
        .map_err(|e| wrap(0, e.into()))?;
    let mut state = AlgoState::init(&resolved, env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let oracle = env.oracle();
    let mut rounds = Vec::with_capacity(horizon);
    let mut cum_policy = 0.0;
    let mut cum_action = 0.0;
    for t in 1..=horizon {
        let x = env.sample_context(&mut rng);
        let pi = state.policy(x).map_err(|e| wrap(t, e))?;
        let a = pi.sample(&mut rng);
        let loss = env.sample_loss(x, a, &mut rng);
        let diag = if diagnostics {
            state.diagnostics(env, x, &pi).map_err(|e| wrap(t, e))?
        } else {
            None
        };
        state.observe(x, a, loss).map_err(|e| wrap(t, e))?;
        let regret_policy: f64 = pi
            .probs()
            .iter()
            .enumerate()
            .map(|(act, p)| p * oracle.action_regret(x, act))
            .sum();
        let regret_action = oracle.action_regret(x, a);
        cum_policy += regret_policy;
        cum_action += regret_action;
        rounds.push(RoundRecord {
            t,
            context: x,
            action: a,
            loss,
            regret_policy,
            regret_action,
            cum_regret_policy: cum_policy,
            cum_regret_action: cum_action,
            support_size: state
                .posterior()
                .map_or(env.model().n_params(), |p| p.support_size()),
            policy: diagnostics.then(|| pi.clone()),
            diagnostics: diag,
        });
    }
    Ok(RunTrace {
        algorithm,
        seed,
        rounds,
    })
}

/// Batch configuration at the library level.
#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub algos: Vec<AlgorithmSpec>,
    pub horizon: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub diagnostics: bool,
    pub collect_traces: bool,
}

#[derive(Debug, Clone)]
pub struct AlgoReport {
    pub algorithm: String,
    pub mean_final_regret: f64,
    pub stderr: f64,
    /// Mean cumulative expected-policy regret after each round.
    pub mean_curve: Vec<f64>,
    pub rep_finals: Vec<f64>,
}

#[derive(Debug)]
pub struct BatchResult {
    pub reports: Vec<AlgoReport>,
    /// Per algorithm, per repetition; populated when requested.
    pub traces: Vec<Vec<RunTrace>>,
    pub wall_clock: Duration,
}

/// Run `reps` independent episodes per algorithm with seeds derived from
/// the base seed, in parallel, and reduce in repetition order.
pub fn run_batch(env: &Environment, config: &BatchConfig) -> Result<BatchResult, SimError> {
    let started = std::time::Instant::now();
    let mut reports = Vec::with_capacity(config.algos.len());
    let mut all_traces = Vec::with_capacity(config.algos.len());
    for spec in &config.algos {
        let episodes: Vec<Result<RunTrace, SimError>> = (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                run_episode(
                    env,
                    spec,
                    config.horizon,
                    derive_seed(config.base_seed, rep as u64),
                    config.diagnostics,
                )
            })
            .collect();
        let mut traces = Vec::with_capacity(config.reps);
        for episode in episodes {
            traces.push(episode?);
        }
        reports.push(summarize(spec.kind.name(), &traces, config.horizon));
        if config.collect_traces {
            all_traces.push(traces);
        }
    }
    Ok(BatchResult {
        reports,
        traces: all_traces,
        wall_clock: started.elapsed(),
    })
}

fn summarize(name: &str, traces: &[RunTrace], horizon: usize) -> AlgoReport {
    let reps = traces.len().max(1);
    let rep_finals: Vec<f64> = traces.iter().map(|t| t.final_regret_policy()).collect();
    let mean = rep_finals.iter().sum::<f64>() / reps as f64;
    let stderr = if rep_finals.len() > 1 {
        let var = rep_finals
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (rep_finals.len() - 1) as f64;
        (var / rep_finals.len() as f64).sqrt()
    } else {
        0.0
    };
    let mut mean_curve = vec![0.0; horizon];
    for trace in traces {
        for (slot, r) in mean_curve.iter_mut().zip(&trace.rounds) {
            *slot += r.cum_regret_policy;
        }
    }
    for slot in &mut mean_curve {
        *slot /= traces.len().max(1) as f64;
    }
    AlgoReport {
        algorithm: name.to_string(),
        mean_final_regret: mean,
        stderr,
        mean_curve,
        rep_finals,
    }
}

/// Closed-form regret bounds evaluated by [`bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTag {
    WorstCase,
    FirstOrder,
    Subgaussian,
}

impl BoundTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundTag::WorstCase => "worst_case",
            BoundTag::FirstOrder => "first_order",
            BoundTag::Subgaussian => "subgaussian",
        }
    }
}

/// Instance dimensions a bound formula needs.
#[derive(Debug, Clone, Copy)]
pub struct InstanceMeta {
    pub k: usize,
    pub n: usize,
    pub t: usize,
    pub lstar: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub tag: String,
    pub value: f64,
    pub satisfied: bool,
}

/// Evaluate the closed-form bound for `tag` and compare the report's mean
/// final regret plus three standard errors against it.
pub fn bound_check(
    report: &AlgoReport,
    tag: BoundTag,
    meta: &InstanceMeta,
) -> Result<BoundReport, SimError> {
    let value = bound_value(tag, meta)?;
    let satisfied = report.mean_final_regret + 3.0 * report.stderr <= value;
    Ok(BoundReport {
        tag: tag.name().to_string(),
        value,
        satisfied,
    })
}

/// The closed-form bound value for an instance.
pub fn bound_value(tag: BoundTag, meta: &InstanceMeta) -> Result<f64, SimError> {
    let k = meta.k as f64;
    let n = meta.n as f64;
    let t = meta.t as f64;
    Ok(match tag {
        BoundTag::WorstCase => ((320.0 * k + 21.0) * t * n.ln()).sqrt(),
        BoundTag::FirstOrder => {
            let lstar = meta.lstar.ok_or_else(|| {
                SimError::Bound("first-order bound needs an optimal-loss budget".into())
            })?;
            ((2500.0 * k + 540.0) * n.ln() * lstar).sqrt() + (1250.0 * k + 270.0) * n.ln()
        }
        BoundTag::Subgaussian => {
            let v = meta.v.ok_or_else(|| {
                SimError::Bound("subgaussian bound needs a variance proxy".into())
            })?;
            ((1.0 + 80.0 * v.max(1.0) * (1.0 + k)) * t * n.ln()).sqrt()
        }
    })
}

/// Summary entry in the JSON report written next to the traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algorithm: String,
    pub instance: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub reps: usize,
    pub mean_final_regret: f64,
    pub stderr: f64,
    pub bounds: Vec<BoundReport>,
}
