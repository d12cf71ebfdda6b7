//! Instance catalog: three structured examples plus a random generator.
//!
//! - revealing action: a costly action whose deterministic loss encodes the
//!   identity of the optimal action;
//! - sparse linear: 1-sparse linear losses over normalized binary actions,
//!   where balanced actions support binary search on the parameter;
//! - revelatory zero: uniform-looking losses with a rare zero that
//!   identifies the optimal action perfectly;
//! - random Bernoulli tables for the bound suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Family, LossDistribution};
use crate::model::{Environment, ModelClass, ModelError};

/// Largest supported sparse-linear dimension; the action set has `2^d - 1`
/// elements and the pairwise policy search is quadratic in it.
pub const MAX_SPARSE_DIM: usize = 12;

/// Revealing-action instance: actions `{0, .., K}`, parameters `{1, .., K}`,
/// deterministic losses `1` off the parameter's own action, `0` on it, and
/// `1 - 2^{-theta}` on the revealing action `0`.
pub fn make_revealing_action(k: usize, theta0: usize) -> Result<Environment, ModelError> {
    if k < 2 {
        return Err(ModelError::Validation(format!("revealing action needs K >= 2, got {k}")));
    }
    let params: Vec<String> = (1..=k).map(|t| t.to_string()).collect();
    let mut table = Vec::with_capacity(k);
    let mut dists = Vec::with_capacity(k);
    for theta in 1..=k {
        let mut row = Vec::with_capacity(k + 1);
        for a in 0..=k {
            let loss = if a == 0 {
                1.0 - 0.5f64.powi(theta as i32)
            } else if a == theta {
                0.0
            } else {
                1.0
            };
            row.push(loss);
        }
        dists.push(vec![row
            .iter()
            .map(|&l| LossDistribution::point_mass(l).expect("loss in [0,1]"))
            .collect::<Vec<_>>()]);
        table.push(vec![row]);
    }
    let model = ModelClass::new(
        params,
        vec!["0".into()],
        k + 1,
        Family::Discrete,
        table,
        Some(dists),
    )?;
    Environment::with_uniform_contexts(model, theta0)
}

/// Sparse linear instance: actions are the normalized nonzero binary
/// vectors in dimension `d`, parameters the coordinate vectors, and losses
/// `1 - <a, theta>`. `d` must be a power of two, at most [`MAX_SPARSE_DIM`].
pub fn make_sparse_linear(d: usize, theta0: usize) -> Result<Environment, ModelError> {
    if d < 2 || !d.is_power_of_two() {
        return Err(ModelError::Validation(format!(
            "sparse linear dimension {d} must be a power of two, at least 2"
        )));
    }
    if d > MAX_SPARSE_DIM {
        return Err(ModelError::Validation(format!(
            "sparse linear dimension {d} above cap {MAX_SPARSE_DIM}"
        )));
    }
    let num_actions = (1usize << d) - 1;
    let params: Vec<String> = (0..d).map(|i| format!("e{i}")).collect();
    let mut table = Vec::with_capacity(d);
    let mut dists = Vec::with_capacity(d);
    for coord in 0..d {
        let mut row = Vec::with_capacity(num_actions);
        for mask in 1..=num_actions {
            let norm = mask.count_ones() as f64;
            let bit = ((mask >> coord) & 1) as f64;
            row.push(1.0 - bit / norm);
        }
        dists.push(vec![row
            .iter()
            .map(|&l| LossDistribution::point_mass(l).expect("loss in [0,1]"))
            .collect::<Vec<_>>()]);
        table.push(vec![row]);
    }
    let model = ModelClass::new(
        params,
        vec!["0".into()],
        num_actions,
        Family::Discrete,
        table,
        Some(dists),
    )?;
    Environment::with_uniform_contexts(model, theta0)
}

/// Revelatory-zero instance: `K` actions equal to the parameters, zero-
/// inflated uniform losses with atom `2 delta` on the parameter's own
/// action (mean `1/2 - delta`) and plain uniform elsewhere (mean `1/2`).
pub fn make_revelatory_zero(k: usize, delta: f64, theta0: usize) -> Result<Environment, ModelError> {
    if k < 2 {
        return Err(ModelError::Validation(format!("revelatory zero needs K >= 2, got {k}")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(ModelError::Validation(format!(
            "revelatory zero gap {delta} outside (0, 1/2]"
        )));
    }
    let params: Vec<String> = (0..k).map(|t| t.to_string()).collect();
    let table: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|theta| {
            vec![(0..k)
                .map(|a| if a == theta { 0.5 - delta } else { 0.5 })
                .collect()]
        })
        .collect();
    let model = ModelClass::new(params, vec!["0".into()], k, Family::Ziu, table, None)?;
    Environment::with_uniform_contexts(model, theta0)
}

/// Random Bernoulli instance: loss table entries i.i.d. uniform on `[0,1]`
/// from a ChaCha8 stream seeded with `seed` (theta-major, then context,
/// then action), followed by a uniform draw of the true parameter.
pub fn make_random_bernoulli(
    k: usize,
    n: usize,
    contexts: usize,
    seed: u64,
) -> Result<Environment, ModelError> {
    random_bernoulli_with_theta0(k, n, contexts, seed, None)
}

pub fn random_bernoulli_with_theta0(
    k: usize,
    n: usize,
    contexts: usize,
    seed: u64,
    theta0: Option<usize>,
) -> Result<Environment, ModelError> {
    if k < 2 || n < 2 || contexts == 0 {
        return Err(ModelError::Validation(format!(
            "random instance needs K >= 2, N >= 2 and a context, got K={k} N={n} contexts={contexts}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..contexts)
                .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    let drawn = (rng.random::<f64>() * n as f64) as usize;
    let true_param = theta0.unwrap_or_else(|| drawn.min(n - 1));
    let params = (0..n).map(|t| format!("t{t}")).collect();
    let ctxs = (0..contexts).map(|c| c.to_string()).collect();
    let model = ModelClass::new(params, ctxs, k, Family::Bernoulli, table, None)?;
    Environment::with_uniform_contexts(model, true_param)
}

/// The revelatory-zero instance after the optimal action has been
/// identified, modeled with maximally distinguishable noise: every pair of
/// parameters has squared Hellinger distance exactly one at every action,
/// so the worst-case DEC against the collapsed predictive takes the closed
/// form `max(delta * (1 - min off-optimal mass) - gamma, delta * (1 -
/// optimal mass))`.
pub struct PostIdentificationGame {
    pub env: Environment,
    /// The collapsed predictive: the true parameter's loss law per action.
    pub p_hat: Vec<LossDistribution>,
}

pub fn post_identification_dec_game(
    k: usize,
    delta: f64,
    theta0: usize,
) -> Result<PostIdentificationGame, ModelError> {
    if k < 2 {
        return Err(ModelError::Validation(format!("need K >= 2, got {k}")));
    }
    if !(delta > 0.0 && delta <= 0.4) {
        return Err(ModelError::Validation(format!(
            "gap {delta} outside (0, 0.4]; larger gaps leave no room for the two-point noise"
        )));
    }
    let mut table = Vec::with_capacity(k);
    let mut dists = Vec::with_capacity(k);
    for theta in 0..k {
        // parameter-specific spread keeps supports disjoint across thetas
        let eps = delta * (theta as f64 + 1.0) / (4.0 * k as f64);
        let mut mean_row = Vec::with_capacity(k);
        let mut dist_row = Vec::with_capacity(k);
        for a in 0..k {
            let mean = if a == theta { 0.5 - delta } else { 0.5 };
            mean_row.push(mean);
            dist_row.push(
                LossDistribution::discrete(vec![(mean - eps, 0.5), (mean + eps, 0.5)])
                    .expect("two-point law in [0,1]"),
            );
        }
        table.push(vec![mean_row]);
        dists.push(vec![dist_row]);
    }
    let params = (0..k).map(|t| t.to_string()).collect();
    let model = ModelClass::new(
        params,
        vec!["0".into()],
        k,
        Family::Discrete,
        table,
        Some(dists),
    )?;
    let p_hat = (0..k).map(|a| model.loss_distribution(theta0, 0, a)).collect();
    let env = Environment::with_uniform_contexts(model, theta0)?;
    Ok(PostIdentificationGame { env, p_hat })
}

/// Declarative instance description, as it appears in experiment configs.
/// `theta0` is a parameter index; when omitted it is drawn uniformly from a
/// ChaCha8 stream seeded with `theta0_seed` (default 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceRecipe {
    RevealingAction {
        #[serde(rename = "K")]
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0_seed: Option<u64>,
    },
    SparseLinear {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0_seed: Option<u64>,
    },
    RevelatoryZero {
        #[serde(rename = "K")]
        k: usize,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0_seed: Option<u64>,
    },
    RandomBernoulli {
        #[serde(rename = "K")]
        k: usize,
        #[serde(rename = "N")]
        n: usize,
        contexts: usize,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<usize>,
    },
}

fn seeded_theta0(n_params: usize, theta0: Option<usize>, theta0_seed: Option<u64>) -> usize {
    theta0.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(theta0_seed.unwrap_or(0));
        ((rng.random::<f64>() * n_params as f64) as usize).min(n_params - 1)
    })
}

impl InstanceRecipe {
    pub fn build(&self) -> Result<Environment, ModelError> {
        match *self {
            InstanceRecipe::RevealingAction { k, theta0, theta0_seed } => {
                make_revealing_action(k, seeded_theta0(k, theta0, theta0_seed))
            }
            InstanceRecipe::SparseLinear { d, theta0, theta0_seed } => {
                make_sparse_linear(d, seeded_theta0(d, theta0, theta0_seed))
            }
            InstanceRecipe::RevelatoryZero { k, delta, theta0, theta0_seed } => {
                make_revelatory_zero(k, delta, seeded_theta0(k, theta0, theta0_seed))
            }
            InstanceRecipe::RandomBernoulli { k, n, contexts, seed, theta0 } => {
                random_bernoulli_with_theta0(k, n, contexts, seed, theta0)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InstanceRecipe::RevealingAction { k, .. } => format!("revealing_action(K={k})"),
            InstanceRecipe::SparseLinear { d, .. } => format!("sparse_linear(d={d})"),
            InstanceRecipe::RevelatoryZero { k, delta, .. } => {
                format!("revelatory_zero(K={k}, delta={delta})")
            }
            InstanceRecipe::RandomBernoulli { k, n, contexts, seed, .. } => {
                format!("random_bernoulli(K={k}, N={n}, contexts={contexts}, seed={seed})")
            }
        }
    }

    /// Known optimal-loss budget per round, where the structure pins it.
    pub fn known_lstar_per_round(&self) -> Option<f64> {
        match self {
            InstanceRecipe::RevealingAction { .. } | InstanceRecipe::SparseLinear { .. } => {
                Some(0.0)
            }
            InstanceRecipe::RevelatoryZero { delta, .. } => Some(0.5 - delta),
            InstanceRecipe::RandomBernoulli { .. } => None,
        }
    }
}
