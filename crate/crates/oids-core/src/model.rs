//! Finite parametric contextual-bandit model classes and the environment
//! oracle used for simulation and diagnostics.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistError, Family, LossDistribution};

/// Tolerance for the realizability check on explicit discrete tables.
pub const REALIZABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model class: {0}")]
    Validation(String),
    #[error("realizability violated at (theta={theta}, x={context}, a={action}): distribution mean {mean} vs loss table {table}")]
    Realizability {
        theta: usize,
        context: usize,
        action: usize,
        mean: f64,
        table: f64,
    },
    #[error("binarization requires losses supported on [0,1]; gaussian source rejected")]
    BinarizeGaussian,
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// A finite model class: parameter set, context set, `K` actions, a loss
/// table in `[0,1]`, and a likelihood family tying means to loss laws.
///
/// For the `bernoulli`, `ziu` and `gaussian` families the per-triple loss
/// distribution is derived from the table entry (realizability holds by
/// construction; a ziu entry `m` maps to atom `1 - 2m`, so ziu means must
/// stay in `[0, 1/2]`). The `discrete` family carries an explicit
/// distribution table checked against the loss table.
#[derive(Debug, Clone)]
pub struct ModelClass {
    params: Vec<String>,
    contexts: Vec<String>,
    num_actions: usize,
    family: Family,
    loss_table: Vec<f64>,
    discrete_table: Option<Vec<LossDistribution>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelClassDoc {
    params: Vec<String>,
    contexts: Vec<String>,
    #[serde(rename = "K")]
    k: usize,
    family: Family,
    loss_table: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discrete_table: Option<Vec<Vec<Vec<LossDistribution>>>>,
}

impl ModelClass {
    /// Build and validate a model class from a theta-major nested loss table.
    pub fn new(
        params: Vec<String>,
        contexts: Vec<String>,
        num_actions: usize,
        family: Family,
        loss_table: Vec<Vec<Vec<f64>>>,
        discrete_table: Option<Vec<Vec<Vec<LossDistribution>>>>,
    ) -> Result<Arc<Self>, ModelError> {
        let n = params.len();
        let x = contexts.len();
        let k = num_actions;
        if n < 2 {
            return Err(ModelError::Validation(format!("need at least 2 parameters, got {n}")));
        }
        if k < 2 {
            return Err(ModelError::Validation(format!("need at least 2 actions, got {k}")));
        }
        if x == 0 {
            return Err(ModelError::Validation("need at least one context".into()));
        }
        for (name, unique) in [("params", &params), ("contexts", &contexts)] {
            let mut seen = std::collections::HashSet::new();
            if !unique.iter().all(|id| seen.insert(id)) {
                return Err(ModelError::Validation(format!("duplicate id in {name}")));
            }
        }
        if loss_table.len() != n {
            return Err(ModelError::Validation("loss table theta dimension mismatch".into()));
        }
        let mut flat = Vec::with_capacity(n * x * k);
        for (ti, per_theta) in loss_table.iter().enumerate() {
            if per_theta.len() != x {
                return Err(ModelError::Validation(format!(
                    "loss table context dimension mismatch at theta {ti}"
                )));
            }
            for per_ctx in per_theta {
                if per_ctx.len() != k {
                    return Err(ModelError::Validation(format!(
                        "loss table action dimension mismatch at theta {ti}"
                    )));
                }
                for &v in per_ctx {
                    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                        return Err(ModelError::Validation(format!(
                            "loss table entry {v} not in [0,1]"
                        )));
                    }
                    if family == Family::Ziu && v > 0.5 {
                        return Err(ModelError::Validation(format!(
                            "ziu mean {v} above 1/2 has no atom in [0,1]"
                        )));
                    }
                    flat.push(v);
                }
            }
        }
        let discrete_flat = match (family, discrete_table) {
            (Family::Discrete, Some(table)) => {
                let mut out = Vec::with_capacity(n * x * k);
                if table.len() != n || table.iter().any(|t| t.len() != x) {
                    return Err(ModelError::Validation("discrete table shape mismatch".into()));
                }
                for per_theta in table {
                    for per_ctx in per_theta {
                        if per_ctx.len() != k {
                            return Err(ModelError::Validation(
                                "discrete table shape mismatch".into(),
                            ));
                        }
                        out.extend(per_ctx);
                    }
                }
                for d in &out {
                    if d.family() != Family::Discrete {
                        return Err(ModelError::Validation(
                            "discrete table entries must be discrete laws".into(),
                        ));
                    }
                }
                Some(out)
            }
            (Family::Discrete, None) => {
                return Err(ModelError::Validation(
                    "discrete family requires an explicit distribution table".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(ModelError::Validation(
                    "distribution table only valid for the discrete family".into(),
                ))
            }
            (_, None) => None,
        };
        let model = ModelClass {
            params,
            contexts,
            num_actions,
            family,
            loss_table: flat,
            discrete_table: discrete_flat,
        };
        model.check_realizability()?;
        Ok(Arc::new(model))
    }

    fn check_realizability(&self) -> Result<(), ModelError> {
        for theta in 0..self.n_params() {
            for x in 0..self.n_contexts() {
                for a in 0..self.num_actions {
                    let mean = self.loss_distribution(theta, x, a).mean();
                    let table = self.loss(theta, x, a);
                    if (mean - table).abs() > REALIZABILITY_TOL {
                        return Err(ModelError::Realizability {
                            theta,
                            context: x,
                            action: a,
                            mean,
                            table,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn param_ids(&self) -> &[String] {
        &self.params
    }

    pub fn context_ids(&self) -> &[String] {
        &self.contexts
    }

    #[inline]
    fn idx(&self, theta: usize, x: usize, a: usize) -> usize {
        (theta * self.contexts.len() + x) * self.num_actions + a
    }

    /// Mean loss of the triple.
    #[inline]
    pub fn loss(&self, theta: usize, x: usize, a: usize) -> f64 {
        self.loss_table[self.idx(theta, x, a)]
    }

    /// Smallest mean loss over actions for the given parameter and context.
    pub fn optimal_loss(&self, theta: usize, x: usize) -> f64 {
        (0..self.num_actions)
            .map(|a| self.loss(theta, x, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lowest-index action attaining [`Self::optimal_loss`].
    pub fn best_action(&self, theta: usize, x: usize) -> usize {
        let mut best = 0;
        let mut best_loss = self.loss(theta, x, 0);
        for a in 1..self.num_actions {
            let l = self.loss(theta, x, a);
            if l < best_loss {
                best = a;
                best_loss = l;
            }
        }
        best
    }

    /// The loss law of the triple under the model's likelihood family.
    pub fn loss_distribution(&self, theta: usize, x: usize, a: usize) -> LossDistribution {
        let mean = self.loss(theta, x, a);
        match self.family {
            Family::Bernoulli => LossDistribution::Bernoulli { p: mean },
            Family::Gaussian => LossDistribution::Gaussian { mean },
            Family::Ziu => LossDistribution::Ziu { atom: 1.0 - 2.0 * mean },
            Family::Discrete => self.discrete_table.as_ref().expect("validated")
                [self.idx(theta, x, a)]
            .clone(),
        }
    }

    /// Log-density of an observed loss under the triple's loss law.
    pub fn log_likelihood(
        &self,
        theta: usize,
        x: usize,
        a: usize,
        loss: f64,
    ) -> Result<f64, DistError> {
        self.loss_distribution(theta, x, a).log_density(loss)
    }

    pub fn from_json(doc: &str) -> Result<Arc<Self>, ModelError> {
        let doc: ModelClassDoc = serde_json::from_str(doc)?;
        let n = doc.params.len();
        let x = doc.contexts.len();
        let k = doc.k;
        // reshape check happens in `new`; only the advertised K is extra
        let table = doc.loss_table;
        if table.iter().flatten().any(|row| row.len() != k) {
            return Err(ModelError::Validation(format!(
                "loss table rows disagree with K={k}"
            )));
        }
        let _ = (n, x);
        ModelClass::new(doc.params, doc.contexts, k, doc.family, table, doc.discrete_table)
    }

    pub fn to_json(&self) -> String {
        let n = self.n_params();
        let x = self.n_contexts();
        let k = self.num_actions;
        let mut table = vec![vec![vec![0.0; k]; x]; n];
        let mut discrete = self
            .discrete_table
            .as_ref()
            .map(|_| vec![vec![Vec::with_capacity(k); x]; n]);
        for theta in 0..n {
            for ctx in 0..x {
                for a in 0..k {
                    table[theta][ctx][a] = self.loss(theta, ctx, a);
                    if let (Some(d), Some(flat)) = (discrete.as_mut(), self.discrete_table.as_ref())
                    {
                        d[theta][ctx].push(flat[self.idx(theta, ctx, a)].clone());
                    }
                }
            }
        }
        let doc = ModelClassDoc {
            params: self.params.clone(),
            contexts: self.contexts.clone(),
            k,
            family: self.family,
            loss_table: table,
            discrete_table: discrete,
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }
}

/// A model class plus a hidden true parameter and an i.i.d. context law.
///
/// When built via [`Environment::binarize`], observed losses are the source
/// draw randomly rounded to `{0,1}`; the declared model class is the same
/// loss table under the Bernoulli family, so realizability still holds.
#[derive(Debug, Clone)]
pub struct Environment {
    model: Arc<ModelClass>,
    true_param: usize,
    context_probs: Vec<f64>,
    binarize_source: Option<Arc<ModelClass>>,
}

impl Environment {
    pub fn new(
        model: Arc<ModelClass>,
        true_param: usize,
        context_probs: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if true_param >= model.n_params() {
            return Err(ModelError::Validation(format!(
                "true parameter index {true_param} out of range"
            )));
        }
        if context_probs.len() != model.n_contexts() {
            return Err(ModelError::Validation("context distribution length mismatch".into()));
        }
        let total: f64 = context_probs.iter().sum();
        if context_probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-12
        {
            return Err(ModelError::Validation(
                "context distribution is not a probability vector".into(),
            ));
        }
        Ok(Environment {
            model,
            true_param,
            context_probs,
            binarize_source: None,
        })
    }

    /// Environment with contexts drawn uniformly.
    pub fn with_uniform_contexts(
        model: Arc<ModelClass>,
        true_param: usize,
    ) -> Result<Self, ModelError> {
        let x = model.n_contexts();
        Environment::new(model, true_param, vec![1.0 / x as f64; x])
    }

    pub fn model(&self) -> &Arc<ModelClass> {
        &self.model
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.context_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.context_probs.len() - 1
    }

    /// Draw a loss for `(x, a)` under the true parameter.
    pub fn sample_loss<R: Rng + ?Sized>(&self, x: usize, a: usize, rng: &mut R) -> f64 {
        match &self.binarize_source {
            Some(source) => {
                let raw = source.loss_distribution(self.true_param, x, a).sample(rng);
                if rng.random::<f64>() < raw {
                    1.0
                } else {
                    0.0
                }
            }
            None => self
                .model
                .loss_distribution(self.true_param, x, a)
                .sample(rng),
        }
    }

    /// Randomized rounding of `[0,1]` losses to `{0,1}`: observations become
    /// `B ~ Ber(L)` for a source draw `L`, and the declared class keeps the
    /// same loss table under the Bernoulli family.
    pub fn binarize(&self) -> Result<Environment, ModelError> {
        if self.model.family() == Family::Gaussian {
            return Err(ModelError::BinarizeGaussian);
        }
        let wrapped = ModelClass {
            params: self.model.params.clone(),
            contexts: self.model.contexts.clone(),
            num_actions: self.model.num_actions,
            family: Family::Bernoulli,
            loss_table: self.model.loss_table.clone(),
            discrete_table: None,
        };
        Ok(Environment {
            model: Arc::new(wrapped),
            true_param: self.true_param,
            context_probs: self.context_probs.clone(),
            binarize_source: Some(Arc::clone(&self.model)),
        })
    }

    /// Explicit handle to quantities that depend on the hidden parameter.
    /// Policy code never touches this; only regret accounting and
    /// oracle-side diagnostics do.
    pub fn oracle(&self) -> EnvOracle<'_> {
        EnvOracle { env: self }
    }
}

/// Read access to the true parameter, segregated from policy computations.
#[derive(Clone, Copy)]
pub struct EnvOracle<'a> {
    env: &'a Environment,
}

impl<'a> EnvOracle<'a> {
    pub fn true_param(&self) -> usize {
        self.env.true_param
    }

    pub fn true_loss(&self, x: usize, a: usize) -> f64 {
        self.env.model.loss(self.env.true_param, x, a)
    }

    pub fn true_optimal_loss(&self, x: usize) -> f64 {
        self.env.model.optimal_loss(self.env.true_param, x)
    }

    pub fn true_distribution(&self, x: usize, a: usize) -> LossDistribution {
        self.env.model.loss_distribution(self.env.true_param, x, a)
    }

    /// Instantaneous regret of an action under the true parameter.
    pub fn action_regret(&self, x: usize, a: usize) -> f64 {
        self.true_loss(x, a) - self.true_optimal_loss(x)
    }
}
