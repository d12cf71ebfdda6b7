//! Optimistic posterior over a finite parameter set, maintained in
//! log-space.
//!
//! The update tempers the likelihood with a stepsize `eta` and multiplies by
//! an optimism term `exp(-lambda * min_a loss(theta, x, a))` favoring
//! parameters that promise a low optimal loss. The plain Bayesian posterior
//! used by the Thompson-style baselines is the `(eta = 1, lambda = 0)`
//! special case of the same engine.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dist::{self, DistError, Family, LossDistribution};
use crate::model::ModelClass;

/// Tolerance for the normalization invariant on weight vectors.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("observation (x={context}, a={action}, loss={loss}) is impossible under every parameter; model inconsistent with the data")]
    ModelInconsistency {
        context: usize,
        action: usize,
        loss: f64,
    },
    #[error("invalid stepsizes: eta={eta}, lambda={lambda}")]
    InvalidStepsizes { eta: f64, lambda: f64 },
    #[error("potential diagnostic requires lambda > 0")]
    LambdaZero,
    #[error("invalid observation: {0}")]
    InvalidObservation(#[from] DistError),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Which likelihood drives the update.
///
/// `ModelFamily` reads densities from the model's loss laws. `GaussianLoss`
/// scores observations with a unit-variance Gaussian centered on the mean
/// loss regardless of the model family, which is the update used by the
/// subgaussian variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodModel {
    ModelFamily,
    GaussianLoss,
}

#[derive(Debug, Clone)]
pub struct OptimisticPosterior {
    model: Arc<ModelClass>,
    log_weights: Vec<f64>,
    eta: f64,
    lambda: f64,
    likelihood: LikelihoodModel,
}

impl OptimisticPosterior {
    /// Uniform prior.
    pub fn uniform(model: Arc<ModelClass>, eta: f64, lambda: f64) -> Result<Self, PosteriorError> {
        let n = model.n_params();
        Self::from_weights(model, &vec![1.0 / n as f64; n], eta, lambda)
    }

    /// Prior from an explicit weight vector.
    pub fn from_weights(
        model: Arc<ModelClass>,
        weights: &[f64],
        eta: f64,
        lambda: f64,
    ) -> Result<Self, PosteriorError> {
        if !eta.is_finite() || !lambda.is_finite() || eta <= 0.0 || lambda < 0.0 {
            return Err(PosteriorError::InvalidStepsizes { eta, lambda });
        }
        if weights.len() != model.n_params() {
            return Err(PosteriorError::InvalidWeights(format!(
                "{} weights for {} parameters",
                weights.len(),
                model.n_params()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(PosteriorError::InvalidWeights(format!("weights sum to {total}")));
        }
        let mut post = OptimisticPosterior {
            model,
            log_weights: weights
                .iter()
                .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
                .collect(),
            eta,
            lambda,
            likelihood: LikelihoodModel::ModelFamily,
        };
        post.renormalize();
        Ok(post)
    }

    /// Switch the update to the unit-variance Gaussian surrogate likelihood.
    pub fn with_gaussian_likelihood(mut self) -> Self {
        self.likelihood = LikelihoodModel::GaussianLoss;
        self
    }

    pub fn model(&self) -> &Arc<ModelClass> {
        &self.model
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn likelihood(&self) -> LikelihoodModel {
        self.likelihood
    }

    /// Posterior weights (`exp` of the log weights).
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    pub fn weight(&self, theta: usize) -> f64 {
        self.log_weights[theta].exp()
    }

    /// Number of parameters with strictly positive weight.
    pub fn support_size(&self) -> usize {
        self.log_weights
            .iter()
            .filter(|lw| **lw > f64::NEG_INFINITY)
            .count()
    }

    /// Shannon entropy of the weight vector, in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .log_weights
            .iter()
            .filter(|lw| **lw > f64::NEG_INFINITY)
            .map(|lw| lw.exp() * lw)
            .sum::<f64>()
    }

    /// Weight snapshot keyed by parameter id, ready for serialization.
    pub fn snapshot(&self) -> BTreeMap<String, f64> {
        self.model
            .param_ids()
            .iter()
            .cloned()
            .zip(self.weights())
            .collect()
    }

    pub fn snapshot_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            weights: &'a BTreeMap<String, f64>,
        }
        serde_json::to_string(&Doc {
            weights: &self.snapshot(),
        })
        .expect("snapshot serializes")
    }

    fn log_likelihood_term(&self, theta: usize, x: usize, a: usize, loss: f64) -> Result<f64, DistError> {
        match self.likelihood {
            LikelihoodModel::ModelFamily => self.model.log_likelihood(theta, x, a, loss),
            LikelihoodModel::GaussianLoss => {
                Ok(dist::gaussian_log_density(self.model.loss(theta, x, a), loss))
            }
        }
    }

    /// One observation step: adds `eta * log p(loss | theta, x, a)` and
    /// subtracts `lambda * optimal_loss(theta, x)` in log-space, then
    /// renormalizes. Pure: returns the new posterior.
    pub fn update(&self, x: usize, a: usize, loss: f64) -> Result<Self, PosteriorError> {
        let mut next = self.clone();
        for theta in 0..self.log_weights.len() {
            if next.log_weights[theta] == f64::NEG_INFINITY {
                continue;
            }
            let lp = self.log_likelihood_term(theta, x, a, loss)?;
            next.log_weights[theta] +=
                self.eta * lp - self.lambda * self.model.optimal_loss(theta, x);
        }
        if next.log_weights.iter().all(|lw| *lw == f64::NEG_INFINITY) {
            return Err(PosteriorError::ModelInconsistency {
                context: x,
                action: a,
                loss,
            });
        }
        next.renormalize();
        Ok(next)
    }

    fn renormalize(&mut self) {
        let z = log_sum_exp(&self.log_weights);
        for lw in &mut self.log_weights {
            *lw -= z;
        }
    }

    /// Posterior predictive mixture for `(x, a)`. Rejected for the Gaussian
    /// family, whose mixtures leave the family.
    pub fn predictive(&self, x: usize, a: usize) -> Result<LossDistribution, DistError> {
        if self.model.family() == Family::Gaussian {
            return Err(DistError::GaussianMixture);
        }
        let mut dists = Vec::new();
        let mut weights = Vec::new();
        for (theta, lw) in self.log_weights.iter().enumerate() {
            if *lw > f64::NEG_INFINITY {
                dists.push(self.model.loss_distribution(theta, x, a));
                weights.push(lw.exp());
            }
        }
        dist::mixture(&dists, &weights)
    }

    /// Posterior-averaged loss of an action.
    pub fn surrogate_loss(&self, x: usize, a: usize) -> f64 {
        self.log_weights
            .iter()
            .enumerate()
            .filter(|(_, lw)| **lw > f64::NEG_INFINITY)
            .map(|(theta, lw)| lw.exp() * self.model.loss(theta, x, a))
            .sum()
    }

    /// Posterior-averaged optimal loss.
    pub fn surrogate_optimal_loss(&self, x: usize) -> f64 {
        self.log_weights
            .iter()
            .enumerate()
            .filter(|(_, lw)| **lw > f64::NEG_INFINITY)
            .map(|(theta, lw)| lw.exp() * self.model.optimal_loss(theta, x))
            .sum()
    }

    /// All surrogate losses for a context.
    pub fn surrogate_losses(&self, x: usize) -> Vec<f64> {
        (0..self.model.num_actions())
            .map(|a| self.surrogate_loss(x, a))
            .collect()
    }
}

/// Potential-function diagnostic for a prior and an observation trace.
///
/// Returns `(direct, telescoped)`:
/// the direct form evaluates `(1/lambda) log E_prior exp(-lambda sum_t c_t)`
/// with `c_t(theta) = (eta/lambda) log(1/p_t) + optimal_loss_t(theta)`, and
/// the telescoped form accumulates the per-round normalizers of the running
/// posterior. The two are equal up to floating error.
pub fn potential_phi(
    prior: &OptimisticPosterior,
    trace: &[(usize, usize, f64)],
) -> Result<(f64, f64), PosteriorError> {
    if prior.lambda <= 0.0 {
        return Err(PosteriorError::LambdaZero);
    }
    let lambda = prior.lambda;
    let eta = prior.eta;
    let n = prior.log_weights.len();

    // direct evaluation from the prior
    let mut acc = prior.log_weights.clone();
    for &(x, a, loss) in trace {
        for (theta, entry) in acc.iter_mut().enumerate() {
            if *entry == f64::NEG_INFINITY {
                continue;
            }
            let lp = prior.log_likelihood_term(theta, x, a, loss)?;
            *entry += eta * lp - lambda * prior.model.optimal_loss(theta, x);
        }
    }
    let direct = log_sum_exp(&acc) / lambda;

    // telescoped evaluation along the posterior chain
    let mut telescoped = 0.0;
    let mut post = prior.clone();
    for &(x, a, loss) in trace {
        let mut terms = Vec::with_capacity(n);
        for (theta, lw) in post.log_weights.iter().enumerate() {
            if *lw == f64::NEG_INFINITY {
                terms.push(f64::NEG_INFINITY);
                continue;
            }
            let lp = post.log_likelihood_term(theta, x, a, loss)?;
            terms.push(lw + eta * lp - lambda * post.model.optimal_loss(theta, x));
        }
        telescoped += log_sum_exp(&terms) / lambda;
        post = post.update(x, a, loss)?;
    }
    Ok((direct, telescoped))
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values
        .iter()
        .map(|v| (v - max).exp())
        .sum::<f64>()
        .ln()
}
