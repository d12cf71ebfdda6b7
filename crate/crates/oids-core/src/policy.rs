//! Round policies for every algorithm: the optimistic IDS variants, the
//! forerunner baselines, and the hyperparameter schedules behind them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::LossDistribution;
use crate::model::ModelClass;
use crate::objectives::{self, ObjectiveError, ZERO_INFORMATION_TOL};
use crate::posterior::OptimisticPosterior;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no information: surrogate gains all below {ZERO_INFORMATION_TOL}; play the greedy action on the surrogate losses")]
    NoInformation,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("scale parameter gamma must be nonnegative, got {0}")]
    NegativeGamma(f64),
    #[error("solver did not converge within {iterations} iterations; duality gap {gap}")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("algorithm {kind:?} is missing required parameter {name}")]
    MissingParameter { kind: AlgoKind, name: &'static str },
    #[error("algorithm {kind:?} does not accept parameter {name}")]
    UnexpectedParameter { kind: AlgoKind, name: &'static str },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Probability vector over the K actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    probs: Vec<f64>,
}

impl PolicyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, PolicyError> {
        if probs.is_empty() {
            return Err(PolicyError::InvalidInput("empty policy".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(PolicyError::InvalidInput(
                "policy entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(PolicyError::InvalidInput(format!(
                "policy sums to {total}, not 1"
            )));
        }
        Ok(PolicyDistribution { probs })
    }

    /// Point mass on one action.
    pub fn delta(k: usize, action: usize) -> Result<Self, PolicyError> {
        if action >= k {
            return Err(PolicyError::InvalidInput(format!(
                "action {action} out of range for K={k}"
            )));
        }
        let mut probs = vec![0.0; k];
        probs[action] = 1.0;
        Ok(PolicyDistribution { probs })
    }

    pub fn uniform(k: usize) -> Result<Self, PolicyError> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Lowest-index argmin of a slice.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Exact information-ratio minimizer over the simplex.
///
/// The ratio has an affine-squared numerator over an affine denominator, so
/// some minimizer is supported on at most two actions. All singletons and
/// pairs are enumerated; per pair the candidates are the endpoints and the
/// interior stationary points of the rational function, which solve in
/// closed form. Ties break toward the lexicographically smallest
/// `(i, j, q)` triple.
pub fn voids(delta_bar: &[f64], gain: &[f64]) -> Result<PolicyDistribution, PolicyError> {
    let k = delta_bar.len();
    if k != gain.len() || k == 0 {
        return Err(PolicyError::InvalidInput("mismatched objective vectors".into()));
    }
    if delta_bar.iter().chain(gain).any(|v| !v.is_finite()) {
        return Err(PolicyError::InvalidInput("non-finite objective".into()));
    }
    let max_gain = gain.iter().cloned().fold(0.0, f64::max);
    if max_gain <= ZERO_INFORMATION_TOL {
        return Err(PolicyError::NoInformation);
    }
    if k == 1 {
        return PolicyDistribution::delta(1, 0);
    }

    let mut best: Option<(f64, usize, usize, f64)> = None;
    let mut cands = Vec::with_capacity(4);
    for i in 0..k {
        for j in (i + 1)..k {
            // ratio of (a q + b)^2 over (c q + e) in the weight q on action i
            let a = delta_bar[i] - delta_bar[j];
            let b = delta_bar[j];
            let c = gain[i] - gain[j];
            let e = gain[j];
            cands.clear();
            cands.push(0.0);
            cands.push(1.0);
            if a != 0.0 {
                let root = -b / a;
                if root > 0.0 && root < 1.0 {
                    cands.push(root);
                }
            }
            if a * c != 0.0 {
                let stationary = (c * b - 2.0 * a * e) / (a * c);
                if stationary > 0.0 && stationary < 1.0 {
                    cands.push(stationary);
                }
            }
            cands.sort_by(|x, y| x.partial_cmp(y).expect("finite candidates"));
            for &q in cands.iter() {
                let num = a * q + b;
                let den = c * q + e;
                if let Some(value) = objectives::ir_value(num, den) {
                    if best.is_none_or(|(bv, ..)| value < bv) {
                        best = Some((value, i, j, q));
                    }
                }
            }
        }
    }
    let (_, i, j, q) = best.ok_or(PolicyError::NoInformation)?;
    let mut probs = vec![0.0; k];
    probs[i] = q;
    probs[j] += 1.0 - q;
    PolicyDistribution::new(probs)
}

/// Minimizer of the averaged DEC. The objective is affine in the policy, so
/// a vertex is optimal: the lowest-index argmin of `delta - mu * gain`.
pub fn roids(
    delta_bar: &[f64],
    gain: &[f64],
    mu: f64,
) -> Result<PolicyDistribution, PolicyError> {
    let k = delta_bar.len();
    if k != gain.len() || k == 0 {
        return Err(PolicyError::InvalidInput("mismatched objective vectors".into()));
    }
    let scores: Vec<f64> = delta_bar
        .iter()
        .zip(gain)
        .map(|(d, g)| d - mu * g)
        .collect();
    PolicyDistribution::delta(k, argmin(&scores))
}

/// Induced posterior-sampling policy: the probability of an action is the
/// posterior mass of parameters whose greedy action it is. Sampling an
/// action from this distribution is statistically identical to sampling a
/// parameter and acting greedily.
pub fn fgts_policy(post: &OptimisticPosterior, x: usize) -> Result<PolicyDistribution, PolicyError> {
    let model = post.model();
    let mut probs = vec![0.0; model.num_actions()];
    for (theta, w) in post.weights().iter().enumerate() {
        if *w > 0.0 {
            probs[model.best_action(theta, x)] += w;
        }
    }
    PolicyDistribution::new(probs)
}

/// Inverse-gap weighting against a nominal loss vector, with positive gaps
/// `f(a) - f(b)` off the empirical best action `b`.
pub fn igw_policy(ell_bar: &[f64], gamma: f64) -> Result<PolicyDistribution, PolicyError> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(PolicyError::NegativeGamma(gamma));
    }
    let k = ell_bar.len();
    if k == 0 {
        return Err(PolicyError::InvalidInput("empty loss vector".into()));
    }
    let b = argmin(ell_bar);
    let fb = ell_bar[b];
    if fb == 0.0 {
        return PolicyDistribution::delta(k, b);
    }
    let mut probs = vec![0.0; k];
    let mut off_mass = 0.0;
    for (a, slot) in probs.iter_mut().enumerate() {
        if a == b {
            continue;
        }
        *slot = fb / (k as f64 * fb + gamma * (ell_bar[a] - fb));
        off_mass += *slot;
    }
    probs[b] = 1.0 - off_mass;
    PolicyDistribution::new(probs)
}

/// Iteration cap for the DEC game solver.
pub const E2D_MAX_ITERATIONS: usize = 100_000;
/// Target duality gap for the DEC game solver.
pub const E2D_GAP_TOL: f64 = 1e-4;

/// Policy minimizing the worst-case DEC against a reference predictive.
///
/// The objective is the value of a finite matrix game; it is solved with
/// entropic mirror-prox (simultaneous multiplicative-weights updates with an
/// extragradient step on both players), which drives the duality gap at rate
/// `O(1/iterations)`. A plain multiplicative-weights-versus-best-response
/// loop converges too slowly to certify the gap within the iteration cap.
pub fn e2d_policy(
    model: &ModelClass,
    x: usize,
    gamma: f64,
    p_hat: &[LossDistribution],
) -> Result<PolicyDistribution, PolicyError> {
    e2d_policy_with_value(model, x, gamma, p_hat).map(|(pi, _)| pi)
}

/// As [`e2d_policy`], also returning the achieved game value.
pub fn e2d_policy_with_value(
    model: &ModelClass,
    x: usize,
    gamma: f64,
    p_hat: &[LossDistribution],
) -> Result<(PolicyDistribution, f64), PolicyError> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(PolicyError::NegativeGamma(gamma));
    }
    if p_hat.len() != model.num_actions() {
        return Err(PolicyError::InvalidInput(
            "reference predictive must cover every action".into(),
        ));
    }
    let scores = objectives::dec_scores(model, x, gamma, p_hat)?;
    let n = scores.len();
    let k = model.num_actions();

    if n == 1 {
        let a = argmin(&scores[0]);
        let value = scores[0][a];
        return Ok((PolicyDistribution::delta(k, a)?, value));
    }

    let range = scores
        .iter()
        .flatten()
        .fold(0.0f64, |m, s| m.max(s.abs()))
        .max(1e-12);
    let step = 0.5 / range;

    let mut log_pi = vec![0.0f64; k];
    let mut log_q = vec![0.0f64; n];
    let mut avg_pi = vec![0.0f64; k];
    let mut avg_q = vec![0.0f64; n];

    let pi_payoff = |q: &[f64]| -> Vec<f64> {
        // gradient in pi: column averages under q
        let mut out = vec![0.0; k];
        for (row, qw) in scores.iter().zip(q) {
            for (slot, s) in out.iter_mut().zip(row) {
                *slot += qw * s;
            }
        }
        out
    };
    let q_payoff = |pi: &[f64]| -> Vec<f64> {
        // gradient in q: row averages under pi
        scores
            .iter()
            .map(|row| row.iter().zip(pi).map(|(s, p)| s * p).sum())
            .collect()
    };

    // pure-strategy maximin is a valid lower bound on the game value
    let maximin = scores
        .iter()
        .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut best_upper = f64::INFINITY;
    let mut best_pi: Option<Vec<f64>> = None;
    let mut best_lower = maximin;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < E2D_MAX_ITERATIONS {
        let block = 250.min(E2D_MAX_ITERATIONS - iterations);
        for _ in 0..block {
            let pi = softmax(&log_pi);
            let q = softmax(&log_q);
            // extragradient midpoint
            let mid_pi_log: Vec<f64> = log_pi
                .iter()
                .zip(pi_payoff(&q))
                .map(|(l, g)| l - step * g)
                .collect();
            let mid_q_log: Vec<f64> = log_q
                .iter()
                .zip(q_payoff(&pi))
                .map(|(l, g)| l + step * g)
                .collect();
            let mid_pi = softmax(&mid_pi_log);
            let mid_q = softmax(&mid_q_log);
            for (l, g) in log_pi.iter_mut().zip(pi_payoff(&mid_q)) {
                *l -= step * g;
            }
            for (l, g) in log_q.iter_mut().zip(q_payoff(&mid_pi)) {
                *l += step * g;
            }
            stabilize(&mut log_pi);
            stabilize(&mut log_q);
            for (acc, v) in avg_pi.iter_mut().zip(&mid_pi) {
                *acc += v;
            }
            for (acc, v) in avg_q.iter_mut().zip(&mid_q) {
                *acc += v;
            }
        }
        iterations += block;

        let total: f64 = avg_pi.iter().sum();
        let pi_bar: Vec<f64> = avg_pi.iter().map(|v| v / total).collect();
        let total_q: f64 = avg_q.iter().sum();
        let q_bar: Vec<f64> = avg_q.iter().map(|v| v / total_q).collect();
        // lower bounds: any mixture over parameters certifies one
        for q in [&q_bar, &softmax(&log_q)] {
            best_lower = best_lower.max(
                pi_payoff(q).into_iter().fold(f64::INFINITY, f64::min),
            );
        }
        // upper bounds: the running average, the last iterate, and the best
        // response to the averaged opponent; vertex equilibria exit through
        // the latter long before the average settles
        let last = softmax(&log_pi);
        let mut response = vec![0.0; k];
        response[argmin(&pi_payoff(&q_bar))] = 1.0;
        for candidate in [pi_bar, last, response] {
            let upper = q_payoff(&candidate)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if upper < best_upper {
                best_upper = upper;
                best_pi = Some(candidate);
            }
        }
        gap = best_upper - best_lower;
        if gap <= E2D_GAP_TOL {
            return Ok((
                PolicyDistribution::new(best_pi.expect("candidate selected"))?,
                best_upper,
            ));
        }
    }
    Err(PolicyError::NonConvergence {
        iterations: E2D_MAX_ITERATIONS,
        gap,
    })
}

fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn stabilize(log_weights: &mut [f64]) {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for l in log_weights.iter_mut() {
        *l -= max;
    }
}

/// Hyperparameter schedules. Stepsizes default to `eta = 1/4` for the
/// Hellinger variants and to the subgaussian formula for the squared-loss
/// variants.
pub mod schedules {
    /// Worst-case optimism rate for horizon `t`.
    pub fn lambda_worst_case(k: usize, n: usize, t: usize) -> f64 {
        ((n as f64).ln() / ((80.0 * k as f64 + 21.0 / 4.0) * t as f64)).sqrt()
    }

    /// First-order optimism rate for an optimal-loss budget `lstar`,
    /// capped at `1 / (250 K + 54)`.
    pub fn lambda_first_order(k: usize, n: usize, lstar: f64) -> f64 {
        let cap = 1.0 / (250.0 * k as f64 + 54.0);
        if lstar <= 0.0 {
            return cap;
        }
        (5.0 * (n as f64).ln() / ((500.0 * k as f64 + 108.0) * lstar))
            .sqrt()
            .min(cap)
    }

    /// Subgaussian optimism rate for variance proxy `v`.
    pub fn lambda_subgaussian(k: usize, n: usize, t: usize, v: f64) -> f64 {
        let vm = v.min(1.0);
        ((n as f64).ln() / ((0.25 + 20.0 * vm * (1.0 + k as f64)) * t as f64)).sqrt()
    }

    /// Exploration weight paired with the worst-case and first-order rates.
    pub fn mu_from_lambda(lambda: f64) -> f64 {
        1.0 / (10.0 * lambda)
    }

    /// Which variance clamp enters the subgaussian exploration weight.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
    #[serde(rename_all = "snake_case")]
    pub enum SgMuConvention {
        /// `v` clamped from below by one.
        VMax,
        /// `v` clamped from above by one.
        VMin,
    }

    /// Subgaussian exploration weight; defaults to the `VMax` clamp.
    pub fn mu_subgaussian(lambda: f64, v: f64, convention: SgMuConvention) -> f64 {
        let clamp = match convention {
            SgMuConvention::VMax => v.max(1.0),
            SgMuConvention::VMin => v.min(1.0),
        };
        1.0 / (80.0 * lambda * clamp)
    }

    /// Default stepsize for the Hellinger variants.
    pub fn eta_hellinger() -> f64 {
        0.25
    }

    /// Subgaussian stepsize for variance proxy `v`.
    pub fn eta_subgaussian(v: f64) -> f64 {
        (1.0 + (1.0 - v.min(1.0)).sqrt()) / (2.0 * v)
    }
}

/// Algorithm selector plus its hyperparameters as they appear in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKind {
    Voids,
    Roids,
    Fgts,
    Thompson,
    BayesIds,
    Igw,
    E2d,
    Uniform,
    Greedy,
    VoidsSg,
    RoidsSg,
}

impl AlgoKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgoKind::Voids => "voids",
            AlgoKind::Roids => "roids",
            AlgoKind::Fgts => "fgts",
            AlgoKind::Thompson => "thompson",
            AlgoKind::BayesIds => "bayes_ids",
            AlgoKind::Igw => "igw",
            AlgoKind::E2d => "e2d",
            AlgoKind::Uniform => "uniform",
            AlgoKind::Greedy => "greedy",
            AlgoKind::VoidsSg => "voids_sg",
            AlgoKind::RoidsSg => "roids_sg",
        }
    }

    /// Kinds driven by the optimistic posterior with the Hellinger gain.
    pub fn optimistic_hellinger(&self) -> bool {
        matches!(self, AlgoKind::Voids | AlgoKind::Roids | AlgoKind::Fgts | AlgoKind::Igw)
    }

    /// Kinds driven by the squared-loss gain and Gaussian scoring.
    pub fn subgaussian(&self) -> bool {
        matches!(self, AlgoKind::VoidsSg | AlgoKind::RoidsSg)
    }

    /// Kinds running the plain Bayesian posterior.
    pub fn plain_posterior(&self) -> bool {
        matches!(
            self,
            AlgoKind::Thompson | AlgoKind::BayesIds | AlgoKind::Greedy | AlgoKind::E2d
        )
    }
}

/// The optimism rate: an explicit number or a schedule tag resolved against
/// the instance dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Auto(AutoLambda),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoLambda {
    AutoWorstCase,
    AutoFirstOrder,
    AutoSubgaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub kind: AlgoKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lstar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sg_mu_convention: Option<schedules::SgMuConvention>,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgoKind) -> Self {
        AlgorithmSpec {
            kind,
            eta: None,
            lambda: None,
            mu: None,
            gamma: None,
            v: None,
            lstar: None,
            sg_mu_convention: None,
        }
    }

    pub fn with_lambda(mut self, lambda: LambdaSpec) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v = Some(v);
        self
    }

    pub fn with_lstar(mut self, lstar: f64) -> Self {
        self.lstar = Some(lstar);
        self
    }

    /// Resolve schedule tags and defaults against the instance dimensions.
    pub fn resolve(&self, k: usize, n: usize, t: usize) -> Result<ResolvedAlgorithm, PolicyError> {
        let kind = self.kind;
        let reject = |name: &'static str, present: bool| -> Result<(), PolicyError> {
            if present {
                Err(PolicyError::UnexpectedParameter { kind, name })
            } else {
                Ok(())
            }
        };
        match kind {
            AlgoKind::Uniform | AlgoKind::Thompson | AlgoKind::BayesIds | AlgoKind::Greedy => {
                reject("eta", self.eta.is_some())?;
                reject("lambda", self.lambda.is_some())?;
                reject("mu", self.mu.is_some())?;
                reject("gamma", self.gamma.is_some())?;
                Ok(ResolvedAlgorithm {
                    kind,
                    eta: 1.0,
                    lambda: 0.0,
                    mu: None,
                    gamma: None,
                    v: None,
                })
            }
            AlgoKind::E2d => {
                reject("eta", self.eta.is_some())?;
                reject("lambda", self.lambda.is_some())?;
                reject("mu", self.mu.is_some())?;
                let gamma = self.gamma.ok_or(PolicyError::MissingParameter {
                    kind,
                    name: "gamma",
                })?;
                if gamma < 0.0 {
                    return Err(PolicyError::NegativeGamma(gamma));
                }
                Ok(ResolvedAlgorithm {
                    kind,
                    eta: 1.0,
                    lambda: 0.0,
                    mu: None,
                    gamma: Some(gamma),
                    v: None,
                })
            }
            AlgoKind::Voids | AlgoKind::Roids | AlgoKind::Fgts | AlgoKind::Igw => {
                let lambda = self.resolve_lambda(k, n, t, AutoLambda::AutoWorstCase)?;
                let eta = self.eta.unwrap_or_else(schedules::eta_hellinger);
                if !(eta > 0.0 && eta < 0.5) {
                    return Err(PolicyError::InvalidHyperparameter(format!(
                        "eta {eta} outside (0, 1/2)"
                    )));
                }
                let mu = match kind {
                    AlgoKind::Roids => Some(match self.mu {
                        Some(m) if m >= 0.0 => m,
                        Some(m) => {
                            return Err(PolicyError::InvalidHyperparameter(format!(
                                "mu {m} negative"
                            )))
                        }
                        None => schedules::mu_from_lambda(lambda),
                    }),
                    _ => {
                        reject("mu", self.mu.is_some())?;
                        None
                    }
                };
                let gamma = match kind {
                    AlgoKind::Igw => {
                        let g = self.gamma.ok_or(PolicyError::MissingParameter {
                            kind,
                            name: "gamma",
                        })?;
                        if g < 0.0 {
                            return Err(PolicyError::NegativeGamma(g));
                        }
                        Some(g)
                    }
                    _ => {
                        reject("gamma", self.gamma.is_some())?;
                        None
                    }
                };
                Ok(ResolvedAlgorithm {
                    kind,
                    eta,
                    lambda,
                    mu,
                    gamma,
                    v: None,
                })
            }
            AlgoKind::VoidsSg | AlgoKind::RoidsSg => {
                let v = self.v.unwrap_or(1.0);
                if v <= 0.0 {
                    return Err(PolicyError::InvalidHyperparameter(format!(
                        "variance proxy v {v} must be positive"
                    )));
                }
                let lambda = self.resolve_lambda(k, n, t, AutoLambda::AutoSubgaussian)?;
                let eta = self.eta.unwrap_or_else(|| schedules::eta_subgaussian(v));
                if eta <= 0.0 {
                    return Err(PolicyError::InvalidHyperparameter(format!(
                        "eta {eta} must be positive"
                    )));
                }
                let mu = match kind {
                    AlgoKind::RoidsSg => Some(match self.mu {
                        Some(m) if m >= 0.0 => m,
                        Some(m) => {
                            return Err(PolicyError::InvalidHyperparameter(format!(
                                "mu {m} negative"
                            )))
                        }
                        None => schedules::mu_subgaussian(
                            lambda,
                            v,
                            self.sg_mu_convention
                                .unwrap_or(schedules::SgMuConvention::VMax),
                        ),
                    }),
                    _ => {
                        reject("mu", self.mu.is_some())?;
                        None
                    }
                };
                reject("gamma", self.gamma.is_some())?;
                Ok(ResolvedAlgorithm {
                    kind,
                    eta,
                    lambda,
                    mu,
                    gamma: None,
                    v: Some(v),
                })
            }
        }
    }

    fn resolve_lambda(
        &self,
        k: usize,
        n: usize,
        t: usize,
        default: AutoLambda,
    ) -> Result<f64, PolicyError> {
        let spec = self.lambda.unwrap_or(LambdaSpec::Auto(default));
        let lambda = match spec {
            LambdaSpec::Value(v) => v,
            LambdaSpec::Auto(AutoLambda::AutoWorstCase) => {
                schedules::lambda_worst_case(k, n, t)
            }
            LambdaSpec::Auto(AutoLambda::AutoFirstOrder) => {
                let lstar = self.lstar.ok_or(PolicyError::MissingParameter {
                    kind: self.kind,
                    name: "lstar",
                })?;
                schedules::lambda_first_order(k, n, lstar)
            }
            LambdaSpec::Auto(AutoLambda::AutoSubgaussian) => {
                schedules::lambda_subgaussian(k, n, t, self.v.unwrap_or(1.0))
            }
        };
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(PolicyError::InvalidHyperparameter(format!(
                "lambda {lambda} must be a finite nonnegative number"
            )));
        }
        Ok(lambda)
    }
}

/// An [`AlgorithmSpec`] with every schedule tag and default resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedAlgorithm {
    pub kind: AlgoKind,
    pub eta: f64,
    pub lambda: f64,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub v: Option<f64>,
}
