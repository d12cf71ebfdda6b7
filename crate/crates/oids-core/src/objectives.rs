//! Per-round decision objectives: surrogate regret, surrogate and true
//! information gain, information ratio, averaged and worst-case
//! decision-estimation coefficients, and the oracle-side diagnostics.

use thiserror::Error;

use crate::dist::{self, DistError, Family, LossDistribution};
use crate::model::{EnvOracle, ModelClass};
use crate::policy::PolicyDistribution;
use crate::posterior::OptimisticPosterior;

/// Below this surrogate information level the posterior counts as collapsed
/// and ratio-based policies are undefined; callers fall back to the greedy
/// action on the surrogate losses.
pub const ZERO_INFORMATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("no information: every action's surrogate gain is below {ZERO_INFORMATION_TOL}")]
    NoInformation,
    #[error("gaussian family has no predictive mixture; use the squared-loss gain")]
    GaussianFamily,
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Which divergence drives the information gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainMetric {
    Hellinger,
    SquaredLoss,
}

/// Per-action surrogate regrets `E_post[loss(theta,x,a) - optimal(theta,x)]`.
pub fn delta_bar(post: &OptimisticPosterior, x: usize) -> Vec<f64> {
    let model = post.model();
    let weights = post.weights();
    let k = model.num_actions();
    let mut out = vec![0.0; k];
    for (theta, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let opt = model.optimal_loss(theta, x);
        for (a, slot) in out.iter_mut().enumerate() {
            *slot += w * (model.loss(theta, x, a) - opt);
        }
    }
    out
}

/// Surrogate information gain per action: posterior-expected squared
/// Hellinger distance between each component law and the posterior
/// predictive mixture.
pub fn surrogate_gain(post: &OptimisticPosterior, x: usize) -> Result<Vec<f64>, ObjectiveError> {
    let model = post.model();
    if model.family() == Family::Gaussian {
        return Err(ObjectiveError::GaussianFamily);
    }
    let weights = post.weights();
    let k = model.num_actions();
    let mut out = vec![0.0; k];
    for (a, slot) in out.iter_mut().enumerate() {
        let predictive = post.predictive(x, a)?;
        let mut acc = 0.0;
        for (theta, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            acc += w * dist::hellinger_sq(&model.loss_distribution(theta, x, a), &predictive)?;
        }
        *slot = acc;
    }
    Ok(out)
}

/// Squared-loss surrogate gain: the posterior variance of the mean loss,
/// per action. Defined for every family.
pub fn gaussian_surrogate_gain(post: &OptimisticPosterior, x: usize) -> Vec<f64> {
    let model = post.model();
    let weights = post.weights();
    let k = model.num_actions();
    let mut out = vec![0.0; k];
    for (a, slot) in out.iter_mut().enumerate() {
        let mean = post.surrogate_loss(x, a);
        let mut acc = 0.0;
        for (theta, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let d = model.loss(theta, x, a) - mean;
            acc += w * d * d;
        }
        *slot = acc;
    }
    out
}

/// Surrogate gain under the requested metric.
pub fn surrogate_gain_for(
    post: &OptimisticPosterior,
    x: usize,
    metric: GainMetric,
) -> Result<Vec<f64>, ObjectiveError> {
    match metric {
        GainMetric::Hellinger => surrogate_gain(post, x),
        GainMetric::SquaredLoss => Ok(gaussian_surrogate_gain(post, x)),
    }
}

/// True information gain per action, relative to the hidden parameter.
/// Diagnostic only; requires the environment oracle.
pub fn true_gain(
    post: &OptimisticPosterior,
    oracle: EnvOracle<'_>,
    x: usize,
    metric: GainMetric,
) -> Result<Vec<f64>, ObjectiveError> {
    let model = post.model();
    let weights = post.weights();
    let k = model.num_actions();
    let mut out = vec![0.0; k];
    for (a, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (theta, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            acc += match metric {
                GainMetric::Hellinger => {
                    w * dist::hellinger_sq(
                        &oracle.true_distribution(x, a),
                        &model.loss_distribution(theta, x, a),
                    )?
                }
                GainMetric::SquaredLoss => {
                    let d = model.loss(theta, x, a) - oracle.true_loss(x, a);
                    w * d * d
                }
            };
        }
        *slot = acc;
    }
    Ok(out)
}

/// Ratio value with the collapsed-posterior convention: a vanishing
/// denominator with vanishing numerator counts as zero information ratio.
pub(crate) fn ir_value(numerator: f64, denominator: f64) -> Option<f64> {
    if denominator > ZERO_INFORMATION_TOL {
        Some(numerator * numerator / denominator)
    } else if numerator.abs() <= 1e-12 {
        Some(0.0)
    } else {
        None
    }
}

/// Information ratio of a policy: squared policy-averaged regret over
/// policy-averaged gain.
pub fn information_ratio(
    delta_bar: &[f64],
    gain: &[f64],
    pi: &PolicyDistribution,
) -> Result<f64, ObjectiveError> {
    let num: f64 = pi
        .probs()
        .iter()
        .zip(delta_bar)
        .map(|(p, d)| p * d)
        .sum();
    let den: f64 = pi.probs().iter().zip(gain).map(|(p, g)| p * g).sum();
    if den > ZERO_INFORMATION_TOL {
        Ok(num * num / den)
    } else {
        Err(ObjectiveError::NoInformation)
    }
}

/// Averaged decision-estimation coefficient: policy-averaged regret minus
/// `mu` times policy-averaged gain. Affine in the policy.
pub fn adec(delta_bar: &[f64], gain: &[f64], pi: &PolicyDistribution, mu: f64) -> f64 {
    pi.probs()
        .iter()
        .zip(delta_bar.iter().zip(gain))
        .map(|(p, (d, g))| p * (d - mu * g))
        .sum()
}

/// Per-parameter DEC scores `loss(theta,a) - optimal(theta) - gamma * dist`,
/// where `dist` is squared Hellinger to the reference predictive, or the
/// squared mean gap for the gaussian family.
pub(crate) fn dec_scores(
    model: &ModelClass,
    x: usize,
    gamma: f64,
    p_hat: &[LossDistribution],
) -> Result<Vec<Vec<f64>>, ObjectiveError> {
    let n = model.n_params();
    let k = model.num_actions();
    let mut scores = vec![vec![0.0; k]; n];
    for (theta, row) in scores.iter_mut().enumerate() {
        let opt = model.optimal_loss(theta, x);
        for (a, slot) in row.iter_mut().enumerate() {
            let distance = match model.family() {
                Family::Gaussian => {
                    let d = model.loss(theta, x, a) - p_hat[a].mean();
                    d * d
                }
                _ => dist::hellinger_sq(&model.loss_distribution(theta, x, a), &p_hat[a])?,
            };
            *slot = model.loss(theta, x, a) - opt - gamma * distance;
        }
    }
    Ok(scores)
}

/// Worst-case decision-estimation coefficient of a policy: the maximum over
/// parameters of the policy-averaged DEC score, by enumeration.
pub fn worst_case_dec(
    model: &ModelClass,
    x: usize,
    pi: &PolicyDistribution,
    gamma: f64,
    p_hat: &[LossDistribution],
) -> Result<f64, ObjectiveError> {
    let scores = dec_scores(model, x, gamma, p_hat)?;
    Ok(scores
        .iter()
        .map(|row| {
            pi.probs()
                .iter()
                .zip(row)
                .map(|(p, s)| p * s)
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// KL-based information gain of the plain Bayesian posterior, per action:
/// the mutual information between the parameter and a fresh loss draw.
pub fn bayes_info_gain(
    post: &OptimisticPosterior,
    x: usize,
) -> Result<Vec<f64>, ObjectiveError> {
    let model = post.model();
    if model.family() == Family::Gaussian {
        return Err(ObjectiveError::GaussianFamily);
    }
    let weights = post.weights();
    let k = model.num_actions();
    let mut out = vec![0.0; k];
    for (a, slot) in out.iter_mut().enumerate() {
        let predictive = post.predictive(x, a)?;
        let mut acc = 0.0;
        for (theta, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            acc += w * dist::kl(&model.loss_distribution(theta, x, a), &predictive)?;
        }
        *slot = acc;
    }
    Ok(out)
}

/// Underestimation error and optimality gap of the round:
/// `UE = E_pi[true_loss - surrogate_loss]`,
/// `OG = surrogate_optimal - true_optimal`.
pub fn diagnostics_ue_og(
    post: &OptimisticPosterior,
    oracle: EnvOracle<'_>,
    x: usize,
    pi: &PolicyDistribution,
) -> (f64, f64) {
    let ue = pi
        .probs()
        .iter()
        .enumerate()
        .map(|(a, p)| p * (oracle.true_loss(x, a) - post.surrogate_loss(x, a)))
        .sum();
    let og = post.surrogate_optimal_loss(x) - oracle.true_optimal_loss(x);
    (ue, og)
}

/// Everything a decision rule needs for one round, computed once.
#[derive(Debug, Clone)]
pub struct RoundObjectives {
    pub delta_bar: Vec<f64>,
    pub gain_bar: Vec<f64>,
    pub gain_metric: GainMetric,
    pub true_gain: Option<Vec<f64>>,
    pub ell_bar: Vec<f64>,
    pub ell_bar_star: f64,
}

impl RoundObjectives {
    pub fn compute(
        post: &OptimisticPosterior,
        x: usize,
        metric: GainMetric,
    ) -> Result<Self, ObjectiveError> {
        Ok(RoundObjectives {
            delta_bar: delta_bar(post, x),
            gain_bar: surrogate_gain_for(post, x, metric)?,
            gain_metric: metric,
            true_gain: None,
            ell_bar: post.surrogate_losses(x),
            ell_bar_star: post.surrogate_optimal_loss(x),
        })
    }

    pub fn with_true_gain(
        mut self,
        post: &OptimisticPosterior,
        oracle: EnvOracle<'_>,
        x: usize,
    ) -> Result<Self, ObjectiveError> {
        self.true_gain = Some(true_gain(post, oracle, x, self.gain_metric)?);
        Ok(self)
    }

    /// Surrogate regret of a policy.
    pub fn surrogate_regret(&self, pi: &PolicyDistribution) -> f64 {
        pi.probs()
            .iter()
            .zip(&self.delta_bar)
            .map(|(p, d)| p * d)
            .sum()
    }

    /// Policy-averaged surrogate gain.
    pub fn policy_gain(&self, pi: &PolicyDistribution) -> f64 {
        pi.probs()
            .iter()
            .zip(&self.gain_bar)
            .map(|(p, g)| p * g)
            .sum()
    }

    /// Maximum per-action gain; collapse means ratio policies are undefined.
    pub fn max_gain(&self) -> f64 {
        self.gain_bar.iter().cloned().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs;
    use crate::model::Environment;
    use crate::posterior::OptimisticPosterior;
    use std::sync::Arc;

    fn uniform_post(model: Arc<ModelClass>) -> OptimisticPosterior {
        OptimisticPosterior::uniform(model, 0.25, 0.0).unwrap()
    }

    #[test]
    fn revealing_action_gains() {
        let env = envs::make_revealing_action(4, 0).unwrap();
        let post = uniform_post(Arc::clone(env.model()));
        let g = surrogate_gain(&post, 0).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12, "revealing action gain {}", g[0]);
        let expect = 0.25 * (1.0 - 0.25f64.sqrt()) + 0.75 * (1.0 - 0.75f64.sqrt());
        for v in &g[1..5] {
            assert!((v - expect).abs() < 1e-12);
        }
        assert!((expect - 0.225481).abs() < 1e-6);

        // point-mass posterior has no information anywhere
        let collapsed = OptimisticPosterior::from_weights(
            Arc::clone(env.model()),
            &[1.0, 0.0, 0.0, 0.0],
            0.25,
            0.0,
        )
        .unwrap();
        let g = surrogate_gain(&collapsed, 0).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn squared_loss_gain_is_posterior_variance() {
        let model = ModelClass::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            2,
            Family::Gaussian,
            vec![vec![vec![0.0, 0.2]], vec![vec![1.0, 0.6]]],
            None,
        )
        .unwrap();
        let post = OptimisticPosterior::uniform(Arc::clone(&model), 0.5, 0.0).unwrap();
        let g = gaussian_surrogate_gain(&post, 0);
        assert!((g[0] - 0.25).abs() < 1e-15);
        let post = OptimisticPosterior::from_weights(model, &[0.25, 0.75], 0.5, 0.0).unwrap();
        let g = gaussian_surrogate_gain(&post, 0);
        assert!((g[1] - 0.03).abs() < 1e-15, "two-point variance {}", g[1]);
        let point = OptimisticPosterior::from_weights(
            Arc::clone(post.model()),
            &[1.0, 0.0],
            0.5,
            0.0,
        )
        .unwrap();
        assert!(gaussian_surrogate_gain(&point, 0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn true_gain_examples() {
        let model = ModelClass::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            2,
            Family::Bernoulli,
            vec![vec![vec![0.25, 0.25]], vec![vec![0.75, 0.75]]],
            None,
        )
        .unwrap();
        let env = Environment::with_uniform_contexts(Arc::clone(&model), 0).unwrap();
        let post = uniform_post(model);
        let g = true_gain(&post, env.oracle(), 0, GainMetric::Hellinger).unwrap();
        assert!((g[0] - 0.5 * 0.133_974_596_215_561_4).abs() < 1e-9, "{}", g[0]);
        assert!((g[0] - 0.0669873).abs() < 1e-6);

        let point = OptimisticPosterior::from_weights(
            Arc::clone(post.model()),
            &[1.0, 0.0],
            0.25,
            0.0,
        )
        .unwrap();
        let g = true_gain(&point, env.oracle(), 0, GainMetric::Hellinger).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));

        // deterministic discrete laws all disjoint from the truth: gain 1
        let env = envs::make_revealing_action(4, 0).unwrap();
        let off_truth = OptimisticPosterior::from_weights(
            Arc::clone(env.model()),
            &[0.0, 0.5, 0.3, 0.2],
            0.25,
            0.0,
        )
        .unwrap();
        let g = true_gain(&off_truth, env.oracle(), 0, GainMetric::Hellinger).unwrap();
        assert_eq!(g[0], 1.0, "revealing-arm losses are distinct point masses");
    }

    #[test]
    fn information_ratio_and_adec() {
        let d = vec![1.0, 2.0];
        let g = vec![1.0, 4.0];
        let delta1 = PolicyDistribution::delta(2, 0).unwrap();
        assert!((information_ratio(&d, &g, &delta1).unwrap() - 1.0).abs() < 1e-15);
        let mixed = PolicyDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((information_ratio(&d, &g, &mixed).unwrap() - 8.0 / 9.0).abs() < 1e-12);
        let zero_num = PolicyDistribution::delta(2, 0).unwrap();
        assert_eq!(
            information_ratio(&[0.0, 1.0], &g, &zero_num).unwrap(),
            0.0
        );
        assert!(matches!(
            information_ratio(&d, &[0.0, 0.0], &delta1),
            Err(ObjectiveError::NoInformation)
        ));

        let delta2 = PolicyDistribution::delta(2, 1).unwrap();
        assert!((adec(&d, &g, &delta2, 0.5)).abs() < 1e-15);
        assert!((adec(&d, &g, &mixed, 0.0) - (4.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn adec_ir_amgm_inequality_random() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let k = 2 + (rng.random::<f64>() * 4.0) as usize;
            let d: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let g: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 0.5 + 1e-6).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-9).collect();
            let total: f64 = raw.iter().sum();
            let pi = PolicyDistribution::new(raw.iter().map(|v| v / total).collect()).unwrap();
            let mu = 10f64.powf(rng.random::<f64>() * 4.0 - 2.0);
            let ir = information_ratio(&d, &g, &pi).unwrap();
            assert!(4.0 * mu * adec(&d, &g, &pi, mu) <= ir + 1e-12);
        }
    }

    #[test]
    fn ir_recovered_from_adec_envelope() {
        // sup over mu of 4 mu * adec equals the information ratio
        let d = vec![0.3, 0.9, 0.5];
        let g = vec![0.02, 0.4, 0.1];
        let pi = PolicyDistribution::new(vec![0.5, 0.2, 0.3]).unwrap();
        let ir = information_ratio(&d, &g, &pi).unwrap();
        let mut best: f64 = 0.0;
        for i in 0..300 {
            let mu = 10f64.powf(-6.0 + 12.0 * i as f64 / 299.0);
            best = best.max(4.0 * mu * adec(&d, &g, &pi, mu));
        }
        assert!((best - ir).abs() <= 0.01 * ir, "{best} vs {ir}");
    }

    #[test]
    fn linearity_in_policy() {
        let d = vec![0.2, 0.7, 0.4];
        let g = vec![0.1, 0.3, 0.2];
        let p1 = PolicyDistribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let p2 = PolicyDistribution::new(vec![0.1, 0.1, 0.8]).unwrap();
        for lam in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let blend = PolicyDistribution::new(
                p1.probs()
                    .iter()
                    .zip(p2.probs())
                    .map(|(a, b)| lam * a + (1.0 - lam) * b)
                    .collect(),
            )
            .unwrap();
            let r = |p: &PolicyDistribution| {
                p.probs().iter().zip(&d).map(|(x, y)| x * y).sum::<f64>()
            };
            let ig = |p: &PolicyDistribution| {
                p.probs().iter().zip(&g).map(|(x, y)| x * y).sum::<f64>()
            };
            assert!((r(&blend) - (lam * r(&p1) + (1.0 - lam) * r(&p2))).abs() < 1e-12);
            assert!((ig(&blend) - (lam * ig(&p1) + (1.0 - lam) * ig(&p2))).abs() < 1e-12);
        }
    }

    #[test]
    fn worst_case_dec_post_identification_closed_form() {
        let game = envs::post_identification_dec_game(3, 0.1, 0).unwrap();
        let model = game.env.model();
        let equalizer =
            PolicyDistribution::new(vec![2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]).unwrap();
        let v = worst_case_dec(model, 0, &equalizer, 0.05, &game.p_hat).unwrap();
        assert!((v - 1.0 / 30.0).abs() < 1e-12, "equalized value {v}");
        let vertex = PolicyDistribution::delta(3, 0).unwrap();
        let v = worst_case_dec(model, 0, &vertex, 0.05, &game.p_hat).unwrap();
        assert!((v - 0.05).abs() < 1e-12, "vertex value {v}");
    }

    #[test]
    fn worst_case_dec_degenerate_harmless_class() {
        // all parameters share the optimal action and loss; a singleton
        // policy on it scores zero at gamma = 0
        let model = ModelClass::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            2,
            Family::Bernoulli,
            vec![vec![vec![0.1, 0.9]], vec![vec![0.1, 0.5]]],
            None,
        )
        .unwrap();
        let pi = PolicyDistribution::delta(2, 0).unwrap();
        let p_hat = vec![
            LossDistribution::bernoulli(0.1).unwrap(),
            LossDistribution::bernoulli(0.7).unwrap(),
        ];
        let v = worst_case_dec(&model, 0, &pi, 0.0, &p_hat).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn bayes_info_gain_examples() {
        let d = |v: f64| LossDistribution::point_mass(v).unwrap();
        let model = ModelClass::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            2,
            Family::Discrete,
            vec![vec![vec![0.2, 0.5]], vec![vec![0.8, 0.5]]],
            Some(vec![vec![vec![d(0.2), d(0.5)]], vec![vec![d(0.8), d(0.5)]]]),
        )
        .unwrap();
        let post = OptimisticPosterior::uniform(Arc::clone(&model), 1.0, 0.0).unwrap();
        let ig = bayes_info_gain(&post, 0).unwrap();
        assert!((ig[0] - 2.0f64.ln()).abs() < 1e-12, "distinct point masses {}", ig[0]);
        assert!(ig[1].abs() < 1e-15, "shared point mass {}", ig[1]);

        let same = ModelClass::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            2,
            Family::Bernoulli,
            vec![vec![vec![0.5, 0.2]], vec![vec![0.5, 0.2]]],
            None,
        )
        .unwrap();
        let post = OptimisticPosterior::uniform(same, 1.0, 0.0).unwrap();
        let ig = bayes_info_gain(&post, 0).unwrap();
        assert!(ig[0].abs() < 1e-15);

        let point = OptimisticPosterior::from_weights(
            Arc::clone(&model),
            &[1.0, 0.0],
            1.0,
            0.0,
        )
        .unwrap();
        let ig = bayes_info_gain(&point, 0).unwrap();
        assert!(ig.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ue_og_examples() {
        let model = ModelClass::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            2,
            Family::Bernoulli,
            vec![vec![vec![0.8, 0.8]], vec![vec![0.2, 0.2]]],
            None,
        )
        .unwrap();
        let env = Environment::with_uniform_contexts(Arc::clone(&model), 0).unwrap();
        let post = uniform_post(Arc::clone(&model));
        let pi = PolicyDistribution::delta(2, 0).unwrap();
        let (ue, og) = diagnostics_ue_og(&post, env.oracle(), 0, &pi);
        assert!((ue - 0.3).abs() < 1e-15);
        assert!((og + 0.3).abs() < 1e-15);

        let point = OptimisticPosterior::from_weights(model, &[1.0, 0.0], 0.25, 0.0).unwrap();
        let (ue, og) = diagnostics_ue_og(&point, env.oracle(), 0, &pi);
        assert_eq!((ue, og), (0.0, 0.0));
    }

    #[test]
    fn round_objectives_identity() {
        let env = envs::make_revealing_action(4, 1).unwrap();
        let post = uniform_post(Arc::clone(env.model()));
        let obj = RoundObjectives::compute(&post, 0, GainMetric::Hellinger).unwrap();
        assert!(obj.delta_bar.iter().all(|d| *d >= 0.0));
        assert!(obj.gain_bar.iter().all(|g| *g >= 0.0));
        assert!((obj.ell_bar[0] - 0.765625).abs() < 1e-12);
        assert!((obj.ell_bar[1] - 0.75).abs() < 1e-12);
        let pi = PolicyDistribution::new(vec![0.4, 0.3, 0.1, 0.1, 0.1]).unwrap();
        let lhs = obj.surrogate_regret(&pi);
        let rhs = pi
            .probs()
            .iter()
            .zip(&obj.ell_bar)
            .map(|(p, l)| p * l)
            .sum::<f64>()
            - obj.ell_bar_star;
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
