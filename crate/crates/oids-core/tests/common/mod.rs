//! Shared helpers for the integration suites: independent numeric oracles
//! and randomized instance generators. Everything here is deliberately
//! simple and slow; it cross-checks the closed forms in the library.

use std::sync::Arc;

use oids_core::dist::{Family, LossDistribution};
use oids_core::model::{Environment, ModelClass};
use oids_core::posterior::OptimisticPosterior;
use oids_core::PolicyDistribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Bhattacharyya coefficient by brute-force integration, so that
/// `1 - bc` is an independent oracle for the squared Hellinger distance.
pub fn hellinger_sq_oracle(p: &LossDistribution, q: &LossDistribution) -> f64 {
    let bc = match (p, q) {
        (LossDistribution::Gaussian { mean: a }, LossDistribution::Gaussian { mean: b }) => {
            let lo = a.min(*b) - 12.0;
            let hi = a.max(*b) + 12.0;
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let f = |x: f64| {
                let da = (-(x - a) * (x - a) / 2.0).exp() / (std::f64::consts::TAU).sqrt();
                let db = (-(x - b) * (x - b) / 2.0).exp() / (std::f64::consts::TAU).sqrt();
                (da * db).sqrt()
            };
            // Simpson's rule
            let mut acc = f(lo) + f(hi);
            for i in 1..n {
                let x = lo + i as f64 * h;
                acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        }
        (LossDistribution::Ziu { atom: a }, LossDistribution::Ziu { atom: b }) => {
            let n = 100_000;
            let h = 1.0 / n as f64;
            let f = |_x: f64| ((1.0 - a) * (1.0 - b)).sqrt();
            let mut acc = f(0.0) + f(1.0);
            for i in 1..n {
                acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            (a * b).sqrt() + acc * h / 3.0
        }
        _ => {
            // counting measure: collect both supports and sum
            let pairs = |d: &LossDistribution| -> Vec<(f64, f64)> {
                match d {
                    LossDistribution::Bernoulli { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
                    LossDistribution::Discrete { support, probs } => support
                        .iter()
                        .copied()
                        .zip(probs.iter().copied())
                        .collect(),
                    _ => unreachable!("same-family pairs only"),
                }
            };
            let pa = pairs(p);
            let pb = pairs(q);
            let mut acc = 0.0;
            for &(v, mp) in &pa {
                for &(w, mq) in &pb {
                    if v == w {
                        acc += (mp * mq).sqrt();
                    }
                }
            }
            acc
        }
    };
    (1.0 - bc).clamp(0.0, 1.0)
}

/// Uniform draw helper.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-9).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn random_policy(rng: &mut ChaCha8Rng, k: usize) -> PolicyDistribution {
    PolicyDistribution::new(random_simplex(rng, k)).unwrap()
}

/// A random instance in one of the bounded families, together with a
/// posterior at a random interior point.
pub struct RandomDraw {
    pub env: Environment,
    pub post: OptimisticPosterior,
    pub context: usize,
}

pub fn random_bounded_instance(rng: &mut ChaCha8Rng, family: Family) -> Environment {
    let k = 2 + (rng.random::<f64>() * 4.0) as usize;
    let n = 2 + (rng.random::<f64>() * 5.0) as usize;
    let contexts = 1 + (rng.random::<f64>() * 2.0) as usize;
    let upper = if family == Family::Ziu { 0.5 } else { 1.0 };
    let mut table = Vec::with_capacity(n);
    let mut discrete = Vec::with_capacity(n);
    for _ in 0..n {
        let mut per_theta = Vec::with_capacity(contexts);
        let mut per_theta_d = Vec::with_capacity(contexts);
        for _ in 0..contexts {
            let mut row = Vec::with_capacity(k);
            let mut row_d = Vec::with_capacity(k);
            for _ in 0..k {
                let mean = uniform(rng, 0.0, upper);
                row.push(mean);
                if family == Family::Discrete {
                    // two-point law straddling the mean
                    let spread = uniform(rng, 0.0, mean.min(1.0 - mean));
                    let d = if spread > 1e-9 {
                        LossDistribution::discrete(vec![
                            (mean - spread, 0.5),
                            (mean + spread, 0.5),
                        ])
                        .unwrap()
                    } else {
                        LossDistribution::point_mass(mean).unwrap()
                    };
                    row_d.push(d);
                }
            }
            per_theta.push(row);
            per_theta_d.push(row_d);
        }
        table.push(per_theta);
        discrete.push(per_theta_d);
    }
    let params = (0..n).map(|t| format!("t{t}")).collect();
    let ctx_ids = (0..contexts).map(|c| c.to_string()).collect();
    let model = ModelClass::new(
        params,
        ctx_ids,
        k,
        family,
        table,
        (family == Family::Discrete).then_some(discrete),
    )
    .unwrap();
    let theta0 = (rng.random::<f64>() * n as f64) as usize;
    Environment::with_uniform_contexts(model, theta0.min(n - 1)).unwrap()
}

/// Random gaussian-family instance (means in [0,1], unit variance noise).
pub fn random_gaussian_instance(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Environment {
    let table: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| vec![(0..k).map(|_| rng.random::<f64>()).collect()])
        .collect();
    let params = (0..n).map(|t| format!("t{t}")).collect();
    let model = ModelClass::new(
        params,
        vec!["0".into()],
        k,
        Family::Gaussian,
        table,
        None,
    )
    .unwrap();
    let theta0 = ((rng.random::<f64>() * n as f64) as usize).min(n - 1);
    Environment::with_uniform_contexts(model, theta0).unwrap()
}

pub fn random_draw(rng: &mut ChaCha8Rng, family: Family) -> RandomDraw {
    let env = random_bounded_instance(rng, family);
    let n = env.model().n_params();
    let weights = random_simplex(rng, n);
    let post = OptimisticPosterior::from_weights(
        Arc::clone(env.model()),
        &weights,
        0.25,
        uniform(rng, 0.0, 0.2),
    )
    .unwrap();
    let context = ((rng.random::<f64>() * env.model().n_contexts() as f64) as usize)
        .min(env.model().n_contexts() - 1);
    RandomDraw { env, post, context }
}

/// Exhaustive two-action grid minimizer of the information ratio.
pub fn two_action_grid_ir(delta: &[f64], gain: &[f64], step: f64) -> f64 {
    let k = delta.len();
    let steps = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            for s in 0..=steps {
                let q = s as f64 * step;
                let num = q * delta[i] + (1.0 - q) * delta[j];
                let den = q * gain[i] + (1.0 - q) * gain[j];
                if den > 1e-12 {
                    best = best.min(num * num / den);
                } else if num.abs() <= 1e-12 {
                    best = best.min(0.0);
                }
            }
        }
    }
    best
}

/// Brute-force minimum of the worst-case DEC over a simplex grid,
/// returning the value and its argmin.
pub fn simplex_grid_dec(
    model: &ModelClass,
    x: usize,
    gamma: f64,
    p_hat: &[LossDistribution],
    step: f64,
) -> (f64, Vec<f64>) {
    let k = model.num_actions();
    assert!(k <= 3, "grid oracle supports K <= 3");
    let levels = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    let mut best_pi = vec![1.0; 1];
    let mut eval = |probs: Vec<f64>| {
        let pi = PolicyDistribution::new(probs.clone()).unwrap();
        let v = oids_core::objectives::worst_case_dec(model, x, &pi, gamma, p_hat).unwrap();
        if v < best {
            best = v;
            best_pi = probs;
        }
    };
    if k == 2 {
        for a in 0..=levels {
            let p = a as f64 / levels as f64;
            eval(vec![p, 1.0 - p]);
        }
    } else {
        for a in 0..=levels {
            for b in 0..=(levels - a) {
                let p = a as f64 / levels as f64;
                let q = b as f64 / levels as f64;
                eval(vec![p, q, (1.0 - p - q).max(0.0)]);
            }
        }
    }
    (best, best_pi)
}

/// Coarse value of [`simplex_grid_dec`].
pub fn simplex_grid_dec_value(
    model: &ModelClass,
    x: usize,
    gamma: f64,
    p_hat: &[LossDistribution],
    step: f64,
) -> f64 {
    simplex_grid_dec(model, x, gamma, p_hat, step).0
}

/// Two-pass brute force: the 0.02 coarse grid plus a local refinement
/// around the coarse argmin, resolving the value well below the comparison
/// tolerance.
pub fn refined_simplex_grid_dec_value(
    model: &ModelClass,
    x: usize,
    gamma: f64,
    p_hat: &[LossDistribution],
) -> f64 {
    let k = model.num_actions();
    let (coarse, anchor) = simplex_grid_dec(model, x, gamma, p_hat, 0.02);
    let mut best = coarse;
    let fine = 0.002;
    let span = 16; // +- 0.032 around the anchor
    let mut eval = |probs: Vec<f64>| {
        if probs.iter().any(|p| *p < -1e-12) {
            return;
        }
        let clipped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let pi = PolicyDistribution::new(clipped.iter().map(|p| p / total).collect()).unwrap();
        let v = oids_core::objectives::worst_case_dec(model, x, &pi, gamma, p_hat).unwrap();
        if v < best {
            best = v;
        }
    };
    if k == 2 {
        for da in -span..=span {
            let p = (anchor[0] + da as f64 * fine).clamp(0.0, 1.0);
            eval(vec![p, 1.0 - p]);
        }
    } else {
        for da in -span..=span {
            for db in -span..=span {
                let p = (anchor[0] + da as f64 * fine).clamp(0.0, 1.0);
                let q = (anchor[1] + db as f64 * fine).clamp(0.0, 1.0);
                if p + q <= 1.0 + 1e-12 {
                    eval(vec![p, q, (1.0 - p - q).max(0.0)]);
                }
            }
        }
    }
    best
}
