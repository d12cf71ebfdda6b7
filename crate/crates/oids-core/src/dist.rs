//! Loss distributions from four closed families, with exact divergences.
//!
//! Every distribution lives in one of four families (Bernoulli, finite
//! discrete, zero-inflated uniform, unit-variance Gaussian) so that squared
//! Hellinger distance, relative entropy, total variation and mixtures all
//! have closed forms. Mixtures stay inside the family, which keeps the
//! posterior predictive representable without any numeric integration.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance under which a probability vector must sum to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("family mismatch: {left:?} vs {right:?}")]
    FamilyMismatch { left: Family, right: Family },
    #[error("gaussian mixtures leave the family; use squared-loss gains instead of predictive mixtures")]
    GaussianMixture,
    #[error("value {0} outside the distribution domain")]
    OutOfDomain(f64),
    #[error("bad mixture weights: {0}")]
    BadWeights(String),
}

/// Family tag for a [`LossDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bernoulli,
    Discrete,
    Ziu,
    Gaussian,
}

/// A loss law from one of the four closed families.
///
/// Reference measures are fixed per family: counting measure on the support
/// for `Bernoulli` and `Discrete`, the sum of a point mass at zero and
/// Lebesgue measure on `(0, 1]` for `Ziu`, and Lebesgue measure for
/// `Gaussian` (variance pinned to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum LossDistribution {
    Bernoulli { p: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
    Ziu { atom: f64 },
    Gaussian { mean: f64 },
}

impl LossDistribution {
    pub fn bernoulli(p: f64) -> Result<Self, DistError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::InvalidParameter(format!(
                "bernoulli mean {p} not in [0,1]"
            )));
        }
        Ok(LossDistribution::Bernoulli { p })
    }

    /// Finite discrete law over distinct values in `[0,1]`. Entries are
    /// sorted by value; probabilities must sum to one within [`PROB_SUM_TOL`].
    pub fn discrete(mut pairs: Vec<(f64, f64)>) -> Result<Self, DistError> {
        if pairs.is_empty() {
            return Err(DistError::InvalidParameter(
                "discrete support is empty".into(),
            ));
        }
        for &(v, p) in &pairs {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(DistError::InvalidParameter(format!(
                    "support value {v} not in [0,1]"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(DistError::InvalidParameter(format!(
                    "probability {p} negative or non-finite"
                )));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite support"));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DistError::InvalidParameter(format!(
                    "duplicate support value {}",
                    w[0].0
                )));
            }
        }
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(DistError::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let (support, probs) = pairs.into_iter().unzip();
        Ok(LossDistribution::Discrete { support, probs })
    }

    /// Point mass at a single value in `[0,1]`.
    pub fn point_mass(v: f64) -> Result<Self, DistError> {
        Self::discrete(vec![(v, 1.0)])
    }

    /// Zero-inflated uniform: mass `atom` at 0, density `1 - atom` uniform
    /// on `(0, 1]`.
    pub fn ziu(atom: f64) -> Result<Self, DistError> {
        if !(0.0..=1.0).contains(&atom) {
            return Err(DistError::InvalidParameter(format!(
                "ziu atom {atom} not in [0,1]"
            )));
        }
        Ok(LossDistribution::Ziu { atom })
    }

    pub fn gaussian(mean: f64) -> Result<Self, DistError> {
        if !mean.is_finite() {
            return Err(DistError::InvalidParameter(format!(
                "gaussian mean {mean} not finite"
            )));
        }
        Ok(LossDistribution::Gaussian { mean })
    }

    pub fn family(&self) -> Family {
        match self {
            LossDistribution::Bernoulli { .. } => Family::Bernoulli,
            LossDistribution::Discrete { .. } => Family::Discrete,
            LossDistribution::Ziu { .. } => Family::Ziu,
            LossDistribution::Gaussian { .. } => Family::Gaussian,
        }
    }

    /// Exact mean.
    pub fn mean(&self) -> f64 {
        match self {
            LossDistribution::Bernoulli { p } => *p,
            LossDistribution::Discrete { support, probs } => {
                support.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
            LossDistribution::Ziu { atom } => (1.0 - atom) / 2.0,
            LossDistribution::Gaussian { mean } => *mean,
        }
    }

    fn as_discrete_pairs(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            LossDistribution::Bernoulli { p } => Some(vec![(0.0, 1.0 - p), (1.0, *p)]),
            LossDistribution::Discrete { support, probs } => Some(
                support
                    .iter()
                    .copied()
                    .zip(probs.iter().copied())
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Log-density of `loss` with respect to the family reference measure.
    /// Returns `-inf` where the density vanishes.
    pub fn log_density(&self, loss: f64) -> Result<f64, DistError> {
        match self {
            LossDistribution::Bernoulli { p } => {
                check_unit_domain(loss)?;
                if loss == 1.0 {
                    Ok(ln_or_neg_inf(*p))
                } else if loss == 0.0 {
                    Ok(ln_or_neg_inf(1.0 - p))
                } else {
                    Ok(f64::NEG_INFINITY)
                }
            }
            LossDistribution::Discrete { support, probs } => {
                check_unit_domain(loss)?;
                match support.binary_search_by(|v| v.partial_cmp(&loss).expect("finite")) {
                    Ok(i) => Ok(ln_or_neg_inf(probs[i])),
                    Err(_) => Ok(f64::NEG_INFINITY),
                }
            }
            LossDistribution::Ziu { atom } => {
                check_unit_domain(loss)?;
                if loss == 0.0 {
                    Ok(ln_or_neg_inf(*atom))
                } else {
                    Ok(ln_or_neg_inf(1.0 - atom))
                }
            }
            LossDistribution::Gaussian { mean } => {
                if !loss.is_finite() {
                    return Err(DistError::OutOfDomain(loss));
                }
                Ok(gaussian_log_density(*mean, loss))
            }
        }
    }

    /// Draw a loss; deterministic given the rng state. Bernoulli, discrete
    /// and ziu consume one uniform, the Gaussian consumes two (Box-Muller).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LossDistribution::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            LossDistribution::Discrete { support, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in support.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *support.last().expect("non-empty support")
            }
            LossDistribution::Ziu { atom } => {
                let u: f64 = rng.random();
                if u < *atom {
                    0.0
                } else {
                    // inverse cdf of the continuous part, mapped into (0, 1]
                    1.0 - (u - atom) / (1.0 - atom)
                }
            }
            LossDistribution::Gaussian { mean } => mean + sample_standard_normal(rng),
        }
    }
}

fn check_unit_domain(loss: f64) -> Result<(), DistError> {
    if !loss.is_finite() || !(0.0..=1.0).contains(&loss) {
        return Err(DistError::OutOfDomain(loss));
    }
    Ok(())
}

fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub(crate) fn gaussian_log_density(mean: f64, loss: f64) -> f64 {
    const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;
    -HALF_LN_TWO_PI - 0.5 * (loss - mean) * (loss - mean)
}

/// Standard normal draw via Box-Muller; consumes exactly two uniforms.
pub(crate) fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn require_same_family(p: &LossDistribution, q: &LossDistribution) -> Result<(), DistError> {
    let promotable = |f: Family| matches!(f, Family::Bernoulli | Family::Discrete);
    if p.family() == q.family() || (promotable(p.family()) && promotable(q.family())) {
        Ok(())
    } else {
        Err(DistError::FamilyMismatch {
            left: p.family(),
            right: q.family(),
        })
    }
}

/// Squared Hellinger distance `1 - BC(P, Q)` in `[0, 1]`, exact per family.
///
/// Bernoulli and discrete laws may be compared with each other (the
/// Bernoulli is promoted to a discrete law on `{0, 1}`); all other
/// cross-family pairs are rejected.
pub fn hellinger_sq(p: &LossDistribution, q: &LossDistribution) -> Result<f64, DistError> {
    require_same_family(p, q)?;
    if p == q {
        return Ok(0.0);
    }
    let bc = match (p, q) {
        (LossDistribution::Bernoulli { p: a }, LossDistribution::Bernoulli { p: b }) => {
            (a * b).sqrt() + ((1.0 - a) * (1.0 - b)).sqrt()
        }
        (LossDistribution::Ziu { atom: a }, LossDistribution::Ziu { atom: b }) => {
            (a * b).sqrt() + ((1.0 - a) * (1.0 - b)).sqrt()
        }
        (LossDistribution::Gaussian { mean: a }, LossDistribution::Gaussian { mean: b }) => {
            (-(a - b) * (a - b) / 8.0).exp()
        }
        _ => {
            let pa = p.as_discrete_pairs().expect("checked discrete-compatible");
            let pb = q.as_discrete_pairs().expect("checked discrete-compatible");
            merge_union(&pa, &pb)
                .map(|(_, x, y)| (x * y).sqrt())
                .sum()
        }
    };
    Ok((1.0 - bc).clamp(0.0, 1.0))
}

/// Relative entropy `KL(P || Q)`, exact per family. A pair where `Q` fails
/// to dominate `P` yields `+inf` (distinguished from a rejected input).
pub fn kl(p: &LossDistribution, q: &LossDistribution) -> Result<f64, DistError> {
    require_same_family(p, q)?;
    if p == q {
        return Ok(0.0);
    }
    let v = match (p, q) {
        (LossDistribution::Bernoulli { p: a }, LossDistribution::Bernoulli { p: b }) => {
            kl_term(*a, *b) + kl_term(1.0 - a, 1.0 - b)
        }
        (LossDistribution::Ziu { atom: a }, LossDistribution::Ziu { atom: b }) => {
            // atom against atom, constant density against constant density
            kl_term(*a, *b) + kl_term(1.0 - a, 1.0 - b)
        }
        (LossDistribution::Gaussian { mean: a }, LossDistribution::Gaussian { mean: b }) => {
            (a - b) * (a - b) / 2.0
        }
        _ => {
            let pa = p.as_discrete_pairs().expect("checked discrete-compatible");
            let pb = q.as_discrete_pairs().expect("checked discrete-compatible");
            merge_union(&pa, &pb).map(|(_, x, y)| kl_term(x, y)).sum()
        }
    };
    Ok(v.max(0.0))
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

/// Total variation distance, exact per family.
pub fn total_variation(p: &LossDistribution, q: &LossDistribution) -> Result<f64, DistError> {
    require_same_family(p, q)?;
    if p == q {
        return Ok(0.0);
    }
    let v = match (p, q) {
        (LossDistribution::Bernoulli { p: a }, LossDistribution::Bernoulli { p: b }) => (a - b).abs(),
        (LossDistribution::Ziu { atom: a }, LossDistribution::Ziu { atom: b }) => {
            // half the atom gap plus half the constant-density gap
            (a - b).abs()
        }
        (LossDistribution::Gaussian { mean: a }, LossDistribution::Gaussian { mean: b }) => {
            erf((a - b).abs() / (2.0 * std::f64::consts::SQRT_2))
        }
        _ => {
            let pa = p.as_discrete_pairs().expect("checked discrete-compatible");
            let pb = q.as_discrete_pairs().expect("checked discrete-compatible");
            0.5 * merge_union(&pa, &pb)
                .map(|(_, x, y)| (x - y).abs())
                .sum::<f64>()
        }
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Mixture of same-family distributions under a probability vector.
///
/// The result stays in the family: Bernoulli means and ziu atoms mix
/// linearly, discrete laws mix pointwise over the union support. Gaussian
/// mixtures are not Gaussian and are rejected.
pub fn mixture(
    dists: &[LossDistribution],
    weights: &[f64],
) -> Result<LossDistribution, DistError> {
    if dists.is_empty() || dists.len() != weights.len() {
        return Err(DistError::BadWeights(format!(
            "{} distributions against {} weights",
            dists.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(DistError::BadWeights("negative or non-finite weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(DistError::BadWeights(format!("weights sum to {total}")));
    }
    if dists.iter().any(|d| d.family() == Family::Gaussian) {
        return Err(DistError::GaussianMixture);
    }
    for pair in dists.windows(2) {
        require_same_family(&pair[0], &pair[1])?;
    }

    // Components with weight exactly zero are dropped.
    let active: Vec<(&LossDistribution, f64)> = dists
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(d, w)| (d, *w))
        .collect();

    let all_bernoulli = active.iter().all(|(d, _)| d.family() == Family::Bernoulli);
    let all_ziu = active.iter().all(|(d, _)| d.family() == Family::Ziu);
    if all_ziu {
        let atom = active
            .iter()
            .map(|(d, w)| match d {
                LossDistribution::Ziu { atom } => atom * w,
                _ => unreachable!(),
            })
            .sum::<f64>();
        return LossDistribution::ziu(atom.clamp(0.0, 1.0));
    }
    if all_bernoulli {
        let mean = active
            .iter()
            .map(|(d, w)| match d {
                LossDistribution::Bernoulli { p } => p * w,
                _ => unreachable!(),
            })
            .sum::<f64>();
        return LossDistribution::bernoulli(mean.clamp(0.0, 1.0));
    }
    // Discrete (possibly with promoted Bernoulli components).
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for (d, w) in &active {
        for (v, p) in d.as_discrete_pairs().ok_or(DistError::FamilyMismatch {
            left: d.family(),
            right: Family::Discrete,
        })? {
            pooled.push((v, w * p));
        }
    }
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite support"));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pooled.len());
    for (v, p) in pooled {
        match merged.last_mut() {
            Some((lv, lp)) if *lv == v => *lp += p,
            _ => merged.push((v, p)),
        }
    }
    merged.retain(|&(_, p)| p > 0.0);
    LossDistribution::discrete(merged)
}

/// Iterate the union support of two sorted discrete laws, yielding
/// `(value, p_mass, q_mass)` with zero mass where a value is absent.
fn merge_union<'a>(
    p: &'a [(f64, f64)],
    q: &'a [(f64, f64)],
) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
    let mut i = 0;
    let mut j = 0;
    std::iter::from_fn(move || {
        if i >= p.len() && j >= q.len() {
            return None;
        }
        if i < p.len() && (j >= q.len() || p[i].0 < q[j].0) {
            let out = (p[i].0, p[i].1, 0.0);
            i += 1;
            Some(out)
        } else if j < q.len() && (i >= p.len() || q[j].0 < p[i].0) {
            let out = (q[j].0, 0.0, q[j].1);
            j += 1;
            Some(out)
        } else {
            let out = (p[i].0, p[i].1, q[j].1);
            i += 1;
            j += 1;
            Some(out)
        }
    })
}

/// Error function, accurate to double precision for the range used here.
/// Series with positive terms, so no cancellation.
pub(crate) fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 6.0 {
        return 1.0;
    }
    // erf(x) = (2x / sqrt(pi)) e^{-x^2} sum_k (2x^2)^k / (2k+1)!!
    let two_x_sq = 2.0 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= two_x_sq / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
        if k > 500.0 {
            break;
        }
    }
    std::f64::consts::FRAC_2_SQRT_PI * x * (-x * x).exp() * sum
}
