//! Two-estimator Gaussian risk analysis: when a procedure picks whichever
//! of two candidates scores lower on noisy estimates, how much expected
//! loss does the noise add over always picking the truly better one?
//!
//! The estimate pair is modeled as a 2-D Gaussian whose principal axes are
//! the diagonal `l1 = l2` (std `sigma_a`) and its orthogonal complement
//! (std `sigma_b`). The choice probability and risk are closed-form in
//! that geometry and validated here by direct Monte Carlo.

use rand::Rng;

use crate::linalg::Matrix;
use crate::special::normal_cdf;
use crate::{Error, Result, Scalar};

/// Two candidates, their estimator means, the axis-aligned noise geometry,
/// and the true losses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPhiModel<F> {
    mu: [F; 2],
    sigma_a: F,
    sigma_b: F,
    losses: [F; 2],
}

impl<F: Scalar> TwoPhiModel<F> {
    pub fn new(mu: [F; 2], sigma_a: F, sigma_b: F, losses: [F; 2]) -> Result<Self> {
        if mu.iter().chain(losses.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("means and losses must be finite"));
        }
        if !(sigma_a >= F::zero()) || !sigma_a.is_finite() {
            return Err(Error::invalid("sigma_a must be non-negative and finite"));
        }
        if !(sigma_b > F::zero()) || !sigma_b.is_finite() {
            return Err(Error::invalid("sigma_b must be positive and finite"));
        }
        Ok(TwoPhiModel {
            mu,
            sigma_a,
            sigma_b,
            losses,
        })
    }

    pub fn mu(&self) -> [F; 2] {
        self.mu
    }

    pub fn losses(&self) -> [F; 2] {
        self.losses
    }

    /// Covariance of the estimate pair: identical diagonal entries
    /// `(sigma_a^2 + sigma_b^2) / 2`, off-diagonal `(sigma_a^2 - sigma_b^2) / 2`.
    /// Positive semi-definite by construction.
    pub fn covariance(&self) -> Matrix<F> {
        let half = F::of(0.5);
        let d = (self.sigma_a * self.sigma_a + self.sigma_b * self.sigma_b) * half;
        let o = (self.sigma_a * self.sigma_a - self.sigma_b * self.sigma_b) * half;
        Matrix::from_rows(2, 2, &[d, o, o, d])
    }
}

/// Probability that the noisy comparison picks the first candidate
/// (`l1 <= l2`). The difference `l1 - l2` is Gaussian with mean
/// `mu1 - mu2` and variance `2 sigma_b^2`, so this is the standard normal
/// CDF of `(mu2 - mu1) / (sqrt(2) sigma_b)`.
pub fn prob_choose_phi1<F: Scalar>(model: &TwoPhiModel<F>) -> F {
    let arg = (model.mu[1] - model.mu[0]) / (F::of(2.0).sqrt() * model.sigma_b);
    normal_cdf(arg)
}

fn heaviside<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else {
        F::zero()
    }
}

/// Risk of the choose-the-lower-estimate rule: expected loss minus the
/// minimum loss, `[P(choose 1) - step(L2 - L1)] * (L1 - L2)`. Non-negative
/// for every valid model.
pub fn risk_two_phi<F: Scalar>(model: &TwoPhiModel<F>) -> F {
    let [l1, l2] = model.losses;
    (prob_choose_phi1(model) - heaviside(l2 - l1)) * (l1 - l2)
}

/// Monte Carlo check of the closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McValidation<F> {
    pub prob_choose_phi1: F,
    pub prob_se: F,
    pub risk: F,
    pub risk_se: F,
}

/// Draws `n >= 10^4` estimate pairs from the model's Gaussian (built
/// exactly from its axis decomposition, so `sigma_a = 0` is fine), applies
/// the argmin rule (ties to the first candidate), and reports the empirical
/// choice probability and risk with standard errors.
pub fn mc_validate<F: Scalar, R: Rng + ?Sized>(
    model: &TwoPhiModel<F>,
    n: usize,
    rng: &mut R,
) -> Result<McValidation<F>> {
    if n < 10_000 {
        return Err(Error::invalid("Monte Carlo validation needs n >= 10^4"));
    }
    let inv_sqrt2 = F::one() / F::of(2.0).sqrt();
    let nf = F::of(n as f64);
    let mut chose_first = 0usize;
    let mut loss_sum = F::zero();
    let mut loss_sq = F::zero();
    for _ in 0..n {
        let u = F::standard_normal(rng);
        let v = F::standard_normal(rng);
        let along = model.sigma_a * u * inv_sqrt2;
        let across = model.sigma_b * v * inv_sqrt2;
        let l1 = model.mu[0] + along + across;
        let l2 = model.mu[1] + along - across;
        let loss = if l1 <= l2 {
            chose_first += 1;
            model.losses[0]
        } else {
            model.losses[1]
        };
        loss_sum += loss;
        loss_sq += loss * loss;
    }
    let p = F::of(chose_first as f64) / nf;
    let prob_se = (p * (F::one() - p) / nf).sqrt();
    let mean_loss = loss_sum / nf;
    let var_loss = (loss_sq / nf - mean_loss * mean_loss).max(F::zero());
    let min_loss = model.losses[0].min(model.losses[1]);
    Ok(McValidation {
        prob_choose_phi1: p,
        prob_se,
        risk: mean_loss - min_loss,
        risk_se: (var_loss / nf).sqrt(),
    })
}
