//! Surrogate-based ("fit-based") Monte Carlo: fit a quadratic response
//! surface to factual oracle samples, then estimate integrals and the
//! best-of-K elite objective by sampling the surrogate instead of the
//! oracle. None of these routines touch the factual oracle.
//!
//! Fictitious oracle draws add one joint Gaussian noise vector with a
//! squared-exponential correlation over locations, so all values in a draw
//! come from a single coherent counterfactual objective.

use rand::Rng;

use crate::density::{Density, LogDensity};
use crate::linalg::Matrix;
use crate::oracle::Point;
use crate::{Error, Result, Scalar};

/// Quadratic least-squares response surface
/// `omega(x) = c + b^T x + x^T Q x` with symmetric `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateFit<F> {
    dim: usize,
    constant: F,
    linear: Vec<F>,
    quadratic: Matrix<F>,
    residual_rms: F,
}

impl<F: Scalar> SurrogateFit<F> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> F {
        self.constant
    }

    pub fn linear(&self) -> &[F] {
        &self.linear
    }

    pub fn quadratic(&self) -> &Matrix<F> {
        &self.quadratic
    }

    /// Root-mean-square residual on the training samples.
    pub fn residual_rms(&self) -> F {
        self.residual_rms
    }

    pub fn eval(&self, x: &Point<F>) -> F {
        assert_eq!(x.dim(), self.dim, "surrogate dimension");
        let c = x.coords();
        let mut value = self.constant;
        for (i, &xi) in c.iter().enumerate() {
            value += self.linear[i] * xi;
            for (j, &xj) in c.iter().enumerate() {
                value += self.quadratic[(i, j)] * xi * xj;
            }
        }
        value
    }

    /// Stationary point of the quadratic, when `Q` is invertible
    /// (`x* = -Q^-1 b / 2`); the surrogate minimizer for convex fits.
    pub fn stationary_point(&self) -> Option<Point<F>> {
        let rhs: Vec<F> = self.linear.iter().map(|&b| -b * F::of(0.5)).collect();
        let x = crate::linalg::solve_spd(&self.quadratic, &rhs).ok()?;
        Point::new(x).ok()
    }
}

/// Number of quadratic coefficients in dimension `n`.
fn coefficient_count(n: usize) -> usize {
    1 + n + n * (n + 1) / 2
}

/// Least-squares quadratic fit of `(location, value)` samples.
///
/// Needs at least as many samples as coefficients; a rank-deficient design
/// (for instance all samples at one location) is a [`Error::DegenerateDesign`].
pub fn fit_surface<F: Scalar>(samples: &[(Point<F>, F)]) -> Result<SurrogateFit<F>> {
    if samples.is_empty() {
        return Err(Error::invalid("surrogate fit needs samples"));
    }
    let dim = samples[0].0.dim();
    if samples.iter().any(|(p, _)| p.dim() != dim) {
        return Err(Error::invalid("surrogate samples must share one dimension"));
    }
    if samples.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::invalid("surrogate values must be finite"));
    }
    let p = coefficient_count(dim);
    if samples.len() < p {
        return Err(Error::invalid(format!(
            "quadratic fit in dimension {dim} needs at least {p} samples, got {}",
            samples.len()
        )));
    }

    let features = |x: &Point<F>| -> Vec<F> {
        let c = x.coords();
        let mut f = Vec::with_capacity(p);
        f.push(F::one());
        f.extend_from_slice(c);
        for i in 0..dim {
            for j in i..dim {
                f.push(c[i] * c[j]);
            }
        }
        f
    };

    // Normal equations.
    let mut ata = Matrix::zeros(p, p);
    let mut aty = vec![F::zero(); p];
    for (x, y) in samples {
        let f = features(x);
        for a in 0..p {
            aty[a] += f[a] * *y;
            for b in a..p {
                ata[(a, b)] += f[a] * f[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = ata[(a, b)];
            ata[(b, a)] = v;
        }
    }
    let coef = crate::linalg::solve_spd(&ata, &aty).map_err(|_| Error::DegenerateDesign)?;

    let constant = coef[0];
    let linear = coef[1..=dim].to_vec();
    let mut quadratic = Matrix::zeros(dim, dim);
    let mut k = dim + 1;
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                quadratic[(i, i)] = coef[k];
            } else {
                let half = coef[k] * F::of(0.5);
                quadratic[(i, j)] = half;
                quadratic[(j, i)] = half;
            }
            k += 1;
        }
    }

    let mut fit = SurrogateFit {
        dim,
        constant,
        linear,
        quadratic,
        residual_rms: F::zero(),
    };
    let mse = samples
        .iter()
        .map(|(x, y)| {
            let r = fit.eval(x) - *y;
            r * r
        })
        .sum::<F>()
        / F::of(samples.len() as f64);
    fit.residual_rms = mse.sqrt();
    Ok(fit)
}

/// Correlated noise added to surrogate values in one fictitious draw:
/// covariance `amplitude^2 * exp(-|xi - xj|^2 / (2 l^2)) + jitter * I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseKernel<F> {
    pub amplitude: F,
    pub length_scale: F,
    pub jitter: F,
}

impl<F: Scalar> NoiseKernel<F> {
    pub fn new(amplitude: F, length_scale: F, jitter: F) -> Result<Self> {
        if !(amplitude >= F::zero()) || !amplitude.is_finite() {
            return Err(Error::invalid("noise amplitude must be non-negative"));
        }
        if !(length_scale > F::zero()) {
            return Err(Error::invalid("length scale must be positive"));
        }
        if !(jitter >= F::zero()) || !jitter.is_finite() {
            return Err(Error::invalid("jitter must be non-negative"));
        }
        Ok(NoiseKernel {
            amplitude,
            length_scale,
            jitter,
        })
    }

    /// Default kernel for a fit on a domain of half-width `b`: amplitude
    /// from the fit residual, length scale `b / 4`, jitter `1e-9`.
    pub fn for_fit(fit: &SurrogateFit<F>, domain_half_width: F) -> Self {
        NoiseKernel {
            amplitude: fit.residual_rms(),
            length_scale: domain_half_width / F::of(4.0),
            jitter: F::of(1e-9),
        }
    }

    /// Exactly-zero noise.
    pub fn noiseless() -> Self {
        NoiseKernel {
            amplitude: F::zero(),
            length_scale: F::one(),
            jitter: F::of(1e-9),
        }
    }
}

/// One coherent fictitious-oracle evaluation at all `points`: surrogate
/// values plus a single joint draw of kernel-correlated Gaussian noise.
/// With zero amplitude the surrogate values are returned exactly (and no
/// randomness is consumed).
pub fn fictitious_values<F: Scalar, R: Rng + ?Sized>(
    fit: &SurrogateFit<F>,
    kernel: &NoiseKernel<F>,
    points: &[Point<F>],
    rng: &mut R,
) -> Result<Vec<F>> {
    if points.is_empty() {
        return Err(Error::invalid("fictitious evaluation needs points"));
    }
    let base: Vec<F> = points.iter().map(|x| fit.eval(x)).collect();
    if kernel.amplitude == F::zero() {
        return Ok(base);
    }

    let n = points.len();
    let var = kernel.amplitude * kernel.amplitude;
    let two_l2 = F::of(2.0) * kernel.length_scale * kernel.length_scale;
    let mut cov = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d2: F = points[i]
                .coords()
                .iter()
                .zip(points[j].coords())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            let v = var * (-d2 / two_l2).exp();
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    // Jitter escalation: three ten-fold raises before giving up.
    let mut jitter = kernel.jitter.max(F::of(1e-12) * var);
    let mut chol = None;
    for _ in 0..4 {
        let mut c = cov.clone();
        for i in 0..n {
            c[(i, i)] += jitter;
        }
        if let Some(l) = c.cholesky() {
            chol = Some(l);
            break;
        }
        jitter *= F::of(10.0);
    }
    let l = chol.ok_or(Error::FactorizationFailed)?;
    let z: Vec<F> = (0..n).map(|_| F::standard_normal(rng)).collect();
    let noise = l.matvec(&z);
    Ok(base.iter().zip(&noise).map(|(&m, &e)| m + e).collect())
}

/// Estimate of `integral weight_density(x) * omega(x) dx` by plain Monte
/// Carlo over fictitious samples: mean surrogate value over draws from the
/// weight density. No factual oracle involved.
pub fn fb_integral_estimate<F: Scalar, R: Rng + ?Sized>(
    fit: &SurrogateFit<F>,
    weight_density: &Density<F>,
    n_fictitious: usize,
    rng: &mut R,
) -> Result<F> {
    if n_fictitious < 1 {
        return Err(Error::invalid("need at least one fictitious sample"));
    }
    let mut sum = F::zero();
    for _ in 0..n_fictitious {
        sum += fit.eval(&weight_density.sample(rng));
    }
    Ok(sum / F::of(n_fictitious as f64))
}

struct EliteTuple<F> {
    points: Vec<Point<F>>,
    log_h: F,
    min_value: F,
}

fn draw_elite_tuples<F: Scalar, R: Rng + ?Sized>(
    h_c: &Density<F>,
    fit: &SurrogateFit<F>,
    kernel: &NoiseKernel<F>,
    k: usize,
    n_tuples: usize,
    rng: &mut R,
) -> Result<Vec<EliteTuple<F>>> {
    if k < 1 {
        return Err(Error::invalid("elite tuples need k >= 1"));
    }
    if n_tuples < 1 {
        return Err(Error::invalid("elite estimation needs tuples"));
    }
    let mut tuples = Vec::with_capacity(n_tuples);
    for _ in 0..n_tuples {
        let points: Vec<Point<F>> = (0..k).map(|_| h_c.sample(rng)).collect();
        let values = fictitious_values(fit, kernel, &points, rng)?;
        let min_value = values
            .iter()
            .copied()
            .fold(F::infinity(), |a, b| if b < a { b } else { a });
        let log_h: F = points.iter().map(|x| h_c.logpdf(x)).sum();
        tuples.push(EliteTuple {
            points,
            log_h,
            min_value,
        });
    }
    Ok(tuples)
}

fn weighted_min_average<F: Scalar>(q: &Density<F>, tuples: &[EliteTuple<F>]) -> Result<F> {
    let log_w: Vec<F> = tuples
        .iter()
        .map(|t| {
            let log_q: F = t.points.iter().map(|x| q.logpdf(x)).sum();
            log_q - t.log_h
        })
        .collect();
    let max_lw = log_w
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    if max_lw == F::neg_infinity() {
        return Err(Error::UndefinedScore);
    }
    let mut num = F::zero();
    let mut den = F::zero();
    for (lw, t) in log_w.iter().zip(tuples) {
        let w = (*lw - max_lw).exp();
        num += w * t.min_value;
        den += w;
    }
    if !(den > F::zero()) {
        return Err(Error::UndefinedScore);
    }
    Ok(num / den)
}

/// Self-normalized estimate of the expected best-of-`k` objective when `k`
/// queries are drawn from `q`: tuples of `k` points are drawn from `h_c`,
/// each scored by one fictitious-oracle draw, reweighted by
/// `prod_j q(x_j) / h_c(x_j)`, and the per-tuple minima averaged.
pub fn elite_estimate<F: Scalar, R: Rng + ?Sized>(
    q: &Density<F>,
    h_c: &Density<F>,
    fit: &SurrogateFit<F>,
    kernel: &NoiseKernel<F>,
    k: usize,
    n_tuples: usize,
    rng: &mut R,
) -> Result<F> {
    let tuples = draw_elite_tuples(h_c, fit, kernel, k, n_tuples, rng)?;
    weighted_min_average(q, &tuples)
}

/// Index of the candidate with the lowest elite estimate. All candidates
/// are scored on the same tuples and fictitious draws (common random
/// numbers); ties break to the lowest index.
pub fn elite_select<F: Scalar, R: Rng + ?Sized>(
    candidates: &[Density<F>],
    h_c: &Density<F>,
    fit: &SurrogateFit<F>,
    kernel: &NoiseKernel<F>,
    k: usize,
    n_tuples: usize,
    rng: &mut R,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::invalid("elite selection needs candidates"));
    }
    let tuples = draw_elite_tuples(h_c, fit, kernel, k, n_tuples, rng)?;
    let mut best: Option<(usize, F)> = None;
    for (i, q) in candidates.iter().enumerate() {
        let score = match weighted_min_average(q, &tuples) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let better = match best {
            None => true,
            Some((_, s)) => score < s,
        };
        if better {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::UndefinedScore)
}
