//! Weighted density fitting: closed-form moment matching for a single
//! Gaussian and weighted EM for mixtures.
//!
//! Both minimize the sampled cross-entropy `-sum_i s^i ln q_theta(x^i)`
//! (reported self-normalized). Each sample's likelihood ratio `s^i` enters
//! every moment and responsibility sum, which is the only change relative to
//! textbook ML fitting / EM.

use rand::Rng;

use crate::density::{Density, GaussianDensity, LogDensity, MixtureDensity, DEFAULT_COV_FLOOR};
use crate::linalg::Matrix;
use crate::oracle::Point;
use crate::schedule::ModelSpec;
use crate::target::WeightedView;
use crate::{stream_rng, Error, Result, Scalar};

/// EM controls. `cov_floor` is the covariance eigenvalue floor applied to
/// every fitted component (scale it as `1e-9 * domain_half_width^2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig<F> {
    pub max_iters: usize,
    /// Absolute objective change below which a restart stops.
    pub tol: F,
    pub n_restarts: usize,
    pub init: EmInit,
    pub cov_floor: F,
}

/// Initialization scheme for EM restarts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EmInit {
    /// Means drawn from the data by weighted sampling without replacement;
    /// covariances start at the pooled weighted covariance, mixing uniform.
    #[default]
    WeightedDataPoints,
}

impl<F: Scalar> Default for EmConfig<F> {
    fn default() -> Self {
        EmConfig {
            max_iters: 200,
            tol: F::of(1e-8),
            n_restarts: 5,
            init: EmInit::WeightedDataPoints,
            cov_floor: F::of(DEFAULT_COV_FLOOR),
        }
    }
}

impl<F: Scalar> EmConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > F::zero()) {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.n_restarts < 1 {
            return Err(Error::invalid("n_restarts must be at least 1"));
        }
        Ok(())
    }

    /// Same config with the floor rescaled for a domain of half-width `b`.
    pub fn with_domain_scale(mut self, half_width: F) -> Self {
        self.cov_floor = F::of(DEFAULT_COV_FLOOR) * half_width * half_width;
        self
    }
}

/// Outcome of a model fit.
#[derive(Clone, Debug)]
pub struct FitResult<F> {
    pub density: Density<F>,
    /// Self-normalized weighted cross-entropy attained.
    pub objective: F,
    /// EM iterations used by the winning restart (0 for closed-form fits).
    pub em_iterations: usize,
    /// Objective traces per restart. A component collapse re-seed starts a
    /// fresh segment; within a segment the trace is non-increasing.
    pub restart_traces: Vec<Vec<Vec<F>>>,
}

fn validate_weighted_data<F: Scalar>(points: &[Point<F>], weights: &[F]) -> Result<usize> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::invalid(
            "points and weights must be non-empty and equal length",
        ));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::invalid("points must share one dimension"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < F::zero()) {
        return Err(Error::invalid("weights must be non-negative and finite"));
    }
    if !weights.iter().any(|w| *w > F::zero()) {
        return Err(Error::EmptySupport);
    }
    Ok(dim)
}

/// Indices ordered canonically (by coordinates, then weight) so that sums
/// are independent of input permutation, bit for bit.
fn canonical_order<F: Scalar>(points: &[Point<F>], weights: &[F]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let pa = points[a].coords();
        let pb = points[b].coords();
        for (x, y) in pa.iter().zip(pb) {
            match x.partial_cmp(y).expect("finite coordinates") {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        weights[a].partial_cmp(&weights[b]).expect("finite weights")
    });
    order
}

/// Closed-form weighted moment match: `mu = sum s x / sum s`,
/// `Sigma = sum s (x - mu)(x - mu)^T / sum s`, then the eigenvalue floor.
pub fn fit_gaussian_weighted<F: Scalar>(
    points: &[Point<F>],
    weights: &[F],
    cov_floor: F,
) -> Result<GaussianDensity<F>> {
    let dim = validate_weighted_data(points, weights)?;
    let order = canonical_order(points, weights);

    let mut total = F::zero();
    let mut mean = vec![F::zero(); dim];
    for &i in &order {
        let w = weights[i];
        if w == F::zero() {
            continue;
        }
        total += w;
        for (k, &c) in points[i].coords().iter().enumerate() {
            mean[k] += w * c;
        }
    }
    for m in mean.iter_mut() {
        *m /= total;
    }

    let mut cov = Matrix::zeros(dim, dim);
    for &i in &order {
        let w = weights[i];
        if w == F::zero() {
            continue;
        }
        let c = points[i].coords();
        for a in 0..dim {
            let da = c[a] - mean[a];
            for b in a..dim {
                cov[(a, b)] += w * da * (c[b] - mean[b]);
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / total;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    GaussianDensity::with_floor(Point::new(mean)?, cov, cov_floor)
}

/// Self-normalized sampled cross-entropy `-sum s ln q / sum s`.
///
/// `+inf` is a legitimate return: the density assigns zero mass to a
/// positive-weight point.
pub fn weighted_cross_entropy<F: Scalar, D: LogDensity<F>>(
    points: &[Point<F>],
    weights: &[F],
    density: &D,
) -> Result<F> {
    validate_weighted_data(points, weights)?;
    let order = canonical_order(points, weights);
    let mut total = F::zero();
    let mut acc = F::zero();
    for &i in &order {
        let w = weights[i];
        if w == F::zero() {
            continue;
        }
        total += w;
        let lp = density.logpdf(&points[i]);
        if lp == F::neg_infinity() {
            return Ok(F::infinity());
        }
        acc += w * lp;
    }
    Ok(-acc / total)
}

/// Weighted EM for an `m`-component Gaussian mixture, best of
/// `cfg.n_restarts` random restarts (per-restart streams derived from one
/// base seed, so restarts are order-independent).
pub fn fit_mixture_em<F: Scalar, R: Rng + ?Sized>(
    points: &[Point<F>],
    weights: &[F],
    m: usize,
    cfg: &EmConfig<F>,
    rng: &mut R,
) -> Result<FitResult<F>> {
    cfg.validate()?;
    if m < 1 {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    validate_weighted_data(points, weights)?;

    if m == 1 {
        // Single component: the E-step is vacuous and EM reduces exactly to
        // the closed-form weighted fit.
        let g = fit_gaussian_weighted(points, weights, cfg.cov_floor)?;
        let objective = weighted_cross_entropy(points, weights, &g)?;
        return Ok(FitResult {
            density: Density::Mixture(MixtureDensity::single(g)),
            objective,
            em_iterations: 0,
            restart_traces: vec![vec![vec![objective]]],
        });
    }

    let base_seed: u64 = rng.random();
    let mut best: Option<(MixtureDensity<F>, F, usize)> = None;
    let mut traces = Vec::with_capacity(cfg.n_restarts);
    for restart in 0..cfg.n_restarts {
        let mut restart_rng = stream_rng(base_seed, restart as u64);
        let (mixture, objective, iters, trace) =
            em_single_run(points, weights, m, cfg, &mut restart_rng)?;
        traces.push(trace);
        // Lowest objective wins; ties keep the earlier restart.
        let better = match &best {
            None => true,
            Some((_, obj, _)) => objective < *obj,
        };
        if better {
            best = Some((mixture, objective, iters));
        }
    }
    let (mixture, objective, em_iterations) = best.expect("at least one restart ran");
    Ok(FitResult {
        density: Density::Mixture(mixture),
        objective,
        em_iterations,
        restart_traces: traces,
    })
}

/// Fits the requested model class on a pooled weighted view.
pub fn fit_model<F: Scalar, R: Rng + ?Sized>(
    view: &WeightedView<F>,
    model: &ModelSpec,
    cfg: &EmConfig<F>,
    rng: &mut R,
) -> Result<FitResult<F>> {
    match model {
        ModelSpec::SingleGaussian => {
            let g = fit_gaussian_weighted(&view.locations, &view.weights, cfg.cov_floor)?;
            let objective = weighted_cross_entropy(&view.locations, &view.weights, &g)?;
            Ok(FitResult {
                density: Density::Gaussian(g),
                objective,
                em_iterations: 0,
                restart_traces: Vec::new(),
            })
        }
        ModelSpec::Mixture { components } => {
            fit_mixture_em(&view.locations, &view.weights, *components, cfg, rng)
        }
    }
}

struct DistinctPoints<F> {
    locations: Vec<Point<F>>,
    weights: Vec<F>,
}

fn distinct_weighted_points<F: Scalar>(points: &[Point<F>], weights: &[F]) -> DistinctPoints<F> {
    let mut locations: Vec<Point<F>> = Vec::new();
    let mut sums: Vec<F> = Vec::new();
    for &i in canonical_order(points, weights).iter() {
        if weights[i] == F::zero() {
            continue;
        }
        match locations.last() {
            Some(last) if last == &points[i] => {
                let idx = sums.len() - 1;
                sums[idx] += weights[i];
            }
            _ => {
                locations.push(points[i].clone());
                sums.push(weights[i]);
            }
        }
    }
    DistinctPoints {
        locations,
        weights: sums,
    }
}

fn weighted_draw<F: Scalar, R: Rng + ?Sized>(weights: &[F], rng: &mut R) -> usize {
    let total: F = weights.iter().copied().sum();
    let u: F = rng.random_range(F::zero()..F::one()) * total;
    let mut acc = F::zero();
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[allow(clippy::type_complexity)]
fn em_single_run<F: Scalar, R: Rng + ?Sized>(
    points: &[Point<F>],
    weights: &[F],
    m: usize,
    cfg: &EmConfig<F>,
    rng: &mut R,
) -> Result<(MixtureDensity<F>, F, usize, Vec<Vec<F>>)> {
    let distinct = distinct_weighted_points(points, weights);
    let m_eff = m.min(distinct.locations.len());
    if m_eff < m {
        log::warn!(
            "EM: only {} distinct positive-weight points; fitting {} components instead of {}",
            distinct.locations.len(),
            m_eff,
            m
        );
    }

    let pooled = fit_gaussian_weighted(points, weights, cfg.cov_floor)?;
    let pooled_cov = pooled.covariance().clone();

    // Initial means: m_eff distinct data points by weighted sampling
    // without replacement.
    let mut pool_locs = distinct.locations.clone();
    let mut pool_w = distinct.weights.clone();
    let mut components = Vec::with_capacity(m_eff);
    for _ in 0..m_eff {
        let pick = weighted_draw(&pool_w, rng);
        let mean = pool_locs.swap_remove(pick);
        pool_w.swap_remove(pick);
        components.push(GaussianDensity::with_floor(
            mean,
            pooled_cov.clone(),
            cfg.cov_floor,
        )?);
    }
    let uniform = F::one() / F::of(m_eff as f64);
    let mut mixture = MixtureDensity::new(vec![uniform; m_eff], components)?;

    let total_weight: F = weights.iter().copied().sum();
    let dim = points[0].dim();
    let mut objective = weighted_cross_entropy(points, weights, &mixture)?;
    let mut segments: Vec<Vec<F>> = vec![vec![objective]];
    let mut iterations = 0usize;
    let mut collapses = 0usize;

    'outer: for iter in 1..=cfg.max_iters {
        iterations = iter;
        let m_cur = mixture.component_count();

        // E-step, fused with the mean accumulators of the M-step.
        let mut gamma = vec![F::zero(); m_cur];
        let mut mean_acc = vec![vec![F::zero(); dim]; m_cur];
        let mut resp = vec![Vec::new(); points.len()];
        for (i, p) in points.iter().enumerate() {
            if weights[i] == F::zero() {
                continue;
            }
            let r = mixture.responsibilities(p);
            for j in 0..m_cur {
                let wr = weights[i] * r[j];
                gamma[j] += wr;
                for (k, &c) in p.coords().iter().enumerate() {
                    mean_acc[j][k] += wr * c;
                }
            }
            resp[i] = r;
        }

        // Collapse handling: a component that lost all its responsibility
        // mass is re-seeded from a weighted random data point; after three
        // collapses in one run we drop a component instead.
        let tiny = total_weight * F::of(1e-12);
        if let Some(dead) = (0..m_cur).find(|&j| !(gamma[j] > tiny)) {
            collapses += 1;
            let mut weights_v = mixture.weights().to_vec();
            let mut comps = mixture.components().to_vec();
            if collapses >= 3 && m_cur > 1 {
                log::warn!(
                    "EM: component {dead} collapsed repeatedly; dropping to {} components",
                    m_cur - 1
                );
                weights_v.remove(dead);
                comps.remove(dead);
            } else {
                let pick = weighted_draw(&distinct.weights, rng);
                comps[dead] = GaussianDensity::with_floor(
                    distinct.locations[pick].clone(),
                    pooled_cov.clone(),
                    cfg.cov_floor,
                )?;
                weights_v[dead] = F::one() / F::of(m_cur as f64);
            }
            let total: F = weights_v.iter().copied().sum();
            for w in weights_v.iter_mut() {
                *w /= total;
            }
            mixture = MixtureDensity::new(weights_v, comps)?;
            objective = weighted_cross_entropy(points, weights, &mixture)?;
            segments.push(vec![objective]);
            continue 'outer;
        }

        let mut new_weights = Vec::with_capacity(m_cur);
        let mut new_comps = Vec::with_capacity(m_cur);
        for j in 0..m_cur {
            let mean: Vec<F> = mean_acc[j].iter().map(|&v| v / gamma[j]).collect();
            let mut cov = Matrix::zeros(dim, dim);
            for (i, p) in points.iter().enumerate() {
                if weights[i] == F::zero() {
                    continue;
                }
                let wr = weights[i] * resp[i][j];
                if wr == F::zero() {
                    continue;
                }
                let c = p.coords();
                for a in 0..dim {
                    let da = c[a] - mean[a];
                    for b in a..dim {
                        cov[(a, b)] += wr * da * (c[b] - mean[b]);
                    }
                }
            }
            for a in 0..dim {
                for b in a..dim {
                    let v = cov[(a, b)] / gamma[j];
                    cov[(a, b)] = v;
                    cov[(b, a)] = v;
                }
            }
            new_weights.push(gamma[j] / total_weight);
            new_comps.push(GaussianDensity::with_floor(
                Point::new(mean)?,
                cov,
                cfg.cov_floor,
            )?);
        }
        let total: F = new_weights.iter().copied().sum();
        for w in new_weights.iter_mut() {
            *w /= total;
        }
        let candidate = MixtureDensity::new(new_weights, new_comps)?;

        let new_objective = weighted_cross_entropy(points, weights, &candidate)?;
        if new_objective > objective {
            // An exact EM step never increases the objective; a rise means
            // the eigenvalue floor clamped this update. The constrained
            // optimum is the previous iterate; keep it and stop.
            iterations = iter - 1;
            break;
        }
        mixture = candidate;
        segments
            .last_mut()
            .expect("trace has a segment")
            .push(new_objective);
        let delta = objective - new_objective;
        objective = new_objective;
        if delta <= cfg.tol {
            break;
        }
    }

    Ok((mixture, objective, iterations, segments))
}
