//! Parametric-learning machinery on top of the pooled dataset:
//! cross-validation of the inverse temperature, cross-validated model
//! selection, and bagging. None of these touch the oracle; they only re-fit
//! and re-score data already paid for.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::density::{Density, MixtureDensity};
use crate::estimator::holdout_value_or_worst;
use crate::fit::{fit_model, EmConfig};
use crate::target::{subset_weight_view, BoltzmannSpec, Dataset, Sample};
use crate::{stream_rng, Error, Result, Scalar};

/// Model class for the search density.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSpec {
    SingleGaussian,
    Mixture { components: usize },
}

impl ModelSpec {
    pub fn component_count(&self) -> usize {
        match self {
            ModelSpec::SingleGaussian => 1,
            ModelSpec::Mixture { components } => *components,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.component_count() < 1 {
            return Err(Error::invalid("model needs at least one component"));
        }
        Ok(())
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSpec::SingleGaussian => write!(f, "single"),
            ModelSpec::Mixture { components } => write!(f, "mixture:{components}"),
        }
    }
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "single" {
            return Ok(ModelSpec::SingleGaussian);
        }
        if let Some(m) = s.strip_prefix("mixture:") {
            let components: usize = m
                .parse()
                .map_err(|_| Error::invalid(format!("bad component count `{m}`")))?;
            let spec = ModelSpec::Mixture { components };
            spec.validate()?;
            return Ok(spec);
        }
        Err(Error::invalid(format!("unknown model spec `{s}`")))
    }
}

/// Controls for the beta cross-validation loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaCvConfig<F> {
    /// Interval factors: candidates live in `[k1 * beta0, k2 * beta0]`.
    pub k1: F,
    pub k2: F,
    /// Grid size inside the interval.
    pub n_beta: usize,
    pub k_folds: usize,
    /// Interval extensions allowed before the loop gives up on convexity.
    pub max_ext_iter: usize,
}

impl<F: Scalar> BetaCvConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > F::zero() && self.k1 < F::one() && self.k2 > F::one()) {
            return Err(Error::invalid("need 0 < k1 < 1 < k2"));
        }
        if self.n_beta < 3 {
            return Err(Error::invalid("n_beta must be at least 3"));
        }
        if self.k_folds < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        Ok(())
    }
}

/// Bagging replicate count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaggingConfig {
    pub k_b: usize,
}

impl BaggingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_b < 1 {
            return Err(Error::invalid("bagging needs at least one replicate"));
        }
        Ok(())
    }
}

/// Random disjoint index subsets covering `0..n`, sizes differing by at most
/// one. Deterministic in the generator state.
pub fn kfold_indices<F: Scalar, R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let _ = std::marker::PhantomData::<F>;
    if k < 1 || n < k {
        return Err(Error::invalid(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        folds.push(indices[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Ok(folds)
}

/// K-fold partition of a dataset's sample indices.
pub fn kfold_partition<F: Scalar, R: Rng + ?Sized>(
    data: &Dataset<F>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    kfold_indices::<F, R>(data.len(), k, rng)
}

/// Distinct substream per (extension, fold, candidate) task.
fn task_stream(extension: usize, fold: usize, candidate: usize) -> u64 {
    1 + ((extension as u64) << 40) + ((fold as u64) << 20) + candidate as u64
}

fn centered_line_fit<F: Scalar>(xs: &[F], ys: &[F]) -> Option<(F, F)> {
    // Least squares y = b0 + b1 x on centered/scaled x for conditioning;
    // returns (b0, b1) in the original coordinates.
    let n = F::of(xs.len() as f64);
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().copied().sum::<F>() / n;
    let my = ys.iter().copied().sum::<F>() / n;
    let mut sxx = F::zero();
    let mut sxy = F::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > F::zero()) {
        return None;
    }
    let b1 = sxy / sxx;
    Some((my - b1 * mx, b1))
}

/// Least-squares quadratic in standardized coordinates; returns the leading
/// coefficient (standardized; its sign matches the raw one) and the argmin
/// in original coordinates when the fit is strictly convex.
fn quadratic_fit_argmin<F: Scalar>(xs: &[F], ys: &[F]) -> Option<(F, F)> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let nf = F::of(n as f64);
    let mean = xs.iter().copied().sum::<F>() / nf;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / nf;
    if !(var > F::zero()) {
        return None;
    }
    let sd = var.sqrt();
    let ts: Vec<F> = xs.iter().map(|&x| (x - mean) / sd).collect();

    // Normal equations for y = c0 + c1 t + c2 t^2.
    let mut s = [F::zero(); 5];
    for &t in &ts {
        let t2 = t * t;
        s[1] += t;
        s[2] += t2;
        s[3] += t2 * t;
        s[4] += t2 * t2;
    }
    s[0] = nf;
    let mut b = [F::zero(); 3];
    for (&t, &y) in ts.iter().zip(ys) {
        b[0] += y;
        b[1] += t * y;
        b[2] += t * t * y;
    }
    let a = crate::linalg::Matrix::from_rows(
        3,
        3,
        &[s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]],
    );
    let c = crate::linalg::solve_spd(&a, &b).ok()?;
    if !(c[2] > F::zero()) {
        return None;
    }
    let t_star = -c[1] / (F::of(2.0) * c[2]);
    Some((c[2], mean + sd * t_star))
}

/// One interval step of the beta search: quadratic fit if strictly convex,
/// otherwise the line-endpoint fallback (flat lines break toward the lower
/// endpoint). Returns `(beta_star, was_convex)`; `None` when fewer than two
/// finite scores remain.
fn beta_interval_step<F: Scalar>(grid: &[F], scores: &[F], lo: F, hi: F) -> Option<(F, bool)> {
    let finite: Vec<(F, F)> = grid
        .iter()
        .zip(scores)
        .filter(|(_, s)| s.is_finite())
        .map(|(&b, &s)| (b, s))
        .collect();
    if finite.len() < 2 {
        return None;
    }
    let xs: Vec<F> = finite.iter().map(|p| p.0).collect();
    let ys: Vec<F> = finite.iter().map(|p| p.1).collect();

    if let Some((_, argmin)) = quadratic_fit_argmin(&xs, &ys) {
        let clipped = argmin.max(lo).min(hi);
        return Some((clipped, true));
    }
    let (_, slope) = centered_line_fit(&xs, &ys)?;
    let pick = if slope < F::zero() { hi } else { lo };
    Some((pick, false))
}

/// Beta cross-validation driven by an arbitrary grid scorer.
///
/// `score_grid(extension, grid)` returns the fold-averaged held-out score
/// for each candidate (`+inf` marks undefined scores). This is the loop the
/// production [`crossvalidate_beta`] runs; tests drive it with synthetic
/// score surfaces.
pub fn crossvalidate_beta_with<F, S>(mut score_grid: S, beta0: F, cfg: &BetaCvConfig<F>) -> Result<F>
where
    F: Scalar,
    S: FnMut(usize, &[F]) -> Vec<F>,
{
    cfg.validate()?;
    if !(beta0 > F::zero()) || !beta0.is_finite() {
        return Err(Error::invalid("beta0 must be positive and finite"));
    }
    let mut beta = beta0;
    let mut extension = 0usize;
    loop {
        let lo = cfg.k1 * beta;
        let hi = cfg.k2 * beta;
        let step = (hi - lo) / F::of((cfg.n_beta - 1) as f64);
        let grid: Vec<F> = (0..cfg.n_beta).map(|i| lo + step * F::of(i as f64)).collect();
        let scores = score_grid(extension, &grid);
        debug_assert_eq!(scores.len(), grid.len());

        match beta_interval_step(&grid, &scores, lo, hi) {
            Some((beta_star, convex)) => {
                beta = beta_star;
                extension += 1;
                if convex || extension > cfg.max_ext_iter {
                    return Ok(beta);
                }
            }
            None => {
                log::warn!("beta CV: all candidate scores undefined; keeping beta = {beta}");
                return Ok(beta);
            }
        }
    }
}

/// Cross-validated inverse temperature (no oracle calls): grid candidates in
/// `[k1 b, k2 b]`, per-fold refits, held-out scoring, quadratic/line fit, and
/// interval extension until the fitted quadratic is convex or the extension
/// budget runs out.
pub fn crossvalidate_beta<F: Scalar, R: Rng + ?Sized>(
    data: &Dataset<F>,
    beta0: F,
    cfg: &BetaCvConfig<F>,
    model: &ModelSpec,
    em: &EmConfig<F>,
    rng: &mut R,
) -> Result<F> {
    cfg.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("beta CV needs data"));
    }
    if data.len() < cfg.k_folds {
        return Err(Error::invalid(format!(
            "cannot run {}-fold CV on {} samples",
            cfg.k_folds,
            data.len()
        )));
    }
    let base_seed: u64 = rng.random();
    let scorer = |extension: usize, grid: &[F]| -> Vec<F> {
        let mut fold_rng = stream_rng(base_seed, 2 * extension as u64);
        let folds = kfold_indices::<F, _>(data.len(), cfg.k_folds, &mut fold_rng)
            .expect("fold count validated");
        score_candidates_over_folds(data, &folds, grid.len(), |bi| grid[bi], |_bi| *model, em, {
            let ext = extension;
            move |fold, candidate| stream_rng(base_seed, task_stream(ext, fold, candidate))
        })
    };
    crossvalidate_beta_with(scorer, beta0, cfg)
}

/// Shared fold/candidate scoring loop: for candidate `ci`, fit on each
/// training portion at `beta_of(ci)` with `model_of(ci)`, score held out,
/// and average. Undefined scores average to `+inf`.
fn score_candidates_over_folds<F, BetaOf, ModelOf, TaskRng>(
    data: &Dataset<F>,
    folds: &[Vec<usize>],
    n_candidates: usize,
    beta_of: BetaOf,
    model_of: ModelOf,
    em: &EmConfig<F>,
    mut task_rng: TaskRng,
) -> Vec<F>
where
    F: Scalar,
    BetaOf: Fn(usize) -> F,
    ModelOf: Fn(usize) -> ModelSpec,
    TaskRng: FnMut(usize, usize) -> rand_chacha::ChaCha8Rng,
{
    let mut averages = vec![F::zero(); n_candidates];
    for ci in 0..n_candidates {
        let beta = beta_of(ci);
        let spec = match BoltzmannSpec::new(beta) {
            Ok(s) => s,
            Err(_) => {
                averages[ci] = F::infinity();
                continue;
            }
        };
        let model = model_of(ci);
        let mut total = F::zero();
        for (fold, holdout) in folds.iter().enumerate() {
            let train: Vec<usize> = (0..data.len()).filter(|i| !holdout.contains(i)).collect();
            let mut rng = task_rng(fold, ci);
            let score = match subset_weight_view(data, &train, &spec) {
                Ok(view) => match fit_model(&view, &model, em, &mut rng) {
                    Ok(fit) => {
                        let validation: Vec<Sample<F>> =
                            holdout.iter().map(|&i| data.samples()[i].clone()).collect();
                        holdout_value_or_worst(&validation, &fit.density)
                    }
                    Err(_) => F::infinity(),
                },
                Err(_) => F::infinity(),
            };
            total += score / F::of(folds.len() as f64);
        }
        averages[ci] = total;
    }
    averages
}

/// Cross-validated model selection at a fixed target: one partition, every
/// candidate fit per fold, lowest fold-averaged held-out score wins. Ties
/// break toward fewer components, then earlier position.
pub fn crossvalidate_model<F: Scalar, R: Rng + ?Sized>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
    candidates: &[ModelSpec],
    k_folds: usize,
    em: &EmConfig<F>,
    rng: &mut R,
) -> Result<ModelSpec> {
    if candidates.is_empty() {
        return Err(Error::invalid("model CV needs at least one candidate"));
    }
    for c in candidates {
        c.validate()?;
    }
    if k_folds < 2 || data.len() < k_folds {
        return Err(Error::invalid(format!(
            "cannot run {}-fold CV on {} samples",
            k_folds,
            data.len()
        )));
    }
    let base_seed: u64 = rng.random();
    let mut fold_rng = stream_rng(base_seed, 0);
    let folds = kfold_indices::<F, _>(data.len(), k_folds, &mut fold_rng)?;
    let scores = score_candidates_over_folds(
        data,
        &folds,
        candidates.len(),
        |_| spec.beta(),
        |ci| candidates[ci],
        em,
        |fold, candidate| stream_rng(base_seed, task_stream(0, fold, candidate)),
    );

    let mut best = 0usize;
    for ci in 1..candidates.len() {
        let better = scores[ci] < scores[best]
            || (scores[ci] == scores[best]
                && candidates[ci].component_count() < candidates[best].component_count());
        if better {
            best = ci;
        }
    }
    if !scores[best].is_finite() {
        log::warn!("model CV: every candidate scored undefined; keeping {}", candidates[best]);
    }
    Ok(candidates[best])
}

/// Bagged fit: `k_b` bootstrap resamples of the pooled list (size `N`, with
/// replacement; weights recomputed per replicate at the current target),
/// each fit separately, uniformly averaged into one mixture with outer
/// weights `1/k_b`.
pub fn bagged_fit<F: Scalar, R: Rng + ?Sized>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
    model: &ModelSpec,
    bagging: &BaggingConfig,
    em: &EmConfig<F>,
    rng: &mut R,
) -> Result<MixtureDensity<F>> {
    bagging.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("bagging needs data"));
    }
    let n = data.len();
    let base_seed: u64 = rng.random();
    let outer = F::one() / F::of(bagging.k_b as f64);
    let mut weights = Vec::new();
    let mut components = Vec::new();
    for replicate in 0..bagging.k_b {
        let mut rep_rng = stream_rng(base_seed, replicate as u64);
        let mut fitted = None;
        for _attempt in 0..10 {
            let indices: Vec<usize> = (0..n).map(|_| rep_rng.random_range(0..n)).collect();
            match subset_weight_view(data, &indices, spec) {
                Ok(view) => {
                    fitted = Some(fit_model(&view, model, em, &mut rep_rng)?);
                    break;
                }
                Err(Error::EmptySupport) => continue,
                Err(e) => return Err(e),
            }
        }
        let fit = fitted.ok_or(Error::EmptySupport)?;
        match fit.density {
            Density::Gaussian(g) => {
                weights.push(outer);
                components.push(g);
            }
            Density::Mixture(m) => {
                for (w, c) in m.weights().iter().zip(m.components()) {
                    weights.push(outer * *w);
                    components.push(c.clone());
                }
            }
            Density::UniformBox(_) => {
                return Err(Error::Internal("fit produced a uniform density".into()))
            }
        }
    }
    MixtureDensity::new(weights, components)
}

/// Least-squares fit of `ln beta ~ a + b t` pooled over run trajectories
/// (`t` is the 1-based iteration). Returns the equivalent multiplicative
/// rule `(beta_at_t1, k)` with `k = e^b`, or `None` if degenerate.
pub fn fit_log_multiplicative_rule<F: Scalar>(trajectories: &[Vec<F>]) -> Option<(F, F)> {
    let mut ts = Vec::new();
    let mut lnb = Vec::new();
    for run in trajectories {
        for (i, &beta) in run.iter().enumerate() {
            if beta > F::zero() && beta.is_finite() {
                ts.push(F::of((i + 1) as f64));
                lnb.push(beta.ln());
            }
        }
    }
    let (intercept, slope) = centered_line_fit(&ts, &lnb)?;
    let k = slope.exp();
    let beta1 = (intercept + slope).exp();
    if !(beta1 > F::zero()) || !k.is_finite() {
        return None;
    }
    Some((beta1, k))
}
