//! Constrained optimization via masked densities: a parametric base density
//! multiplied by a feasibility indicator (optionally softened to a constant
//! `kappa` on the infeasible side) and renormalized.
//!
//! Fitting supports two objectives. `KlOnly` maximizes the masked weighted
//! log-likelihood alone, which keeps mass from being pushed away from the
//! feasible region; `Corrected` adds the `-ln integral(base * mask)` term
//! and ascends it by derivative-free coordinate search, holding the Monte
//! Carlo normalizer draws fixed (common random numbers) so the comparison
//! between parameter vectors is noise-free.

use std::sync::Arc;

use rand::Rng;

use crate::density::{Density, GaussianDensity, LogDensity, MixtureDensity};
use crate::fit::{fit_model, EmConfig};
use crate::linalg::Matrix;
use crate::oracle::Point;
use crate::schedule::ModelSpec;
use crate::target::{boltzmann_weights, BoltzmannSpec, Dataset, WeightedView};
use crate::{Error, Result, Scalar};

/// Monte Carlo draws used for normalizer estimates inside fits.
pub const DEFAULT_NORMALIZER_DRAWS: usize = 2000;

/// Default rejection budget for masked sampling.
pub const DEFAULT_MAX_REJECTS: usize = 100_000;

const ASCENT_MAX_SWEEPS: usize = 50;

/// Feasibility mask: 1 on feasible points, `kappa` (0 for hard masks) on
/// infeasible ones.
#[derive(Clone)]
pub struct FeasibilityMask<F> {
    indicator: Arc<dyn Fn(&Point<F>) -> bool + Send + Sync>,
    kappa: F,
}

impl<F: Scalar> std::fmt::Debug for FeasibilityMask<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeasibilityMask")
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

impl<F: Scalar> FeasibilityMask<F> {
    /// Hard mask: infeasible points carry zero mass.
    pub fn hard(indicator: impl Fn(&Point<F>) -> bool + Send + Sync + 'static) -> Self {
        FeasibilityMask {
            indicator: Arc::new(indicator),
            kappa: F::zero(),
        }
    }

    /// Softened mask: infeasible points carry mass `kappa` in `[0, 1]`.
    pub fn soft(
        indicator: impl Fn(&Point<F>) -> bool + Send + Sync + 'static,
        kappa: F,
    ) -> Result<Self> {
        if !(kappa >= F::zero() && kappa <= F::one()) {
            return Err(Error::invalid("kappa must lie in [0, 1]"));
        }
        Ok(FeasibilityMask {
            indicator: Arc::new(indicator),
            kappa,
        })
    }

    pub fn always_feasible() -> Self {
        Self::hard(|_| true)
    }

    pub fn kappa(&self) -> F {
        self.kappa
    }

    pub fn is_feasible(&self, x: &Point<F>) -> bool {
        (self.indicator)(x)
    }

    /// Mask value at `x`: 1 or `kappa`.
    pub fn value(&self, x: &Point<F>) -> F {
        if self.is_feasible(x) {
            F::one()
        } else {
            self.kappa
        }
    }
}

/// A base density restricted by a mask, with its Monte Carlo normalizer.
#[derive(Clone, Debug)]
pub struct MaskedDensity<F: Scalar> {
    pub base: Density<F>,
    pub mask: FeasibilityMask<F>,
    /// Estimate of `integral base * mask` (in `(0, 1]` for hard masks).
    pub normalizer: F,
    pub normalizer_se: F,
}

impl<F: Scalar> MaskedDensity<F> {
    /// One draw distributed proportionally to `base * mask`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_rejects: usize) -> Result<Point<F>> {
        sample_masked(&self.base, &self.mask, rng, max_rejects)
    }

    /// Log-density of the masked distribution (using the stored normalizer).
    pub fn logpdf(&self, x: &Point<F>) -> F {
        let v = self.mask.value(x);
        if v > F::zero() {
            self.base.logpdf(x) + v.ln() - self.normalizer.ln()
        } else {
            F::neg_infinity()
        }
    }
}

/// Monte Carlo estimate of `integral base * mask`: the mean mask value over
/// `n >= 100` draws from the base, with its standard error.
pub fn estimate_normalizer<F: Scalar, R: Rng + ?Sized>(
    base: &Density<F>,
    mask: &FeasibilityMask<F>,
    n: usize,
    rng: &mut R,
) -> Result<(F, F)> {
    if n < 100 {
        return Err(Error::invalid("normalizer estimation needs at least 100 draws"));
    }
    let values: Vec<F> = (0..n).map(|_| mask.value(&base.sample(rng))).collect();
    let (mean, se) = crate::special::mean_and_se(&values);
    if !(mean > F::zero()) {
        return Err(Error::EmptyFeasibleMass);
    }
    Ok((mean, se))
}

/// Rejection sampling of `base * mask`: accept a draw with probability equal
/// to its mask value (feasible draws are accepted without spending a coin).
pub fn sample_masked<F: Scalar, R: Rng + ?Sized>(
    base: &Density<F>,
    mask: &FeasibilityMask<F>,
    rng: &mut R,
    max_rejects: usize,
) -> Result<Point<F>> {
    if max_rejects < 1 {
        return Err(Error::invalid("max_rejects must be at least 1"));
    }
    let mut rejects = 0usize;
    loop {
        let x = base.sample(rng);
        let v = mask.value(&x);
        if v >= F::one() {
            return Ok(x);
        }
        if v > F::zero() {
            let u: F = rng.random_range(F::zero()..F::one());
            if u < v {
                return Ok(x);
            }
        }
        rejects += 1;
        if rejects >= max_rejects {
            return Err(Error::SamplerExhausted { max_rejects });
        }
    }
}

/// Which constrained objective to optimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstrainedMode {
    /// Masked weighted fit only (closed form / EM).
    KlOnly,
    /// Masked fit plus the `-ln integral(base * mask)` correction, ascended
    /// by coordinate search over component means and log diagonal scales.
    Corrected,
}

/// Result of a constrained fit, with the corrected objective at the
/// returned parameters and at the kl-only initializer (common random
/// numbers, so the two are directly comparable).
#[derive(Clone, Debug)]
pub struct ConstrainedFit<F: Scalar> {
    pub density: MaskedDensity<F>,
    pub objective: F,
    pub initial_objective: F,
}

/// Fits a masked density to the Boltzmann-weighted pool. Sample weights are
/// `s^i * mask(x^i)`; the normalizer in the first term cancels under
/// self-normalization.
pub fn constrained_fit<F: Scalar, R: Rng + ?Sized>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
    mask: &FeasibilityMask<F>,
    model: &ModelSpec,
    mode: ConstrainedMode,
    em: &EmConfig<F>,
    rng: &mut R,
) -> Result<ConstrainedFit<F>> {
    let s = boltzmann_weights(data, spec)?;
    let locations: Vec<Point<F>> = data.samples().iter().map(|x| x.location.clone()).collect();
    let weights: Vec<F> = locations
        .iter()
        .zip(&s)
        .map(|(x, &w)| w * mask.value(x))
        .collect();
    if !weights.iter().any(|w| *w > F::zero()) {
        return Err(Error::EmptySupport);
    }
    let view = WeightedView {
        locations: locations.clone(),
        weights: weights.clone(),
    };
    let kl_only = fit_model(&view, model, em, rng)?.density;

    // Fixed normalizer randomness: component assignments are drawn against
    // the mixing weights (which the ascent never changes) and one standard
    // normal vector per draw.
    let (mix_weights, components) = flatten(&kl_only);
    let dim = components[0].dim();
    let crn: Vec<(usize, Vec<F>)> = (0..DEFAULT_NORMALIZER_DRAWS)
        .map(|_| {
            let u: F = rng.random_range(F::zero()..F::one());
            let mut acc = F::zero();
            let mut comp = components.len() - 1;
            for (j, &w) in mix_weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = j;
                    break;
                }
            }
            let z: Vec<F> = (0..dim).map(|_| F::standard_normal(rng)).collect();
            (comp, z)
        })
        .collect();

    let params0 = AscentParams::from_components(&components);
    let eval = |p: &AscentParams<F>| -> Result<(F, F, F)> {
        let density = p.realize(&mix_weights, em.cov_floor)?;
        let normalizer = p.normalizer_crn(mask, &crn)?;
        if !(normalizer > F::zero()) {
            return Ok((F::neg_infinity(), F::zero(), F::zero()));
        }
        let mut num = F::zero();
        let mut total = F::zero();
        for (x, &w) in locations.iter().zip(&weights) {
            if w == F::zero() {
                continue;
            }
            num += w * density.logpdf(x);
            total += w;
        }
        Ok((num / total - normalizer.ln(), normalizer, F::zero()))
    };

    let (initial_objective, init_norm, _) = eval(&params0)?;
    if !(init_norm > F::zero()) {
        return Err(Error::EmptyFeasibleMass);
    }

    let mut moved = false;
    let (final_params, objective) = match mode {
        ConstrainedMode::KlOnly => (params0.clone(), initial_objective),
        ConstrainedMode::Corrected => {
            let mut best = params0.clone();
            let mut best_obj = initial_objective;
            let mut mean_steps: Vec<F> = components
                .iter()
                .flat_map(|c| {
                    (0..dim).map(move |d| c.covariance()[(d, d)].sqrt() * F::of(0.25))
                })
                .collect();
            let mut scale_step = F::of(0.25);
            for _sweep in 0..ASCENT_MAX_SWEEPS {
                let mut improved = false;
                for idx in 0..best.means.len() {
                    for dir in [F::one(), -F::one()] {
                        let mut trial = best.clone();
                        trial.means[idx] += dir * mean_steps[idx];
                        let (obj, norm, _) = eval(&trial)?;
                        if norm > F::zero() && obj > best_obj {
                            best = trial;
                            best_obj = obj;
                            improved = true;
                            moved = true;
                        }
                    }
                }
                for idx in 0..best.log_scales.len() {
                    for dir in [F::one(), -F::one()] {
                        let mut trial = best.clone();
                        trial.log_scales[idx] += dir * scale_step;
                        let (obj, norm, _) = eval(&trial)?;
                        if norm > F::zero() && obj > best_obj {
                            best = trial;
                            best_obj = obj;
                            improved = true;
                            moved = true;
                        }
                    }
                }
                if !improved {
                    for s in mean_steps.iter_mut() {
                        *s *= F::of(0.5);
                    }
                    scale_step *= F::of(0.5);
                    if scale_step < F::of(1e-6) {
                        break;
                    }
                }
            }
            (best, best_obj)
        }
    };

    // Rebuilding through the ascent parameterization re-floors the
    // covariance, which is not a bitwise no-op; keep the fitted density
    // untouched when no ascent step was accepted.
    let final_density = if moved {
        final_params.realize(&mix_weights, em.cov_floor)?
    } else {
        kl_only
    };
    let values: Vec<F> = crn
        .iter()
        .map(|(comp, z)| mask.value(&final_params.push_forward(*comp, z)))
        .collect();
    let (normalizer, normalizer_se) = crate::special::mean_and_se(&values);
    if !(normalizer > F::zero()) {
        return Err(Error::EmptyFeasibleMass);
    }

    Ok(ConstrainedFit {
        density: MaskedDensity {
            base: final_density,
            mask: mask.clone(),
            normalizer,
            normalizer_se,
        },
        objective,
        initial_objective,
    })
}

fn flatten<F: Scalar>(density: &Density<F>) -> (Vec<F>, Vec<GaussianDensity<F>>) {
    match density {
        Density::Gaussian(g) => (vec![F::one()], vec![g.clone()]),
        Density::Mixture(m) => (m.weights().to_vec(), m.components().to_vec()),
        Density::UniformBox(_) => unreachable!("fits never produce uniform densities"),
    }
}

/// Ascent parameterization: per-component means plus log scales multiplying
/// the initial covariance diagonally (`Sigma = S Sigma0 S`, `S = diag(e^c)`).
#[derive(Clone, Debug)]
struct AscentParams<F> {
    dim: usize,
    means: Vec<F>,
    log_scales: Vec<F>,
    base_covs: Vec<Matrix<F>>,
    base_chols: Vec<Matrix<F>>,
}

impl<F: Scalar> AscentParams<F> {
    fn from_components(components: &[GaussianDensity<F>]) -> Self {
        let dim = components[0].dim();
        let means = components
            .iter()
            .flat_map(|c| c.mean().coords().to_vec())
            .collect();
        let log_scales = vec![F::zero(); components.len() * dim];
        let base_covs = components.iter().map(|c| c.covariance().clone()).collect();
        let base_chols = components
            .iter()
            .map(|c| c.covariance().cholesky().expect("stored covariance factors"))
            .collect();
        AscentParams {
            dim,
            means,
            log_scales,
            base_covs,
            base_chols,
        }
    }

    fn component_count(&self) -> usize {
        self.base_covs.len()
    }

    fn scaled_cov(&self, j: usize) -> Matrix<F> {
        let n = self.dim;
        let mut cov = self.base_covs[j].clone();
        for a in 0..n {
            for b in 0..n {
                let sa = self.log_scales[j * n + a].exp();
                let sb = self.log_scales[j * n + b].exp();
                cov[(a, b)] *= sa * sb;
            }
        }
        cov
    }

    fn realize(&self, mix_weights: &[F], floor: F) -> Result<Density<F>> {
        let n = self.dim;
        let comps: Result<Vec<GaussianDensity<F>>> = (0..self.component_count())
            .map(|j| {
                let mean = Point::new(self.means[j * n..(j + 1) * n].to_vec())?;
                GaussianDensity::with_floor(mean, self.scaled_cov(j), floor)
            })
            .collect();
        let comps = comps?;
        if comps.len() == 1 {
            Ok(Density::Gaussian(comps.into_iter().next().expect("one component")))
        } else {
            Ok(Density::Mixture(MixtureDensity::new(
                mix_weights.to_vec(),
                comps,
            )?))
        }
    }

    /// Maps a fixed standard-normal draw through component `j`'s current
    /// parameters: `mu_j + S L0 z` (`S L0` factors `S Sigma0 S`).
    fn push_forward(&self, j: usize, z: &[F]) -> Point<F> {
        let n = self.dim;
        let lz = self.base_chols[j].matvec(z);
        let coords: Vec<F> = (0..n)
            .map(|d| self.means[j * n + d] + self.log_scales[j * n + d].exp() * lz[d])
            .collect();
        Point::new(coords).expect("pushed-forward draw is finite")
    }

    fn normalizer_crn(
        &self,
        mask: &FeasibilityMask<F>,
        crn: &[(usize, Vec<F>)],
    ) -> Result<F> {
        let mut sum = F::zero();
        for (comp, z) in crn {
            sum += mask.value(&self.push_forward(*comp, z));
        }
        Ok(sum / F::of(crn.len() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{BenchmarkId, OracleResponse};
    use crate::stream_rng;
    use approx::assert_relative_eq;

    fn pt(coords: &[f64]) -> Point<f64> {
        Point::from_slice(coords).unwrap()
    }

    fn std_normal_1d() -> Density<f64> {
        Density::Gaussian(GaussianDensity::isotropic(pt(&[0.0]), 1.0).unwrap())
    }

    fn quadratic_dataset(n: usize, seed: u64) -> Dataset<f64> {
        let bench = BenchmarkId::Quadratic2d;
        let own = crate::density::UniformBoxDensity::new(bench.sampling_box());
        let mut rng = stream_rng(seed, 3);
        let mut data = Dataset::new();
        let entries: Vec<_> = (0..n)
            .map(|_| {
                let x = own.sample(&mut rng);
                (x.clone(), bench.evaluate(&x).unwrap(), 0.25)
            })
            .collect();
        data.append_batch(entries).unwrap();
        data
    }

    #[test]
    fn normalizer_constant_masks_are_exact() {
        let base = std_normal_1d();
        let mut rng = stream_rng(41, 0);
        let (one, se_one) =
            estimate_normalizer(&base, &FeasibilityMask::always_feasible(), 500, &mut rng)
                .unwrap();
        assert_eq!(one, 1.0);
        assert_eq!(se_one, 0.0);

        let kappa_only = FeasibilityMask::soft(|_| false, 0.3).unwrap();
        let (k, se_k) = estimate_normalizer(&base, &kappa_only, 500, &mut rng).unwrap();
        assert_relative_eq!(k, 0.3, epsilon = 1e-12);
        assert!(se_k < 1e-12);
    }

    #[test]
    fn normalizer_halfplane_is_half() {
        let base = std_normal_1d();
        let mask = FeasibilityMask::hard(|x: &Point<f64>| x[0] > 0.0);
        let mut rng = stream_rng(42, 0);
        let n = 4000;
        let (est, se) = estimate_normalizer(&base, &mask, n, &mut rng).unwrap();
        assert!((est - 0.5).abs() < 3.0 * se.max(0.5 / (n as f64).sqrt()));
    }

    #[test]
    fn normalizer_guards() {
        let base = std_normal_1d();
        assert!(matches!(
            estimate_normalizer(&base, &FeasibilityMask::always_feasible(), 50, &mut stream_rng(1, 0)),
            Err(Error::InvalidArgument(_))
        ));
        let never = FeasibilityMask::hard(|_| false);
        assert_eq!(
            estimate_normalizer(&base, &never, 200, &mut stream_rng(1, 0)).unwrap_err(),
            Error::EmptyFeasibleMass
        );
    }

    #[test]
    fn trivial_mask_sampling_matches_base_stream() {
        let base = std_normal_1d();
        let mask = FeasibilityMask::always_feasible();
        let mut rng_a = stream_rng(43, 0);
        let mut rng_b = stream_rng(43, 0);
        for _ in 0..50 {
            let masked = sample_masked(&base, &mask, &mut rng_a, 10).unwrap();
            let plain = base.sample(&mut rng_b);
            assert_eq!(masked.coords(), plain.coords());
        }
    }

    #[test]
    fn masked_sampling_respects_indicator() {
        let base = Density::Gaussian(
            GaussianDensity::isotropic(pt(&[0.0, 0.0]), 1.0).unwrap(),
        );
        let mask = FeasibilityMask::hard(|x: &Point<f64>| x[0].abs() < 0.5 && x[1].abs() < 0.5);
        let mut rng = stream_rng(44, 0);
        for _ in 0..10_000 {
            let x = sample_masked(&base, &mask, &mut rng, DEFAULT_MAX_REJECTS).unwrap();
            assert!(mask.is_feasible(&x));
        }
    }

    #[test]
    fn impossible_mask_exhausts_sampler() {
        let base = std_normal_1d();
        let mask = FeasibilityMask::hard(|_| false);
        assert_eq!(
            sample_masked(&base, &mask, &mut stream_rng(45, 0), 100).unwrap_err(),
            Error::SamplerExhausted { max_rejects: 100 }
        );
    }

    #[test]
    fn trivial_mask_fit_equals_unconstrained_bitwise() {
        let data = quadratic_dataset(40, 46);
        let spec = BoltzmannSpec::new(3.0).unwrap();
        let em = EmConfig::default();
        let model = ModelSpec::SingleGaussian;

        let mut rng_a = stream_rng(47, 0);
        let constrained = constrained_fit(
            &data,
            &spec,
            &FeasibilityMask::always_feasible(),
            &model,
            ConstrainedMode::KlOnly,
            &em,
            &mut rng_a,
        )
        .unwrap();

        let mut rng_b = stream_rng(47, 0);
        let view = crate::target::pooled_weight_view(&data, &spec).unwrap();
        let unconstrained = fit_model(&view, &model, &em, &mut rng_b).unwrap();
        assert_eq!(constrained.density.base, unconstrained.density);
        assert_eq!(constrained.density.normalizer, 1.0);
    }

    #[test]
    fn enclosing_box_mask_changes_nothing() {
        // Mask feasible on a region containing every sample: weights match
        // the unconstrained ones exactly.
        let data = quadratic_dataset(30, 48);
        let spec = BoltzmannSpec::new(2.0).unwrap();
        let em = EmConfig::default();
        let enclosing = FeasibilityMask::hard(|x: &Point<f64>| x[0].abs() < 10.0);
        let mut rng_a = stream_rng(49, 0);
        let fit_masked = constrained_fit(
            &data,
            &spec,
            &enclosing,
            &ModelSpec::SingleGaussian,
            ConstrainedMode::KlOnly,
            &em,
            &mut rng_a,
        )
        .unwrap();
        let mut rng_b = stream_rng(49, 0);
        let view = crate::target::pooled_weight_view(&data, &spec).unwrap();
        let unconstrained = fit_model(&view, &ModelSpec::SingleGaussian, &em, &mut rng_b).unwrap();
        assert_eq!(fit_masked.density.base, unconstrained.density);
    }

    #[test]
    fn corrected_mode_never_loses_to_its_initializer() {
        // Half-plane mask cutting through the data cloud.
        let data = quadratic_dataset(50, 50);
        let spec = BoltzmannSpec::new(2.0).unwrap();
        let em = EmConfig::default();
        let mask = FeasibilityMask::hard(|x: &Point<f64>| x[0] > -0.2);
        let fit = constrained_fit(
            &data,
            &spec,
            &mask,
            &ModelSpec::SingleGaussian,
            ConstrainedMode::Corrected,
            &em,
            &mut stream_rng(51, 0),
        )
        .unwrap();
        assert!(
            fit.objective >= fit.initial_objective,
            "corrected {} vs initial {}",
            fit.objective,
            fit.initial_objective
        );
        assert!(fit.density.normalizer > 0.0 && fit.density.normalizer <= 1.0);
    }

    #[test]
    fn corrected_mode_with_trivial_mask_returns_initializer() {
        let data = quadratic_dataset(40, 52);
        let spec = BoltzmannSpec::new(3.0).unwrap();
        let em = EmConfig::default();
        let corrected = constrained_fit(
            &data,
            &spec,
            &FeasibilityMask::always_feasible(),
            &ModelSpec::SingleGaussian,
            ConstrainedMode::Corrected,
            &em,
            &mut stream_rng(53, 0),
        )
        .unwrap();
        let mut rng_b = stream_rng(53, 0);
        let view = crate::target::pooled_weight_view(&data, &spec).unwrap();
        let unconstrained = fit_model(&view, &ModelSpec::SingleGaussian, &em, &mut rng_b).unwrap();
        // The correction term is constant (ln 1), and the closed-form fit
        // already maximizes the first term, so no ascent step is accepted.
        assert_eq!(corrected.density.base, unconstrained.density);
    }

    #[test]
    fn masked_density_puts_no_mass_on_infeasible_points() {
        let data = quadratic_dataset(50, 54);
        let spec = BoltzmannSpec::new(2.0).unwrap();
        let mask = FeasibilityMask::hard(|x: &Point<f64>| x[1] < 0.4);
        let fit = constrained_fit(
            &data,
            &spec,
            &mask,
            &ModelSpec::SingleGaussian,
            ConstrainedMode::KlOnly,
            &EmConfig::default(),
            &mut stream_rng(55, 0),
        )
        .unwrap();
        let mut rng = stream_rng(56, 0);
        for _ in 0..10_000 {
            let x = fit.density.sample(&mut rng, DEFAULT_MAX_REJECTS).unwrap();
            assert!(mask.is_feasible(&x));
        }
        assert_eq!(fit.density.logpdf(&pt(&[0.0, 0.9])), f64::NEG_INFINITY);
    }

    #[test]
    fn fully_masked_data_is_empty_support() {
        let data = quadratic_dataset(20, 57);
        let spec = BoltzmannSpec::new(1.0).unwrap();
        // No sample satisfies this mask (all are inside the unit box).
        let mask = FeasibilityMask::hard(|x: &Point<f64>| x[0] > 5.0);
        assert_eq!(
            constrained_fit(
                &data,
                &spec,
                &mask,
                &ModelSpec::SingleGaussian,
                ConstrainedMode::KlOnly,
                &EmConfig::default(),
                &mut stream_rng(58, 0),
            )
            .unwrap_err(),
            Error::EmptySupport
        );
    }

    #[test]
    fn soft_mask_keeps_infeasible_weight() {
        let mut data = Dataset::new();
        data.append_batch(vec![
            (pt(&[0.5, 0.0]), OracleResponse { g: 0.25, feasible: true }, 0.25),
            (pt(&[-0.5, 0.0]), OracleResponse { g: 0.25, feasible: true }, 0.25),
        ])
        .unwrap();
        let spec = BoltzmannSpec::new(1.0).unwrap();
        // Soft mask: right half-plane feasible, kappa elsewhere.
        let mask = FeasibilityMask::soft(|x: &Point<f64>| x[0] > 0.0, 0.5).unwrap();
        let fit = constrained_fit(
            &data,
            &spec,
            &mask,
            &ModelSpec::SingleGaussian,
            ConstrainedMode::KlOnly,
            &EmConfig::default(),
            &mut stream_rng(59, 0),
        )
        .unwrap();
        // Weighted mean: (0.5 * 1 + (-0.5) * 0.5) / 1.5 = 1/6.
        match &fit.density.base {
            Density::Gaussian(g) => assert_relative_eq!(g.mean()[0], 1.0 / 6.0, epsilon = 1e-12),
            other => panic!("unexpected density {other:?}"),
        }
    }
}
