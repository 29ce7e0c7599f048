//! Parametric search densities: multivariate Gaussians, Gaussian mixtures,
//! and the uniform box used for initial batches.
//!
//! All density arithmetic is done in log space; mixture evaluation uses
//! log-sum-exp so large inverse temperatures cannot underflow it. Gaussian
//! covariances are floored spectrally at construction: eigenvalues below the
//! floor are clamped, which keeps every stored covariance factorizable and
//! every draw well-defined even when a fit degenerates onto a point.

use rand::Rng;

use crate::linalg::{reconstruct_symmetric, Matrix};
use crate::oracle::{BoxDomain, Point};
use crate::special::{chi_square_quantile, log_sum_exp};
use crate::{Error, Result, Scalar};

/// Default covariance eigenvalue floor for a unit-scale domain. Callers that
/// know their domain half-width `b` should scale it to `1e-9 * b^2`.
pub const DEFAULT_COV_FLOOR: f64 = 1e-9;

/// Anything that can report its log-density at a point.
pub trait LogDensity<F: Scalar> {
    fn dim(&self) -> usize;
    fn logpdf(&self, x: &Point<F>) -> F;
}

impl<F: Scalar, D: LogDensity<F> + ?Sized> LogDensity<F> for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn logpdf(&self, x: &Point<F>) -> F {
        (**self).logpdf(x)
    }
}

// ---------------------------------------------------------------------------
// GaussianDensity
// ---------------------------------------------------------------------------

/// Multivariate Gaussian with a spectrally floored covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDensity<F> {
    mean: Point<F>,
    covariance: Matrix<F>,
    chol: Matrix<F>,
    /// `-(n/2) ln(2 pi) - (1/2) ln |Sigma|`.
    log_norm: F,
}

impl<F: Scalar> GaussianDensity<F> {
    /// Builds a Gaussian with the default eigenvalue floor.
    pub fn new(mean: Point<F>, covariance: Matrix<F>) -> Result<Self> {
        Self::with_floor(mean, covariance, F::of(DEFAULT_COV_FLOOR))
    }

    /// Builds a Gaussian, clamping covariance eigenvalues to at least `floor`.
    pub fn with_floor(mean: Point<F>, covariance: Matrix<F>, floor: F) -> Result<Self> {
        let n = mean.dim();
        if !covariance.is_square() || covariance.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.rows(),
            });
        }
        if !covariance.all_finite() {
            return Err(Error::invalid("covariance entries must be finite"));
        }
        if !(floor > F::zero()) || !floor.is_finite() {
            return Err(Error::invalid("covariance floor must be positive"));
        }

        let (mut values, vectors) = covariance.sym_eigen();
        for v in values.iter_mut() {
            if *v < floor {
                *v = floor;
            }
        }
        let floored = reconstruct_symmetric(&values, &vectors);
        let chol = floored
            .cholesky()
            .ok_or_else(|| Error::Internal("floored covariance must factor".into()))?;
        let half = F::of(0.5);
        let log_norm = -F::of(n as f64) * half * F::of(std::f64::consts::TAU).ln()
            - half * chol.log_det_from_cholesky();
        Ok(GaussianDensity {
            mean,
            covariance: floored,
            chol,
            log_norm,
        })
    }

    /// Gaussian with covariance `variance * I`.
    pub fn isotropic(mean: Point<F>, variance: F) -> Result<Self> {
        let n = mean.dim();
        let cov = Matrix::diagonal(&vec![variance; n]);
        Self::new(mean, cov)
    }

    pub fn mean(&self) -> &Point<F> {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<F> {
        &self.covariance
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<F> {
        let n = self.dim();
        let z: Vec<F> = (0..n).map(|_| F::standard_normal(rng)).collect();
        let lz = self.chol.matvec(&z);
        let coords: Vec<F> = self
            .mean
            .coords()
            .iter()
            .zip(lz.iter())
            .map(|(&m, &d)| m + d)
            .collect();
        Point::new(coords).expect("gaussian draw is finite")
    }

    /// `{x : (x - mu)^T Sigma^-1 (x - mu) <= chi2_n(level)}` described by its
    /// eigenstructure.
    pub fn confidence_ellipsoid(&self, level: F) -> Result<Ellipsoid<F>> {
        if !(level > F::zero() && level < F::one()) {
            return Err(Error::invalid("confidence level must be in (0, 1)"));
        }
        let (values, vectors) = self.covariance.sym_eigen();
        let q = chi_square_quantile(self.dim(), level);
        let radii = values.iter().map(|&v| (q * v).sqrt()).collect();
        Ok(Ellipsoid {
            center: self.mean.clone(),
            axes: vectors,
            radii,
        })
    }
}

impl<F: Scalar> LogDensity<F> for GaussianDensity<F> {
    fn dim(&self) -> usize {
        self.mean.dim()
    }

    fn logpdf(&self, x: &Point<F>) -> F {
        assert_eq!(x.dim(), self.dim(), "logpdf dimension");
        let d: Vec<F> = x
            .coords()
            .iter()
            .zip(self.mean.coords())
            .map(|(&a, &b)| a - b)
            .collect();
        let y = self.chol.solve_lower(&d);
        let quad: F = y.iter().map(|&v| v * v).sum();
        self.log_norm - quad * F::of(0.5)
    }
}

/// Confidence ellipsoid: orthonormal axes (columns) and per-axis radii,
/// eigenvalue-ascending.
#[derive(Clone, Debug)]
pub struct Ellipsoid<F> {
    pub center: Point<F>,
    pub axes: Matrix<F>,
    pub radii: Vec<F>,
}

// ---------------------------------------------------------------------------
// MixtureDensity
// ---------------------------------------------------------------------------

/// Finite Gaussian mixture with simplex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureDensity<F> {
    weights: Vec<F>,
    components: Vec<GaussianDensity<F>>,
}

impl<F: Scalar> MixtureDensity<F> {
    pub fn new(weights: Vec<F>, components: Vec<GaussianDensity<F>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < F::zero()) {
            return Err(Error::invalid("mixture weights must be non-negative"));
        }
        let total: F = weights.iter().copied().sum();
        if (total - F::one()).abs() > F::of(1e-12).max(F::epsilon().sqrt() * F::of(1e-2)) {
            return Err(Error::invalid("mixture weights must sum to 1"));
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::invalid("mixture components must share dimension"));
        }
        Ok(MixtureDensity {
            weights,
            components,
        })
    }

    /// Single-component mixture wrapping a Gaussian.
    pub fn single(component: GaussianDensity<F>) -> Self {
        MixtureDensity {
            weights: vec![F::one()],
            components: vec![component],
        }
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianDensity<F>] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Posterior component memberships at `x`: non-negative, sums to one,
    /// computed in log space so far tails cannot produce NaN.
    pub fn responsibilities(&self, x: &Point<F>) -> Vec<F> {
        let logs: Vec<F> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(&w, c)| {
                if w > F::zero() {
                    w.ln() + c.logpdf(x)
                } else {
                    F::neg_infinity()
                }
            })
            .collect();
        let norm = log_sum_exp(&logs);
        let mut r: Vec<F> = logs.iter().map(|&l| (l - norm).exp()).collect();
        let total: F = r.iter().copied().sum();
        for v in r.iter_mut() {
            *v /= total;
        }
        r
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<F> {
        let u: F = rng.random_range(F::zero()..F::one());
        let mut acc = F::zero();
        let mut chosen = self.components.len() - 1;
        for (j, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = j;
                break;
            }
        }
        self.components[chosen].sample(rng)
    }
}

impl<F: Scalar> LogDensity<F> for MixtureDensity<F> {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn logpdf(&self, x: &Point<F>) -> F {
        let logs: Vec<F> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(&w, c)| {
                if w > F::zero() {
                    w.ln() + c.logpdf(x)
                } else {
                    F::neg_infinity()
                }
            })
            .collect();
        log_sum_exp(&logs)
    }
}

// ---------------------------------------------------------------------------
// UniformBoxDensity
// ---------------------------------------------------------------------------

/// Uniform density on an axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformBoxDensity<F> {
    domain: BoxDomain<F>,
}

impl<F: Scalar> UniformBoxDensity<F> {
    pub fn new(domain: BoxDomain<F>) -> Self {
        UniformBoxDensity { domain }
    }

    pub fn domain(&self) -> &BoxDomain<F> {
        &self.domain
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<F> {
        let b = self.domain.half_width();
        let coords: Vec<F> = (0..self.domain.dim())
            .map(|_| loop {
                let c = rng.random_range(-b..b);
                // Keep draws strictly interior so their density is positive.
                if c.abs() < b {
                    break c;
                }
            })
            .collect();
        Point::new(coords).expect("uniform draw is finite")
    }
}

impl<F: Scalar> LogDensity<F> for UniformBoxDensity<F> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn logpdf(&self, x: &Point<F>) -> F {
        if self.domain.contains(x) {
            -self.domain.volume().ln()
        } else {
            F::neg_infinity()
        }
    }
}

// ---------------------------------------------------------------------------
// Density (closed union)
// ---------------------------------------------------------------------------

/// Any of the search densities the optimizer moves through.
#[derive(Clone, Debug, PartialEq)]
pub enum Density<F> {
    Gaussian(GaussianDensity<F>),
    Mixture(MixtureDensity<F>),
    UniformBox(UniformBoxDensity<F>),
}

impl<F: Scalar> Density<F> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<F> {
        match self {
            Density::Gaussian(g) => g.sample(rng),
            Density::Mixture(m) => m.sample(rng),
            Density::UniformBox(u) => u.sample(rng),
        }
    }

    pub fn component_count(&self) -> usize {
        match self {
            Density::Gaussian(_) | Density::UniformBox(_) => 1,
            Density::Mixture(m) => m.component_count(),
        }
    }
}

impl<F: Scalar> LogDensity<F> for Density<F> {
    fn dim(&self) -> usize {
        match self {
            Density::Gaussian(g) => g.dim(),
            Density::Mixture(m) => m.dim(),
            Density::UniformBox(u) => u.dim(),
        }
    }

    fn logpdf(&self, x: &Point<F>) -> F {
        match self {
            Density::Gaussian(g) => g.logpdf(x),
            Density::Mixture(m) => m.logpdf(x),
            Density::UniformBox(u) => u.logpdf(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(coords: &[f64]) -> Point<f64> {
        Point::from_slice(coords).unwrap()
    }

    fn gauss(mean: &[f64], cov: &[f64]) -> GaussianDensity<f64> {
        let n = mean.len();
        GaussianDensity::new(pt(mean), Matrix::from_rows(n, n, cov)).unwrap()
    }

    #[test]
    fn standard_normal_logpdf_at_mean() {
        let g = gauss(&[0.0], &[1.0]);
        assert_relative_eq!(
            g.logpdf(&pt(&[0.0])),
            -0.5 * std::f64::consts::TAU.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixture_of_identical_components_degenerates() {
        let c = gauss(&[0.3, -0.2], &[1.0, 0.2, 0.2, 0.8]);
        let mix = MixtureDensity::new(vec![0.25, 0.75], vec![c.clone(), c.clone()]).unwrap();
        let x = pt(&[0.7, 0.1]);
        assert_relative_eq!(mix.logpdf(&x), c.logpdf(&x), epsilon = 1e-12);
    }

    #[test]
    fn uniform_box_logpdf() {
        let u = UniformBoxDensity::new(BoxDomain::new(1.0f64, 2).unwrap());
        assert_relative_eq!(u.logpdf(&pt(&[0.0, 0.0])), (0.25f64).ln(), epsilon = 1e-12);
        assert_eq!(u.logpdf(&pt(&[2.0, 0.0])), f64::NEG_INFINITY);
    }

    #[test]
    fn floored_gaussian_concentrates_on_mean() {
        let g = GaussianDensity::new(
            pt(&[1.0, -2.0]),
            Matrix::zeros(2, 2), // fully degenerate; floor takes over
        )
        .unwrap();
        let mut rng = stream_rng(5, 0);
        for _ in 0..100 {
            let x = g.sample(&mut rng);
            assert!((x[0] - 1.0).abs() < 1e-3);
            assert!((x[1] + 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn sample_mean_matches_parameters() {
        let g = gauss(&[0.5, -1.0], &[0.8, 0.3, 0.3, 0.5]);
        let mut rng = stream_rng(6, 0);
        let n = 100_000;
        let mut sums = [0.0f64; 2];
        for _ in 0..n {
            let x = g.sample(&mut rng);
            sums[0] += x[0];
            sums[1] += x[1];
        }
        let tol = 4.0 * ((0.8 + 0.5) / n as f64).sqrt();
        assert!((sums[0] / n as f64 - 0.5).abs() < tol);
        assert!((sums[1] / n as f64 + 1.0).abs() < tol);
    }

    #[test]
    fn degenerate_mixture_weights_pick_single_component() {
        let a = gauss(&[-10.0], &[0.01]);
        let b = gauss(&[10.0], &[0.01]);
        let mix = MixtureDensity::new(vec![1.0, 0.0], vec![a, b]).unwrap();
        let mut rng = stream_rng(7, 0);
        for _ in 0..200 {
            let x = mix.sample(&mut rng);
            assert!(x[0] < 0.0, "draw {x:?} should come from component 1");
        }
    }

    #[test]
    fn responsibilities_examples() {
        let single = MixtureDensity::single(gauss(&[0.0], &[1.0]));
        assert_eq!(single.responsibilities(&pt(&[2.0])), vec![1.0]);

        let sym = MixtureDensity::new(
            vec![0.5, 0.5],
            vec![gauss(&[-1.0], &[1.0]), gauss(&[1.0], &[1.0])],
        )
        .unwrap();
        let r = sym.responsibilities(&pt(&[0.0]));
        assert_relative_eq!(r[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.5, epsilon = 1e-12);

        let far = MixtureDensity::new(
            vec![0.5, 0.5],
            vec![gauss(&[0.0], &[1.0]), gauss(&[100.0], &[1.0])],
        )
        .unwrap();
        let r = far.responsibilities(&pt(&[0.0]));
        assert!(r[0] > 1.0 - 1e-12);
        assert!(r[1] < 1e-12);
    }

    #[test]
    fn responsibilities_survive_extreme_underflow() {
        // Both components thousands of sigmas away: naive exp underflows.
        let mix = MixtureDensity::new(
            vec![0.5, 0.5],
            vec![gauss(&[-4000.0], &[1.0]), gauss(&[4000.0], &[1.0])],
        )
        .unwrap();
        let r = mix.responsibilities(&pt(&[0.5]));
        assert!(r.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_relative_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn confidence_ellipsoid_identity_cov() {
        let g = gauss(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        let e = g.confidence_ellipsoid(0.9).unwrap();
        for r in &e.radii {
            assert_relative_eq!(*r, (-2.0 * (0.1f64).ln()).sqrt(), epsilon = 1e-9);
        }
        // Radii shrink to zero with the level.
        let tiny = g.confidence_ellipsoid(1e-12).unwrap();
        assert!(tiny.radii.iter().all(|r| *r < 1e-5));
    }

    #[test]
    fn confidence_ellipsoid_diagonal_axes() {
        let g = gauss(&[0.0, 0.0], &[2.0, 0.0, 0.0, 0.5]);
        let e = g.confidence_ellipsoid(0.9).unwrap();
        // Ascending eigenvalues: first axis is the small-variance one (y).
        assert_relative_eq!(e.axes[(0, 0)].abs(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(e.axes[(1, 0)].abs(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(e.axes[(0, 1)].abs(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(e.axes[(1, 1)].abs(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(e.radii[1] / e.radii[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn logpdf_normalizes_by_importance_check() {
        // Mean of q(x)/h(x) over draws from a wide h is 1 within 5 SE.
        let q = gauss(&[0.2, -0.3], &[0.5, 0.1, 0.1, 0.4]);
        let h = gauss(&[0.0, 0.0], &[4.0, 0.0, 0.0, 4.0]);
        let mut rng = stream_rng(8, 0);
        let n = 200_000;
        let mut ratios = Vec::with_capacity(n);
        for _ in 0..n {
            let x = h.sample(&mut rng);
            ratios.push((q.logpdf(&x) - h.logpdf(&x)).exp());
        }
        let (mean, se) = crate::special::mean_and_se(&ratios);
        assert!(
            (mean - 1.0).abs() < 5.0 * se,
            "normalization check: mean {mean}, se {se}"
        );
    }

    #[test]
    fn sample_logpdf_consistency_moments() {
        let g = gauss(&[1.0, 2.0], &[1.0, 0.4, 0.4, 0.7]);
        let mut rng = stream_rng(9, 0);
        let n = 100_000usize;
        let nf = n as f64;
        let mut mean = [0.0f64; 2];
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let x = g.sample(&mut rng);
            mean[0] += x[0] / nf;
            mean[1] += x[1] / nf;
            draws.push([x[0], x[1]]);
        }
        let mut cov = [[0.0f64; 2]; 2];
        for d in &draws {
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += (d[i] - mean[i]) * (d[j] - mean[j]) / nf;
                }
            }
        }
        // 5 standard errors component-wise.
        for i in 0..2 {
            let se = (g.covariance()[(i, i)] / nf).sqrt();
            assert!((mean[i] - g.mean()[i]).abs() < 5.0 * se);
        }
        for i in 0..2 {
            for j in 0..2 {
                let vii = g.covariance()[(i, i)];
                let vjj = g.covariance()[(j, j)];
                let vij = g.covariance()[(i, j)];
                // Var of a sample covariance entry, Gaussian case.
                let se = ((vii * vjj + vij * vij) / nf).sqrt();
                assert!((cov[i][j] - vij).abs() < 5.0 * se);
            }
        }
    }

    #[test]
    fn f32_instantiation_smoke() {
        let g = GaussianDensity::<f32>::isotropic(Point::from_slice(&[0.0f32, 0.0]).unwrap(), 1.0)
            .unwrap();
        let mut rng = stream_rng(10, 0);
        let x = g.sample(&mut rng);
        assert!(g.logpdf(&x).is_finite());
    }

    proptest! {
        #[test]
        fn responsibilities_always_simplex(
            x in -50.0f64..50.0,
            m1 in -20.0f64..20.0,
            m2 in -20.0f64..20.0,
            w in 1e-6f64..1.0,
        ) {
            let mix = MixtureDensity::new(
                vec![w, 1.0 - w],
                vec![gauss(&[m1], &[0.5]), gauss(&[m2], &[2.0])],
            )
            .unwrap();
            let r = mix.responsibilities(&pt(&[x]));
            prop_assert!(r.iter().all(|v| *v >= 0.0 && v.is_finite()));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
