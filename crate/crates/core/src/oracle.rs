//! Benchmark objectives, noise injection, feasibility boxes, and call accounting.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::{Error, Result, Scalar};

/// A query location in the search space.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<F>(Vec<F>);

impl<F: Scalar> Point<F> {
    /// Builds a point, requiring at least one coordinate and all finite.
    pub fn new(coords: Vec<F>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Point(coords))
    }

    pub fn from_slice(coords: &[F]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[F] {
        &self.0
    }
}

impl<F: Scalar> std::ops::Index<usize> for Point<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.0[i]
    }
}

/// Axis-aligned box `{x : ||x||_inf < half_width}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain<F> {
    half_width: F,
    dim: usize,
}

impl<F: Scalar> BoxDomain<F> {
    pub fn new(half_width: F, dim: usize) -> Result<Self> {
        if !(half_width > F::zero()) || !half_width.is_finite() {
            return Err(Error::invalid("box half width must be positive and finite"));
        }
        if dim == 0 {
            return Err(Error::invalid("box dimension must be at least 1"));
        }
        Ok(BoxDomain { half_width, dim })
    }

    pub fn half_width(&self) -> F {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &Point<F>) -> bool {
        x.dim() == self.dim && x.coords().iter().all(|c| c.abs() < self.half_width)
    }

    /// `(2 b)^n`, the box volume.
    pub fn volume(&self) -> F {
        let side = self.half_width * F::of(2.0);
        let mut v = F::one();
        for _ in 0..self.dim {
            v *= side;
        }
        v
    }
}

/// One oracle answer: objective value and feasibility. Infeasible queries
/// carry `g = +inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResponse<F> {
    pub g: F,
    pub feasible: bool,
}

impl<F: Scalar> OracleResponse<F> {
    fn feasible_value(g: F) -> Self {
        OracleResponse { g, feasible: true }
    }

    fn infeasible() -> Self {
        OracleResponse {
            g: F::infinity(),
            feasible: false,
        }
    }
}

/// Observation noise applied to feasible oracle values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec<F> {
    None,
    /// Additive uniform noise on `[-half_width, half_width]`.
    Uniform { half_width: F },
}

/// Built-in benchmark objectives. The string forms are the exact ids the
/// CLI and config files use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchmarkId {
    Quadratic2d,
    Rosenbrock2d,
    Woods4d,
}

impl BenchmarkId {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkId::Quadratic2d => "quadratic2d",
            BenchmarkId::Rosenbrock2d => "rosenbrock2d",
            BenchmarkId::Woods4d => "woods4d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quadratic2d" => Ok(BenchmarkId::Quadratic2d),
            "rosenbrock2d" => Ok(BenchmarkId::Rosenbrock2d),
            "woods4d" => Ok(BenchmarkId::Woods4d),
            other => Err(Error::invalid(format!("unknown benchmark id `{other}`"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BenchmarkId::Quadratic2d | BenchmarkId::Rosenbrock2d => 2,
            BenchmarkId::Woods4d => 4,
        }
    }

    /// Box the initial uniform batch is drawn on. For the 2-D benchmarks it
    /// is also the feasible region; the 4-D Woods objective is defined on
    /// all of R^4 and uses this box for initial sampling only.
    pub fn sampling_box<F: Scalar>(&self) -> BoxDomain<F> {
        let half_width = match self {
            BenchmarkId::Quadratic2d => 1.0,
            BenchmarkId::Rosenbrock2d => 4.0,
            BenchmarkId::Woods4d => 4.0,
        };
        BoxDomain::new(F::of(half_width), self.dim()).expect("static box is valid")
    }

    /// Whether the benchmark masks out-of-box queries as infeasible.
    pub fn has_feasibility_box(&self) -> bool {
        !matches!(self, BenchmarkId::Woods4d)
    }

    pub fn is_feasible<F: Scalar>(&self, x: &Point<F>) -> bool {
        if self.has_feasibility_box() {
            self.sampling_box::<F>().contains(x)
        } else {
            x.dim() == self.dim()
        }
    }

    /// Noise-free benchmark evaluation with the feasibility mask applied.
    pub fn evaluate<F: Scalar>(&self, x: &Point<F>) -> Result<OracleResponse<F>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        if !self.is_feasible(x) {
            return Ok(OracleResponse::infeasible());
        }
        let c = x.coords();
        let g = match self {
            BenchmarkId::Quadratic2d => c[0] * c[0] + c[1] * c[1] + c[0] * c[1],
            BenchmarkId::Rosenbrock2d => {
                let a = c[1] - c[0] * c[0];
                let b = F::one() - c[0];
                F::of(100.0) * a * a + b * b
            }
            BenchmarkId::Woods4d => {
                let one = F::one();
                let t1 = c[1] - c[0];
                let t2 = one - c[0];
                let t3 = c[3] - c[2] * c[2];
                let t4 = one - c[2];
                let t5 = one - c[1];
                let t6 = one - c[3];
                F::of(100.0) * t1 * t1
                    + t2 * t2
                    + F::of(90.0) * t3 * t3
                    + t4 * t4
                    + F::of(10.1) * (t5 * t5 + t6 * t6)
                    + F::of(19.8) * t5 * t6
            }
        };
        Ok(OracleResponse::feasible_value(g))
    }
}

/// A blackbox oracle: benchmark plus noise, with an atomic budget counter.
///
/// `query` increments the counter once per call (infeasible queries
/// included); `query_diagnostic` answers identically but bypasses it.
/// Shareable by reference across threads; benchmark evaluation is pure.
#[derive(Debug)]
pub struct OracleHandle<F> {
    benchmark: BenchmarkId,
    noise: NoiseSpec<F>,
    calls: AtomicU64,
}

impl<F: Scalar> OracleHandle<F> {
    pub fn new(benchmark: BenchmarkId, noise: NoiseSpec<F>) -> Self {
        OracleHandle {
            benchmark,
            noise,
            calls: AtomicU64::new(0),
        }
    }

    pub fn benchmark(&self) -> BenchmarkId {
        self.benchmark
    }

    pub fn noise(&self) -> NoiseSpec<F> {
        self.noise
    }

    /// Non-diagnostic oracle calls so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Budget-counted oracle query. Noise applies to feasible values only;
    /// infeasible responses stay `+inf`.
    pub fn query<R: Rng + ?Sized>(&self, x: &Point<F>, rng: &mut R) -> Result<OracleResponse<F>> {
        let response = self.answer(x, rng)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(response)
    }

    /// Same response distribution as `query`, without touching the counter.
    pub fn query_diagnostic<R: Rng + ?Sized>(
        &self,
        x: &Point<F>,
        rng: &mut R,
    ) -> Result<OracleResponse<F>> {
        self.answer(x, rng)
    }

    /// Noise-free benchmark value; used by figure-style diagnostics that
    /// need the true objective (never counted).
    pub fn evaluate_true(&self, x: &Point<F>) -> Result<OracleResponse<F>> {
        self.benchmark.evaluate(x)
    }

    fn answer<R: Rng + ?Sized>(&self, x: &Point<F>, rng: &mut R) -> Result<OracleResponse<F>> {
        let mut response = self.benchmark.evaluate(x)?;
        if response.feasible {
            if let NoiseSpec::Uniform { half_width } = self.noise {
                let noise = rng.random_range(-half_width..=half_width);
                response.g += noise;
            }
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;
    use approx::assert_relative_eq;

    fn pt(coords: &[f64]) -> Point<f64> {
        Point::from_slice(coords).unwrap()
    }

    #[test]
    fn quadratic_examples() {
        let b = BenchmarkId::Quadratic2d;
        assert_eq!(b.evaluate(&pt(&[0.0, 0.0])).unwrap().g, 0.0);
        assert_relative_eq!(b.evaluate(&pt(&[0.5, 0.5])).unwrap().g, 0.75);
        let out = b.evaluate(&pt(&[2.0, 0.0])).unwrap();
        assert!(!out.feasible);
        assert!(out.g.is_infinite());
    }

    #[test]
    fn quadratic_dimension_mismatch() {
        let err = BenchmarkId::Quadratic2d.evaluate(&pt(&[1.0, 2.0, 3.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn rosenbrock_examples() {
        let b = BenchmarkId::Rosenbrock2d;
        assert_eq!(b.evaluate(&pt(&[1.0, 1.0])).unwrap().g, 0.0);
        assert_relative_eq!(b.evaluate(&pt(&[0.0, 0.0])).unwrap().g, 1.0);
        assert!(!b.evaluate(&pt(&[5.0, 0.0])).unwrap().feasible);
    }

    #[test]
    fn woods_examples() {
        let b = BenchmarkId::Woods4d;
        assert_eq!(b.evaluate(&pt(&[1.0, 1.0, 1.0, 1.0])).unwrap().g, 0.0);
        // Hand evaluation at the origin: 0 + 1 + 0 + 1 + 10.1*(1+1) + 19.8 = 42.
        assert_relative_eq!(b.evaluate(&pt(&[0.0, 0.0, 0.0, 0.0])).unwrap().g, 42.0);
        // Hand evaluation: 100*1 + 0 + 0 + 0 + 10.1*1 + 0 = 110.1.
        assert_relative_eq!(b.evaluate(&pt(&[1.0, 2.0, 1.0, 1.0])).unwrap().g, 110.1);
        // Out-of-box queries stay feasible: Woods has no feasibility mask.
        assert!(b.evaluate(&pt(&[9.0, 9.0, 9.0, 9.0])).unwrap().feasible);
    }

    #[test]
    fn woods_matches_term_by_term_reference() {
        // Independent re-evaluation of the printed formula, term by term.
        fn reference(x: &[f64]) -> f64 {
            let mut total = 0.0;
            total += 100.0 * (x[1] - x[0]).powi(2);
            total += (1.0 - x[0]).powi(2);
            total += 90.0 * (x[3] - x[2] * x[2]).powi(2);
            total += (1.0 - x[2]).powi(2);
            total += 10.1 * ((1.0 - x[1]).powi(2) + (1.0 - x[3]).powi(2));
            total += 19.8 * (1.0 - x[1]) * (1.0 - x[3]);
            total
        }
        let mut rng = stream_rng(11, 0);
        for _ in 0..50 {
            let coords: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
            let got = BenchmarkId::Woods4d.evaluate(&pt(&coords)).unwrap().g;
            assert_relative_eq!(got, reference(&coords), epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn noiseless_query_is_deterministic_and_counted() {
        let oracle = OracleHandle::new(BenchmarkId::Rosenbrock2d, NoiseSpec::None);
        let mut rng = stream_rng(1, 0);
        let a = oracle.query(&pt(&[1.0, 1.0]), &mut rng).unwrap();
        let b = oracle.query(&pt(&[1.0, 1.0]), &mut rng).unwrap();
        assert_eq!(a.g, 0.0);
        assert_eq!(a, b);
        assert_eq!(oracle.calls(), 2);
    }

    #[test]
    fn uniform_noise_stays_in_band() {
        let oracle = OracleHandle::new(
            BenchmarkId::Rosenbrock2d,
            NoiseSpec::Uniform { half_width: 0.25 },
        );
        let x = pt(&[0.5, 0.5]);
        let clean = BenchmarkId::Rosenbrock2d.evaluate(&x).unwrap().g;
        let mut rng = stream_rng(2, 0);
        let mut seen_spread = false;
        let mut first = None;
        for _ in 0..200 {
            let g = oracle.query(&x, &mut rng).unwrap().g;
            assert!(g >= clean - 0.25 && g <= clean + 0.25);
            match first {
                None => first = Some(g),
                Some(f) if f != g => seen_spread = true,
                _ => {}
            }
        }
        assert!(seen_spread, "noise should vary across queries");
        assert_eq!(oracle.calls(), 200);
    }

    #[test]
    fn infeasible_stays_infinite_under_noise() {
        let oracle = OracleHandle::new(
            BenchmarkId::Quadratic2d,
            NoiseSpec::Uniform { half_width: 0.25 },
        );
        let mut rng = stream_rng(3, 0);
        let out = oracle.query(&pt(&[3.0, 0.0]), &mut rng).unwrap();
        assert!(!out.feasible);
        assert!(out.g.is_infinite());
        // Infeasible queries still consume budget.
        assert_eq!(oracle.calls(), 1);
    }

    #[test]
    fn diagnostic_queries_bypass_counter() {
        let oracle = OracleHandle::new(BenchmarkId::Quadratic2d, NoiseSpec::None);
        let mut rng = stream_rng(4, 0);
        oracle.query_diagnostic(&pt(&[0.1, 0.1]), &mut rng).unwrap();
        oracle.evaluate_true(&pt(&[0.1, 0.1])).unwrap();
        assert_eq!(oracle.calls(), 0);
        oracle.query(&pt(&[0.1, 0.1]), &mut rng).unwrap();
        assert_eq!(oracle.calls(), 1);
    }

    #[test]
    fn benchmark_ids_round_trip() {
        for b in [
            BenchmarkId::Quadratic2d,
            BenchmarkId::Rosenbrock2d,
            BenchmarkId::Woods4d,
        ] {
            assert_eq!(BenchmarkId::parse(b.as_str()).unwrap(), b);
        }
        assert!(BenchmarkId::parse("sphere").is_err());
    }

    #[test]
    fn box_volume_and_containment() {
        let bx = BoxDomain::new(1.0f64, 2).unwrap();
        assert_relative_eq!(bx.volume(), 4.0);
        assert!(bx.contains(&pt(&[0.9, -0.9])));
        assert!(!bx.contains(&pt(&[1.0, 0.0])));
        assert!(BoxDomain::new(0.0f64, 2).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(Point::<f64>::new(vec![]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        let p = pt(&[1.0, 2.0]);
        assert_eq!(p.dim(), 2);
        assert_eq!(p[1], 2.0);
    }
}
