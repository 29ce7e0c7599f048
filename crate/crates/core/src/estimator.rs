//! Importance-sampling estimators: held-out performance for cross-validation,
//! the pooled objective estimate, and the Monte Carlo diagnostics that mirror
//! the reported histories (expected objective under the search density and a
//! 2-D KL distance to the Boltzmann target).

use rand::Rng;

use crate::density::{Density, LogDensity};
use crate::oracle::{BenchmarkId, OracleHandle, Point};
use crate::target::{boltzmann_weights_raw, BoltzmannSpec, Dataset, Sample};
use crate::{Error, Result, Scalar};

/// Grid resolution for 2-D quadrature normalization of the KL diagnostic.
const KL_GRID: usize = 512;

/// Proposal budget for the KL diagnostic's rejection sampler.
const KL_MAX_PROPOSALS: usize = 1_000_000;

/// Self-normalized held-out estimate of `E_q[G]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoldoutScore<F> {
    pub value: F,
    /// Held-out feasible samples carrying nonzero `q/h` mass.
    pub effective_support: usize,
}

/// Held-out performance `sum q g / h  /  sum q / h` over feasible validation
/// samples. The ratio form keeps the score meaningful when the fitted density
/// puts little mass on the held-out set; zero mass is an [`Error::UndefinedScore`],
/// which comparators treat as worst possible.
pub fn holdout_performance<F: Scalar, D: LogDensity<F>>(
    validation: &[Sample<F>],
    density: &D,
) -> Result<HoldoutScore<F>> {
    if validation.is_empty() {
        return Err(Error::invalid("validation set must be non-empty"));
    }
    // Log-space ratios, shifted by the max so one far-out density cannot
    // underflow the whole score.
    let mut log_ratios = Vec::with_capacity(validation.len());
    let mut gs = Vec::with_capacity(validation.len());
    let mut max_lr = F::neg_infinity();
    for s in validation {
        if !s.feasible {
            continue;
        }
        let lr = density.logpdf(&s.location) - s.proposal_density.ln();
        if lr > max_lr {
            max_lr = lr;
        }
        log_ratios.push(lr);
        gs.push(s.g);
    }
    if log_ratios.is_empty() || max_lr == F::neg_infinity() {
        return Err(Error::UndefinedScore);
    }
    let mut num = F::zero();
    let mut den = F::zero();
    let mut support = 0usize;
    for (lr, g) in log_ratios.iter().zip(&gs) {
        let w = (*lr - max_lr).exp();
        if w > F::zero() {
            support += 1;
        }
        num += w * *g;
        den += w;
    }
    if !(den > F::zero()) {
        return Err(Error::UndefinedScore);
    }
    Ok(HoldoutScore {
        value: num / den,
        effective_support: support,
    })
}

/// Score used when ranking candidates: undefined scores sort worst.
pub fn holdout_value_or_worst<F: Scalar, D: LogDensity<F>>(
    validation: &[Sample<F>],
    density: &D,
) -> F {
    match holdout_performance(validation, density) {
        Ok(score) => score.value,
        Err(_) => F::infinity(),
    }
}

/// Pooled unbiased estimate of the cross-entropy objective
/// `-integral exp(-beta G(x)) ln q(x) dx` at the given density:
/// `(1/N) sum_i exp(-beta g^i)/h^i * (-ln q(x^i))`, infeasible samples
/// contributing zero. Uniform per-sample pooling across batches.
pub fn unbiased_objective_estimate<F: Scalar, D: LogDensity<F>>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
    density: &D,
) -> Result<F> {
    let weights = boltzmann_weights_raw(data, spec)?;
    let n = F::of(data.len() as f64);
    let mut acc = F::zero();
    for (s, &w) in data.samples().iter().zip(&weights) {
        if w == F::zero() {
            continue;
        }
        let lp = density.logpdf(&s.location);
        if lp == F::neg_infinity() {
            return Ok(F::infinity());
        }
        acc += -w * lp;
    }
    Ok(acc / n)
}

/// Sample mean of the oracle's answers over fresh draws from `density`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticMean<F> {
    pub mean: F,
    pub feasible_draws: usize,
    pub fraction_infeasible: F,
}

/// `E_q[G]` by Monte Carlo: `n` diagnostic queries at draws from `density`.
/// Does not touch the oracle budget. Infeasible draws are excluded from the
/// mean and reported as a fraction.
pub fn expected_g_diagnostic<F: Scalar, R: Rng + ?Sized>(
    density: &Density<F>,
    oracle: &OracleHandle<F>,
    n: usize,
    rng: &mut R,
) -> Result<DiagnosticMean<F>> {
    if n < 1 {
        return Err(Error::invalid("diagnostic needs at least one draw"));
    }
    let mut sum = F::zero();
    let mut feasible = 0usize;
    for _ in 0..n {
        let x = density.sample(rng);
        let resp = oracle.query_diagnostic(&x, rng)?;
        if resp.feasible {
            sum += resp.g;
            feasible += 1;
        }
    }
    if feasible == 0 {
        return Err(Error::UndefinedScore);
    }
    Ok(DiagnosticMean {
        mean: sum / F::of(feasible as f64),
        feasible_draws: feasible,
        fraction_infeasible: F::of((n - feasible) as f64) / F::of(n as f64),
    })
}

/// KL diagnostic value with the Monte Carlo standard error of its mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlEstimate<F> {
    pub value: F,
    pub std_error: F,
}

/// `KL(p^beta || q)` for 2-D box benchmarks: sample `p^beta` by rejection
/// from the uniform box, normalize `p^beta` by dense grid quadrature, and
/// average `ln p^beta - ln q`.
///
/// Diagnostics only: evaluates the true (noise-free) benchmark and never
/// counts against the oracle budget.
pub fn kl_pq_diagnostic<F: Scalar, R: Rng + ?Sized>(
    spec: &BoltzmannSpec<F>,
    oracle: &OracleHandle<F>,
    density: &Density<F>,
    n: usize,
    rng: &mut R,
) -> Result<KlEstimate<F>> {
    let benchmark = oracle.benchmark();
    if benchmark.dim() != 2 || !benchmark.has_feasibility_box() {
        return Err(Error::invalid(
            "KL diagnostic is defined for 2-D box benchmarks only",
        ));
    }
    if n < 1 {
        return Err(Error::invalid("diagnostic needs at least one draw"));
    }
    let beta = spec.beta();
    let (log_z, g_min) = grid_log_normalizer(benchmark, beta, KL_GRID);

    let proposal = crate::density::UniformBoxDensity::new(benchmark.sampling_box::<F>());
    let mut terms = Vec::with_capacity(n);
    let mut proposals = 0usize;
    while terms.len() < n {
        if proposals >= KL_MAX_PROPOSALS {
            return Err(Error::SamplerExhausted {
                max_rejects: KL_MAX_PROPOSALS,
            });
        }
        proposals += 1;
        let x = proposal.sample(rng);
        let g = benchmark.evaluate(&x)?.g;
        let accept = (-beta * (g - g_min)).exp().min(F::one());
        let u: F = rng.random_range(F::zero()..F::one());
        if u < accept {
            let log_p = -beta * g - log_z;
            terms.push(log_p - density.logpdf(&x));
        }
    }
    let (mean, se) = crate::special::mean_and_se(&terms);
    Ok(KlEstimate {
        value: mean,
        std_error: se,
    })
}

/// `ln integral_box exp(-beta G)` by midpoint quadrature, plus the grid
/// minimum of `G` (used to stabilize both the normalizer and rejection).
fn grid_log_normalizer<F: Scalar>(
    benchmark: BenchmarkId,
    beta: F,
    grid: usize,
) -> (F, F) {
    let b = benchmark.sampling_box::<F>().half_width().as_f64();
    let cell = 2.0 * b / grid as f64;
    let mut values = Vec::with_capacity(grid * grid);
    let mut g_min = F::infinity();
    for i in 0..grid {
        let x = -b + (i as f64 + 0.5) * cell;
        for j in 0..grid {
            let y = -b + (j as f64 + 0.5) * cell;
            let p = Point::from_slice(&[F::of(x), F::of(y)]).expect("grid point");
            let g = benchmark.evaluate(&p).expect("grid evaluation").g;
            values.push(g);
            if g < g_min {
                g_min = g;
            }
        }
    }
    let sum: F = values.iter().map(|&g| (-beta * (g - g_min)).exp()).sum();
    let log_z = -beta * g_min + (sum * F::of(cell * cell)).ln();
    (log_z, g_min)
}

/// Midpoint-quadrature mean of the benchmark over its box (2-D only); the
/// "truth" column of the surrogate-estimator demo.
pub fn grid_box_mean_g<F: Scalar>(benchmark: BenchmarkId, grid: usize) -> Result<F> {
    if benchmark.dim() != 2 {
        return Err(Error::invalid("grid mean is implemented for 2-D benchmarks"));
    }
    let b = benchmark.sampling_box::<F>().half_width().as_f64();
    let cell = 2.0 * b / grid as f64;
    let mut sum = F::zero();
    for i in 0..grid {
        let x = -b + (i as f64 + 0.5) * cell;
        for j in 0..grid {
            let y = -b + (j as f64 + 0.5) * cell;
            let p = Point::from_slice(&[F::of(x), F::of(y)])?;
            sum += benchmark.evaluate(&p)?.g;
        }
    }
    Ok(sum / F::of((grid * grid) as f64))
}
