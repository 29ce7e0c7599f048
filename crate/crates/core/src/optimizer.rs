//! The main optimization loop: draw a batch from the current proposal,
//! query the oracle, update the inverse temperature, refit the search
//! density on the pooled data, and make the fit the next proposal.

use rand_chacha::ChaCha8Rng;

use crate::density::{Density, GaussianDensity, MixtureDensity, UniformBoxDensity};
use crate::estimator::{expected_g_diagnostic, kl_pq_diagnostic};
use crate::fit::{fit_model, EmConfig};
use crate::oracle::{BenchmarkId, NoiseSpec, OracleHandle, Point};
use crate::schedule::{
    bagged_fit, crossvalidate_beta, crossvalidate_model, BaggingConfig, BetaCvConfig, ModelSpec,
};
use crate::target::{pooled_weight_view, BoltzmannSpec, Dataset};
use crate::{stream_rng, Error, Result, Scalar};

/// Rejection budget when filtering final solutions to the feasible region.
const SOLUTION_MAX_REJECTS: usize = 100_000;

/// Covariance eigenvalue floor coefficient used by run configs, as a
/// fraction of the squared domain half-width.
///
/// This is deliberately larger than [`crate::density::DEFAULT_COV_FLOOR`]:
/// with a floor that only guards factorization, a long run can drive the
/// proposal to a point mass whose draws carry astronomically large proposal
/// densities and therefore near-zero importance weights, freezing the
/// search on one old sample. Keeping a small real spread in the proposal
/// (standard deviation 1% of the domain half-width) prevents that
/// weight-collapse feedback while staying far below the scale of any
/// fitted covariance these benchmarks produce.
pub const RUN_COV_FLOOR: f64 = 1e-4;

/// Inverse-temperature schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum BetaSchedule<F> {
    Fixed(F),
    /// `beta_1 = beta_init`, then `beta <- k_beta * beta` each iteration.
    Multiplicative { beta_init: F, k_beta: F },
    /// Cross-validation re-picks beta every iteration, seeded at the
    /// previous value (`beta_init` before the first batch exists).
    CrossValidated { beta_init: F, cv: BetaCvConfig<F> },
}

/// How the model class is chosen each iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelPolicy {
    Fixed(ModelSpec),
    /// Cross-validated selection among candidates (after the beta update,
    /// at the selected beta).
    CrossValidated {
        candidates: Vec<ModelSpec>,
        k_folds: usize,
    },
}

impl ModelPolicy {
    fn initial(&self) -> ModelSpec {
        match self {
            ModelPolicy::Fixed(m) => *m,
            ModelPolicy::CrossValidated { candidates, .. } => candidates[0],
        }
    }
}

/// Complete description of one optimizer run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig<F> {
    pub benchmark: BenchmarkId,
    pub iterations: usize,
    pub batch_size: usize,
    pub schedule: BetaSchedule<F>,
    pub model: ModelPolicy,
    pub bagging: Option<BaggingConfig>,
    pub noise: NoiseSpec<F>,
    pub seed: u64,
    pub diagnostics: bool,
    pub diagnostic_samples: usize,
    pub em: EmConfig<F>,
    /// Optional hard stop on the oracle budget.
    pub max_oracle_calls: Option<u64>,
}

impl<F: Scalar> RunConfig<F> {
    /// Config with library defaults: no noise, diagnostics on (1000 draws),
    /// no bagging, covariance floor scaled to the benchmark box.
    pub fn new(
        benchmark: BenchmarkId,
        iterations: usize,
        batch_size: usize,
        schedule: BetaSchedule<F>,
        model: ModelPolicy,
    ) -> Self {
        let b = benchmark.sampling_box::<F>().half_width();
        let mut em = EmConfig::default();
        em.cov_floor = F::of(RUN_COV_FLOOR) * b * b;
        RunConfig {
            benchmark,
            iterations,
            batch_size,
            schedule,
            model,
            bagging: None,
            noise: NoiseSpec::None,
            seed: 0,
            diagnostics: true,
            diagnostic_samples: 1000,
            em,
            max_oracle_calls: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::invalid("need at least one iteration"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("need at least one sample per batch"));
        }
        match &self.schedule {
            BetaSchedule::Fixed(b) => {
                if !(*b > F::zero()) || !b.is_finite() {
                    return Err(Error::invalid("fixed beta must be positive and finite"));
                }
            }
            BetaSchedule::Multiplicative { beta_init, k_beta } => {
                if !(*beta_init > F::zero()) || !beta_init.is_finite() {
                    return Err(Error::invalid("beta_init must be positive and finite"));
                }
                if !(*k_beta > F::one()) || !k_beta.is_finite() {
                    return Err(Error::invalid("multiplicative update needs k_beta > 1"));
                }
            }
            BetaSchedule::CrossValidated { beta_init, cv } => {
                if !(*beta_init > F::zero()) || !beta_init.is_finite() {
                    return Err(Error::invalid("beta_init must be positive and finite"));
                }
                cv.validate()?;
            }
        }
        match &self.model {
            ModelPolicy::Fixed(m) => m.validate()?,
            ModelPolicy::CrossValidated { candidates, k_folds } => {
                if candidates.is_empty() {
                    return Err(Error::invalid("model CV needs candidates"));
                }
                for c in candidates {
                    c.validate()?;
                }
                if *k_folds < 2 {
                    return Err(Error::invalid("model CV needs at least 2 folds"));
                }
            }
        }
        if let Some(b) = &self.bagging {
            b.validate()?;
        }
        if let NoiseSpec::Uniform { half_width } = self.noise {
            if !(half_width >= F::zero()) || !half_width.is_finite() {
                return Err(Error::invalid("noise half-width must be non-negative"));
            }
        }
        if self.diagnostics && self.diagnostic_samples < 1 {
            return Err(Error::invalid("diagnostics need at least one draw"));
        }
        self.em.validate()
    }
}

/// Per-iteration record of the run.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<F> {
    /// 1-based iteration.
    pub iteration: usize,
    /// Inverse temperature the fit used.
    pub beta: F,
    /// Density fitted on all batches so far (the next proposal).
    pub density: Density<F>,
    pub e_qg: Option<F>,
    pub fraction_infeasible: Option<F>,
    /// KL diagnostic; populated for 2-D box benchmarks when diagnostics run.
    pub kl_pq: Option<F>,
    /// Budget-counted oracle calls after this iteration's batch.
    pub cumulative_oracle_calls: u64,
    /// Best feasible value observed so far.
    pub best_g: F,
}

/// Everything a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunHistory<F> {
    pub benchmark: BenchmarkId,
    pub records: Vec<IterationRecord<F>>,
    /// The pooled dataset (all batches, in arrival order).
    pub dataset: Dataset<F>,
    /// True when the run stopped early after repeated empty-support fits.
    pub aborted: bool,
}

impl<F: Scalar> RunHistory<F> {
    pub fn final_density(&self) -> Option<&Density<F>> {
        self.records.last().map(|r| &r.density)
    }

    pub fn beta_trajectory(&self) -> Vec<F> {
        self.records.iter().map(|r| r.beta).collect()
    }
}

/// Doubles the covariance of a fitted density (proposal-widening fallback
/// when the pooled data lost all feasible support).
pub(crate) fn widen_density<F: Scalar>(density: &Density<F>) -> Density<F> {
    let double = F::of(2.0);
    let widen_gauss = |g: &GaussianDensity<F>| {
        let mut cov = g.covariance().clone();
        for i in 0..cov.rows() {
            for j in 0..cov.cols() {
                cov[(i, j)] *= double;
            }
        }
        GaussianDensity::new(g.mean().clone(), cov).expect("widened covariance stays valid")
    };
    match density {
        Density::Gaussian(g) => Density::Gaussian(widen_gauss(g)),
        Density::Mixture(m) => {
            let comps = m.components().iter().map(widen_gauss).collect();
            Density::Mixture(
                MixtureDensity::new(m.weights().to_vec(), comps)
                    .expect("widened mixture stays valid"),
            )
        }
        // The uniform box proposal cannot lose support; nothing to widen.
        Density::UniformBox(u) => Density::UniformBox(*u),
    }
}

/// Runs the full loop for `cfg.iterations` batches and returns the history.
///
/// Randomness is split into fixed streams per purpose (sampling, schedule,
/// fitting, diagnostics), all derived from `cfg.seed`; identical configs
/// produce identical histories.
pub fn run<F: Scalar>(cfg: &RunConfig<F>) -> Result<RunHistory<F>> {
    cfg.validate()?;
    let oracle = OracleHandle::new(cfg.benchmark, cfg.noise);
    let mut sample_rng = stream_rng(cfg.seed, 1);
    let mut schedule_rng = stream_rng(cfg.seed, 2);
    let mut fit_rng = stream_rng(cfg.seed, 3);
    let mut diag_rng = stream_rng(cfg.seed, 4);

    let mut h = Density::UniformBox(UniformBoxDensity::new(cfg.benchmark.sampling_box::<F>()));
    let mut beta_prev: Option<F> = None;
    let mut model_current = cfg.model.initial();
    let mut widen_count = 0usize;
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut dataset = Dataset::new();
    let mut aborted = false;

    for iteration in 1..=cfg.iterations {
        if let Some(cap) = cfg.max_oracle_calls {
            if oracle.calls() + cfg.batch_size as u64 > cap {
                break;
            }
        }

        // (1) Draw the batch from the current proposal and pay for it.
        // Out-of-box draws are sent to the oracle anyway: they consume
        // budget and are recorded infeasible.
        let mut entries = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let x = h.sample(&mut sample_rng);
            let hx = crate::density::LogDensity::logpdf(&h, &x).exp();
            let response = oracle.query(&x, &mut sample_rng)?;
            entries.push((x, response, hx));
        }
        dataset.append_batch(entries)?;

        // (2) Inverse-temperature update.
        let beta = match &cfg.schedule {
            BetaSchedule::Fixed(b) => *b,
            BetaSchedule::Multiplicative { beta_init, k_beta } => match beta_prev {
                None => *beta_init,
                Some(b) => b * *k_beta,
            },
            BetaSchedule::CrossValidated { beta_init, cv } => crossvalidate_beta(
                &dataset,
                beta_prev.unwrap_or(*beta_init),
                cv,
                &model_current,
                &cfg.em,
                &mut schedule_rng,
            )?,
        };
        beta_prev = Some(beta);
        let spec = BoltzmannSpec::new(beta)?;

        // (3) Model policy at the selected beta.
        if let ModelPolicy::CrossValidated { candidates, k_folds } = &cfg.model {
            model_current = crossvalidate_model(
                &dataset,
                &spec,
                candidates,
                *k_folds,
                &cfg.em,
                &mut schedule_rng,
            )?;
        }

        // (4) Fit on the pooled weighted data, optionally bagged.
        let fit_outcome = match &cfg.bagging {
            None => pooled_weight_view(&dataset, &spec).and_then(|view| {
                fit_model(&view, &model_current, &cfg.em, &mut fit_rng).map(|f| f.density)
            }),
            Some(bag) => {
                bagged_fit(&dataset, &spec, &model_current, bag, &cfg.em, &mut fit_rng)
                    .map(Density::Mixture)
            }
        };
        let density = match fit_outcome {
            Ok(d) => d,
            Err(Error::EmptySupport) => {
                widen_count += 1;
                log::warn!(
                    "iteration {iteration}: no feasible support; widening proposal ({widen_count}/3)"
                );
                if widen_count > 3 {
                    aborted = true;
                    break;
                }
                h = widen_density(&h);
                continue;
            }
            Err(e) => return Err(e),
        };

        // (5) Diagnostics and bookkeeping; the fit becomes the next proposal.
        let (e_qg, fraction_infeasible) = if cfg.diagnostics {
            match expected_g_diagnostic(&density, &oracle, cfg.diagnostic_samples, &mut diag_rng) {
                Ok(d) => (Some(d.mean), Some(d.fraction_infeasible)),
                Err(_) => (None, None),
            }
        } else {
            (None, None)
        };
        let kl_pq = if cfg.diagnostics
            && cfg.benchmark.dim() == 2
            && cfg.benchmark.has_feasibility_box()
        {
            kl_pq_diagnostic(&spec, &oracle, &density, cfg.diagnostic_samples, &mut diag_rng)
                .ok()
                .map(|k| k.value)
        } else {
            None
        };
        records.push(IterationRecord {
            iteration,
            beta,
            density: density.clone(),
            e_qg,
            fraction_infeasible,
            kl_pq,
            cumulative_oracle_calls: oracle.calls(),
            best_g: dataset.best_feasible_g().unwrap_or_else(F::infinity),
        });
        h = density;
    }

    Ok(RunHistory {
        benchmark: cfg.benchmark,
        records,
        dataset,
        aborted,
    })
}

/// Draws `n` feasible solution points from the final fitted density,
/// rejecting draws outside the benchmark's feasible region.
pub fn final_solutions<F: Scalar>(
    history: &RunHistory<F>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point<F>>> {
    let density = history
        .final_density()
        .ok_or_else(|| Error::invalid("history has no completed iterations"))?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut rejects = 0usize;
        loop {
            let x = density.sample(rng);
            if history.benchmark.is_feasible(&x) {
                out.push(x);
                break;
            }
            rejects += 1;
            if rejects >= SOLUTION_MAX_REJECTS {
                return Err(Error::SamplerExhausted {
                    max_rejects: SOLUTION_MAX_REJECTS,
                });
            }
        }
    }
    Ok(out)
}
