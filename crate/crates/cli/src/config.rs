//! Experiment configuration: flat `key = value` files, named presets, and
//! the mapping onto the library's run configuration.

use pc_core::fit::EmConfig;
use pc_core::oracle::{BenchmarkId, NoiseSpec};
use pc_core::optimizer::{BetaSchedule, ModelPolicy, RunConfig};
use pc_core::schedule::{BaggingConfig, BetaCvConfig, ModelSpec};
use pc_core::Real;

/// How the inverse temperature is driven, as written in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Fixed,
    Multiplicative,
    CrossValidated,
    /// Multiplicative rule fitted from a prior sweep's log-beta trajectories
    /// (requires `--prior-csv`).
    BestFit,
}

/// Full effective configuration of a sweep. Every field has a config-file
/// key; unknown keys are rejected by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkId,
    pub iterations: usize,
    pub batch_size: usize,
    pub schedule: ScheduleKind,
    pub beta: Real,
    pub beta_init: Real,
    pub k_beta: Real,
    pub cv_k1: Real,
    pub cv_k2: Real,
    pub cv_n_beta: usize,
    pub cv_folds: usize,
    pub cv_max_ext_iter: usize,
    pub model: String,
    pub model_cv_folds: usize,
    pub bagging: usize,
    pub noise_half_width: Real,
    pub diagnostics: bool,
    pub diagnostic_samples: usize,
    pub em_restarts: usize,
    pub em_max_iters: usize,
    pub seed: u64,
    pub runs: usize,
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            benchmark: BenchmarkId::Quadratic2d,
            iterations: 6,
            batch_size: 30,
            schedule: ScheduleKind::Fixed,
            beta: 5.0,
            beta_init: 1.0,
            k_beta: 1.5,
            cv_k1: 0.5,
            cv_k2: 2.0,
            cv_n_beta: 5,
            cv_folds: 10,
            cv_max_ext_iter: 4,
            model: "single".into(),
            model_cv_folds: 10,
            bagging: 0,
            noise_half_width: 0.0,
            diagnostics: true,
            diagnostic_samples: 1000,
            em_restarts: 5,
            em_max_iters: 200,
            seed: 0,
            runs: 1,
            out: "runs.csv".into(),
        }
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "quadratic-fixed",
    "quadratic-anneal",
    "rosenbrock-cv",
    "woods-cv",
    "woods-bestfit",
    "rosenbrock-bagging",
    "rosenbrock-modelcv",
];

/// Named experiment presets mirroring the benchmark studies.
pub fn preset(name: &str) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::default();
    match name {
        "quadratic-fixed" => {
            cfg.out = "quadratic-fixed.csv".into();
        }
        "quadratic-anneal" => {
            cfg.schedule = ScheduleKind::Multiplicative;
            cfg.beta_init = 10.0;
            cfg.k_beta = 1.5;
            cfg.out = "quadratic-anneal.csv".into();
        }
        "rosenbrock-cv" => {
            cfg.benchmark = BenchmarkId::Rosenbrock2d;
            cfg.iterations = 15;
            cfg.batch_size = 10;
            cfg.schedule = ScheduleKind::CrossValidated;
            cfg.beta_init = 1e-3;
            cfg.cv_k1 = 0.5;
            cfg.cv_k2 = 2.0;
            cfg.cv_n_beta = 5;
            cfg.cv_folds = 10;
            cfg.cv_max_ext_iter = 4;
            cfg.out = "rosenbrock-cv.csv".into();
        }
        "woods-cv" | "woods-bestfit" => {
            cfg.benchmark = BenchmarkId::Woods4d;
            cfg.iterations = 40;
            cfg.batch_size = 20;
            cfg.schedule = if name == "woods-cv" {
                ScheduleKind::CrossValidated
            } else {
                ScheduleKind::BestFit
            };
            cfg.beta_init = 1e-4;
            cfg.cv_k1 = 0.5;
            cfg.cv_k2 = 3.0;
            cfg.cv_n_beta = 5;
            cfg.cv_folds = 10;
            cfg.cv_max_ext_iter = 4;
            cfg.out = format!("{name}.csv");
        }
        "rosenbrock-bagging" => {
            cfg.benchmark = BenchmarkId::Rosenbrock2d;
            cfg.iterations = 15;
            cfg.batch_size = 20;
            cfg.schedule = ScheduleKind::CrossValidated;
            cfg.beta_init = 1e-3;
            cfg.bagging = 5;
            cfg.noise_half_width = 0.25;
            cfg.out = "rosenbrock-bagging.csv".into();
        }
        "rosenbrock-modelcv" => {
            cfg.benchmark = BenchmarkId::Rosenbrock2d;
            cfg.iterations = 8;
            cfg.batch_size = 20;
            cfg.schedule = ScheduleKind::CrossValidated;
            cfg.beta_init = 1e-3;
            cfg.model = "cv:1,2,3".into();
            cfg.model_cv_folds = 10;
            cfg.noise_half_width = 0.25;
            cfg.em_restarts = 2;
            cfg.em_max_iters = 80;
            cfg.out = "rosenbrock-modelcv.csv".into();
        }
        other => {
            return Err(format!(
                "unknown preset `{other}` (expected one of: {})",
                PRESET_NAMES.join(", ")
            ))
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment; errors name the offending key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value `{value}` for key `{key}`"))
        }
        match key {
            "benchmark" => {
                self.benchmark =
                    BenchmarkId::parse(value).map_err(|_| format!("bad value `{value}` for key `benchmark`"))?
            }
            "iterations" => self.iterations = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "schedule" => {
                self.schedule = match value {
                    "fixed" => ScheduleKind::Fixed,
                    "multiplicative" => ScheduleKind::Multiplicative,
                    "cv" => ScheduleKind::CrossValidated,
                    "bestfit" => ScheduleKind::BestFit,
                    _ => return Err(format!("bad value `{value}` for key `schedule`")),
                }
            }
            "beta" => self.beta = parse(key, value)?,
            "beta_init" => self.beta_init = parse(key, value)?,
            "k_beta" => self.k_beta = parse(key, value)?,
            "cv_k1" => self.cv_k1 = parse(key, value)?,
            "cv_k2" => self.cv_k2 = parse(key, value)?,
            "cv_n_beta" => self.cv_n_beta = parse(key, value)?,
            "cv_folds" => self.cv_folds = parse(key, value)?,
            "cv_max_ext_iter" => self.cv_max_ext_iter = parse(key, value)?,
            "model" => self.model = value.to_string(),
            "model_cv_folds" => self.model_cv_folds = parse(key, value)?,
            "bagging" => self.bagging = parse(key, value)?,
            "noise_half_width" => self.noise_half_width = parse(key, value)?,
            "diagnostics" => self.diagnostics = parse(key, value)?,
            "diagnostic_samples" => self.diagnostic_samples = parse(key, value)?,
            "em_restarts" => self.em_restarts = parse(key, value)?,
            "em_max_iters" => self.em_max_iters = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "out" => self.out = value.to_string(),
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file on top of this config. `#` starts a
    /// comment; blank lines are ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", lineno + 1))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Serializes the full effective configuration (fixed key order) for
    /// the sidecar file next to the CSV.
    pub fn render(&self) -> String {
        let schedule = match self.schedule {
            ScheduleKind::Fixed => "fixed",
            ScheduleKind::Multiplicative => "multiplicative",
            ScheduleKind::CrossValidated => "cv",
            ScheduleKind::BestFit => "bestfit",
        };
        format!(
            "benchmark = {}\niterations = {}\nbatch_size = {}\nschedule = {}\nbeta = {}\n\
             beta_init = {}\nk_beta = {}\ncv_k1 = {}\ncv_k2 = {}\ncv_n_beta = {}\ncv_folds = {}\n\
             cv_max_ext_iter = {}\nmodel = {}\nmodel_cv_folds = {}\nbagging = {}\n\
             noise_half_width = {}\ndiagnostics = {}\ndiagnostic_samples = {}\nem_restarts = {}\n\
             em_max_iters = {}\nseed = {}\nruns = {}\nout = {}\n",
            self.benchmark.as_str(),
            self.iterations,
            self.batch_size,
            schedule,
            self.beta,
            self.beta_init,
            self.k_beta,
            self.cv_k1,
            self.cv_k2,
            self.cv_n_beta,
            self.cv_folds,
            self.cv_max_ext_iter,
            self.model,
            self.model_cv_folds,
            self.bagging,
            self.noise_half_width,
            self.diagnostics,
            self.diagnostic_samples,
            self.em_restarts,
            self.em_max_iters,
            self.seed,
            self.runs,
            self.out,
        )
    }

    fn model_policy(&self) -> Result<ModelPolicy, String> {
        if let Some(list) = self.model.strip_prefix("cv:") {
            let mut candidates = Vec::new();
            for item in list.split(',') {
                let components: usize = item
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad value `{}` for key `model`", self.model))?;
                if components == 0 {
                    return Err(format!("bad value `{}` for key `model`", self.model));
                }
                candidates.push(ModelSpec::Mixture { components });
            }
            if candidates.is_empty() {
                return Err("key `model`: cv candidate list is empty".into());
            }
            return Ok(ModelPolicy::CrossValidated {
                candidates,
                k_folds: self.model_cv_folds,
            });
        }
        let spec: ModelSpec = self
            .model
            .parse()
            .map_err(|_| format!("bad value `{}` for key `model`", self.model))?;
        Ok(ModelPolicy::Fixed(spec))
    }

    /// Builds the library run configuration for one run of the sweep.
    ///
    /// `bestfit_rule` supplies `(beta_init, k_beta)` for the best-fit
    /// schedule and must be present exactly when the schedule is `bestfit`.
    pub fn run_config(
        &self,
        run_index: usize,
        bestfit_rule: Option<(Real, Real)>,
    ) -> Result<RunConfig<Real>, String> {
        let schedule = match self.schedule {
            ScheduleKind::Fixed => BetaSchedule::Fixed(self.beta),
            ScheduleKind::Multiplicative => BetaSchedule::Multiplicative {
                beta_init: self.beta_init,
                k_beta: self.k_beta,
            },
            ScheduleKind::CrossValidated => BetaSchedule::CrossValidated {
                beta_init: self.beta_init,
                cv: BetaCvConfig {
                    k1: self.cv_k1,
                    k2: self.cv_k2,
                    n_beta: self.cv_n_beta,
                    k_folds: self.cv_folds,
                    max_ext_iter: self.cv_max_ext_iter,
                },
            },
            ScheduleKind::BestFit => {
                let (beta_init, k_beta) =
                    bestfit_rule.ok_or("schedule `bestfit` requires --prior-csv")?;
                BetaSchedule::Multiplicative { beta_init, k_beta }
            }
        };
        let mut cfg = RunConfig::new(
            self.benchmark,
            self.iterations,
            self.batch_size,
            schedule,
            self.model_policy()?,
        );
        if self.bagging > 0 {
            cfg.bagging = Some(BaggingConfig { k_b: self.bagging });
        }
        if self.noise_half_width > 0.0 {
            cfg.noise = NoiseSpec::Uniform {
                half_width: self.noise_half_width,
            };
        }
        cfg.diagnostics = self.diagnostics;
        cfg.diagnostic_samples = self.diagnostic_samples;
        // Run ids seed as base + index so sweeps reproduce piecewise.
        cfg.seed = self.seed + run_index as u64;
        let scaled: EmConfig<Real> = cfg.em;
        cfg.em = EmConfig {
            n_restarts: self.em_restarts,
            max_iters: self.em_max_iters,
            ..scaled
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}
