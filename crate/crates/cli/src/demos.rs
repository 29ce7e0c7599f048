//! Demonstration subcommands: risk closed forms vs Monte Carlo, factual vs
//! surrogate-based integral estimation, and elite-objective selection.

use pc_core::density::{Density, GaussianDensity, UniformBoxDensity};
use pc_core::estimator::grid_box_mean_g;
use pc_core::fbmc::{
    elite_estimate, fb_integral_estimate, fit_surface, NoiseKernel, SurrogateFit,
};
use pc_core::oracle::{BenchmarkId, NoiseSpec, OracleHandle, Point};
use pc_core::risk::{mc_validate, prob_choose_phi1, risk_two_phi, TwoPhiModel};
use pc_core::{stream_rng, Real};

use crate::csv::sig9;

pub fn risk_demo(
    mu1: Real,
    mu2: Real,
    sigma_a: Real,
    sigma_b: Real,
    l1: Real,
    l2: Real,
    n: usize,
    seed: u64,
) -> Result<(), String> {
    let model = TwoPhiModel::new([mu1, mu2], sigma_a, sigma_b, [l1, l2])
        .map_err(|e| e.to_string())?;
    let analytic_prob = prob_choose_phi1(&model);
    let analytic_risk = risk_two_phi(&model);
    let mc = mc_validate(&model, n, &mut stream_rng(seed, 0)).map_err(|e| e.to_string())?;
    println!("analytic prob_choose_phi1 = {}", sig9(analytic_prob));
    println!("analytic risk             = {}", sig9(analytic_risk));
    println!(
        "mc       prob_choose_phi1 = {} +- {}",
        sig9(mc.prob_choose_phi1),
        sig9(mc.prob_se)
    );
    println!(
        "mc       risk             = {} +- {}",
        sig9(mc.risk),
        sig9(mc.risk_se)
    );
    Ok(())
}

fn draw_factual(
    benchmark: BenchmarkId,
    n: usize,
    seed: u64,
) -> Result<(Vec<(Point<Real>, Real)>, u64), String> {
    let oracle = OracleHandle::new(benchmark, NoiseSpec::None);
    let h = UniformBoxDensity::new(benchmark.sampling_box::<Real>());
    let mut rng = stream_rng(seed, 0);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let x = h.sample(&mut rng);
        let resp = oracle.query(&x, &mut rng).map_err(|e| e.to_string())?;
        samples.push((x, resp.g));
    }
    Ok((samples, oracle.calls()))
}

pub fn fbmc_demo(
    benchmark: BenchmarkId,
    n_factual: usize,
    n_fictitious: usize,
    seed: u64,
) -> Result<(), String> {
    if benchmark.dim() != 2 {
        return Err(format!(
            "fbmc-demo needs a 2-D benchmark, got {}",
            benchmark.as_str()
        ));
    }
    let needed = 6; // quadratic coefficients in two dimensions
    if n_factual < needed {
        return Err(format!(
            "insufficient factual samples for a quadratic fit: n_factual = {n_factual}, need >= {needed}"
        ));
    }
    if n_fictitious < 1 {
        return Err("n_fictitious must be at least 1".into());
    }

    let (factual, calls) = draw_factual(benchmark, n_factual, seed)?;
    // Uniform proposal: the self-normalized factual estimate of the box
    // mean is the plain sample mean.
    let is_estimate = factual.iter().map(|(_, g)| g).sum::<Real>() / n_factual as Real;
    let fit = fit_surface(&factual).map_err(|e| e.to_string())?;
    let weight = Density::UniformBox(UniformBoxDensity::new(benchmark.sampling_box()));
    let fb_estimate =
        fb_integral_estimate(&fit, &weight, n_fictitious, &mut stream_rng(seed, 1))
            .map_err(|e| e.to_string())?;
    let truth = grid_box_mean_g::<Real>(benchmark, 512).map_err(|e| e.to_string())?;

    println!("quadrature truth     = {}", sig9(truth));
    println!(
        "factual importance   = {} (error {})",
        sig9(is_estimate),
        sig9((is_estimate - truth).abs())
    );
    println!(
        "fit-based fictitious = {} (error {})",
        sig9(fb_estimate),
        sig9((fb_estimate - truth).abs())
    );
    println!("oracle calls         = {calls} (factual only; fictitious sampling is free)");
    Ok(())
}

/// Box-constrained surrogate minimizer by midpoint grid scan.
fn surrogate_box_argmin(fit: &SurrogateFit<Real>, half_width: Real) -> Point<Real> {
    let grid = 160;
    let cell = 2.0 * half_width / grid as Real;
    let mut best = Real::INFINITY;
    let mut arg = Point::from_slice(&[0.0, 0.0]).unwrap();
    for i in 0..grid {
        for j in 0..grid {
            let p = Point::from_slice(&[
                -half_width + (i as Real + 0.5) * cell,
                -half_width + (j as Real + 0.5) * cell,
            ])
            .unwrap();
            let v = fit.eval(&p);
            if v < best {
                best = v;
                arg = p;
            }
        }
    }
    arg
}

pub fn elite_demo(k: usize, n_tuples: usize, seed: u64) -> Result<(), String> {
    let benchmark = BenchmarkId::Rosenbrock2d;
    let (factual, calls) = draw_factual(benchmark, 40, seed)?;
    let fit = fit_surface(&factual).map_err(|e| e.to_string())?;
    let half_width = benchmark.sampling_box::<Real>().half_width();
    let x_min = surrogate_box_argmin(&fit, half_width);
    let kernel = NoiseKernel::for_fit(&fit, half_width);

    let point_mass = |coords: &[Real]| {
        Density::Gaussian(
            GaussianDensity::isotropic(Point::from_slice(coords).unwrap(), 1e-6).unwrap(),
        )
    };
    let candidates: Vec<(String, Density<Real>)> = vec![
        (
            format!("delta at surrogate minimum {:.3?}", x_min.coords()),
            point_mass(x_min.coords()),
        ),
        ("delta at corner [3.5, -3.5]".into(), point_mass(&[3.5, -3.5])),
        (
            "wide gaussian at origin".into(),
            Density::Gaussian(
                GaussianDensity::isotropic(Point::from_slice(&[0.0, 0.0]).unwrap(), 4.0).unwrap(),
            ),
        ),
    ];

    let h_c = Density::UniformBox(UniformBoxDensity::new(benchmark.sampling_box()));
    // Shared tuple stream across candidates: estimates are directly
    // comparable (common random numbers).
    let mut best: Option<(usize, Real)> = None;
    println!("surrogate fitted on 40 factual samples (residual rms {})", sig9(fit.residual_rms()));
    for (i, (name, q)) in candidates.iter().enumerate() {
        let estimate = elite_estimate(
            q,
            &h_c,
            &fit,
            &kernel,
            k,
            n_tuples,
            &mut stream_rng(seed, 2),
        )
        .map_err(|e| e.to_string())?;
        println!("candidate {i}: {name}: elite estimate = {}", sig9(estimate));
        let better = match best {
            None => true,
            Some((_, b)) => estimate < b,
        };
        if better {
            best = Some((i, estimate));
        }
    }
    let (selected, _) = best.expect("at least one candidate");
    println!("selected candidate index = {selected}");
    println!("oracle calls             = {calls} (surrogate fitting only)");
    Ok(())
}
