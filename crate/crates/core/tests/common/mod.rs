//! Independent test oracles: dense 2-D grid quadrature over a benchmark box.
//!
//! Everything here is deliberately separate from the library's estimation
//! paths; these routines are the reference the importance-sampling code is
//! checked against.

use pc_core::density::LogDensity;
use pc_core::linalg::Matrix;
use pc_core::oracle::{BenchmarkId, Point};

pub struct GridQuadrature {
    pub cell_area: f64,
    points: Vec<[f64; 2]>,
    values: Vec<f64>,
}

impl GridQuadrature {
    /// Midpoint rule on `grid x grid` cells over the benchmark's box.
    pub fn new(benchmark: BenchmarkId, grid: usize) -> Self {
        assert_eq!(benchmark.dim(), 2, "grid quadrature is 2-D");
        let b: f64 = benchmark.sampling_box::<f64>().half_width();
        let cell = 2.0 * b / grid as f64;
        let mut points = Vec::with_capacity(grid * grid);
        let mut values = Vec::with_capacity(grid * grid);
        for i in 0..grid {
            let x = -b + (i as f64 + 0.5) * cell;
            for j in 0..grid {
                let y = -b + (j as f64 + 0.5) * cell;
                let p = Point::from_slice(&[x, y]).unwrap();
                points.push([x, y]);
                values.push(benchmark.evaluate(&p).unwrap().g);
            }
        }
        GridQuadrature {
            cell_area: cell * cell,
            points,
            values,
        }
    }

    /// Masked-Boltzmann cell probabilities at inverse temperature `beta`.
    fn boltzmann_cell_probs(&self, beta: f64) -> Vec<f64> {
        let g_min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let unnorm: Vec<f64> = self
            .values
            .iter()
            .map(|g| (-beta * (g - g_min)).exp())
            .collect();
        let z: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|u| u / z).collect()
    }

    /// `integral_box exp(-beta G) dx`.
    pub fn boltzmann_normalizer(&self, beta: f64) -> f64 {
        let g_min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let sum: f64 = self.values.iter().map(|g| (-beta * (g - g_min)).exp()).sum();
        (-beta * g_min).exp() * sum * self.cell_area
    }

    /// Mean and covariance of the masked Boltzmann density.
    pub fn boltzmann_moments(&self, beta: f64) -> ([f64; 2], Matrix<f64>) {
        let probs = self.boltzmann_cell_probs(beta);
        let mut mean = [0.0f64; 2];
        for (p, xy) in probs.iter().zip(&self.points) {
            mean[0] += p * xy[0];
            mean[1] += p * xy[1];
        }
        let mut cov = Matrix::zeros(2, 2);
        for (p, xy) in probs.iter().zip(&self.points) {
            let dx = xy[0] - mean[0];
            let dy = xy[1] - mean[1];
            cov[(0, 0)] += p * dx * dx;
            cov[(0, 1)] += p * dx * dy;
            cov[(1, 1)] += p * dy * dy;
        }
        cov[(1, 0)] = cov[(0, 1)];
        (mean, cov)
    }

    /// `E[G]` under the masked Boltzmann density.
    pub fn boltzmann_mean_g(&self, beta: f64) -> f64 {
        let probs = self.boltzmann_cell_probs(beta);
        probs.iter().zip(&self.values).map(|(p, g)| p * g).sum()
    }

    /// Unnormalized cross-entropy truth
    /// `-integral_box exp(-beta G(x)) ln q(x) dx`.
    pub fn cross_entropy_truth<D: LogDensity<f64>>(&self, beta: f64, q: &D) -> f64 {
        let mut acc = 0.0;
        for (xy, g) in self.points.iter().zip(&self.values) {
            let x = Point::from_slice(xy).unwrap();
            acc += (-beta * g).exp() * (-q.logpdf(&x));
        }
        acc * self.cell_area
    }

    /// `KL(p^beta || q)` with `p^beta` the grid-normalized masked Boltzmann.
    pub fn kl_truth<D: LogDensity<f64>>(&self, beta: f64, q: &D) -> f64 {
        let probs = self.boltzmann_cell_probs(beta);
        let mut acc = 0.0;
        for (p, xy) in probs.iter().zip(&self.points) {
            if *p <= 0.0 {
                continue;
            }
            let x = Point::from_slice(xy).unwrap();
            let log_p_density = p.ln() - self.cell_area.ln();
            acc += p * (log_p_density - q.logpdf(&x));
        }
        acc
    }
}

/// Standard error of a self-normalized (ratio) estimator
/// `sum w f / sum w` by the delta method.
pub fn ratio_estimator_se(weights: &[f64], values: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let estimate: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
    let var: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, v)| (w * (v - estimate)).powi(2))
        .sum::<f64>();
    var.sqrt() / total
}
