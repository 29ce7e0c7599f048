//! Boltzmann targets and importance likelihood-ratio weights over pooled data.
//!
//! Every recorded sample stores the proposal density it was drawn under, so
//! weights against `exp(-beta * g)` can be recomputed for any `beta` without
//! touching the oracle. Pooling across batches is uniform per sample: each
//! batch's unbiased estimate enters the pooled average with weight `N_j / N`,
//! which collapses to one flat weighted sample list.

use crate::oracle::{OracleResponse, Point};
use crate::{Error, Result, Scalar};

/// One oracle interaction: where we asked, what came back, and how likely
/// the proposal was to ask there.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<F> {
    pub location: Point<F>,
    /// Recorded objective value; `+inf` iff infeasible.
    pub g: F,
    /// Proposal density at `location` when the sample was generated.
    pub proposal_density: F,
    /// 1-based batch this sample arrived in.
    pub batch_index: usize,
    pub feasible: bool,
}

impl<F: Scalar> Sample<F> {
    fn validate(&self) -> Result<()> {
        if !(self.proposal_density > F::zero()) || !self.proposal_density.is_finite() {
            return Err(Error::invalid("proposal density must be positive and finite"));
        }
        if self.feasible != self.g.is_finite() {
            return Err(Error::invalid(
                "feasible samples need finite g; infeasible ones +inf",
            ));
        }
        Ok(())
    }
}

/// Append-only pool of samples, grouped into contiguous 1-based batches.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset<F> {
    samples: Vec<Sample<F>>,
    batch_sizes: Vec<usize>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new() -> Self {
        Dataset {
            samples: Vec::new(),
            batch_sizes: Vec::new(),
        }
    }

    /// Appends one non-empty batch; assigns the next batch index.
    pub fn append_batch(
        &mut self,
        entries: Vec<(Point<F>, OracleResponse<F>, F)>,
    ) -> Result<()> {
        if entries.is_empty() {
            return Err(Error::invalid("batches must be non-empty"));
        }
        let batch_index = self.batch_sizes.len() + 1;
        let start = self.samples.len();
        for (location, response, proposal_density) in entries {
            let sample = Sample {
                location,
                g: response.g,
                proposal_density,
                batch_index,
                feasible: response.feasible,
            };
            if let Err(e) = sample.validate() {
                self.samples.truncate(start);
                return Err(e);
            }
            self.samples.push(sample);
        }
        self.batch_sizes.push(self.samples.len() - start);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn batch_count(&self) -> usize {
        self.batch_sizes.len()
    }

    pub fn samples(&self) -> &[Sample<F>] {
        &self.samples
    }

    /// Smallest feasible recorded value, if any sample is feasible.
    pub fn best_feasible_g(&self) -> Option<F> {
        self.samples
            .iter()
            .filter(|s| s.feasible)
            .map(|s| s.g)
            .fold(None, |acc, g| match acc {
                None => Some(g),
                Some(b) => Some(if g < b { g } else { b }),
            })
    }
}

/// Boltzmann target `p^beta(x) ∝ exp(-beta g)`, used unnormalized: every
/// consumer is a ratio in which the normalizer cancels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoltzmannSpec<F> {
    beta: F,
}

impl<F: Scalar> BoltzmannSpec<F> {
    /// `beta = 0` is accepted (uniform-over-feasible target, useful in
    /// diagnostics and tests); negative or non-finite values are not.
    pub fn new(beta: F) -> Result<Self> {
        if !(beta >= F::zero()) || !beta.is_finite() {
            return Err(Error::invalid("beta must be non-negative and finite"));
        }
        Ok(BoltzmannSpec { beta })
    }

    pub fn beta(&self) -> F {
        self.beta
    }
}

/// Likelihood-ratio weights `s^i = exp(-beta (g^i - g_min)) / h^i` over the
/// full pool; zero for infeasible samples. The shift by the minimum feasible
/// `g` only changes a common factor and keeps the exponentials bounded.
pub fn boltzmann_weights<F: Scalar>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
) -> Result<Vec<F>> {
    weights_for(data.samples(), spec)
}

/// Unshifted weights `exp(-beta g) / h`: the exact integrand ratios, for
/// estimators whose absolute scale matters. Overflow-prone for large `beta`
/// with negative `g`; prefer [`boltzmann_weights`] for fitting.
pub fn boltzmann_weights_raw<F: Scalar>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
) -> Result<Vec<F>> {
    if data.is_empty() || !data.samples().iter().any(|s| s.feasible) {
        return Err(Error::EmptySupport);
    }
    Ok(data
        .samples()
        .iter()
        .map(|s| {
            if s.feasible {
                (-spec.beta() * s.g).exp() / s.proposal_density
            } else {
                F::zero()
            }
        })
        .collect())
}

/// Shift-stabilized weights for an arbitrary sample slice.
pub(crate) fn weights_for<F: Scalar>(
    samples: &[Sample<F>],
    spec: &BoltzmannSpec<F>,
) -> Result<Vec<F>> {
    if samples.is_empty() {
        return Err(Error::EmptySupport);
    }
    let g_min = samples
        .iter()
        .filter(|s| s.feasible)
        .map(|s| s.g)
        .fold(F::infinity(), |a, b| if b < a { b } else { a });
    if !g_min.is_finite() {
        return Err(Error::EmptySupport);
    }
    Ok(samples
        .iter()
        .map(|s| {
            if s.feasible {
                (-spec.beta() * (s.g - g_min)).exp() / s.proposal_density
            } else {
                F::zero()
            }
        })
        .collect())
}

/// Flat weighted view of a dataset: the pooled sample list consumed by
/// fitting and estimation. Infeasible samples stay in place with weight 0 so
/// indices keep lining up with the dataset.
#[derive(Clone, Debug)]
pub struct WeightedView<F> {
    pub locations: Vec<Point<F>>,
    pub weights: Vec<F>,
}

impl<F: Scalar> WeightedView<F> {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Pools every batch into one weighted sample list at the given target.
pub fn pooled_weight_view<F: Scalar>(
    data: &Dataset<F>,
    spec: &BoltzmannSpec<F>,
) -> Result<WeightedView<F>> {
    let weights = boltzmann_weights(data, spec)?;
    Ok(WeightedView {
        locations: data.samples().iter().map(|s| s.location.clone()).collect(),
        weights,
    })
}

/// Weighted view of a subset of samples, chosen by index (repeats allowed,
/// as in bootstrap resampling). Weights are shift-stabilized within the
/// subset.
pub fn subset_weight_view<F: Scalar>(
    data: &Dataset<F>,
    indices: &[usize],
    spec: &BoltzmannSpec<F>,
) -> Result<WeightedView<F>> {
    let chosen: Vec<Sample<F>> = indices.iter().map(|&i| data.samples()[i].clone()).collect();
    let weights = weights_for(&chosen, spec)?;
    Ok(WeightedView {
        locations: chosen.into_iter().map(|s| s.location).collect(),
        weights,
    })
}
