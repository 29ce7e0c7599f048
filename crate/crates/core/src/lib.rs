//! Blackbox optimization by fitting parametric search densities to Boltzmann targets.
//!
//! The core loop draws batches from a proposal density, queries a blackbox
//! oracle, converts the pooled samples into importance weights against a
//! Boltzmann target `exp(-beta * G(x))`, and refits a Gaussian or
//! Gaussian-mixture search density by weighted moment matching / weighted EM.
//! On top of that sit annealing schedules (fixed, multiplicative, and
//! cross-validated), cross-validated model selection, bagging, a constrained
//! variant built on masked densities, surrogate-based ("fictitious sample")
//! integral and elite-objective estimators, and a closed-form two-estimator
//! risk calculator.
//!
//! All numerics are generic over the scalar type via [`Scalar`] (`f32` or
//! `f64`); concrete `f64` aliases are exported at the crate root.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub mod constrained;
pub mod density;
pub mod error;
pub mod estimator;
pub mod fbmc;
pub mod fit;
pub mod linalg;
pub mod oracle;
pub mod optimizer;
pub mod risk;
pub mod schedule;
pub mod special;
pub mod target;

pub use error::{Error, Result};

/// Floating-point scalar the toolkit is generic over.
///
/// Implemented for `f32` and `f64`. Extends `num_traits::Float` with the
/// conversions and sampling hooks the library needs.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + rand::distr::uniform::SampleUniform
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::iter::Sum<Self>
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// One standard-normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Conversion from an `f64` literal or intermediate.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to scalar")
    }

    /// Widening conversion for special-function evaluation and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Default scalar type for the CLI and the concrete aliases below.
pub type Real = f64;

pub type Point = oracle::Point<Real>;
pub type Gaussian = density::GaussianDensity<Real>;
pub type Mixture = density::MixtureDensity<Real>;
pub type Dataset = target::Dataset<Real>;
pub type RunConfig = optimizer::RunConfig<Real>;
pub type RunHistory = optimizer::RunHistory<Real>;

/// Deterministic child generator: seeded from the parent, separated by stream.
///
/// Used everywhere independent substreams are needed (EM restarts, folds,
/// bootstrap replicates) so results do not depend on evaluation order.
pub fn derive_rng<R: Rng + ?Sized>(rng: &mut R, stream: u64) -> ChaCha8Rng {
    let seed: u64 = rng.random();
    let mut child = ChaCha8Rng::seed_from_u64(seed);
    child.set_stream(stream);
    child
}

/// Child generator keyed directly by `(seed, stream)`, with no parent state.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

