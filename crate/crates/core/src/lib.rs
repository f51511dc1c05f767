//! Adaptive anisotropic piecewise-constant approximation on convex
//! partitions of the unit cube.
//!
//! The pipeline refines a dyadic partition greedily with a Sobolev energy
//! ([`refinement`]), cuts each cube into slabs orthogonal to its average
//! gradient and assigns sampled cell means ([`approximant`]). [`analysis`]
//! fits convergence rates and audits refinement traces against the
//! counting-lemma bounds.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`.
//!
//! ```
//! use convpart::{build, ApproximationProblem, Corpus, Quadrature, QuadratureConfig};
//!
//! let f = Corpus::<f64>::quad(2);
//! let quad = Quadrature::new(QuadratureConfig::default()).unwrap();
//! let problem = ApproximationProblem::new(&f, 2.0, 2.0, 64).unwrap();
//! let approx = build(&problem, &quad).unwrap();
//! assert!(approx.cells() <= 64);
//! let err = quad.lp_error(&f, &approx.approximant, 2.0).unwrap();
//! assert!(err < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod approximant;
pub mod error;
pub mod functions;
pub mod geometry;
pub mod quadrature;
pub mod refinement;
pub mod report;
pub mod scalar;

pub use analysis::{
    audit_trace, fit_rate, lemma_constant, lower_bound_check, predicted_rate, theorem2_exponent, LemmaAudit,
    LowerBoundReport, Method, PredictedRate, RateFit, RateRegime, RateStudy, RateSummary, StudyRow,
};
pub use approximant::{
    alpha_of, build, build_isotropic_baseline, linear_surrogate, Approximation, ApproximationProblem, Baseline,
    LinearSurrogate, PiecewiseConstant,
};
pub use error::{Error, Result};
pub use functions::{corpus, Corpus, FieldFunction};
pub use geometry::{clip_slab_2d, slab_split, ConvexPartition, Cube, DyadicPartition, SlabCell};
pub use quadrature::{EnergyFunctional, Quadrature, QuadratureConfig};
pub use refinement::{g_alpha, n_gamma, refine_to_budget, RefinementParams, RefinementTrace, Regime};
pub use scalar::Real;

pub type Cube64 = Cube<f64>;
pub type DyadicPartition64 = DyadicPartition<f64>;
pub type ConvexPartition64 = ConvexPartition<f64>;
pub type PiecewiseConstant64 = PiecewiseConstant<f64>;
pub type Quadrature64 = Quadrature<f64>;
pub type Corpus64 = Corpus<f64>;

pub type Cube32 = Cube<f32>;
pub type PiecewiseConstant32 = PiecewiseConstant<f32>;
pub type Quadrature32 = Quadrature<f32>;
pub type Corpus32 = Corpus<f32>;
