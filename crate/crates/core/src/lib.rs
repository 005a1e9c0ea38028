//! Numerical laboratory for Li–Yau type gradient estimates of positive
//! solutions to `(∂ₜ − Δ_g + R)u = −a·u·log u` under a conformal metric
//! flow on the circle and the flat torus.
//!
//! The core is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the double precision instantiation used by the experiments.

pub mod error;
pub mod estimate;
pub mod experiment;
pub mod field;
pub mod flow;
pub mod generator;
pub mod geometry;
pub mod grid;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use field::{MetricField, ScalarField, TensorField, VectorField};
pub use flow::{BoundConstants, FlowKind, FlowSpec};
pub use generator::{Generator, SpaceTimeField};
pub use grid::ManifoldGrid;
pub use scalar::Real;
pub use solver::{solve, PdeProblem, SolutionHistory};

pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type TensorField64 = TensorField<f64>;
pub type MetricField64 = MetricField<f64>;
pub type FlowKind64 = FlowKind<f64>;
pub type PdeProblem64 = PdeProblem<f64>;
pub type SolutionHistory64 = SolutionHistory<f64>;

pub type ScalarField32 = ScalarField<f32>;
pub type MetricField32 = MetricField<f32>;
pub type SolutionHistory32 = SolutionHistory<f32>;
