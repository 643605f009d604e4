//! Numerical toolkit for weighted Gagliardo-Nirenberg-Sobolev inequalities on
//! hyperboloidal slices, and for the energy hierarchy of a semilinear wave
//! model measured on those slices.
//!
//! The crate is organized around the hyperboloids `Σ_τ = {t² − |x|² = τ²}`,
//! parametrized by `x ∈ ℝ^d` with `t = w_τ(x) = √(τ² + |x|²)`:
//!
//! * [`geometry`] — slice parametrization, weights, induced metric, volume
//!   density, null-strip predicates and uniform grids.
//! * [`fields`] — analytic test-function families with exact Lorentz-boost
//!   derivatives up to order 3, and sampling onto grids.
//! * [`exponents`] — exact rational solver for the interpolation exponent θ
//!   and the (α, β) weight systems, plus the weight tables ρ(σ, μ, ν).
//! * [`norms`] — quadrature for weighted Lebesgue/Sobolev norms, weighted
//!   sup norms and the wave/Klein-Gordon slice energies.
//! * [`verifier`] — the inequality catalog; measures LHS/RHS ratios over
//!   test-function sweeps and emits ratio reports.
//! * [`simulator`] — leapfrog Cauchy evolution of the semilinear model,
//!   slice extraction, energy traces and growth-rate fitting.
//! * [`report`] — deterministic JSON/CSV writers shared by the CLI.

pub mod exponents;
pub mod fields;
pub mod geometry;
pub mod norms;
pub mod report;
pub mod simulator;
pub mod verifier;

pub use exponents::{ExponentSolution, Rational, WeightStyle, WeightSystem};
pub use fields::{BoostIndex, FamilyKind, ScalarField, TestFamily};
pub use geometry::{SliceGrid, SliceParams, StripSpec};
pub use norms::{EnergyFlavor, EnergySpec, NormSpec};
pub use simulator::{CauchyData, EnergyTrace, EvolutionConfig, FitModel, Upsilon};
pub use verifier::{CaseId, InequalityCase, RatioReport};

/// Highest boost-derivative order available in closed form.
pub const K_MAX: usize = 3;

/// Largest spatial dimension handled by the catalog.
pub const MAX_DIM: usize = 4;
