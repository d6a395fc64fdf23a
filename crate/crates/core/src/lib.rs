//! Energy-minimization solver for quasilinear elliptic problems
//! `-Δ_p u + α₁(u) = f` in Ω with nonlinear Wentzell boundary conditions
//! `b|∇u|^{p-2}∂_n u - ρ b Δ_{q,Γ} u + α₂(u) = g` on ∂Ω.
//!
//! The crate is organized bottom-up:
//!
//! - [`orlicz`]: N-functions, complementary functions, Δ₂/∇₂ probes,
//!   modulars and Luxemburg norms.
//! - [`domain`]: 1D and 2D meshes carrying the interior and boundary
//!   measures, the boundary weight `b` and the gradient operators.
//! - [`forms`]: the discrete energy, its gradient and the weak form.
//! - [`solver`]: L-BFGS or preconditioned gradient descent with Armijo
//!   backtracking for the perturbed and resonant problems.
//! - [`resonance`]: the range-based solvability test.
//! - [`estimates`]: truncations, level-set profiles, the Stampacchia
//!   recursion and empirical L∞ stability checks.
//! - [`config`] and [`cli`]: the experiment driver behind the `wentzell`
//!   binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod domain;
pub mod estimates;
pub mod forms;
pub mod interval;
pub mod numeric;
pub mod orlicz;
pub mod resonance;
pub mod solver;

pub use domain::{DiscreteDomain, DomainError, FieldPair};
pub use forms::{Mode, ProblemSpec};
pub use interval::{Interval, Placement};
pub use orlicz::{NFunction, OrliczError, WeightedSamples};
pub use resonance::{Classification, SolvabilityVerdict};
pub use solver::{SolveReport, SolverOptions, Verdict};
