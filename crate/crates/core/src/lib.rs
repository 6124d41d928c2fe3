//! Discrete central limit approximation on the integers.
//!
//! The target family `Ψ_κ(μ, σ²)` is a two-sided, unimodal law whose
//! zero-biased version is an explicit shift-and-reweight of itself. This
//! crate computes its pmf, discrete zero biasing of arbitrary integer laws,
//! the birth–death Stein machinery attached to `Ψ`, and total variation
//! bounds for sums of independent integer variables.

pub mod bounds;
pub mod dist;
pub mod error;
pub mod numeric;
pub mod psi;
pub mod stein;
pub mod zero_bias;

pub use bounds::{bound_report, cor43_bound, dplus_exact, dplus_prop44, thm41_bound, thm42_bound, BoundOptions, BoundReport};
pub use dist::{convolve, convolve_all, tv_distance, IntDist};
pub use error::{Error, Result};
pub use psi::{psi_moments, psi_pmf, psi_zero_bias, Psi, PsiParams};
pub use stein::{bdp_simulate, occupation_time, stein_factor_check, stein_solution, TargetSet};
pub use zero_bias::{optimal_coupling, sum_zero_bias, verify_characterization, zero_bias, ComponentSet};
