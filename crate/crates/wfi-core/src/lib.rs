//! Full-field wavefield inversion of distributed PDE coefficients.
//!
//! Given frequency-domain wavefield data sampled on a uniform 2D grid, this
//! crate reconstructs the coefficient fields of the governing wave equation
//! by two complementary routes:
//!
//! * **direct inversion** — the measured field is differentiated spectrally
//!   and positivity-constrained coefficient networks are trained on the
//!   Tikhonov-regularized PDE residual
//!   `L = ‖Λ(û; ϑ*)‖² + ‖α* ⊙ ϑ*‖²`;
//! * **physics-informed networks** — a surrogate network `û*` is trained on
//!   the data misfit (plain L² or a wavenumber-weighted Sobolev norm Ĥ^ι)
//!   plus a γ-weighted residual `‖γ Λ(û*; ϑ*)‖²`, with field derivatives
//!   obtained by truncated-Taylor (jet) propagation through the network.
//!
//! Two operators are built in: the plane-strain Navier operator
//! `Λ = μΔ + (λ+μ)∇∇· + ρω²I₂` (unknown Lamé fields μ, λ) and the Kirchhoff
//! flexural-plate operator `Λ = χh³/(12(1−ν²))∇⁴ − h(2πf)²` (unknown
//! stiffness-to-density ratio χ = E/ρ).
//!
//! The crate also ships a manufactured-solution generator (exact plane-wave
//! superpositions, per region) used both as test data and as the forward
//! model for the verification diagnostics: flexural dispersion-curve
//! extraction and the force/inertia balance fit.
//!
//! Modules mirror the processing pipeline: [`grid`] (sampling geometry and
//! complex fields), [`signal`] (band-pass, spectra, smoothing, piecewise
//! spectral differentiation, noise), [`mlp`] (networks, ADAM, jets),
//! [`physics`] (residual operators, scaling maps, dispersion, balance),
//! [`synth`] (data generation), [`direct`] and [`pinn`] (the two inversion
//! paradigms), [`io`] (wavefield/checkpoint file formats) and [`config`]
//! (the text run-configuration format used by the CLI).

pub mod config;
pub mod direct;
pub mod error;
pub mod grid;
pub mod io;
pub mod jet;
pub mod mlp;
pub mod physics;
pub mod pinn;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
