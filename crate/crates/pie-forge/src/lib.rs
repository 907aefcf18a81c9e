//! PI operator algebra and PIE representations of coupled ODE-PDE systems.
//!
//! This crate implements, end to end:
//!
//! - exact rational algebra for matrices of bivariate polynomial kernels
//!   ([`polyalg`]);
//! - the *-algebra of 3-PI and 4-PI operators: addition, composition,
//!   adjoint, concatenation, exact application ([`piops`]);
//! - a parametric model class for coupled ODE-PDE systems with general
//!   boundary conditions ([`gpde`]) and its conversion to an equivalent
//!   Partial Integral Equation system via a unitary state map
//!   ([`converter`]);
//! - Chebyshev collocation realization of PI operators as dense matrices
//!   ([`discretizer`]) and implicit trapezoidal time integration of the
//!   resulting descriptor system ([`simulator`]);
//! - an independent quadrature-based verification layer ([`oracle`]) and
//!   bundled example models with reference-kernel comparison reports
//!   ([`models`]).
//!
//! The `pie-forge` binary exposes the `check`, `convert`, `simulate`,
//! `verify`, and `reconstruct` subcommands; see [`cli`]. Library usage is
//! demonstrated by the runnable programs under `examples/`.

pub mod cli;
pub mod converter;
pub mod discretizer;
pub mod expr;
pub mod gpde;
pub mod models;
pub mod oracle;
pub mod piops;
pub mod polyalg;
pub mod simulator;
