//! Certification toolkit for mixed small-gain/passivity properties of SISO
//! systems.
//!
//! The crate decides and certifies *mixed* dissipativity — a system that is
//! small-gain-like above a crossover frequency and passive-like below it —
//! and uses those certificates to conclude feedback-interconnection
//! stability with explicit closed-loop gain bounds. Every certificate the
//! toolkit emits can be re-verified by an independent code path
//! (eigenvalue checks, frequency sweeps, or time-domain simulation).
//!
//! Module map:
//! - [`mat`]: small dense symmetric-matrix kernels (eigenvalues, cones).
//! - [`lti`]: state-space plants, frequency response, band extrema.
//! - [`supply`]: supply-rate specifications and trajectory classification.
//! - [`kyp`]: dissipation-LMI certificates and their cross-checks.
//! - [`extract`]: mixed supply parameters and crossover selection.
//! - [`interconnect`]: feedback stability tests and the homotopy gain bound.
//! - [`simulate`]: deterministic fixed-step simulation and storage checks.
//! - [`cli`]: the `mixedgain` command-line front end.

pub mod cli;
pub mod extract;
pub mod interconnect;
pub mod kyp;
pub mod lti;
pub mod mat;
pub mod simulate;
pub mod supply;
