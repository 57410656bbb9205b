//! Markowitz portfolio selection mapped to Ising ground-state problems and
//! solved with two quantum algorithms on a dense statevector simulator:
//! a layered variational ansatz (QAOA-style energy minimization) and
//! imaginary-time evolution via unitary dilation with ancilla post-selection.
//!
//! The crate is organized around the pipeline
//! `portfolio -> encoding -> (qaoa | qite) -> bench`:
//!
//! * [`portfolio`] — synthetic asset-price data and the Markowitz objective
//! * [`encoding`] — binary variables, QUBO coefficients, Ising Hamiltonian,
//!   exact ground states by enumeration
//! * [`sim`] — statevector simulator with U3/CX/ECR gates and stochastic
//!   two-qubit-gate noise
//! * [`optimize`] — derivative-free minimization (COBYLA, Nelder-Mead)
//! * [`qaoa`] — variational ground-state search minimizing `|E_g - <H>|`
//! * [`qite`] — imaginary-time evolution through a dilated unitary,
//!   optionally compiled into a variational circuit
//! * [`bench`] — return-error metrics, random-state baselines, noise sweeps
//! * [`io`] — JSON/CSV schemas and atomic file output

pub mod bench;
pub mod encoding;
pub mod io;
pub mod optimize;
pub mod portfolio;
pub mod qaoa;
pub mod qite;
pub mod rng;
pub mod sim;

pub use encoding::{Bitstring, IsingModel, QuboModel};
pub use portfolio::{FinancialSummary, PortfolioInstance};
