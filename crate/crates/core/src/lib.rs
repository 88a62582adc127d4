//! Random-walk approximation of Markovian BSDEs.
//!
//! The Brownian motion driving `Y_s = g(B_T) + int_s^T f(r, B_r, Y_r, Z_r) dr - int_s^T Z_r dB_r`
//! is replaced by the scaled Rademacher walk `B^n_t = sqrt(h) sum_{i <= t/h} eps_i`,
//! and `(Y^n, Z^n)` is computed by backward induction on the recombining tree.
//!
//! The Monte Carlo harness measures `E|Y^n_{t_k} - Y_{t_k}|^2` by realising the
//! walk on a genuine Brownian path through a Skorohod embedding: exit times of
//! `B` from successive `+-sqrt(h)` corridors are sampled from their tabulated
//! law, and `B_{t_k}` is recovered from the embedded skeleton by a Brownian bridge.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod coupling;
pub mod error;
pub mod exec;
pub mod exit_time;
pub mod experiment;
pub mod lattice;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
