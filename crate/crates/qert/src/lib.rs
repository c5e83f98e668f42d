//! Expected-runtime analysis for measurement-guarded quantum programs.
//!
//! A program here is an imperative loop/branch structure over declared
//! finite-dimensional quantum variables: unitary gates, basis-state
//! initialization, and projective measurements that steer `if` branches and
//! `while` loops. Every initialization, gate, and measurement costs one unit
//! of time; `skip` is free. The crate computes the expected total cost
//! exactly, as the quadratic form of a runtime observable:
//!
//! * [`semantics`] builds the d²×d² transfer-matrix representation of the
//!   state transformer of a program (Kraus maps acting on row-major
//!   vectorized operators).
//! * [`analyzer`] derives the termination operator, the projector onto the
//!   subspace of almost-surely-terminating initial states, the runtime
//!   observable, and finite/infinite expected-runtime verdicts.
//! * [`oracles`] provides two independent ground truths: truncated loop
//!   unfolding and Monte-Carlo simulation of the small-step semantics.
//! * [`walks`] builds the bundled example programs (geometric coin,
//!   Bernoulli-factory loop, absorbing cyclic walk) together with the
//!   closed-form expected-measurement-count matrix of the walk and its
//!   verification machinery.
//!
//! The command-line front end lives in the `qert` binary; a C ABI wrapper is
//! provided by the companion `qert-ffi` crate.

pub mod analyzer;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod oracles;
pub mod parser;
pub mod program;
pub mod report;
pub mod semantics;
pub mod spectral;
pub mod tol;
pub mod walks;

pub use error::{Error, Result};
