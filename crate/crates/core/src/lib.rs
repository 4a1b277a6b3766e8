//! Executable machinery for skew-corner-free sets.
//!
//! A *skew corner* in a set `A` of lattice points is a triple
//! `(x, y), (x, y + a), (x + a, y')` with `a != 0`. This crate provides
//! detectors and extremal search for sets avoiding them, Bohr-set arithmetic
//! over `Z/NZ`, the uniformity-type norms used to quantify pseudorandomness of
//! such sets, verifiers for the inequalities relating those norms, and an
//! instrumented tracer of a single density-increment step.
//!
//! Module map:
//!
//! * [`grid`] point sets, skew-corner and six-point detection, the 1-D lift.
//! * [`bohr`] Bohr sets, dilates, exact regularity certificates.
//! * [`table`] and [`norms`] real-valued tables and every norm evaluator.
//! * [`lab`] inequality verifiers.
//! * [`extremal`] exact `s(n)` search and lower-bound constructions.
//! * [`tracer`] the density-increment tracer and its iteration.

pub mod bohr;
pub mod error;
pub mod extremal;
pub mod grid;
pub mod lab;
pub mod norms;
pub mod sum;
pub mod table;
pub mod tracer;

pub use error::{Error, Result};
