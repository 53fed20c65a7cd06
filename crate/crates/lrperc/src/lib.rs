//! Long-range percolation on Z^d.
//!
//! A simulation library for independent bond percolation with translation-
//! invariant connectivity kernels: lazy counter-based mark fields, the
//! cluster exploration with tagging, the strict-monotonicity coupling
//! between a kernel and a pointwise-smaller perturbation, exact
//! small-instance oracles, and replica-parallel Monte Carlo estimators for
//! boundary-reach probabilities, susceptibility, decay rates, and
//! pseudo-critical points. Directed and oriented (space-time) kernels run
//! through the same machinery.
//!
//! Entry points:
//! - [`lattice`]: vertices, kernels, difference sets, balls and boxes.
//! - [`marks`]: the replayable uniform mark field.
//! - [`exploration`]: the stage-by-stage exploration of the origin cluster.
//! - [`coupling`]: q/p computation, coupled samples, containment checks.
//! - [`oracle`]: breadth-first references and exact enumeration.
//! - [`montecarlo`]: estimators and bisection experiments.
//! - [`directed`]: directed and oriented entry points.
//! - [`cli`]: config-driven runs with reproducible output documents.
//!
//! Every randomized quantity is a pure function of a 64-bit seed; rerunning
//! any experiment with the same config reproduces its output bit for bit.

pub mod acceptance;
pub mod cli;
pub mod coupling;
pub mod directed;
pub mod error;
pub mod exploration;
pub mod lattice;
pub mod marks;
pub mod montecarlo;
pub mod oracle;

pub use error::{Error, Result};
