//! Truthful maximal-in-range mechanisms for combinatorial auctions in which
//! agent `i` values a bundle `S` at `v_i · f(S)`: `f` is public, the
//! multiplier `v_i` is private.
//!
//! Any welfare maximizer, truthful or not, is turned into a truthful
//! mechanism by evaluating it on a fixed set of multiplier vectors, storing
//! the allocations it returns as the range, and running VCG over that range.
//! Two ranges are provided:
//!
//! - [`mechanism::Mode::Simple`]: the `n` flat prefix vectors.
//! - [`mechanism::Mode::VectorFitting`]: staircases with heights `b^-k` and
//!   step widths `⌈a^k⌉`, which contain the core of the floor of every
//!   multiplier vector.
//!
//! All welfare arithmetic is exact ([`Rational`]).
//!
//! ```
//! use vecfit_core::{instance, mechanism, rational, solver::ExactSolver, vector::MechanismParams};
//!
//! let f = instance::three_slot_example();
//! let params = MechanismParams::binary(2).unwrap();
//! let bids = rational::parse_list("1,11/10").unwrap();
//! let out = mechanism::run_mechanism(
//!     &f, &params, &ExactSolver::default(), mechanism::Mode::VectorFitting, &bids,
//! ).unwrap();
//! assert_eq!(out.welfare, rational::int(17));
//! ```

pub mod error;
pub mod instance;
pub mod mechanism;
pub mod rational;
pub mod solver;
pub mod valuation;
pub mod vector;
pub mod verify;

pub use error::{Error, Result};
pub use rational::Rational;
