//! Measurement-induced squeezing of a collective atomic pseudo-spin.
//!
//! The crate models an ensemble of `N` two-level atoms prepared in a coherent
//! spin state, probed dispersively by one or two off-resonant laser beams whose
//! phase shift is read out with balanced homodyne detection. It provides
//!
//! * exact projection-noise statistics of the coherent spin state ([`ensemble`]),
//! * closed-form and sampled homodyne detector statistics, plus a truncated
//!   Fock-space oracle for the detector operator algebra ([`homodyne`]),
//! * single- and two-color probe phase models and their noise budgets ([`probe`]),
//! * Bayesian conditioning of the Dicke distribution on a detection outcome
//!   ([`conditional`]),
//! * the scattering-limited tradeoff that decides whether the conditional noise
//!   reduction improves angular resolution ([`metrology`]),
//! * a seeded, thread-count independent experiment runner that writes CSV
//!   ([`harness`]).
//!
//! Monte Carlo loops run through [`par`], which fans trials out over rayon when
//! the `parallel` feature is enabled and falls back to a sequential loop
//! otherwise. Both paths produce identical results for a given seed.

pub mod conditional;
pub mod ensemble;
mod error;
pub mod harness;
pub mod homodyne;
pub mod metrology;
pub mod par;
pub mod probe;
pub mod stats;

pub use error::{Error, Result};
