//! Local hidden variable models that exploit inefficient detectors.
//!
//! The crate builds explicit classical models reproducing the statistics of
//! Bell experiments when detectors fire with probability `eta` below a
//! threshold, and checks them:
//!
//! * [`bounds`]: the thresholds themselves, exact where rational.
//! * [`quantum`]: states, POVMs and quantum predictions.
//! * [`lhv::two_party`]: the setting-guessing model for two parties.
//! * [`lhv::protocol`] and [`lhv::multiparty`]: the N-party protocol
//!   family, its exact weight recursion and positivity scan.
//! * [`lhv::dimension`]: the Haar-random hidden-state model for maximally
//!   entangled states.
//! * [`verify`]: exact, tolerance and statistical table comparisons.

pub mod bounds;
pub mod distribution;
pub mod error;
pub mod lhv;
pub mod quantum;
pub mod rational;
pub mod verify;

pub use distribution::{Outcome, OutcomeCounts, OutcomeDistribution, OutcomeTable, Probability};
pub use error::{Error, Result};
pub use rational::Rational;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/quantum.md")]
    mod quantum {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/two_party.md")]
    mod two_party {}
    #[doc = include_str!("../../../book/src/multiparty.md")]
    mod multiparty {}
    #[doc = include_str!("../../../book/src/dimension.md")]
    mod dimension {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
