//! Voice disguise and restoration for automatic speaker verification.
//!
//! Disguises (pitch scaling, VTLN frequency warps) are modelled as
//! `y = f(x; alpha)`. Restoration estimates `alpha` either from the ratio of
//! mean fundamental frequencies or by searching a parameter grid for the
//! restored version of `y` whose speaker embedding is closest to the
//! enrollment utterance, and evaluates verification with equal error rates.

pub mod asv;
pub mod audio;
pub mod cli;
pub mod disguise;
pub mod error;
pub mod eval;
mod fsutil;
pub mod pitch;
pub mod restore;

pub use error::{Error, Result};
