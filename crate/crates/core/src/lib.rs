//! Privacy amplification from Bell-inequality violation, assuming only
//! no-signaling between the measured pairs.
//!
//! The crate models bipartite boxes P(a,b|x,y) and their tensor powers,
//! evaluates CHSH and chained Bell functionals on them, and quantifies how
//! well a hashed raw key k = h(a) can be distinguished from an ideal one by
//! an adversary holding the no-signaling side information. The central
//! objects are the marginal-reconstruction vectors of Lemma 1, the
//! hash-dependent bound of Lemma 2, and the distinguishability bound they
//! imply for any attack ensemble.
//!
//! Numbers live in [`scalar::Scalar`]: exact elements of ℚ(√2) where the
//! quantities are algebraic (polytope vertices, functional values, the
//! lemma identities), floats where they are not (quantum statistics,
//! log-rates). Exactness is contagious downward: any float input makes the
//! result a float.

pub mod adversary;
pub mod bell;
pub mod boxes;
pub mod error;
pub mod gamma;
pub mod hashing;
pub mod io;
pub mod quantum;
pub mod scalar;
pub mod security;
pub mod sum;

pub use error::{Error, Result};
pub use scalar::{Mode, Scalar};
