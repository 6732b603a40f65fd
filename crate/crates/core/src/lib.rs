//! Device-to-device coded caching with private demands and a trusted server.
//!
//! Users cache pieces of an `N`-file library under a secretly permuted
//! placement, then serve each other over a shared broadcast medium. A trusted
//! server, which never carries payload, collects the demands and tells every
//! user which XOR combinations of its cached pieces to broadcast. The
//! construction splits the D2D network into `K` shared-link problems, pads
//! each with virtual users so every file is demanded equally often, and hides
//! the roles of pieces behind random permutations, so no user learns anything
//! about the other users' demands.
//!
//! Module map:
//!
//! - [`combinatorics`]: binomials, lexicographic subsets, seeded permutations
//! - [`placement`]: instance parameters, library splitting, caches
//! - [`delivery`]: virtual demands, leaders, multicast queries and signals
//! - [`decoding`]: peeling and GF(2) elimination decoders
//! - [`audit`]: exhaustive and sampled demand-privacy audits
//! - [`baselines`]: uncoded D2D scheme and shared-link private reference
//! - [`analysis`]: closed-form loads, convex envelope, tradeoff tables
//! - [`session`]: end-to-end runs with load measurement and transcripts

pub mod analysis;
pub mod audit;
pub mod baselines;
pub mod bits;
pub mod combinatorics;
pub mod decoding;
pub mod delivery;
pub mod error;
pub mod exec;
pub mod placement;
pub mod selftest;
pub mod session;
pub mod transcript;

pub use error::{Error, Result};
pub use exec::Execution;

/// Exact rational used for memory sizes and loads.
pub type Rational = num::BigRational;

/// `n / d` as a [`Rational`].
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}
