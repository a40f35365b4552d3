//! Almost-commuting unitary tuples and representation spaces of central
//! extensions of `Z^n`.
//!
//! An ordered tuple `(A_1, ..., A_n)` of unitary matrices is almost
//! commuting when every commutator `[A_i, A_j]` is a scalar matrix; the
//! scalar phases assemble into a skew-symmetric matrix `D` over `Q/Z`
//! that labels the connected component the tuple lives in. This crate
//! classifies, counts and explicitly constructs those components, and
//! extends the component theory to `Hom(G, U(m))` for central extensions
//! `1 -> Z^r -> G -> Z^n -> 1`:
//!
//! - [`rat1`] — exact arithmetic in `Q/Z`, Euler phi, big binomials.
//! - [`skew`] — skew matrices over `Q/Z` and `Z`, congruence normal
//!   forms with unimodular witnesses, row-space orders, sigma.
//! - [`census`] — component counts `N(n, m)`: partition-indexed closed
//!   forms, prime-power assembly and a brute-force enumeration oracle.
//! - [`tuples`] — explicit component representatives (shift/diagonal
//!   families), commutator classification, relation verification and the
//!   constructive spectral decomposition.
//! - [`gamma`] — rank-one and rank-r component theory for central
//!   extensions: admissible characteristic polynomials, generating
//!   functions, the coefficient-matrix analysis `(B, C, P)`, fibers of
//!   the eigenvalue map and component counts of `Hom(G, U(m))`.
//!
//! Everything exact is exact: counts use arbitrary precision, phases are
//! reduced fractions, and every constructed matrix tuple is verified
//! against its defining relations numerically at explicit tolerances.

pub mod census;
pub mod cmatrix;
pub mod error;
pub mod gamma;
pub mod intmat;
pub mod rat1;
pub mod skew;
pub mod tuples;

pub use error::{Error, Result};
pub use rat1::Rat1;
