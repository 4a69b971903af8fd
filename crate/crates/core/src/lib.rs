//! Exact arithmetic for level-truncated stratified bundles on the punctured
//! affine line in characteristic p.
//!
//! The crate computes with Frobenius-divided module structures given by the
//! matrices of the divided-power operators `∂^(p^m)` over Laurent polynomials
//! with prime-field coefficients. On top of that it provides logarithmic
//! lattices at the boundary `x = 0`, their residue decompositions and
//! exponents, τ-normalized extensions, saturation-based regular-singularity
//! testing, and the tame/wild classification of Kummer and Artin–Schreier
//! covers.

pub mod covers;
pub mod laurent;
mod linalg;
pub mod loglat;
pub mod padics;
pub mod strat;

pub use laurent::{LaurentPoly, OperatorMatrix, PolyLattice};
pub use padics::{ExponentRational, PadicDigits, PrimeField};
pub use strat::{Section, StratifiedBundle};
