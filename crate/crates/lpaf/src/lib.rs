//! Desk-scale numerics for spatial Lp AF algebras.
//!
//! The crate computes with finite direct sums of full matrix algebras acting
//! on `l^p` spaces: induced `p -> p` operator norms, hermitian idempotents,
//! spatial homomorphisms in canonical form (complex-permutation similarity
//! composed with a block-diagonal map), scaled ordered K0 groups, direct
//! systems of such algebras, and a finite-stage classification engine
//! that searches for intertwining ladders between K0 systems and lifts them
//! to algebra isomorphisms.
//!
//! Everything is deterministic: randomized routines (multi-start norm
//! iterations, sampled audits) draw from a seeded ChaCha8 stream, and searches
//! enumerate candidates in a fixed lexicographic order.
//!
//! The float kernel is generic over [`Real`] (`f32` or `f64`); exact data
//! (multiplicity matrices, K0 groups, ladders) is plain `i64`. The aliases at
//! the crate root fix the `f64` instantiation used by the CLI and most tests.

#![forbid(unsafe_code)]

pub mod algebra;
pub mod bratteli;
pub mod classify;
pub mod homs;
pub mod ktheory;
pub mod matrix;
pub mod pnorm;
pub mod scalar;
pub mod sysfile;

pub use scalar::Real;

/// Complex scalar with double-precision parts.
pub type Cx = num_complex::Complex<f64>;

/// Dense complex matrix with double-precision entries.
pub type ComplexMatrix = matrix::Matrix<f64>;

/// Holder exponent over `f64`.
pub type Exponent = pnorm::PExponent<f64>;

/// Spatial semisimple finite-dimensional algebra over `f64`.
pub type Algebra = algebra::SsfdAlgebra<f64>;

/// Element of an [`Algebra`].
pub type Element = algebra::AlgebraElement<f64>;

/// Spatial homomorphism between [`Algebra`]s.
pub type Hom = homs::SpatialHom<f64>;

/// Direct system of [`Algebra`]s over `f64`.
pub type System = bratteli::AlgebraDirectSystem<f64>;
