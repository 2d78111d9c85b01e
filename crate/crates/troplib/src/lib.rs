//! troplib: exact-arithmetic computational tropical geometry.
//!
//! The crate constructs and verifies tropical affine tori `B(M)`, tropical
//! curves and their Jacobians, polarizations and theta divisors, linear
//! equivalence of 0-cycles with explicit curve certificates in `R x B`, and
//! Novikov-field tropicalization. Everything runs over exact rationals, with
//! irrational data carried symbolically under declared interval enclosures.

pub mod curve;
pub mod theta;
pub mod exactnum;
pub mod torus;
