//! Exact rational and certified symbolic-irrational arithmetic, vectors,
//! matrices and lattice utilities used by every other module.
//!
//! All values are immutable after construction and every operation is pure.
//! Strict inequalities on symbolic values are certified by interval
//! arithmetic over declared enclosures; equalities on affine-linear values
//! are decided exactly through the declared rational independence of the
//! symbols. There is no floating-point mode anywhere.

mod interval;
mod lattice;
mod matrix;
mod rational;
mod symbolic;

pub use interval::RatInterval;
pub use lattice::{
    content, content_i64, hnf, hnf_with_transform, int_identity, int_kernel, int_mat_from_i64,
    lattice_solve, lattice_solve_rat, primitive_i64, reduce_int_mod_lattice, reduce_mod_lattice,
    IntMatrix, LatticeError,
};
pub use matrix::{
    rat_identity, rat_inverse, rat_mat_mul, rat_mat_vec, rat_nullspace, rat_solve, LinAlgError,
    QMatrix, QVector,
};
pub use rational::{lcm_denominators, sqrt_upper, ParseRatError, Rat};
pub use symbolic::{
    sign_of, SignError, SymbDisplay, Symbol, SymbolSet, SymbolSetError, SymbolicReal,
    SIGN_REFINEMENT_ROUNDS,
};

use serde::{Deserialize, Serialize};

/// Certified sign of an exact value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}
