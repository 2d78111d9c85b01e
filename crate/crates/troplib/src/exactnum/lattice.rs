use super::matrix::{rat_solve, LinAlgError, QMatrix, QVector};
use super::rational::Rat;
use num::bigint::BigInt;
use num::traits::Euclid;
use num::{Integer, Signed, Zero};

pub type IntMatrix = Vec<Vec<BigInt>>;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("singular matrix")]
    SingularMatrix,
    #[error("operation requires rational entries")]
    RequiresRational,
    #[error("dimension mismatch")]
    DimensionMismatch,
}

pub fn int_identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::from(1) } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

pub fn int_mat_from_i64(rows: &[Vec<i64>]) -> IntMatrix {
    rows.iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect()
}

/// gcd of the entries, zero for the zero vector.
pub fn content(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x))
}

pub fn content_i64(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |acc, &x| {
        let a = acc.unsigned_abs();
        let b = x.unsigned_abs();
        num::integer::gcd(a, b) as i64
    })
}

/// Divide out the content; the zero vector is returned unchanged.
pub fn primitive_i64(v: &[i64]) -> (i64, Vec<i64>) {
    let c = content_i64(v);
    if c == 0 {
        (0, v.to_vec())
    } else {
        (c, v.iter().map(|&x| x / c).collect())
    }
}

/// Column-style Hermite normal form: column operations only, so the column
/// span over the integers is unchanged. Pivots are positive and entries to
/// the left of each pivot are reduced modulo it.
pub fn hnf(m: &IntMatrix) -> IntMatrix {
    hnf_with_transform(m).0
}

/// Returns `(H, U)` with `H = M * U` and `U` unimodular.
pub fn hnf_with_transform(m: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut h = m.clone();
    let mut u = int_identity(cols);

    let col_swap = |h: &mut IntMatrix, u: &mut IntMatrix, a: usize, b: usize| {
        for r in h.iter_mut() {
            r.swap(a, b);
        }
        for r in u.iter_mut() {
            r.swap(a, b);
        }
    };
    // col[a] += k * col[b]
    let col_addmul = |h: &mut IntMatrix, u: &mut IntMatrix, a: usize, b: usize, k: &BigInt| {
        for r in h.iter_mut() {
            let add = &r[b] * k;
            r[a] += add;
        }
        for r in u.iter_mut() {
            let add = &r[b] * k;
            r[a] += add;
        }
    };
    let col_negate = |h: &mut IntMatrix, u: &mut IntMatrix, a: usize| {
        for r in h.iter_mut() {
            r[a] = -r[a].clone();
        }
        for r in u.iter_mut() {
            r[a] = -r[a].clone();
        }
    };

    let mut pivot_col = 0usize;
    for row in 0..rows {
        if pivot_col >= cols {
            break;
        }
        // Euclidean reduction across columns >= pivot_col in this row.
        loop {
            let mut best: Option<usize> = None;
            for j in pivot_col..cols {
                if !h[row][j].is_zero() {
                    best = match best {
                        None => Some(j),
                        Some(b) if h[row][j].abs() < h[row][b].abs() => Some(j),
                        keep => keep,
                    };
                }
            }
            let Some(b) = best else {
                break;
            };
            if b != pivot_col {
                col_swap(&mut h, &mut u, pivot_col, b);
            }
            let mut done = true;
            let pivot_val = h[row][pivot_col].clone();
            for j in (pivot_col + 1)..cols {
                if !h[row][j].is_zero() {
                    let q = h[row][j].div_euclid(&pivot_val);
                    if !q.is_zero() {
                        col_addmul(&mut h, &mut u, j, pivot_col, &(-q));
                    }
                    if !h[row][j].is_zero() {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if h[row][pivot_col].is_zero() {
            continue;
        }
        if h[row][pivot_col].is_negative() {
            col_negate(&mut h, &mut u, pivot_col);
        }
        // Reduce the entries left of the pivot in this row into [0, pivot).
        let pivot_val = h[row][pivot_col].clone();
        for j in 0..pivot_col {
            if !h[row][j].is_zero() {
                let q = h[row][j].div_euclid(&pivot_val);
                if !q.is_zero() {
                    col_addmul(&mut h, &mut u, j, pivot_col, &(-q));
                }
            }
        }
        pivot_col += 1;
    }
    (h, u)
}

/// Basis of the integer kernel `{x : M x = 0}` of an integer matrix, read off
/// from the unimodular transform of the column HNF. The basis generates all
/// integer kernel vectors.
pub fn int_kernel(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    let cols = m.first().map_or(0, |r| r.len());
    let (h, u) = hnf_with_transform(m);
    let mut out = Vec::new();
    for j in 0..cols {
        let zero_col = h.iter().all(|r| r[j].is_zero());
        if zero_col {
            out.push(u.iter().map(|r| r[j].clone()).collect());
        }
    }
    out
}

/// Solve `L m = v` for an integer vector `m`, where `L` is a square
/// invertible matrix with rational entries. `Ok(None)` means the unique
/// rational solution is not integral, so `v` is not in the lattice `L Z^n`.
pub fn lattice_solve(l: &QMatrix, v: &QVector) -> Result<Option<Vec<BigInt>>, LatticeError> {
    let lr = l.as_rational().ok_or(LatticeError::RequiresRational)?;
    let vr: Option<Vec<Rat>> = v.iter().map(|x| x.as_rational()).collect();
    let vr = vr.ok_or(LatticeError::RequiresRational)?;
    lattice_solve_rat(&lr, &vr)
}

pub fn lattice_solve_rat(
    l: &[Vec<Rat>],
    v: &[Rat],
) -> Result<Option<Vec<BigInt>>, LatticeError> {
    if l.len() != v.len() {
        return Err(LatticeError::DimensionMismatch);
    }
    let x = match rat_solve(l, v) {
        Ok(x) => x,
        Err(LinAlgError::Singular) => return Err(LatticeError::SingularMatrix),
        Err(_) => return Err(LatticeError::DimensionMismatch),
    };
    let mut out = Vec::with_capacity(x.len());
    for c in x {
        match c.to_integer() {
            Some(z) => out.push(z),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Canonical representative of `v` modulo the lattice spanned by the columns
/// of `basis`: subtracts `B * floor(B^{-1} v)`, so `B^{-1}` of the result
/// lies in `[0,1)^n`.
pub fn reduce_mod_lattice(v: &[Rat], basis: &[Vec<Rat>]) -> Result<Vec<Rat>, LatticeError> {
    let n = v.len();
    if basis.len() != n || basis.iter().any(|r| r.len() != n) {
        return Err(LatticeError::DimensionMismatch);
    }
    let y = match rat_solve(basis, v) {
        Ok(y) => y,
        Err(LinAlgError::Singular) => return Err(LatticeError::SingularMatrix),
        Err(_) => return Err(LatticeError::DimensionMismatch),
    };
    let f: Vec<Rat> = y.iter().map(|c| Rat::from_bigint(c.floor_int())).collect();
    let shift = super::matrix::rat_mat_vec(basis, &f);
    Ok(v.iter().zip(&shift).map(|(a, b)| a - b).collect())
}

/// Integer variant: canonical representative of an integer vector modulo the
/// lattice spanned by the columns of an invertible integer matrix.
pub fn reduce_int_mod_lattice(v: &[BigInt], basis: &IntMatrix) -> Result<Vec<BigInt>, LatticeError> {
    let vr: Vec<Rat> = v.iter().map(|x| Rat::from_bigint(x.clone())).collect();
    let br: Vec<Vec<Rat>> = basis
        .iter()
        .map(|row| row.iter().map(|x| Rat::from_bigint(x.clone())).collect())
        .collect();
    let red = reduce_mod_lattice(&vr, &br)?;
    Ok(red
        .into_iter()
        .map(|r| r.to_integer().expect("integer lattice reduction stays integral"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::SymbolicReal;

    fn im(rows: &[Vec<i64>]) -> IntMatrix {
        int_mat_from_i64(rows)
    }

    #[test]
    fn hnf_examples() {
        assert_eq!(hnf(&im(&[vec![1, 0], vec![0, 1]])), im(&[vec![1, 0], vec![0, 1]]));
        assert_eq!(hnf(&im(&[vec![2, 4], vec![0, 2]])), im(&[vec![2, 0], vec![0, 2]]));
        assert_eq!(hnf(&im(&[vec![1, 1], vec![0, 1]])), im(&[vec![1, 0], vec![0, 1]]));
    }

    #[test]
    fn hnf_transform_is_unimodular() {
        let m = im(&[vec![6, 4, 2], vec![0, 3, 9]]);
        let (h, u) = hnf_with_transform(&m);
        // H = M U
        for i in 0..2 {
            for j in 0..3 {
                let mut acc = BigInt::zero();
                for k in 0..3 {
                    acc += &m[i][k] * &u[k][j];
                }
                assert_eq!(acc, h[i][j]);
            }
        }
        let udet = QMatrix::from_fn(3, 3, |i, j| {
            SymbolicReal::from_rat(Rat::from_bigint(u[i][j].clone()))
        })
        .det()
        .as_rational()
        .unwrap();
        assert_eq!(udet.abs(), Rat::one());
    }

    #[test]
    fn kernel_basis() {
        // x + y + z = 0 over the integers
        let m = im(&[vec![1, 1, 1]]);
        let k = int_kernel(&m);
        assert_eq!(k.len(), 2);
        for v in &k {
            let s: BigInt = v.iter().sum();
            assert!(s.is_zero());
        }
    }

    #[test]
    fn lattice_solve_examples() {
        let id = QMatrix::identity(2);
        let v = vec![SymbolicReal::from_int(3), SymbolicReal::from_int(-2)];
        assert_eq!(
            lattice_solve(&id, &v).unwrap(),
            Some(vec![BigInt::from(3), BigInt::from(-2)])
        );

        let l = QMatrix::from_int_rows(&[vec![2, 1], vec![1, 2]]);
        let v = vec![SymbolicReal::from_int(-1), SymbolicReal::from_int(-1)];
        assert_eq!(lattice_solve(&l, &v).unwrap(), None);

        let l = QMatrix::from_int_rows(&[vec![2, 0], vec![0, 3]]);
        let v = vec![SymbolicReal::from_int(4), SymbolicReal::from_int(9)];
        assert_eq!(
            lattice_solve(&l, &v).unwrap(),
            Some(vec![BigInt::from(2), BigInt::from(3)])
        );

        let sing = QMatrix::from_int_rows(&[vec![1, 1], vec![1, 1]]);
        let v = vec![SymbolicReal::from_int(1), SymbolicReal::from_int(1)];
        assert_eq!(lattice_solve(&sing, &v), Err(LatticeError::SingularMatrix));
    }

    #[test]
    fn reduction_lands_in_fundamental_domain() {
        let basis = vec![
            vec![Rat::from_int(2), Rat::from_int(0)],
            vec![Rat::from_int(0), Rat::from_int(3)],
        ];
        let v = vec![Rat::new(7, 2), Rat::from_int(-4)];
        let red = reduce_mod_lattice(&v, &basis).unwrap();
        assert_eq!(red, vec![Rat::new(3, 2), Rat::from_int(2)]);
    }
}
