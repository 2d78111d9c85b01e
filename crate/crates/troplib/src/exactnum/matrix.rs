use super::rational::Rat;
use super::symbolic::SymbolicReal;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Dense matrix with exact symbolic entries (rational as the constant case).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<SymbolicReal>,
}

/// Column vector companion to `QMatrix`.
pub type QVector = Vec<SymbolicReal>;

#[derive(Debug, thiserror::Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinAlgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix")]
    Singular,
    #[error("operation requires rational entries")]
    RequiresRational,
}

impl QMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> SymbolicReal) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        QMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<SymbolicReal>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        QMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_rat_rows(rows: &[Vec<Rat>]) -> Self {
        QMatrix::from_fn(rows.len(), rows.first().map_or(0, |r| r.len()), |i, j| {
            SymbolicReal::from_rat(rows[i][j].clone())
        })
    }

    pub fn from_int_rows(rows: &[Vec<i64>]) -> Self {
        QMatrix::from_fn(rows.len(), rows.first().map_or(0, |r| r.len()), |i, j| {
            SymbolicReal::from_int(rows[i][j])
        })
    }

    pub fn identity(n: usize) -> Self {
        QMatrix::from_fn(n, n, |i, j| {
            if i == j {
                SymbolicReal::one()
            } else {
                SymbolicReal::zero()
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &SymbolicReal {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: SymbolicReal) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> QMatrix {
        QMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.at(i, j) != self.at(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn mul_vec(&self, v: &[SymbolicReal]) -> QVector {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = SymbolicReal::zero();
                for j in 0..self.cols {
                    acc = &acc + &(self.at(i, j) * &v[j]);
                }
                acc
            })
            .collect()
    }

    pub fn mul_int_vec(&self, v: &[i64]) -> QVector {
        let sv: Vec<SymbolicReal> = v.iter().map(|&x| SymbolicReal::from_int(x)).collect();
        self.mul_vec(&sv)
    }

    /// Determinant by first-row expansion memoized on column subsets.
    pub fn det(&self) -> SymbolicReal {
        assert!(self.is_square(), "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return SymbolicReal::one();
        }
        assert!(n <= 20, "determinant dimension out of range");
        let mut memo: std::collections::HashMap<u32, SymbolicReal> = std::collections::HashMap::new();
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        self.det_rec(0, full, &mut memo)
    }

    fn det_rec(
        &self,
        row: usize,
        cols_mask: u32,
        memo: &mut std::collections::HashMap<u32, SymbolicReal>,
    ) -> SymbolicReal {
        if cols_mask == 0 {
            return SymbolicReal::one();
        }
        if let Some(v) = memo.get(&cols_mask) {
            return v.clone();
        }
        let mut acc = SymbolicReal::zero();
        let mut sign = 1i64;
        for j in 0..self.cols {
            if cols_mask & (1 << j) == 0 {
                continue;
            }
            let entry = self.at(row, j);
            if !entry.is_zero() {
                let minor = self.det_rec(row + 1, cols_mask & !(1 << j), memo);
                let contrib = entry * &minor;
                acc = if sign > 0 { &acc + &contrib } else { &acc - &contrib };
            }
            sign = -sign;
        }
        memo.insert(cols_mask, acc.clone());
        acc
    }

    pub fn leading_principal_minor(&self, k: usize) -> SymbolicReal {
        assert!(k <= self.rows.min(self.cols));
        QMatrix::from_fn(k, k, |i, j| self.at(i, j).clone()).det()
    }

    /// All entries as rationals, if no symbols appear.
    pub fn as_rational(&self) -> Option<Vec<Vec<Rat>>> {
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut row = Vec::with_capacity(self.cols);
            for j in 0..self.cols {
                row.push(self.at(i, j).as_rational()?);
            }
            out.push(row);
        }
        Some(out)
    }
}

impl Serialize for QMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<&SymbolicReal>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j)).collect())
            .collect();
        rows.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for QMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<SymbolicReal>>::deserialize(de)?;
        let c = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(QMatrix::from_rows(rows))
    }
}

impl Mul<&QMatrix> for &QMatrix {
    type Output = QMatrix;
    fn mul(self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        QMatrix::from_fn(self.rows, rhs.cols, |i, j| {
            let mut acc = SymbolicReal::zero();
            for k in 0..self.cols {
                acc = &acc + &(self.at(i, k) * rhs.at(k, j));
            }
            acc
        })
    }
}

impl Add<&QMatrix> for &QMatrix {
    type Output = QMatrix;
    fn add(self, rhs: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        QMatrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j) + rhs.at(i, j))
    }
}

impl Sub<&QMatrix> for &QMatrix {
    type Output = QMatrix;
    fn sub(self, rhs: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        QMatrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j) - rhs.at(i, j))
    }
}

// ---- exact rational linear algebra on Vec<Vec<Rat>> ----

pub fn rat_identity(n: usize) -> Vec<Vec<Rat>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Rat::one() } else { Rat::zero() })
                .collect()
        })
        .collect()
}

pub fn rat_mat_vec(a: &[Vec<Rat>], v: &[Rat]) -> Vec<Rat> {
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), v.len());
            row.iter().zip(v).map(|(x, y)| x * y).sum()
        })
        .collect()
}

pub fn rat_mat_mul(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| &a[i][t] * &b[t][j]).sum())
                .collect()
        })
        .collect()
}

/// Solve the square system `a x = b` by Gaussian elimination.
pub fn rat_solve(a: &[Vec<Rat>], b: &[Rat]) -> Result<Vec<Rat>, LinAlgError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(LinAlgError::DimensionMismatch(format!(
            "{}x{} system with rhs of length {}",
            n,
            a.first().map_or(0, |r| r.len()),
            b.len()
        )));
    }
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or(LinAlgError::Singular)?;
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = m[col][col].recip();
        for j in col..n {
            m[col][j] = &m[col][j] * &inv;
        }
        rhs[col] = &rhs[col] * &inv;
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for j in col..n {
                    m[r][j] = &m[r][j] - &(&factor * &m[col][j]);
                }
                rhs[r] = &rhs[r] - &(&factor * &rhs[col]);
            }
        }
    }
    Ok(rhs)
}

pub fn rat_inverse(a: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, LinAlgError> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![Rat::zero(); n];
        e[j] = Rat::one();
        cols.push(rat_solve(a, &e)?);
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
        .collect())
}

/// Basis of the right nullspace of a rectangular rational matrix
/// (rows are equations), via reduced row echelon form.
pub fn rat_nullspace(a: &[Vec<Rat>], unknowns: usize) -> Vec<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .map(|r| {
            assert_eq!(r.len(), unknowns);
            r.clone()
        })
        .collect();
    let rows = m.len();
    let mut pivot_cols = Vec::new();
    let mut rank = 0usize;
    for col in 0..unknowns {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].recip();
        for j in 0..unknowns {
            m[rank][j] = &m[rank][j] * &inv;
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for j in 0..unknowns {
                    m[r][j] = &m[r][j] - &(&f * &m[rank][j]);
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    let free_cols: Vec<usize> = (0..unknowns).filter(|c| !pivot_cols.contains(c)).collect();
    free_cols
        .into_iter()
        .map(|fc| {
            let mut v = vec![Rat::zero(); unknowns];
            v[fc] = Rat::one();
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -&m[r][fc];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn solve_and_inverse() {
        let a = vec![vec![r("2"), r("1")], vec![r("1"), r("2")]];
        let x = rat_solve(&a, &[r("-1"), r("-1")]).unwrap();
        assert_eq!(x, vec![r("-1/3"), r("-1/3")]);
        let inv = rat_inverse(&a).unwrap();
        assert_eq!(rat_mat_mul(&a, &inv), rat_identity(2));
        let sing = vec![vec![r("1"), r("2")], vec![r("2"), r("4")]];
        assert_eq!(rat_solve(&sing, &[r("1"), r("2")]), Err(LinAlgError::Singular));
    }

    #[test]
    fn determinant_rational_and_symbolic() {
        let m = QMatrix::from_int_rows(&[vec![2, 1], vec![1, 2]]);
        assert_eq!(m.det().as_rational().unwrap(), r("3"));
        // det [[a, b], [b, c]] = a*c - b^2
        let a = SymbolicReal::symbol(0);
        let b = SymbolicReal::symbol(1);
        let c = SymbolicReal::symbol(2);
        let sym = QMatrix::from_rows(vec![vec![a.clone(), b.clone()], vec![b.clone(), c.clone()]]);
        assert_eq!(sym.det(), &(&a * &c) - &(&b * &b));
        assert!(sym.is_symmetric());
    }

    #[test]
    fn nullspace_of_symmetry_constraint() {
        // A 2x2 matrix commuting into symmetry with M = I: condition a12 = a21.
        // Unknowns (a11, a12, a21, a22); single equation a12 - a21 = 0.
        let eqs = vec![vec![r("0"), r("1"), r("-1"), r("0")]];
        let basis = rat_nullspace(&eqs, 4);
        assert_eq!(basis.len(), 3);
        for v in &basis {
            assert_eq!(v[1], v[2]);
        }
    }

    #[test]
    fn minors() {
        let m = QMatrix::from_int_rows(&[vec![2, 1, 0], vec![1, 2, 0], vec![0, 0, 5]]);
        assert_eq!(m.leading_principal_minor(1).as_rational().unwrap(), r("2"));
        assert_eq!(m.leading_principal_minor(2).as_rational().unwrap(), r("3"));
        assert_eq!(m.leading_principal_minor(3).as_rational().unwrap(), r("15"));
    }
}
