//! Tropical affine tori `B(M) = R^n / (M Z^n)`: the integration pairing,
//! Albanese classes of 0-cycles, and polarization existence/non-existence
//! decision procedures.
//!
//! A polarization is an integer matrix `A` with `A M` symmetric positive
//! definite; positive definiteness is certified through signs of leading
//! principal minors, which for symbolic `M` rest on the declared interval
//! enclosures of the symbols.

use crate::exactnum::{
    int_kernel, lcm_denominators, reduce_mod_lattice, sign_of, LatticeError, LinAlgError, QMatrix,
    Rat, Sign, SignError, SymbolSet, SymbolicReal,
};
use num::bigint::BigInt;
use num::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TorusError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix M is not certified invertible")]
    NotInvertible,
    #[error("cycle has nonzero degree {0}")]
    NonzeroDegree(i64),
    #[error("operation requires rational data")]
    RequiresRationalData,
    #[error("torus is not flagged irrational symmetric")]
    NotFlaggedIrrationalSymmetric,
    #[error("irrational-symmetric structure invalid: {0}")]
    BadIrrationalSymmetric(String),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error(transparent)]
    Sign(#[from] SignError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

/// Tropical affine torus `B(M)` with `M` invertible, possibly symbolic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TropicalTorus {
    n: usize,
    #[serde(rename = "M")]
    m: QMatrix,
    #[serde(rename = "symbolic")]
    irrational_symmetric: bool,
    symbols: SymbolSet,
}

impl TropicalTorus {
    pub fn new(
        m: QMatrix,
        symbols: SymbolSet,
        irrational_symmetric: bool,
    ) -> Result<Self, TorusError> {
        if !m.is_square() {
            return Err(TorusError::DimensionMismatch("M must be square".into()));
        }
        let n = m.rows();
        if sign_of(&m.det(), &symbols)? == Sign::Zero {
            return Err(TorusError::NotInvertible);
        }
        let torus = TropicalTorus {
            n,
            m,
            symbols,
            irrational_symmetric,
        };
        if irrational_symmetric {
            torus.validate_irrational_symmetric()?;
        }
        Ok(torus)
    }

    /// Standard torus `R^n / Z^n`.
    pub fn standard(n: usize) -> Self {
        TropicalTorus::new(QMatrix::identity(n), SymbolSet::empty(), false).unwrap()
    }

    pub fn from_rat_rows(rows: &[Vec<Rat>]) -> Result<Self, TorusError> {
        TropicalTorus::new(QMatrix::from_rat_rows(rows), SymbolSet::empty(), false)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &QMatrix {
        &self.m
    }

    pub fn symbols(&self) -> &SymbolSet {
        &self.symbols
    }

    pub fn irrational_symmetric(&self) -> bool {
        self.irrational_symmetric
    }

    pub fn is_rational(&self) -> bool {
        self.m.as_rational().is_some()
    }

    /// Rows of `M` as rationals; the lattice `M Z^n` is its column span.
    pub fn m_rat(&self) -> Result<Vec<Vec<Rat>>, TorusError> {
        self.m.as_rational().ok_or(TorusError::RequiresRationalData)
    }

    /// Canonical representative with `M^{-1} v` in `[0,1)^n`.
    pub fn canonicalize(&self, raw: &[Rat]) -> Result<Vec<Rat>, TorusError> {
        if raw.len() != self.n {
            return Err(TorusError::DimensionMismatch(format!(
                "point of length {} on a {}-torus",
                raw.len(),
                self.n
            )));
        }
        Ok(reduce_mod_lattice(raw, &self.m_rat()?)?)
    }

    pub fn point(&self, raw: &[Rat]) -> Result<TorusPoint, TorusError> {
        Ok(TorusPoint {
            coords: self.canonicalize(raw)?,
        })
    }

    /// Is `v` in the lattice `M Z^n`?
    pub fn lattice_contains(&self, v: &[Rat]) -> Result<bool, TorusError> {
        let sol = crate::exactnum::lattice_solve_rat(&self.m_rat()?, v)?;
        Ok(sol.is_some())
    }

    /// Entries on and above the diagonal must be affine-linear forms in the
    /// symbols whose coefficient vectors are linearly independent; together
    /// with the declared independence of the symbols this is the
    /// irrational-symmetric hypothesis.
    fn validate_irrational_symmetric(&self) -> Result<(), TorusError> {
        if !self.m.is_symmetric() {
            return Err(TorusError::BadIrrationalSymmetric("M is not symmetric".into()));
        }
        if !self.symbols.independent() || self.symbols.is_empty() {
            return Err(TorusError::BadIrrationalSymmetric(
                "symbols must be declared rationally independent".into(),
            ));
        }
        let k = self.symbols.len();
        let mut rows = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                let (_, coeffs) = self.m.at(i, j).linear_decompose().ok_or_else(|| {
                    TorusError::BadIrrationalSymmetric(format!(
                        "entry ({i},{j}) is not affine-linear in the symbols"
                    ))
                })?;
                let mut row = coeffs;
                row.resize(k, Rat::zero());
                rows.push(row);
            }
        }
        // Entries (with 1) are rationally independent iff the coefficient
        // rows are linearly independent over Q.
        let unknowns = rows.len();
        let transposed: Vec<Vec<Rat>> = (0..k)
            .map(|j| (0..unknowns).map(|e| rows[e][j].clone()).collect())
            .collect();
        let kernel = crate::exactnum::rat_nullspace(&transposed, unknowns);
        if !kernel.is_empty() {
            return Err(TorusError::BadIrrationalSymmetric(
                "upper-triangle entries are rationally dependent".into(),
            ));
        }
        Ok(())
    }
}

/// Point of `B(M)` in canonical chart coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint {
    coords: Vec<Rat>,
}

impl TorusPoint {
    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }
}

/// Formal integer combination of torus points.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZeroCycle {
    terms: Vec<(TorusPoint, i64)>,
}

impl ZeroCycle {
    /// Merges duplicate points and drops zero multiplicities.
    pub fn new(terms: Vec<(TorusPoint, i64)>) -> Self {
        let mut map: std::collections::BTreeMap<TorusPoint, i64> = Default::default();
        for (p, m) in terms {
            *map.entry(p).or_insert(0) += m;
        }
        ZeroCycle {
            terms: map.into_iter().filter(|(_, m)| *m != 0).collect(),
        }
    }

    pub fn terms(&self) -> &[(TorusPoint, i64)] {
        &self.terms
    }

    pub fn degree(&self) -> i64 {
        self.terms.iter().map(|(_, m)| m).sum()
    }

    pub fn add(&self, other: &ZeroCycle) -> ZeroCycle {
        let mut all = self.terms.clone();
        all.extend(other.terms.iter().cloned());
        ZeroCycle::new(all)
    }

    pub fn negate(&self) -> ZeroCycle {
        ZeroCycle {
            terms: self.terms.iter().map(|(p, m)| (p.clone(), -m)).collect(),
        }
    }

    pub fn scale(&self, k: i64) -> ZeroCycle {
        ZeroCycle::new(self.terms.iter().map(|(p, m)| (p.clone(), m * k)).collect())
    }
}

/// Albanese class: vector in `R^n` reduced modulo `M Z^n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlbClass {
    coords: Vec<Rat>,
}

impl AlbClass {
    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }
}

/// Integral of the constant integer form `alpha` over the closed cycle
/// `t -> t * M gamma`: the value `alpha^T M gamma`.
pub fn integration_pairing(
    torus: &TropicalTorus,
    gamma: &[i64],
    alpha: &[i64],
) -> Result<SymbolicReal, TorusError> {
    if gamma.len() != torus.n || alpha.len() != torus.n {
        return Err(TorusError::DimensionMismatch(format!(
            "pairing on a {}-torus with vectors of length {} and {}",
            torus.n,
            gamma.len(),
            alpha.len()
        )));
    }
    let mg = torus.m.mul_int_vec(gamma);
    let mut acc = SymbolicReal::zero();
    for (a, v) in alpha.iter().zip(&mg) {
        acc = &acc + &v.scale(&Rat::from_int(*a));
    }
    Ok(acc)
}

/// Albanese class of a degree-zero cycle: the sum of canonical lifts,
/// reduced modulo the period lattice. Independent of the choice of lifts.
pub fn albanese_of_cycle(torus: &TropicalTorus, z: &ZeroCycle) -> Result<AlbClass, TorusError> {
    let deg = z.degree();
    if deg != 0 {
        return Err(TorusError::NonzeroDegree(deg));
    }
    let mut acc = vec![Rat::zero(); torus.n];
    for (p, m) in z.terms() {
        if p.coords().len() != torus.n {
            return Err(TorusError::DimensionMismatch("point dimension".into()));
        }
        let w = Rat::from_int(*m);
        for (a, c) in acc.iter_mut().zip(p.coords()) {
            *a += &(c * &w);
        }
    }
    Ok(AlbClass {
        coords: torus.canonicalize(&acc)?,
    })
}

pub fn alb_add(torus: &TropicalTorus, a: &AlbClass, b: &AlbClass) -> Result<AlbClass, TorusError> {
    let sum: Vec<Rat> = a.coords.iter().zip(&b.coords).map(|(x, y)| x + y).collect();
    Ok(AlbClass {
        coords: torus.canonicalize(&sum)?,
    })
}

// ---- polarizations ----

/// Integer matrix `A` with `A M` symmetric positive definite, together with
/// the induced pairing data.
#[derive(Clone, Debug, Serialize)]
pub struct Polarization {
    torus: TropicalTorus,
    #[serde(rename = "A")]
    a: Vec<Vec<i64>>,
    #[serde(skip)]
    metric: QMatrix,
}

impl Polarization {
    pub fn new(torus: &TropicalTorus, a: Vec<Vec<i64>>) -> Result<Self, TorusError> {
        let n = torus.n;
        if a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(TorusError::DimensionMismatch("A must be n x n".into()));
        }
        let am = &QMatrix::from_int_rows(&a) * &torus.m;
        if !am.is_symmetric() {
            return Err(TorusError::HypothesisFailed("A M is not symmetric".into()));
        }
        for k in 1..=n {
            match sign_of(&am.leading_principal_minor(k), &torus.symbols)? {
                Sign::Positive => {}
                _ => {
                    return Err(TorusError::HypothesisFailed(format!(
                        "leading principal minor {k} of A M is not positive"
                    )))
                }
            }
        }
        Ok(Polarization {
            torus: torus.clone(),
            a,
            metric: am,
        })
    }

    pub fn identity(torus: &TropicalTorus) -> Result<Self, TorusError> {
        let n = torus.n;
        let a: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
            .collect();
        Polarization::new(torus, a)
    }

    pub fn torus(&self) -> &TropicalTorus {
        &self.torus
    }

    pub fn a_matrix(&self) -> &[Vec<i64>] {
        &self.a
    }

    /// The pairing matrix `A M` (`<g1, g2> = g1^T A M g2` on cycles).
    pub fn pairing(&self) -> &QMatrix {
        &self.metric
    }

    /// Covector image `c(gamma) = A^T gamma` of an integral cycle.
    pub fn c_of(&self, gamma: &[i64]) -> Vec<i64> {
        let n = self.torus.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i][j] * gamma[i]).sum())
            .collect()
    }

    /// Gram matrix `M (A M)^{-1} M^T` of the dual metric on integer
    /// covectors; rational polarizations only.
    pub fn dual_gram(&self) -> Result<Vec<Vec<Rat>>, TorusError> {
        let m = self.torus.m_rat()?;
        let am = self
            .metric
            .as_rational()
            .ok_or(TorusError::RequiresRationalData)?;
        let am_inv = crate::exactnum::rat_inverse(&am)?;
        let mt: Vec<Vec<Rat>> = (0..self.torus.n)
            .map(|i| (0..self.torus.n).map(|j| m[j][i].clone()).collect())
            .collect();
        Ok(crate::exactnum::rat_mat_mul(
            &crate::exactnum::rat_mat_mul(&m, &am_inv),
            &mt,
        ))
    }
}

/// Evidence that a symmetric pairing takes certified values of both signs.
#[derive(Clone, Debug, Serialize)]
pub struct IndefinitenessEvidence {
    pub minor_signs: Vec<Sign>,
    pub positive_vector: Vec<i64>,
    pub positive_value: String,
    pub negative_vector: Vec<i64>,
    pub negative_value: String,
}

#[derive(Clone, Debug)]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite(IndefinitenessEvidence),
    Indeterminate,
}

/// Classify a symmetric matrix by certified minor signs, falling back to a
/// search for quadratic-form values of opposite certified sign.
pub fn classify_definiteness(
    m: &QMatrix,
    symbols: &SymbolSet,
) -> Result<Definiteness, TorusError> {
    let n = m.rows();
    let mut signs = Vec::with_capacity(n);
    let mut known = true;
    for k in 1..=n {
        match sign_of(&m.leading_principal_minor(k), symbols) {
            Ok(s) => signs.push(s),
            Err(SignError::Indeterminate) => {
                signs.push(Sign::Zero);
                known = false;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if known {
        if signs.iter().all(|s| *s == Sign::Positive) {
            return Ok(Definiteness::PositiveDefinite);
        }
        let neg_pattern = signs
            .iter()
            .enumerate()
            .all(|(i, s)| *s == if i % 2 == 0 { Sign::Negative } else { Sign::Positive });
        if neg_pattern {
            return Ok(Definiteness::NegativeDefinite);
        }
    }
    // Hunt for integer vectors with quadratic values of opposite sign.
    let mut pos: Option<(Vec<i64>, SymbolicReal)> = None;
    let mut neg: Option<(Vec<i64>, SymbolicReal)> = None;
    for v in small_vectors(n, 3) {
        let q = quadratic_value(m, &v);
        match sign_of(&q, symbols) {
            Ok(Sign::Positive) if pos.is_none() => pos = Some((v, q)),
            Ok(Sign::Negative) if neg.is_none() => neg = Some((v, q)),
            _ => {}
        }
        if pos.is_some() && neg.is_some() {
            break;
        }
    }
    match (pos, neg) {
        (Some((pv, pq)), Some((nv, nq))) => Ok(Definiteness::Indefinite(IndefinitenessEvidence {
            minor_signs: signs,
            positive_vector: pv,
            positive_value: pq.to_string(),
            negative_vector: nv,
            negative_value: nq.to_string(),
        })),
        _ => Ok(Definiteness::Indeterminate),
    }
}

fn quadratic_value(m: &QMatrix, v: &[i64]) -> SymbolicReal {
    let mv = m.mul_int_vec(v);
    let mut acc = SymbolicReal::zero();
    for (x, val) in v.iter().zip(&mv) {
        acc = &acc + &val.scale(&Rat::from_int(*x));
    }
    acc
}

/// Nonzero integer vectors of sup-norm at most `bound`, in deterministic
/// order of increasing norm.
fn small_vectors(n: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for b in 1..=bound {
        let mut v = vec![-b; n];
        loop {
            if v.iter().any(|x| x.abs() == b) && v.iter().any(|&x| x != 0) {
                out.push(v.clone());
            }
            let mut i = 0;
            loop {
                if i == n {
                    break;
                }
                if v[i] < b {
                    v[i] += 1;
                    break;
                }
                v[i] = -b;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    out
}

/// Certificate that no polarization exists.
#[derive(Clone, Debug, Serialize)]
pub struct NoPolarizationCertificate {
    pub reduction: String,
    pub evidence: Option<IndefinitenessEvidence>,
    pub assumptions: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum PolarizationOutcome {
    Found(Polarization),
    NoneCertified(NoPolarizationCertificate),
    Unknown,
}

#[derive(Clone, Copy, Debug)]
pub struct PolarizationSearchOptions {
    /// Bound on the absolute value of the entries of candidate `A`.
    pub entry_bound: i64,
    /// Bound on the coefficients of kernel-basis combinations.
    pub combo_bound: i64,
    /// Hard cap on candidates examined before giving up.
    pub candidate_cap: usize,
}

impl Default for PolarizationSearchOptions {
    fn default() -> Self {
        PolarizationSearchOptions {
            entry_bound: 10,
            combo_bound: 10,
            candidate_cap: 200_000,
        }
    }
}

fn independence_assumption(symbols: &SymbolSet) -> String {
    let names: Vec<&str> = symbols.symbols().iter().map(|s| s.name.as_str()).collect();
    format!(
        "the symbols {{{}}} together with 1 are rationally independent (declared, not verified)",
        names.join(", ")
    )
}

/// Decide whether `B(M)` admits a polarization.
///
/// Symmetry of `A M` is a linear condition on the integer matrix `A`; its
/// solution lattice is computed exactly. When that lattice is a single line
/// spanned by `A0`, definiteness of `A0 M` settles existence outright (for an
/// irrational symmetric `M` this line is spanned by the identity). Otherwise
/// candidates of bounded height are tried and `Unknown` is returned once the
/// bound is exhausted.
pub fn find_polarization(torus: &TropicalTorus) -> Result<PolarizationOutcome, TorusError> {
    find_polarization_with(torus, PolarizationSearchOptions::default())
}

pub fn find_polarization_with(
    torus: &TropicalTorus,
    opts: PolarizationSearchOptions,
) -> Result<PolarizationOutcome, TorusError> {
    if let Ok(p) = Polarization::identity(torus) {
        return Ok(PolarizationOutcome::Found(p));
    }

    let n = torus.n;
    // One linear condition on vec(A) (row-major) per monomial of M and index
    // pair i < j: the coefficient matrices B of the monomials must each
    // satisfy (A B) symmetric.
    let monomials: BTreeSet<Vec<u32>> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .flat_map(|(i, j)| {
            torus
                .m
                .at(i, j)
                .terms()
                .map(|(e, _)| e.clone())
                .collect::<Vec<_>>()
        })
        .collect();
    let mut equations: Vec<Vec<Rat>> = Vec::new();
    for mono in &monomials {
        let b: Vec<Vec<Rat>> = (0..n)
            .map(|i| (0..n).map(|j| torus.m.at(i, j).coefficient(mono)).collect())
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                // (A B)_{ij} - (A B)_{ji} = 0
                let mut row = vec![Rat::zero(); n * n];
                for k in 0..n {
                    row[i * n + k] = &row[i * n + k] + &b[k][j];
                    row[j * n + k] = &row[j * n + k] - &b[k][i];
                }
                if row.iter().any(|c| !c.is_zero()) {
                    equations.push(row);
                }
            }
        }
    }

    // Saturated integer solution lattice of the equations.
    let kernel: Vec<Vec<BigInt>> = if equations.is_empty() {
        (0..n * n)
            .map(|j| {
                (0..n * n)
                    .map(|i| if i == j { BigInt::from(1) } else { BigInt::from(0) })
                    .collect()
            })
            .collect()
    } else {
        let int_equations: Vec<Vec<BigInt>> = equations
            .iter()
            .map(|row| {
                let scale = Rat::from_bigint(lcm_denominators(row.iter()));
                row.iter()
                    .map(|c| (c * &scale).to_integer().unwrap())
                    .collect()
            })
            .collect();
        int_kernel(&int_equations)
    };

    if kernel.is_empty() {
        return Ok(PolarizationOutcome::NoneCertified(NoPolarizationCertificate {
            reduction: "the only integer matrix A with A M symmetric is A = 0".into(),
            evidence: None,
            assumptions: vec![independence_assumption(&torus.symbols)],
        }));
    }

    if kernel.len() == 1 {
        // Every admissible A is an integer multiple of A0.
        let a0 = big_to_i64_matrix(&kernel[0], n)?;
        for cand in [a0.clone(), negate(&a0)] {
            if let Ok(p) = Polarization::new(torus, cand) {
                return Ok(PolarizationOutcome::Found(p));
            }
        }
        let am = &QMatrix::from_int_rows(&a0) * &torus.m;
        return match classify_definiteness(&am, &torus.symbols)? {
            Definiteness::Indefinite(evidence) => {
                let is_identity = a0
                    .iter()
                    .enumerate()
                    .all(|(i, row)| row.iter().enumerate().all(|(j, &x)| x == i64::from(i == j)));
                let reduction = if is_identity {
                    "symmetry of A M forces A = c * I, and M is indefinite".to_string()
                } else {
                    format!(
                        "symmetry of A M forces A = c * A0 with A0 = {:?}, and A0 M is indefinite",
                        a0
                    )
                };
                Ok(PolarizationOutcome::NoneCertified(NoPolarizationCertificate {
                    reduction,
                    evidence: Some(evidence),
                    assumptions: vec![independence_assumption(&torus.symbols)],
                }))
            }
            Definiteness::Indeterminate => Err(SignError::Indeterminate.into()),
            // A definite A0 M would have produced a polarization above.
            _ => Err(TorusError::HypothesisFailed(
                "definite pairing escaped the direct construction".into(),
            )),
        };
    }

    // Bounded search over integer combinations of the kernel basis.
    let basis: Vec<Vec<i64>> = kernel
        .iter()
        .map(|v| big_to_i64_matrix(v, n).map(|m| m.into_iter().flatten().collect()))
        .collect::<Result<_, _>>()?;
    let d = basis.len();
    let mut examined = 0usize;
    for height in 1..=opts.combo_bound {
        let mut coeffs = vec![-height; d];
        loop {
            if coeffs.iter().any(|c| c.abs() == height) {
                examined += 1;
                if examined > opts.candidate_cap {
                    return Ok(PolarizationOutcome::Unknown);
                }
                let mut flat = vec![0i64; n * n];
                for (c, b) in coeffs.iter().zip(&basis) {
                    for (f, x) in flat.iter_mut().zip(b) {
                        *f += c * x;
                    }
                }
                if flat.iter().any(|&x| x != 0) && flat.iter().all(|&x| x.abs() <= opts.entry_bound)
                {
                    let a: Vec<Vec<i64>> =
                        (0..n).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect();
                    if let Ok(p) = Polarization::new(torus, a) {
                        return Ok(PolarizationOutcome::Found(p));
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == d {
                    break;
                }
                if coeffs[i] < height {
                    coeffs[i] += 1;
                    break;
                }
                coeffs[i] = -height;
                i += 1;
            }
            if i == d {
                break;
            }
        }
    }
    Ok(PolarizationOutcome::Unknown)
}

fn big_to_i64_matrix(flat: &[BigInt], n: usize) -> Result<Vec<Vec<i64>>, TorusError> {
    let vals: Option<Vec<i64>> = flat.iter().map(|x| x.to_i64()).collect();
    let vals =
        vals.ok_or_else(|| TorusError::DimensionMismatch("kernel basis entry exceeds i64".into()))?;
    Ok((0..n).map(|i| vals[i * n..(i + 1) * n].to_vec()).collect())
}

fn negate(a: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter().map(|r| r.iter().map(|&x| -x).collect()).collect()
}

/// Certificate that `B(M)` contains no non-trivial tropical curve, hence
/// that there are no non-trivial effective linear equivalences of 0-cycles.
#[derive(Clone, Debug, Serialize)]
pub struct NoCurveCertificate {
    pub dimension: usize,
    pub matrix: Vec<Vec<String>>,
    pub det_sign: Sign,
    pub evidence: IndefinitenessEvidence,
    pub statement: String,
    pub assumptions: Vec<String>,
}

/// Verify the hypotheses (irrational symmetric, invertible, indefinite) and
/// emit the non-existence certificate.
pub fn no_curve_certificate(torus: &TropicalTorus) -> Result<NoCurveCertificate, TorusError> {
    if !torus.irrational_symmetric {
        return Err(TorusError::NotFlaggedIrrationalSymmetric);
    }
    torus
        .validate_irrational_symmetric()
        .map_err(|e| TorusError::HypothesisFailed(e.to_string()))?;
    let det_sign = match sign_of(&torus.m.det(), &torus.symbols) {
        Ok(Sign::Zero) => return Err(TorusError::HypothesisFailed("M is singular".into())),
        Ok(s) => s,
        Err(SignError::Indeterminate) => {
            return Err(TorusError::HypothesisFailed(
                "invertibility indeterminate at current enclosures".into(),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let evidence = match classify_definiteness(&torus.m, &torus.symbols)? {
        Definiteness::PositiveDefinite => {
            return Err(TorusError::HypothesisFailed("M is positive definite".into()))
        }
        Definiteness::NegativeDefinite => {
            return Err(TorusError::HypothesisFailed("M is negative definite".into()))
        }
        Definiteness::Indeterminate => {
            return Err(TorusError::HypothesisFailed(
                "definiteness indeterminate at current enclosures".into(),
            ))
        }
        Definiteness::Indefinite(e) => e,
    };
    let matrix = (0..torus.n)
        .map(|i| {
            (0..torus.n)
                .map(|j| torus.m.at(i, j).display_with(&torus.symbols).to_string())
                .collect()
        })
        .collect();
    Ok(NoCurveCertificate {
        dimension: torus.n,
        matrix,
        det_sign,
        evidence,
        statement: "B(M) contains no non-trivial tropical curve; CH_0(B(M)) = Z^{B(M)}".into(),
        assumptions: vec![independence_assumption(&torus.symbols)],
    })
}

/// Symmetry of the polarization pairing on basis cycles:
/// `int_{g1} c(g2) = int_{g2} c(g1)`.
pub fn pairing_symmetry_holds(p: &Polarization) -> Result<bool, TorusError> {
    let n = p.torus.n;
    for i in 0..n {
        for j in 0..n {
            let mut gi = vec![0i64; n];
            gi[i] = 1;
            let mut gj = vec![0i64; n];
            gj[j] = 1;
            let lhs = integration_pairing(&p.torus, &gi, &p.c_of(&gj))?;
            let rhs = integration_pairing(&p.torus, &gj, &p.c_of(&gi))?;
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Deserialize)]
struct TorusRepr {
    n: usize,
    #[serde(rename = "M")]
    m: QMatrix,
    #[serde(default)]
    symbolic: bool,
    #[serde(default)]
    symbols: Option<SymbolSet>,
}

impl<'de> Deserialize<'de> for TropicalTorus {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let repr = TorusRepr::deserialize(de)?;
        if repr.m.rows() != repr.n {
            return Err(serde::de::Error::custom("torus dimension mismatch"));
        }
        let symbols = repr.symbols.unwrap_or_else(SymbolSet::empty);
        TropicalTorus::new(repr.m, symbols, repr.symbolic).map_err(serde::de::Error::custom)
    }
}

#[derive(Deserialize)]
struct PolarizationRepr {
    torus: TropicalTorus,
    #[serde(rename = "A")]
    a: Vec<Vec<i64>>,
}

impl<'de> Deserialize<'de> for Polarization {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let repr = PolarizationRepr::deserialize(de)?;
        Polarization::new(&repr.torus, repr.a).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    fn standard2() -> TropicalTorus {
        TropicalTorus::standard(2)
    }

    #[test]
    fn integration_pairing_examples() {
        let t = standard2();
        assert_eq!(
            integration_pairing(&t, &[1, 0], &[1, 0]).unwrap(),
            SymbolicReal::one()
        );
        assert_eq!(
            integration_pairing(&t, &[1, 0], &[0, 1]).unwrap(),
            SymbolicReal::zero()
        );
        let t2 =
            TropicalTorus::from_rat_rows(&[vec![r("2"), r("0")], vec![r("0"), r("3")]]).unwrap();
        assert_eq!(
            integration_pairing(&t2, &[0, 1], &[0, 1]).unwrap(),
            SymbolicReal::from_int(3)
        );
        assert!(matches!(
            integration_pairing(&t, &[1], &[0, 1]),
            Err(TorusError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn point_canonicalization() {
        let t = standard2();
        let p = t.point(&[r("7/2"), r("-1/4")]).unwrap();
        assert_eq!(p.coords(), &[r("1/2"), r("3/4")]);
        let t2 =
            TropicalTorus::from_rat_rows(&[vec![r("2"), r("0")], vec![r("0"), r("3")]]).unwrap();
        let q = t2.point(&[r("5/2"), r("-1")]).unwrap();
        assert_eq!(q.coords(), &[r("1/2"), r("2")]);
    }

    #[test]
    fn albanese_examples() {
        let t = standard2();
        // a + b = c + d on a rational-slope circle: class vanishes
        let z = ZeroCycle::new(vec![
            (t.point(&[r("1/10"), r("0")]).unwrap(), 1),
            (t.point(&[r("3/10"), r("0")]).unwrap(), 1),
            (t.point(&[r("3/20"), r("0")]).unwrap(), -1),
            (t.point(&[r("1/4"), r("0")]).unwrap(), -1),
        ]);
        assert!(albanese_of_cycle(&t, &z).unwrap().is_zero());

        let z2 = ZeroCycle::new(vec![
            (t.point(&[r("1/2"), r("0")]).unwrap(), 1),
            (t.point(&[r("0"), r("0")]).unwrap(), -1),
        ]);
        assert_eq!(
            albanese_of_cycle(&t, &z2).unwrap().coords(),
            &[r("1/2"), r("0")]
        );

        let z3 = ZeroCycle::new(vec![(t.point(&[r("0"), r("0")]).unwrap(), 2)]);
        assert!(matches!(
            albanese_of_cycle(&t, &z3),
            Err(TorusError::NonzeroDegree(2))
        ));
    }

    #[test]
    fn albanese_additive_and_lift_invariant() {
        let t =
            TropicalTorus::from_rat_rows(&[vec![r("2"), r("1")], vec![r("0"), r("1")]]).unwrap();
        let mk = |coords: &[&str], mults: &[i64]| {
            ZeroCycle::new(
                coords
                    .chunks(2)
                    .zip(mults)
                    .map(|(c, &m)| (t.point(&[r(c[0]), r(c[1])]).unwrap(), m))
                    .collect(),
            )
        };
        let z1 = mk(&["1/3", "1/5", "0", "0"], &[1, -1]);
        let z2 = mk(&["1/7", "2/3", "1/2", "1/2"], &[2, -2]);
        let a12 = albanese_of_cycle(&t, &z1.add(&z2)).unwrap();
        let sum = alb_add(
            &t,
            &albanese_of_cycle(&t, &z1).unwrap(),
            &albanese_of_cycle(&t, &z2).unwrap(),
        )
        .unwrap();
        assert_eq!(a12, sum);

        // Shifting a lift by a lattice vector M*(1,-2) leaves the class alone;
        // points canonicalize, so equality of the cycles is immediate, and the
        // classes agree as well.
        let m = t.m_rat().unwrap();
        let shift: Vec<Rat> = (0..2)
            .map(|i| &m[i][0] * &r("1") + &m[i][1] * &r("-2"))
            .collect();
        let shifted = ZeroCycle::new(vec![
            (
                t.point(&[&r("1/3") + &shift[0], &r("1/5") + &shift[1]]).unwrap(),
                1,
            ),
            (t.point(&[r("0"), r("0")]).unwrap(), -1),
        ]);
        assert_eq!(
            albanese_of_cycle(&t, &z1).unwrap(),
            albanese_of_cycle(&t, &shifted).unwrap()
        );
    }

    #[test]
    fn polarization_identity_torus() {
        let t = standard2();
        match find_polarization(&t).unwrap() {
            PolarizationOutcome::Found(p) => {
                assert_eq!(p.a_matrix(), &[vec![1, 0], vec![0, 1]]);
                assert!(pairing_symmetry_holds(&p).unwrap());
            }
            _ => panic!("expected polarization on the standard torus"),
        }
    }

    #[test]
    fn polarization_spd_rational_matrix() {
        let t =
            TropicalTorus::from_rat_rows(&[vec![r("2"), r("1")], vec![r("1"), r("1")]]).unwrap();
        match find_polarization(&t).unwrap() {
            PolarizationOutcome::Found(p) => {
                assert_eq!(p.a_matrix(), &[vec![1, 0], vec![0, 1]]);
            }
            _ => panic!("M itself is SPD, A = I must be found"),
        }
    }

    #[test]
    fn no_polarization_for_irrational_symmetric_indefinite() {
        // M = [[a, b], [b, c]] with a ~ 1, b ~ 2, c ~ 1: det ~ -3 < 0.
        let syms = SymbolSet::new(
            vec![
                ("a".into(), r("9/10"), r("11/10")),
                ("b".into(), r("19/10"), r("21/10")),
                ("c".into(), r("9/10"), r("11/10")),
            ],
            true,
        )
        .unwrap();
        let a = SymbolicReal::symbol(0);
        let b = SymbolicReal::symbol(1);
        let c = SymbolicReal::symbol(2);
        let m = QMatrix::from_rows(vec![vec![a, b.clone()], vec![b, c]]);
        let t = TropicalTorus::new(m, syms, true).unwrap();
        match find_polarization(&t).unwrap() {
            PolarizationOutcome::NoneCertified(cert) => {
                assert!(cert.reduction.contains("A = c * I"));
                assert!(!cert.assumptions.is_empty());
            }
            _ => panic!("expected a no-polarization certificate"),
        }
        let nc = no_curve_certificate(&t).unwrap();
        assert_eq!(nc.det_sign, Sign::Negative);
        assert!(nc.statement.contains("no non-trivial tropical curve"));
    }

    #[test]
    fn no_curve_rejects_definite_or_unflagged() {
        let t = standard2();
        assert!(matches!(
            no_curve_certificate(&t),
            Err(TorusError::NotFlaggedIrrationalSymmetric)
        ));

        // Symbolic but positive definite by enclosures.
        let syms = SymbolSet::new(
            vec![
                ("a".into(), r("2"), r("21/10")),
                ("b".into(), r("1/10"), r("1/5")),
                ("c".into(), r("3"), r("31/10")),
            ],
            true,
        )
        .unwrap();
        let a = SymbolicReal::symbol(0);
        let b = SymbolicReal::symbol(1);
        let c = SymbolicReal::symbol(2);
        let m = QMatrix::from_rows(vec![vec![a, b.clone()], vec![b, c]]);
        let t2 = TropicalTorus::new(m, syms, true).unwrap();
        match no_curve_certificate(&t2) {
            Err(TorusError::HypothesisFailed(msg)) => {
                assert!(msg.contains("positive definite"));
            }
            other => panic!("expected definiteness failure, got {other:?}"),
        }
    }

    #[test]
    fn polarization_on_non_symmetric_unimodular_matrix() {
        let t =
            TropicalTorus::from_rat_rows(&[vec![r("1"), r("1")], vec![r("0"), r("1")]]).unwrap();
        match find_polarization(&t).unwrap() {
            PolarizationOutcome::Found(p) => {
                let am = p.pairing();
                assert!(am.is_symmetric());
                for k in 1..=2 {
                    assert_eq!(
                        sign_of(&am.leading_principal_minor(k), t.symbols()).unwrap(),
                        Sign::Positive
                    );
                }
                assert!(pairing_symmetry_holds(&p).unwrap());
            }
            _ => panic!("non-symmetric unimodular M still admits a polarization"),
        }
    }

    #[test]
    fn torus_json_round_trip() {
        let t =
            TropicalTorus::from_rat_rows(&[vec![r("2"), r("1")], vec![r("1"), r("1")]]).unwrap();
        let js = serde_json::to_string(&t).unwrap();
        let back: TropicalTorus = serde_json::from_str(&js).unwrap();
        assert_eq!(t, back);
    }
}
