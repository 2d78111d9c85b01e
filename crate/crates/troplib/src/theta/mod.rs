//! Tropical theta functions, their Legendre-dual regular subdivisions,
//! regularity testing, the perturbation search for regular theta divisors,
//! extraction of the divisor as a trivalent curve in dimension 2, and the
//! two-point translation search.
//!
//! The theta function of a polarized torus is the quasi-periodic max
//! `f(v) = max_alpha { alpha(v) - |alpha#|^2 / 2k + delta(alpha) }` over
//! integer covectors; its bend locus descends to the torus. All evaluation
//! happens over a finite window certified against the quadratic growth of
//! the heights.

mod curve2d;
mod search;
mod subdivision;

pub use curve2d::{theta_curve_2d, through_two_points, TropicalDivisor2D, TwoPointPlacement};
pub use search::{find_regular_theta, SearchOptions};
pub use subdivision::{regular_subdivision, regularity_check, Cell, PeriodicSubdivision, RegularityReport};

use crate::curve::CurveError;
use crate::exactnum::{sqrt_upper, LatticeError, LinAlgError, Rat, SignError};
use crate::torus::{Polarization, TorusError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ThetaError {
    #[error("dimension {0} is outside the engine bound")]
    UnsupportedDimension(usize),
    #[error("operation requires rational data")]
    RequiresRationalData,
    #[error("window cap exhausted while saturating the subdivision")]
    WindowTooSmall,
    #[error("subdivision is not regular")]
    NotRegular,
    #[error("search exhausted after {0} attempts")]
    SearchExhausted(usize),
    #[error("coset representative appears twice: {0:?}")]
    DuplicateCosetRep(Vec<i64>),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Sign(#[from] SignError),
}

/// Theta datum: a rational polarization, a level `k`, and a periodic offset
/// `delta` stored on canonical coset representatives of the covector lattice
/// modulo `k A^T Z^n`. Derived data (coset representatives, Gram matrices,
/// oscillation) is precomputed once at construction.
#[derive(Clone, Debug)]
pub struct ThetaData {
    pol: Polarization,
    k: u32,
    delta: BTreeMap<Vec<i64>, Rat>,
    lattice_rows: Vec<Vec<Rat>>,
    reps: Vec<Vec<i64>>,
    osc: Rat,
    metric_gram: Vec<Vec<Rat>>,
    dual_gram: Vec<Vec<Rat>>,
}

impl ThetaData {
    pub fn new(
        pol: Polarization,
        k: u32,
        delta: Vec<(Vec<i64>, Rat)>,
    ) -> Result<Self, ThetaError> {
        if k == 0 {
            return Err(ThetaError::Internal("level k must be positive".into()));
        }
        if !pol.torus().is_rational() {
            return Err(ThetaError::RequiresRationalData);
        }
        let n = pol.torus().dim();
        let a = pol.a_matrix();
        let lattice_rows: Vec<Vec<Rat>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Rat::from_int(k as i64 * a[j][i]))
                    .collect()
            })
            .collect();
        let reps = enumerate_reps(&lattice_rows)?;

        let dual_gram = pol.dual_gram()?;
        let m = pol.torus().m_rat()?;
        let m_inv = crate::exactnum::rat_inverse(&m)?;
        let am = pol
            .pairing()
            .as_rational()
            .ok_or(ThetaError::RequiresRationalData)?;
        let m_inv_t: Vec<Vec<Rat>> = (0..n)
            .map(|i| (0..n).map(|j| m_inv[j][i].clone()).collect())
            .collect();
        let metric_gram = crate::exactnum::rat_mat_mul(
            &crate::exactnum::rat_mat_mul(&m_inv_t, &am),
            &m_inv,
        );

        let mut td = ThetaData {
            pol,
            k,
            delta: BTreeMap::new(),
            lattice_rows,
            reps,
            osc: Rat::zero(),
            metric_gram,
            dual_gram,
        };
        for (rep, val) in delta {
            if rep.len() != n {
                return Err(ThetaError::Internal("coset representative dimension".into()));
            }
            let canon = td.coset_rep(&rep);
            if td.delta.insert(canon.clone(), val).is_some() {
                return Err(ThetaError::DuplicateCosetRep(canon));
            }
        }
        let mut lo = Rat::zero();
        let mut hi = Rat::zero();
        for rep in &td.reps {
            let v = td.delta.get(rep).cloned().unwrap_or_else(Rat::zero);
            if v < lo {
                lo = v.clone();
            }
            if v > hi {
                hi = v;
            }
        }
        td.osc = &hi - &lo;
        Ok(td)
    }

    pub fn constant(pol: Polarization, k: u32) -> Result<Self, ThetaError> {
        ThetaData::new(pol, k, vec![])
    }

    pub fn polarization(&self) -> &Polarization {
        &self.pol
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.pol.torus().dim()
    }

    pub fn delta_entries(&self) -> &BTreeMap<Vec<i64>, Rat> {
        &self.delta
    }

    /// Rows of the periodicity lattice matrix `k A^T` of `delta`.
    pub fn delta_lattice_rows(&self) -> &[Vec<Rat>] {
        &self.lattice_rows
    }

    /// Canonical representative of a covector modulo `k A^T Z^n`.
    pub fn coset_rep(&self, alpha: &[i64]) -> Vec<i64> {
        let v: Vec<Rat> = alpha.iter().map(|&x| Rat::from_int(x)).collect();
        let red = crate::exactnum::reduce_mod_lattice(&v, &self.lattice_rows)
            .expect("invertible periodicity lattice");
        red.into_iter()
            .map(|r| {
                num::ToPrimitive::to_i64(&r.to_integer().expect("integer reduction"))
                    .expect("small representative")
            })
            .collect()
    }

    /// All canonical coset representatives; their number is `k^n |det A|`.
    pub fn coset_reps(&self) -> &[Vec<i64>] {
        &self.reps
    }

    pub fn delta_of(&self, alpha: &[i64]) -> Rat {
        let rep = self.coset_rep(alpha);
        self.delta.get(&rep).cloned().unwrap_or_else(Rat::zero)
    }

    /// Oscillation of `delta` over a full set of coset representatives.
    pub fn delta_oscillation(&self) -> &Rat {
        &self.osc
    }

    /// Squared dual-metric norm `|alpha#|^2 = alpha^T M (A M)^{-1} M^T alpha`.
    pub fn covector_norm_sq(&self, alpha: &[i64]) -> Rat {
        let av: Vec<Rat> = alpha.iter().map(|&x| Rat::from_int(x)).collect();
        let gv = crate::exactnum::rat_mat_vec(&self.dual_gram, &av);
        av.iter().zip(&gv).map(|(x, y)| x * y).sum()
    }

    /// Height of the Legendre-dual lifted point: `|alpha#|^2/(2k) - delta`.
    pub fn height(&self, alpha: &[i64]) -> Rat {
        let q = self.covector_norm_sq(alpha);
        &(&q / &Rat::from_int(2 * self.k as i64)) - &self.delta_of(alpha)
    }

    /// Metric Gram matrix `G = M^{-T} (A M) M^{-1}` on tangent vectors.
    pub fn metric_gram(&self) -> &[Vec<Rat>] {
        &self.metric_gram
    }

    /// Integer box certified to contain every covector whose theta term can
    /// compete at `v`: `|alpha#| <= k |v|_g + sqrt(k^2 |v|_g^2 + 2 k osc)`.
    pub fn certified_box(&self, v: &[Rat]) -> Result<Vec<i64>, ThetaError> {
        let n = self.dim();
        let gv = crate::exactnum::rat_mat_vec(&self.metric_gram, v);
        let norm_sq: Rat = v.iter().zip(&gv).map(|(x, y)| x * y).sum();
        let kq = Rat::from_int(self.k as i64);
        let radius = &(&kq * &sqrt_upper(&norm_sq))
            + &sqrt_upper(
                &(&(&(&kq * &kq) * &norm_sq) + &(&(&kq * &Rat::from_int(2)) * &self.osc)),
            );
        let mut bounds = Vec::with_capacity(n);
        for i in 0..n {
            let b = &radius * &sqrt_upper(&self.metric_gram[i][i]);
            bounds.push(
                num::ToPrimitive::to_i64(&b.ceil_int())
                    .ok_or_else(|| ThetaError::Internal("certified box overflow".into()))?,
            );
        }
        Ok(bounds)
    }

    fn term(&self, alpha: &[i64], v: &[Rat]) -> Rat {
        let lin: Rat = alpha
            .iter()
            .zip(v)
            .map(|(&a, x)| &Rat::from_int(a) * x)
            .sum();
        let q = self.covector_norm_sq(alpha);
        &(&lin - &(&q / &Rat::from_int(2 * self.k as i64))) + &self.delta_of(alpha)
    }
}

fn enumerate_reps(lattice_rows: &[Vec<Rat>]) -> Result<Vec<Vec<i64>>, ThetaError> {
    let n = lattice_rows.len();
    // The canonical domain is the parallelepiped spanned by the columns;
    // scan its bounding box.
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    for i in 0..n {
        for j in 0..n {
            let c = num::ToPrimitive::to_i64(&lattice_rows[i][j].to_integer().unwrap()).unwrap();
            if c < 0 {
                lo[i] += c;
            } else {
                hi[i] += c;
            }
        }
    }
    let mut reps = std::collections::BTreeSet::new();
    let mut cursor = lo.clone();
    loop {
        let v: Vec<Rat> = cursor.iter().map(|&x| Rat::from_int(x)).collect();
        let red = crate::exactnum::reduce_mod_lattice(&v, lattice_rows)?;
        reps.insert(
            red.into_iter()
                .map(|r| {
                    num::ToPrimitive::to_i64(&r.to_integer().expect("integer reduction"))
                        .expect("small representative")
                })
                .collect::<Vec<i64>>(),
        );
        let mut i = 0;
        loop {
            if i == n {
                break;
            }
            if cursor[i] < hi[i] {
                cursor[i] += 1;
                break;
            }
            cursor[i] = lo[i];
            i += 1;
        }
        if i == n {
            break;
        }
    }
    Ok(reps.into_iter().collect())
}

/// Value and argmax set of the theta function at a rational point, computed
/// over the certified finite window.
pub fn theta_eval(td: &ThetaData, v: &[Rat]) -> Result<(Rat, Vec<Vec<i64>>), ThetaError> {
    let n = td.dim();
    if v.len() != n {
        return Err(ThetaError::Internal("point dimension".into()));
    }
    let bounds = td.certified_box(v)?;
    let mut best: Option<Rat> = None;
    let mut argmax: Vec<Vec<i64>> = Vec::new();
    let mut alpha: Vec<i64> = bounds.iter().map(|&b| -b).collect();
    loop {
        let t = td.term(&alpha, v);
        match &best {
            Some(b) if &t > b => {
                best = Some(t);
                argmax = vec![alpha.clone()];
            }
            Some(b) if &t == b => argmax.push(alpha.clone()),
            None => {
                best = Some(t);
                argmax = vec![alpha.clone()];
            }
            _ => {}
        }
        let mut i = 0;
        loop {
            if i == n {
                break;
            }
            if alpha[i] < bounds[i] {
                alpha[i] += 1;
                break;
            }
            alpha[i] = -bounds[i];
            i += 1;
        }
        if i == n {
            break;
        }
    }
    argmax.sort();
    Ok((best.expect("nonempty window"), argmax))
}

/// Quasi-periodicity defect
/// `f(v + M g) - f(v) - k <A^T g, v> - k g^T (A M) g / 2`; identically zero.
pub fn quasi_periodicity_defect(
    td: &ThetaData,
    v: &[Rat],
    gamma: &[i64],
) -> Result<Rat, ThetaError> {
    let n = td.dim();
    if v.len() != n || gamma.len() != n {
        return Err(ThetaError::Internal("dimension mismatch".into()));
    }
    let m = td.pol.torus().m_rat()?;
    let gv: Vec<Rat> = gamma.iter().map(|&x| Rat::from_int(x)).collect();
    let mg = crate::exactnum::rat_mat_vec(&m, &gv);
    let shifted: Vec<Rat> = v.iter().zip(&mg).map(|(a, b)| a + b).collect();
    let (f_shift, _) = theta_eval(td, &shifted)?;
    let (f_v, _) = theta_eval(td, v)?;
    let c_gamma = td.pol.c_of(gamma);
    let lin: Rat = c_gamma
        .iter()
        .zip(v)
        .map(|(&c, x)| &Rat::from_int(c) * x)
        .sum();
    let am = td
        .pol
        .pairing()
        .as_rational()
        .ok_or(ThetaError::RequiresRationalData)?;
    let amg = crate::exactnum::rat_mat_vec(&am, &gv);
    let norm: Rat = gv.iter().zip(&amg).map(|(x, y)| x * y).sum();
    let kq = Rat::from_int(td.k as i64);
    Ok(&(&(&f_shift - &f_v) - &(&kq * &lin)) - &(&(&kq * &norm) / &Rat::from_int(2)))
}

// ---- serde ----

#[derive(Serialize, Deserialize)]
struct DeltaEntry {
    rep: Vec<i64>,
    value: Rat,
}

#[derive(Serialize, Deserialize)]
struct ThetaDataRepr {
    polarization: Polarization,
    k: u32,
    delta: Vec<DeltaEntry>,
}

impl Serialize for ThetaData {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let repr = ThetaDataRepr {
            polarization: self.pol.clone(),
            k: self.k,
            delta: self
                .delta
                .iter()
                .map(|(rep, value)| DeltaEntry {
                    rep: rep.clone(),
                    value: value.clone(),
                })
                .collect(),
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ThetaData {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let repr = ThetaDataRepr::deserialize(de)?;
        ThetaData::new(
            repr.polarization,
            repr.k,
            repr.delta.into_iter().map(|e| (e.rep, e.value)).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}


#[cfg(test)]
mod tests {
    use super::tests_support::identity_theta;
    use super::*;
    use crate::torus::TropicalTorus;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn eval_at_origin() {
        let td = identity_theta(2, 1);
        let (val, argmax) = theta_eval(&td, &[r("0"), r("0")]).unwrap();
        assert_eq!(val, r("0"));
        assert_eq!(argmax, vec![vec![0, 0]]);
    }

    #[test]
    fn eval_tie_at_half() {
        let td = identity_theta(2, 1);
        let (val, argmax) = theta_eval(&td, &[r("1/2"), r("0")]).unwrap();
        assert_eq!(val, r("0"));
        assert_eq!(argmax, vec![vec![0, 0], vec![1, 0]]);
    }

    #[test]
    fn eval_on_one_torus() {
        let td = identity_theta(1, 1);
        let (val, argmax) = theta_eval(&td, &[r("1/4")]).unwrap();
        assert_eq!(val, r("0"));
        assert_eq!(argmax, vec![vec![0]]);
    }

    #[test]
    fn enlarging_the_window_does_not_change_values() {
        let td = identity_theta(2, 2);
        let v = [r("1/3"), r("-2/7")];
        let (val, argmax) = theta_eval(&td, &v).unwrap();
        // Recompute over a much larger box by brute force.
        let mut best = None;
        let mut am = Vec::new();
        for a in -9i64..=9 {
            for b in -9i64..=9 {
                let t = td.term(&[a, b], &v);
                match &best {
                    Some(x) if &t > x => {
                        best = Some(t);
                        am = vec![vec![a, b]];
                    }
                    Some(x) if &t == x => am.push(vec![a, b]),
                    None => {
                        best = Some(t);
                        am = vec![vec![a, b]];
                    }
                    _ => {}
                }
            }
        }
        am.sort();
        assert_eq!(val, best.unwrap());
        assert_eq!(argmax, am);
    }

    #[test]
    fn quasi_periodicity_identity_example() {
        let td = identity_theta(2, 1);
        assert_eq!(
            quasi_periodicity_defect(&td, &[r("1/3"), r("0")], &[1, 0]).unwrap(),
            r("0")
        );
        assert_eq!(
            quasi_periodicity_defect(&td, &[r("1/3"), r("0")], &[0, 0]).unwrap(),
            r("0")
        );
    }

    #[test]
    fn quasi_periodicity_random_instances() {
        let mut rng = StdRng::seed_from_u64(7);
        let torus = TropicalTorus::from_rat_rows(&[
            vec![r("2"), r("1")],
            vec![r("1"), r("1")],
        ])
        .unwrap();
        let pol = Polarization::identity(&torus).unwrap();
        for k in 1..=3u32 {
            let reps_n = {
                let td0 = ThetaData::constant(pol.clone(), k).unwrap();
                td0.coset_reps().to_vec()
            };
            let delta: Vec<(Vec<i64>, Rat)> = reps_n
                .iter()
                .map(|rep| {
                    (
                        rep.clone(),
                        Rat::new(rng.random_range(-9..=9), rng.random_range(1..=12)),
                    )
                })
                .collect();
            let td = ThetaData::new(pol.clone(), k, delta).unwrap();
            for _ in 0..10 {
                let v = [
                    Rat::new(rng.random_range(-20..=20), rng.random_range(1..=9)),
                    Rat::new(rng.random_range(-20..=20), rng.random_range(1..=9)),
                ];
                let gamma = [rng.random_range(-2..=2), rng.random_range(-2..=2)];
                assert_eq!(quasi_periodicity_defect(&td, &v, &gamma).unwrap(), r("0"));
            }
        }
    }

    #[test]
    fn coset_reps_count_matches_index() {
        let td = identity_theta(2, 2);
        let reps = td.coset_reps();
        assert_eq!(reps.len(), 4);
        let td3 = identity_theta(1, 3);
        assert_eq!(td3.coset_reps().len(), 3);
    }

    #[test]
    fn delta_is_stored_on_cosets() {
        let torus = TropicalTorus::standard(2);
        let pol = Polarization::identity(&torus).unwrap();
        // (5, 3) reduces to (1, 1) mod 2Z^2: duplicate rep must be rejected.
        let dup = ThetaData::new(
            pol.clone(),
            2,
            vec![
                (vec![1, 1], r("1/10")),
                (vec![5, 3], r("1/5")),
            ],
        );
        assert!(matches!(dup, Err(ThetaError::DuplicateCosetRep(_))));
        let td = ThetaData::new(pol, 2, vec![(vec![5, 3], r("1/5"))]).unwrap();
        assert_eq!(td.delta_of(&[1, 1]), r("1/5"));
        assert_eq!(td.delta_of(&[-1, -1]), r("1/5"));
        assert_eq!(td.delta_of(&[0, 0]), r("0"));
    }
}
