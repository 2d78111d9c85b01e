use super::{ThetaData, ThetaError};
use crate::exactnum::{rat_solve, Rat};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Full-dimensional cell of the dual subdivision: the set of lifted lattice
/// points lying on one supporting affine function of the lower hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Extreme points of the cell (sorted). In dimension 3 the full argmax
    /// set stands in for the extreme points.
    pub vertices: Vec<Vec<i64>>,
    /// Every window lattice point on the supporting function (sorted).
    pub points: Vec<Vec<i64>>,
    /// Dual position: the point of the tropical side where exactly this
    /// cell's covectors attain the maximum.
    pub tie_point: Vec<Rat>,
}

/// Lower-hull subdivision of the covector lattice induced by the heights
/// `|alpha#|^2/(2k) - delta(alpha)`, stored through one cell per orbit of
/// the translation lattice `k A^T Z^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicSubdivision {
    pub dim: usize,
    pub k: u32,
    /// Rows of the translation lattice matrix `k A^T`.
    pub lattice: Vec<Vec<i64>>,
    /// Canonical cells: lexicographically least vertex is a canonical coset
    /// representative.
    pub cells: Vec<Cell>,
    /// Heights on the saturated window.
    pub heights: BTreeMap<Vec<i64>, Rat>,
    pub window_lo: Vec<i64>,
    pub window_hi: Vec<i64>,
}

impl PeriodicSubdivision {
    fn lattice_rows_rat(&self) -> Vec<Vec<Rat>> {
        self.lattice
            .iter()
            .map(|row| row.iter().map(|&x| Rat::from_int(x)).collect())
            .collect()
    }

    pub fn canonical_point(&self, p: &[i64]) -> Result<Vec<i64>, ThetaError> {
        let v: Vec<Rat> = p.iter().map(|&x| Rat::from_int(x)).collect();
        let red = crate::exactnum::reduce_mod_lattice(&v, &self.lattice_rows_rat())?;
        Ok(red
            .into_iter()
            .map(|r| {
                num::ToPrimitive::to_i64(&r.to_integer().expect("integer reduction"))
                    .expect("small representative")
            })
            .collect())
    }

    /// Canonical form of a point set: translate so the least point becomes
    /// its canonical representative.
    pub fn canonical_form(&self, points: &[Vec<i64>]) -> Result<Vec<Vec<i64>>, ThetaError> {
        let least = points.iter().min().expect("nonempty cell");
        let rep = self.canonical_point(least)?;
        let shift: Vec<i64> = least.iter().zip(&rep).map(|(a, b)| a - b).collect();
        let mut out: Vec<Vec<i64>> = points
            .iter()
            .map(|p| p.iter().zip(&shift).map(|(a, b)| a - b).collect())
            .collect();
        out.sort();
        Ok(out)
    }

    /// Is this point set a lattice translate of one of the stored cells?
    pub fn is_cell_translate(&self, points: &[Vec<i64>]) -> Result<bool, ThetaError> {
        let canon = self.canonical_form(points)?;
        Ok(self.cells.iter().any(|c| c.points == canon))
    }
}

/// Covolume of the translation lattice: number of canonical cells' worth of
/// volume, `|det(k A^T)|`.
fn lattice_covolume(lattice: &[Vec<i64>]) -> Rat {
    let n = lattice.len();
    let q = crate::exactnum::QMatrix::from_int_rows(
        &lattice
            .iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>(),
    );
    let _ = n;
    q.det().as_rational().expect("integer determinant").abs()
}

/// Twice the area of a convex polygon given by its hull cycle.
fn shoelace_twice(hull: &[Vec<i64>]) -> i64 {
    let mut acc = 0i64;
    for i in 0..hull.len() {
        let a = &hull[i];
        let b = &hull[(i + 1) % hull.len()];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc.abs()
}

/// Convex hull of integer points in counterclockwise order (monotone chain;
/// collinear boundary points are dropped).
pub(crate) fn convex_hull_2d(points: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut pts: Vec<Vec<i64>> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: &Vec<i64>, a: &Vec<i64>, b: &Vec<i64>| -> i64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<Vec<i64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<i64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Lower-hull cells of the lifted heights over a finite window. A candidate
/// is accepted only when its certified competitor ball lies inside the
/// window, so accepted cells are exact; completeness of the enumeration is
/// certified afterwards by the tiling volume.
fn build_cells(
    td: &ThetaData,
    heights: &BTreeMap<Vec<i64>, Rat>,
    window_lo: &[i64],
    window_hi: &[i64],
    seeds: &[Vec<i64>],
    nr: i64,
) -> Result<Vec<Cell>, ThetaError> {
    let n = td.dim();
    let mut seen: BTreeSet<Vec<Vec<i64>>> = BTreeSet::new();
    let mut seen_ties: BTreeSet<Vec<Rat>> = BTreeSet::new();
    let mut cells = Vec::new();

    let in_window = |p: &[i64]| {
        p.iter()
            .zip(window_lo.iter().zip(window_hi))
            .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    };

    let mut consider = |tie: Vec<Rat>,
                        base: &Vec<i64>,
                        seen: &mut BTreeSet<Vec<Vec<i64>>>,
                        seen_ties: &mut BTreeSet<Vec<Rat>>,
                        cells: &mut Vec<Cell>|
     -> Result<(), ThetaError> {
        if !seen_ties.insert(tie.clone()) {
            return Ok(());
        }
        let val = |p: &Vec<i64>| -> Rat {
            let lin: Rat = p.iter().zip(&tie).map(|(&a, x)| &Rat::from_int(a) * x).sum();
            &lin - &heights[p]
        };
        let target = val(base);
        let mut argmax = Vec::new();
        for p in heights.keys() {
            let v = val(p);
            if v > target {
                return Ok(());
            }
            if v == target {
                argmax.push(p.clone());
            }
        }
        // Certify that no covector outside the window competes at this tie
        // point; otherwise the argmax set cannot be trusted.
        let bounds = td.certified_box(&tie)?;
        let ball_inside = bounds
            .iter()
            .enumerate()
            .all(|(i, &b)| -b >= window_lo[i] && b <= window_hi[i]);
        if !ball_inside {
            return Ok(());
        }
        argmax.sort();
        if seen.insert(argmax.clone()) {
            let vertices = match n {
                1 => {
                    vec![argmax.first().unwrap().clone(), argmax.last().unwrap().clone()]
                }
                2 => {
                    let mut h = convex_hull_2d(&argmax);
                    h.sort();
                    h
                }
                _ => argmax.clone(),
            };
            cells.push(Cell {
                vertices,
                points: argmax,
                tie_point: tie,
            });
        }
        Ok(())
    };

    match n {
        1 => {
            // Lower convex hull scan along the line.
            let pts: Vec<&Vec<i64>> = heights.keys().collect();
            let mut hull: Vec<&Vec<i64>> = Vec::new();
            for p in pts {
                while hull.len() >= 2 {
                    let a = hull[hull.len() - 2];
                    let b = hull[hull.len() - 1];
                    // keep if (b - a, h(b) - h(a)) turns strictly below p
                    let lhs = &(&heights[p] - &heights[a]) * &Rat::from_int(b[0] - a[0]);
                    let rhs = &(&heights[b] - &heights[a]) * &Rat::from_int(p[0] - a[0]);
                    if lhs < rhs {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(p);
            }
            for w in hull.windows(2) {
                let (a, b) = (w[0], w[1]);
                let tie = vec![&(&heights[b] - &heights[a]) / &Rat::from_int(b[0] - a[0])];
                consider(tie, a, &mut seen, &mut seen_ties, &mut cells)?;
            }
        }
        2 => {
            for p in seeds {
                let hp = &heights[p];
                let mut neighbors = Vec::new();
                for dx in -nr..=nr {
                    for dy in -nr..=nr {
                        let q = vec![p[0] + dx, p[1] + dy];
                        if q > *p && in_window(&q) {
                            neighbors.push(q);
                        }
                    }
                }
                for qi in 0..neighbors.len() {
                    for ri in (qi + 1)..neighbors.len() {
                        let q = &neighbors[qi];
                        let r = &neighbors[ri];
                        let det = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
                        if det == 0 {
                            continue;
                        }
                        let a = vec![
                            vec![Rat::from_int(q[0] - p[0]), Rat::from_int(q[1] - p[1])],
                            vec![Rat::from_int(r[0] - p[0]), Rat::from_int(r[1] - p[1])],
                        ];
                        let rhs = vec![&heights[q] - hp, &heights[r] - hp];
                        let Ok(tie) = rat_solve(&a, &rhs) else {
                            continue;
                        };
                        consider(tie, p, &mut seen, &mut seen_ties, &mut cells)?;
                    }
                }
            }
        }
        3 => {
            for p in seeds {
                let hp = &heights[p];
                let mut neighbors = Vec::new();
                for dx in -nr..=nr {
                    for dy in -nr..=nr {
                        for dz in -nr..=nr {
                            let q = vec![p[0] + dx, p[1] + dy, p[2] + dz];
                            if q > *p && in_window(&q) {
                                neighbors.push(q);
                            }
                        }
                    }
                }
                for qi in 0..neighbors.len() {
                    for ri in (qi + 1)..neighbors.len() {
                        for si in (ri + 1)..neighbors.len() {
                            let q = &neighbors[qi];
                            let r = &neighbors[ri];
                            let s = &neighbors[si];
                            let rows = vec![
                                (0..3).map(|i| Rat::from_int(q[i] - p[i])).collect::<Vec<_>>(),
                                (0..3).map(|i| Rat::from_int(r[i] - p[i])).collect(),
                                (0..3).map(|i| Rat::from_int(s[i] - p[i])).collect(),
                            ];
                            let rhs = vec![&heights[q] - hp, &heights[r] - hp, &heights[s] - hp];
                            let Ok(tie) = rat_solve(&rows, &rhs) else {
                                continue;
                            };
                            consider(tie, p, &mut seen, &mut seen_ties, &mut cells)?;
                        }
                    }
                }
            }
        }
        _ => return Err(ThetaError::UnsupportedDimension(n)),
    }
    Ok(cells)
}

/// Build the dual subdivision of the theta data over a saturated window,
/// keeping one cell per translation orbit.
pub fn regular_subdivision(td: &ThetaData) -> Result<PeriodicSubdivision, ThetaError> {
    let n = td.dim();
    if n == 0 || n > 3 {
        return Err(ThetaError::UnsupportedDimension(n));
    }
    let reps = td.coset_reps().to_vec();
    let mut rep_lo = vec![i64::MAX; n];
    let mut rep_hi = vec![i64::MIN; n];
    for rep in &reps {
        for i in 0..n {
            rep_lo[i] = rep_lo[i].min(rep[i]);
            rep_hi[i] = rep_hi[i].max(rep[i]);
        }
    }
    let lattice: Vec<Vec<i64>> = td
        .delta_lattice_rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| num::ToPrimitive::to_i64(&x.to_integer().unwrap()).unwrap())
                .collect()
        })
        .collect();
    let covol = lattice_covolume(&lattice);

    const MAX_WINDOW_POINTS: usize = 20_000;
    for attempt in 0..4u32 {
        let margin = 4i64 << attempt;
        let nr = 2 + attempt as i64;
        let window_lo: Vec<i64> = rep_lo.iter().map(|&x| x - margin).collect();
        let window_hi: Vec<i64> = rep_hi.iter().map(|&x| x + margin).collect();
        let count: i64 = window_lo
            .iter()
            .zip(&window_hi)
            .map(|(&lo, &hi)| hi - lo + 1)
            .product();
        if count as usize > MAX_WINDOW_POINTS {
            return Err(ThetaError::WindowTooSmall);
        }
        let mut heights = BTreeMap::new();
        let mut cursor = window_lo.clone();
        loop {
            heights.insert(cursor.clone(), td.height(&cursor));
            let mut i = 0;
            loop {
                if i == n {
                    break;
                }
                if cursor[i] < window_hi[i] {
                    cursor[i] += 1;
                    break;
                }
                cursor[i] = window_lo[i];
                i += 1;
            }
            if i == n {
                break;
            }
        }
        // Seeds: candidate anchors around the fundamental representatives.
        let seeds: Vec<Vec<i64>> = heights
            .keys()
            .filter(|p| {
                p.iter()
                    .enumerate()
                    .all(|(i, &x)| x >= rep_lo[i] - nr - 1 && x <= rep_hi[i] + nr + 1)
            })
            .cloned()
            .collect();
        let found = build_cells(td, &heights, &window_lo, &window_hi, &seeds, nr)?;
        let sub = PeriodicSubdivision {
            dim: n,
            k: td.k(),
            lattice: lattice.clone(),
            cells: vec![],
            heights: heights.clone(),
            window_lo: window_lo.clone(),
            window_hi: window_hi.clone(),
        };
        let mut canonical = Vec::new();
        for cell in found {
            let least = cell.vertices.iter().min().unwrap();
            if &sub.canonical_point(least)? == least {
                canonical.push(cell);
            }
        }
        canonical.sort_by(|a, b| a.points.cmp(&b.points));
        // Exact tiling certificate in dimensions 1 and 2: the canonical
        // cells must fill one fundamental domain of the translation lattice.
        let volume_ok = match n {
            1 => {
                let total: i64 = canonical
                    .iter()
                    .map(|c| c.vertices.last().unwrap()[0] - c.vertices.first().unwrap()[0])
                    .sum();
                Rat::from_int(total) == covol
            }
            2 => {
                let total: i64 = canonical
                    .iter()
                    .map(|c| shoelace_twice(&convex_hull_2d(&c.points)))
                    .sum();
                Rat::from_int(total) == &covol * &Rat::from_int(2)
            }
            _ => !canonical.is_empty(),
        };
        if !volume_ok {
            continue;
        }
        return Ok(PeriodicSubdivision {
            cells: canonical,
            ..sub
        });
    }
    Err(ThetaError::WindowTooSmall)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Index of the first failing cell.
    pub offender: Option<usize>,
}

/// A subdivision is regular when every cell is a simplex containing no
/// lattice points besides its vertices.
pub fn regularity_check(sub: &PeriodicSubdivision) -> RegularityReport {
    let n = sub.dim;
    for (idx, cell) in sub.cells.iter().enumerate() {
        if !cell_is_regular_simplex(n, cell) {
            return RegularityReport {
                regular: false,
                offender: Some(idx),
            };
        }
    }
    RegularityReport {
        regular: true,
        offender: None,
    }
}

fn cell_is_regular_simplex(n: usize, cell: &Cell) -> bool {
    let verts = &cell.vertices;
    if verts.len() != n + 1 || cell.points.len() != n + 1 {
        return false;
    }
    // Affine independence.
    let rows: Vec<Vec<Rat>> = (1..=n)
        .map(|i| {
            (0..n)
                .map(|j| Rat::from_int(verts[i][j] - verts[0][j]))
                .collect()
        })
        .collect();
    let det_ok = crate::exactnum::rat_inverse(&rows).is_ok();
    if !det_ok {
        return false;
    }
    // No other lattice point of the simplex: scan the bounding box and count
    // points with non-negative barycentric coordinates summing to at most 1.
    let mut lo = vec![i64::MAX; n];
    let mut hi = vec![i64::MIN; n];
    for v in verts {
        for i in 0..n {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let mut count = 0usize;
    let mut cursor = lo.clone();
    loop {
        let rhs: Vec<Rat> = (0..n)
            .map(|j| Rat::from_int(cursor[j] - verts[0][j]))
            .collect();
        // Solve rows^T lambda = rhs for barycentric coordinates.
        let mat: Vec<Vec<Rat>> = (0..n)
            .map(|j| (0..n).map(|i| rows[i][j].clone()).collect())
            .collect();
        if let Ok(lambda) = rat_solve(&mat, &rhs) {
            let sum: Rat = lambda.iter().sum();
            if lambda.iter().all(|l| !l.is_negative()) && sum <= Rat::one() {
                count += 1;
            }
        }
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
    count == n + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::tests_support::identity_theta;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn unit_squares_for_identity_k1() {
        let td = identity_theta(2, 1);
        let sub = regular_subdivision(&td).unwrap();
        assert_eq!(sub.cells.len(), 1);
        let cell = &sub.cells[0];
        assert_eq!(
            cell.points,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        let rep = regularity_check(&sub);
        assert!(!rep.regular);
        assert_eq!(rep.offender, Some(0));
    }

    #[test]
    fn unit_segments_for_one_torus() {
        let td = identity_theta(1, 1);
        let sub = regular_subdivision(&td).unwrap();
        assert_eq!(sub.cells.len(), 1);
        assert_eq!(sub.cells[0].points, vec![vec![0], vec![1]]);
        assert!(regularity_check(&sub).regular);
    }

    #[test]
    fn equivariance_of_cells() {
        let td = identity_theta(2, 2);
        let sub = regular_subdivision(&td).unwrap();
        for cell in &sub.cells {
            for gamma in [[1i64, 0], [0, 1], [2, 3]] {
                let translated: Vec<Vec<i64>> = cell
                    .points
                    .iter()
                    .map(|p| {
                        (0..2)
                            .map(|i| {
                                p[i] + sub.lattice[i][0] * gamma[0] + sub.lattice[i][1] * gamma[1]
                            })
                            .collect()
                    })
                    .collect();
                assert!(sub.is_cell_translate(&translated).unwrap());
            }
        }
    }

    #[test]
    fn diagonal_split_squares_are_regular() {
        // delta breaking each square along a diagonal: perturb one coset of
        // Z^2 / 2Z^2 and check against the direct simplex test.
        let td = {
            let torus = crate::torus::TropicalTorus::standard(2);
            let pol = crate::torus::Polarization::identity(&torus).unwrap();
            ThetaData::new(
                pol,
                2,
                vec![
                    (vec![0, 0], r("1/10")),
                    (vec![1, 1], r("3/50")),
                    (vec![1, 0], r("1/25")),
                ],
            )
            .unwrap()
        };
        let sub = regular_subdivision(&td).unwrap();
        // The fundamental domain has covolume 4: eight unimodular triangles.
        if regularity_check(&sub).regular {
            assert_eq!(sub.cells.len(), 8);
            for c in &sub.cells {
                assert_eq!(c.vertices.len(), 3);
            }
        }
    }

    #[test]
    fn simplex_test_detects_extra_lattice_points() {
        let fat = Cell {
            vertices: vec![vec![0, 0], vec![2, 0], vec![0, 2]],
            points: vec![vec![0, 0], vec![2, 0], vec![0, 2]],
            tie_point: vec![r("0"), r("0")],
        };
        assert!(!cell_is_regular_simplex(2, &fat));
        let unimodular = Cell {
            vertices: vec![vec![0, 0], vec![1, 0], vec![0, 1]],
            points: vec![vec![0, 0], vec![1, 0], vec![0, 1]],
            tie_point: vec![r("0"), r("0")],
        };
        assert!(cell_is_regular_simplex(2, &unimodular));
    }
}
