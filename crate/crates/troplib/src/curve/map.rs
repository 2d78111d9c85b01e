use super::{CurveError, Edge, EdgeLength, EndKind, GraphPoint, MetricGraph};
use crate::exactnum::{lattice_solve_rat, primitive_i64, Rat, SymbolicReal};
use crate::torus::TropicalTorus;
use num::ToPrimitive;
use serde::{Deserialize, Serialize};

/// Target space of a parametrized curve: affine space `R^n`, a tropical
/// torus `B(M)`, or the cylinder `R x B(M)` (first coordinate unconstrained).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Target {
    Affine { dim: usize },
    Torus { torus: TropicalTorus },
    Cylinder { base: TropicalTorus },
}

impl Target {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Target::Affine { dim } => *dim,
            Target::Torus { torus } => torus.dim(),
            Target::Cylinder { base } => base.dim() + 1,
        }
    }

    /// Is `v` an element of the period lattice of the target?
    pub fn lattice_contains(&self, v: &[Rat]) -> Result<bool, CurveError> {
        match self {
            Target::Affine { .. } => Ok(v.iter().all(|c| c.is_zero())),
            Target::Torus { torus } => Ok(lattice_solve_rat(&torus.m_rat()?, v)?.is_some()),
            Target::Cylinder { base } => {
                if !v[0].is_zero() {
                    return Ok(false);
                }
                Ok(lattice_solve_rat(&base.m_rat()?, &v[1..])?.is_some())
            }
        }
    }

    /// Canonical chart representative of a point.
    pub fn canonicalize(&self, v: &[Rat]) -> Result<Vec<Rat>, CurveError> {
        match self {
            Target::Affine { .. } => Ok(v.to_vec()),
            Target::Torus { torus } => Ok(torus.canonicalize(v)?),
            Target::Cylinder { base } => {
                let mut out = vec![v[0].clone()];
                out.extend(base.canonicalize(&v[1..])?);
                Ok(out)
            }
        }
    }
}

/// Parametrized tropical curve: a metric graph mapped into a target by
/// tropical affine edge maps. Each oriented edge carries a primitive integer
/// direction `u`; the map moves with velocity `weight * u` per unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMap {
    pub graph: MetricGraph,
    pub target: Target,
    pub vertex_images: Vec<Vec<Rat>>,
    pub edge_dirs: Vec<Vec<i64>>,
}

impl CurveMap {
    pub fn new(
        graph: MetricGraph,
        target: Target,
        vertex_images: Vec<Vec<Rat>>,
        edge_dirs: Vec<Vec<i64>>,
    ) -> Result<Self, CurveError> {
        let dim = target.ambient_dim();
        if vertex_images.len() != graph.num_vertices() {
            return Err(CurveError::DimensionMismatch(
                "one image per vertex required".into(),
            ));
        }
        if vertex_images.iter().any(|p| p.len() != dim) {
            return Err(CurveError::DimensionMismatch(
                "vertex image dimension".into(),
            ));
        }
        if edge_dirs.len() != graph.edges().len() {
            return Err(CurveError::DimensionMismatch("one direction per edge".into()));
        }
        for (i, d) in edge_dirs.iter().enumerate() {
            if d.len() != dim {
                return Err(CurveError::DimensionMismatch(format!(
                    "direction of edge {i}"
                )));
            }
            let (content, _) = primitive_i64(d);
            if content != 1 {
                return Err(CurveError::BadGraph(format!(
                    "direction of edge {i} must be primitive"
                )));
            }
        }
        let map = CurveMap {
            graph,
            target,
            vertex_images,
            edge_dirs,
        };
        map.check_compatibility()?;
        Ok(map)
    }

    /// Edge compatibility: for each finite edge with rational length,
    /// `image(head) - image(tail) - length * weight * u` lies in the target
    /// lattice. Symbolic lengths are accepted as unchecked chart data.
    fn check_compatibility(&self) -> Result<(), CurveError> {
        for (i, e) in self.graph.edges().iter().enumerate() {
            let Some(head) = e.head else { continue };
            let Some(len) = e.length.as_rational() else {
                continue;
            };
            let disp = self.edge_displacement_with(i, &len);
            let diff: Vec<Rat> = self.vertex_images[head]
                .iter()
                .zip(&self.vertex_images[e.tail])
                .zip(&disp)
                .map(|((h, t), d)| &(h - t) - d)
                .collect();
            if !self.target.lattice_contains(&diff)? {
                return Err(CurveError::BadGraph(format!(
                    "edge {i} image is incompatible with its direction and length"
                )));
            }
        }
        Ok(())
    }

    fn edge_displacement_with(&self, e: usize, len: &Rat) -> Vec<Rat> {
        let w = Rat::from_int(self.graph.edge(e).weight as i64);
        self.edge_dirs[e]
            .iter()
            .map(|&u| &(len * &w) * &Rat::from_int(u))
            .collect()
    }

    /// Chart image of a graph point (not reduced modulo the lattice).
    pub fn point_image_raw(&self, p: &GraphPoint) -> Result<Vec<Rat>, CurveError> {
        self.graph.validate_point(p)?;
        match p {
            GraphPoint::Vertex(v) => Ok(self.vertex_images[*v].clone()),
            GraphPoint::OnEdge { edge, offset } => {
                let e = self.graph.edge(*edge);
                let disp = self.edge_displacement_with(*edge, offset);
                Ok(self.vertex_images[e.tail]
                    .iter()
                    .zip(&disp)
                    .map(|(t, d)| t + d)
                    .collect())
            }
        }
    }

    /// Canonical target image of a graph point.
    pub fn point_image(&self, p: &GraphPoint) -> Result<Vec<Rat>, CurveError> {
        let raw = self.point_image_raw(p)?;
        self.target.canonicalize(&raw)
    }

    /// Direction into the edge at the given end (away from the vertex).
    pub fn dir_into_edge(&self, edge: usize, end: EndKind) -> Vec<i64> {
        match end {
            EndKind::Tail => self.edge_dirs[edge].clone(),
            EndKind::Head => self.edge_dirs[edge].iter().map(|&x| -x).collect(),
        }
    }

    /// Restrict to the component subgraph containing the listed vertices.
    pub fn restrict(&self, vertex_set: &[usize]) -> (CurveMap, super::SubgraphMaps) {
        let (graph, maps) = self.graph.induced_subgraph(vertex_set);
        let vertex_images = maps
            .vertex_to_old
            .iter()
            .map(|&v| self.vertex_images[v].clone())
            .collect();
        let edge_dirs = maps
            .edge_to_old
            .iter()
            .map(|&e| self.edge_dirs[e].clone())
            .collect();
        (
            CurveMap {
                graph,
                target: self.target.clone(),
                vertex_images,
                edge_dirs,
            },
            maps,
        )
    }
}

/// Per-vertex balancing residuals `sum of sign * weight * u(into edge)`.
#[derive(Clone, Debug, Serialize)]
pub struct BalanceReport {
    pub residuals: Vec<Vec<i64>>,
    pub offenders: Vec<usize>,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.offenders.is_empty()
    }
}

/// Signed balancing condition at every vertex.
pub fn balancing_check(c: &CurveMap) -> BalanceReport {
    let dim = c.target.ambient_dim();
    let mut residuals = Vec::with_capacity(c.graph.num_vertices());
    let mut offenders = Vec::new();
    for v in 0..c.graph.num_vertices() {
        let mut acc = vec![0i64; dim];
        for inc in c.graph.incidences(v) {
            let e = c.graph.edge(inc.edge);
            let u = c.dir_into_edge(inc.edge, inc.end);
            for (a, x) in acc.iter_mut().zip(&u) {
                *a += (e.sign as i64) * (e.weight as i64) * x;
            }
        }
        if acc.iter().any(|&x| x != 0) {
            offenders.push(v);
        }
        residuals.push(acc);
    }
    BalanceReport {
        residuals,
        offenders,
    }
}

/// Is a star of directions, balanced with the signed weights, also balanced
/// with all weights +1?
pub fn effective_balance_check(
    directions: &[Vec<i64>],
    weights: &[i64],
) -> Result<bool, CurveError> {
    if directions.len() != weights.len() || directions.is_empty() {
        return Err(CurveError::DimensionMismatch(
            "one weight per direction required".into(),
        ));
    }
    let dim = directions[0].len();
    if directions.iter().any(|d| d.len() != dim) {
        return Err(CurveError::DimensionMismatch("direction dimensions".into()));
    }
    if weights.iter().any(|w| w.abs() != 1) {
        return Err(CurveError::BadGraph("weights must be +1 or -1".into()));
    }
    let mut signed = vec![0i64; dim];
    let mut unsigned = vec![0i64; dim];
    for (d, w) in directions.iter().zip(weights) {
        for i in 0..dim {
            signed[i] += w * d[i];
            unsigned[i] += w.abs() * d[i];
        }
    }
    if signed.iter().any(|&x| x != 0) {
        return Err(CurveError::InputNotBalanced);
    }
    Ok(unsigned.iter().all(|&x| x == 0))
}

/// Normalize a mixed-sign curve so that every vertex is either trivalent
/// with uniform edge signs or bivalent with opposite signs. The result
/// coincides with the input outside a compact set; signed balancing and the
/// multiset of semi-infinite ends are preserved.
///
/// Trivalent mixed vertices are resolved by splitting the minority-sign edge
/// at an inserted bivalent vertex and re-routing it through a new compact
/// edge whose direction is forced by reading the vertex with uniform signs.
/// Vertices of valency at least four are split into two lower-valency
/// vertices joined by a pair of opposite-sign half-edges meeting at a
/// bivalent vertex; the two new vertices share the same image point.
pub fn normalize_mixed_vertices(
    c: &CurveMap,
    inserted_length: Rat,
) -> Result<CurveMap, CurveError> {
    if !inserted_length.is_positive() {
        return Err(CurveError::BadGraph("inserted length must be positive".into()));
    }
    if !balancing_check(c).is_balanced() {
        return Err(CurveError::UnbalancedInput);
    }
    let mut vertices = c.graph.num_vertices();
    let mut edges = c.graph.edges().to_vec();
    let mut images = c.vertex_images.clone();
    let mut dirs = c.edge_dirs.clone();
    let t = inserted_length;

    let mut work: Vec<usize> = (0..vertices).collect();
    while let Some(v) = work.pop() {
        let star: Vec<(usize, EndKind)> = {
            let mut s = Vec::new();
            for (i, e) in edges.iter().enumerate() {
                if e.tail == v {
                    s.push((i, EndKind::Tail));
                }
                if e.head == Some(v) {
                    s.push((i, EndKind::Head));
                }
            }
            s
        };
        let dir_into = |edge: usize, end: EndKind, dirs: &Vec<Vec<i64>>| -> Vec<i64> {
            match end {
                EndKind::Tail => dirs[edge].clone(),
                EndKind::Head => dirs[edge].iter().map(|&x| -x).collect(),
            }
        };
        match star.len() {
            0..=2 => {} // balanced bivalent vertices are already normal form
            3 => {
                let signs: Vec<i8> = star.iter().map(|&(e, _)| edges[e].sign).collect();
                let plus = signs.iter().filter(|&&s| s == 1).count();
                if plus == 0 || plus == 3 {
                    continue;
                }
                // Exactly one minority end.
                let majority: i8 = if plus == 2 { 1 } else { -1 };
                let &(me, mend) = star
                    .iter()
                    .find(|&&(e, _)| edges[e].sign != majority)
                    .unwrap();
                let u_min = dir_into(me, mend, &dirs);
                let w_min = edges[me].weight;
                // New bivalent vertex out along the reversed minority direction.
                let w_idx = vertices;
                vertices += 1;
                let d_new: Vec<i64> = u_min.iter().map(|&x| -x).collect();
                let img: Vec<Rat> = images[v]
                    .iter()
                    .zip(&d_new)
                    .map(|(p, &u)| p + &(&t * &Rat::from_int(u * w_min as i64)))
                    .collect();
                images.push(img);
                edges.push(Edge {
                    tail: v,
                    head: Some(w_idx),
                    length: EdgeLength::rat(t.clone()),
                    weight: w_min,
                    sign: majority,
                });
                dirs.push(d_new);
                // Re-attach the minority end at the new vertex and lengthen
                // the edge so the far endpoint stays put.
                match mend {
                    EndKind::Tail => edges[me].tail = w_idx,
                    EndKind::Head => edges[me].head = Some(w_idx),
                }
                if let EdgeLength::Finite(len) = &edges[me].length {
                    edges[me].length =
                        EdgeLength::Finite(len + &SymbolicReal::from_rat(t.clone()));
                }
            }
            _ => {
                // Split off a pair {star[0], star[k]} with a nonzero signed
                // direction sum; balancing guarantees one exists. Prefer a
                // pair of equal signs so the kept vertex comes out uniform.
                let pair_sum = |k: usize, dirs: &Vec<Vec<i64>>| -> Vec<i64> {
                    let mut s_vec = vec![0i64; c.target.ambient_dim()];
                    for &(e, end) in [&star[0], &star[k]] {
                        let u = dir_into(e, end, dirs);
                        for (a, x) in s_vec.iter_mut().zip(&u) {
                            *a += (edges[e].sign as i64) * (edges[e].weight as i64) * x;
                        }
                    }
                    s_vec
                };
                let mut chosen = None;
                for k in 1..star.len() {
                    let s_vec = pair_sum(k, &dirs);
                    if s_vec.iter().all(|&x| x == 0) {
                        continue;
                    }
                    let uniform = edges[star[0].0].sign == edges[star[k].0].sign;
                    if uniform {
                        chosen = Some((k, s_vec));
                        break;
                    }
                    if chosen.is_none() {
                        chosen = Some((k, s_vec));
                    }
                }
                let (k, s_vec) = chosen.ok_or_else(|| {
                    CurveError::Internal("no splittable pair at a balanced vertex".into())
                })?;
                let (w_new, d_raw) = primitive_i64(&s_vec);
                let w_new = w_new as u32;
                let moved: Vec<(usize, EndKind)> = star
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| *idx != 0 && *idx != k)
                    .map(|(_, &x)| x)
                    .collect();
                let only_rays = moved.iter().all(|&(e, _)| edges[e].head.is_none());

                if only_rays {
                    // Plain vertex smoothing: one compact edge between the
                    // two groups; the split-off rays translate with their
                    // new base point.
                    let s0 = edges[star[0].0].sign;
                    let sign_new = if edges[star[k].0].sign == s0 { s0 } else { 1 };
                    // sign_new * w_new * d_into = -s_vec
                    let d_into: Vec<i64> = if sign_new == 1 {
                        d_raw.iter().map(|&x| -x).collect()
                    } else {
                        d_raw.clone()
                    };
                    let v2 = vertices;
                    vertices += 1;
                    let img: Vec<Rat> = images[v]
                        .iter()
                        .zip(&d_into)
                        .map(|(p, &u)| p + &(&t * &Rat::from_int(u * w_new as i64)))
                        .collect();
                    images.push(img);
                    edges.push(Edge {
                        tail: v,
                        head: Some(v2),
                        length: EdgeLength::rat(t.clone()),
                        weight: w_new,
                        sign: sign_new,
                    });
                    dirs.push(d_into);
                    for &(e, end) in &moved {
                        match end {
                            EndKind::Tail => edges[e].tail = v2,
                            EndKind::Head => edges[e].head = Some(v2),
                        }
                    }
                    work.push(v);
                    work.push(v2);
                } else {
                    // Opposite-sign half-edges through a new bivalent vertex;
                    // the far group keeps its image point, so finite edges
                    // stay anchored.
                    let d_into: Vec<i64> = d_raw.iter().map(|&x| -x).collect();
                    let mid = vertices;
                    let v2 = vertices + 1;
                    vertices += 2;
                    let img_mid: Vec<Rat> = images[v]
                        .iter()
                        .zip(&d_into)
                        .map(|(p, &u)| p + &(&t * &Rat::from_int(u * w_new as i64)))
                        .collect();
                    images.push(img_mid);
                    images.push(images[v].clone());
                    edges.push(Edge {
                        tail: v,
                        head: Some(mid),
                        length: EdgeLength::rat(t.clone()),
                        weight: w_new,
                        sign: 1,
                    });
                    dirs.push(d_into.clone());
                    edges.push(Edge {
                        tail: mid,
                        head: Some(v2),
                        length: EdgeLength::rat(t.clone()),
                        weight: w_new,
                        sign: -1,
                    });
                    dirs.push(d_into.iter().map(|&x| -x).collect());
                    for &(e, end) in &moved {
                        match end {
                            EndKind::Tail => edges[e].tail = v2,
                            EndKind::Head => edges[e].head = Some(v2),
                        }
                    }
                    work.push(v);
                    work.push(v2);
                }
            }
        }
    }

    let graph = MetricGraph::new(vertices, edges, c.graph.symbols().clone())?;
    let out = CurveMap::new(graph, c.target.clone(), images, dirs)?;
    debug_assert!(balancing_check(&out).is_balanced());
    Ok(out)
}

/// Preimage of a curve in a torus under the multiplication-by-`k` isogeny.
///
/// The result is the induced `k^n`-fold cover of the abstract curve with all
/// lengths scaled by `1/k`, mapped by `(image + M j) / k` on the sheet
/// indexed by `j` in `(Z/k)^n`; sheets are glued along edges according to
/// their lattice wrap.
pub fn pullback_curve(c: &CurveMap, k: u32) -> Result<CurveMap, CurveError> {
    let Target::Torus { torus } = &c.target else {
        return Err(CurveError::BadGraph("pullback needs a torus target".into()));
    };
    if k == 0 {
        return Err(CurveError::BadGraph("k must be positive".into()));
    }
    if k == 1 {
        return Ok(c.clone());
    }
    let n = torus.dim();
    let m_rows = torus.m_rat()?;
    let kr = Rat::from_int(k as i64);

    // Lattice wrap of each finite edge.
    let mut wraps: Vec<Vec<i64>> = Vec::with_capacity(c.graph.edges().len());
    for (i, e) in c.graph.edges().iter().enumerate() {
        match (e.head, e.length.as_rational()) {
            (Some(h), Some(len)) => {
                let w = Rat::from_int(e.weight as i64);
                let diff: Vec<Rat> = c.vertex_images[h]
                    .iter()
                    .zip(&c.vertex_images[e.tail])
                    .zip(&c.edge_dirs[i])
                    .map(|((hh, tt), &u)| &(hh - tt) - &(&(&len * &w) * &Rat::from_int(u)))
                    .collect();
                let sol = lattice_solve_rat(&m_rows, &diff)?
                    .ok_or_else(|| CurveError::Internal("incompatible edge in pullback".into()))?;
                wraps.push(
                    sol.iter()
                        .map(|z| z.to_i64().expect("small lattice wrap"))
                        .collect(),
                );
            }
            (None, _) => wraps.push(vec![0; n]),
            (Some(_), None) => return Err(CurveError::RequiresRationalData),
        }
    }

    // Sheets indexed by j in {0..k-1}^n, lexicographic.
    let kn = (k as usize).pow(n as u32);
    let sheet_index = |j: &[i64]| -> usize {
        j.iter().fold(0usize, |acc, &x| acc * k as usize + x as usize)
    };
    let mut sheets = Vec::with_capacity(kn);
    {
        let mut j = vec![0i64; n];
        loop {
            sheets.push(j.clone());
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if j[i] + 1 < k as i64 {
                    j[i] += 1;
                    break;
                }
                j[i] = 0;
            }
            if j.iter().all(|&x| x == 0) {
                break;
            }
        }
    }
    debug_assert_eq!(sheets.len(), kn);

    let old_v = c.graph.num_vertices();
    let mut images = Vec::with_capacity(old_v * kn);
    let mut edges = Vec::new();
    let mut dirs = Vec::new();
    for v in 0..old_v {
        for j in &sheets {
            let img: Vec<Rat> = c.vertex_images[v]
                .iter()
                .enumerate()
                .map(|(row, x)| {
                    let mut shift = Rat::zero();
                    for (col, &jc) in j.iter().enumerate() {
                        shift += &(&m_rows[row][col] * &Rat::from_int(jc));
                    }
                    &(x + &shift) / &kr
                })
                .collect();
            images.push(torus.canonicalize(&img)?);
        }
    }
    for (i, e) in c.graph.edges().iter().enumerate() {
        for j in &sheets {
            let tail = e.tail * kn + sheet_index(j);
            let head = e.head.map(|h| {
                let jh: Vec<i64> = j
                    .iter()
                    .zip(&wraps[i])
                    .map(|(&a, &m)| (a - m).rem_euclid(k as i64))
                    .collect();
                h * kn + sheet_index(&jh)
            });
            let length = match &e.length {
                EdgeLength::Finite(len) => {
                    let r = len
                        .as_rational()
                        .ok_or(CurveError::RequiresRationalData)?;
                    EdgeLength::rat(&r / &kr)
                }
                EdgeLength::Infinite => EdgeLength::Infinite,
            };
            edges.push(Edge {
                tail,
                head,
                length,
                weight: e.weight,
                sign: e.sign,
            });
            dirs.push(c.edge_dirs[i].clone());
        }
    }
    let graph = MetricGraph::new(old_v * kn, edges, c.graph.symbols().clone())?;
    let out = CurveMap::new(graph, c.target.clone(), images, dirs)?;
    debug_assert!(balancing_check(&out).is_balanced() || !balancing_check(c).is_balanced());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::SymbolSet;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    /// Local model: one finite vertex with three rays.
    fn star_map(dirs: &[Vec<i64>], signs: &[i8], weights: &[u32]) -> CurveMap {
        let edges = dirs
            .iter()
            .zip(signs)
            .zip(weights)
            .map(|((_, &s), &w)| Edge {
                tail: 0,
                head: None,
                length: EdgeLength::Infinite,
                weight: w,
                sign: s,
            })
            .collect();
        let graph = MetricGraph::new(1, edges, SymbolSet::empty()).unwrap();
        CurveMap::new(
            graph,
            Target::Affine { dim: dirs[0].len() },
            vec![vec![Rat::zero(); dirs[0].len()]],
            dirs.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn balancing_examples() {
        let tripod = star_map(
            &[vec![1, 0], vec![0, 1], vec![-1, -1]],
            &[1, 1, 1],
            &[1, 1, 1],
        );
        assert!(balancing_check(&tripod).is_balanced());

        let bent = star_map(&[vec![1, 0], vec![0, 1]], &[1, 1], &[1, 1]);
        let rep = balancing_check(&bent);
        assert!(!rep.is_balanced());
        assert_eq!(rep.residuals[0], vec![1, 1]);

        // Bivalent vertex, equal into-edge directions, signs (+, -).
        let biv = star_map(&[vec![1, 1], vec![1, 1]], &[1, -1], &[1, 1]);
        assert!(balancing_check(&biv).is_balanced());
    }

    #[test]
    fn effective_balance_examples() {
        assert!(effective_balance_check(
            &[vec![1, 0], vec![0, 1], vec![-1, -1]],
            &[1, 1, 1]
        )
        .unwrap());
        assert!(!effective_balance_check(
            &[vec![1, 0], vec![0, 1], vec![1, 1]],
            &[1, 1, -1]
        )
        .unwrap());
        assert_eq!(
            effective_balance_check(&[vec![1, 0]], &[1]),
            Err(CurveError::InputNotBalanced)
        );
    }

    #[test]
    fn normalize_mixed_trivalent_vertex() {
        // Out-pointing (1,0)+, (0,1)+, (1,1)-: one surgery.
        let c = star_map(
            &[vec![1, 0], vec![0, 1], vec![1, 1]],
            &[1, 1, -1],
            &[1, 1, 1],
        );
        assert!(balancing_check(&c).is_balanced());
        let out = normalize_mixed_vertices(&c, r("1")).unwrap();
        assert_eq!(out.graph.num_vertices(), 2);
        assert_eq!(out.graph.edges().len(), 4);
        assert!(balancing_check(&out).is_balanced());
        // One all-positive trivalent vertex and one mixed bivalent vertex.
        let signs_at = |v: usize| -> Vec<i8> {
            out.graph
                .incidences(v)
                .iter()
                .map(|i| out.graph.edge(i.edge).sign)
                .collect()
        };
        assert_eq!(out.graph.valence(0), 3);
        assert!(signs_at(0).iter().all(|&s| s == 1));
        assert_eq!(out.graph.valence(1), 2);
        let mut s1 = signs_at(1);
        s1.sort();
        assert_eq!(s1, vec![-1, 1]);
        // Ends preserved: three rays with the original directions and signs.
        let rays: Vec<(Vec<i64>, i8)> = out
            .graph
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.head.is_none())
            .map(|(i, e)| (out.edge_dirs[i].clone(), e.sign))
            .collect();
        assert_eq!(rays.len(), 3);
        assert!(rays.contains(&(vec![1, 1], -1)));
    }

    #[test]
    fn normalize_leaves_uniform_trivalent_alone() {
        let c = star_map(
            &[vec![1, 0], vec![0, 1], vec![-1, -1]],
            &[1, 1, 1],
            &[1, 1, 1],
        );
        let out = normalize_mixed_vertices(&c, r("1")).unwrap();
        assert_eq!(out.graph.num_vertices(), 1);
        assert_eq!(out.graph.edges().len(), 3);
    }

    #[test]
    fn normalize_splits_four_valent_vertex() {
        let c = star_map(
            &[vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1]],
            &[1, 1, 1, 1],
            &[1, 1, 1, 1],
        );
        let out = normalize_mixed_vertices(&c, r("1")).unwrap();
        assert!(balancing_check(&out).is_balanced());
        // Two trivalent vertices joined by one new compact edge.
        assert_eq!(out.graph.num_vertices(), 2);
        assert_eq!(out.graph.edges().len(), 5);
        assert_eq!(out.graph.valence(0), 3);
        assert_eq!(out.graph.valence(1), 3);
        // The connecting direction is forced by balancing: the (1,0)+(0,1)
        // group gives +-(1,1).
        let d = &out.edge_dirs[4];
        assert!(*d == vec![1, 1] || *d == vec![-1, -1]);
        // Semi-infinite ends unchanged.
        let rays = out
            .graph
            .edges()
            .iter()
            .filter(|e| e.head.is_none())
            .count();
        assert_eq!(rays, 4);
    }

    #[test]
    fn normalize_rejects_unbalanced() {
        let c = star_map(&[vec![1, 0], vec![0, 1]], &[1, 1], &[1, 1]);
        assert_eq!(
            normalize_mixed_vertices(&c, r("1")),
            Err(CurveError::UnbalancedInput)
        );
    }

    fn horizontal_circle(y: &str) -> CurveMap {
        let torus = TropicalTorus::standard(2);
        let graph = MetricGraph::circle(r("1")).unwrap();
        CurveMap::new(
            graph,
            Target::Torus { torus },
            vec![vec![r("0"), r(y)]],
            vec![vec![1, 0]],
        )
        .unwrap()
    }

    #[test]
    fn pullback_of_horizontal_circle() {
        let c = horizontal_circle("1/4");
        let out = pullback_curve(&c, 2).unwrap();
        assert!(balancing_check(&out).is_balanced());
        // Image points lie on y = 1/8 and y = 5/8.
        let mut ys: Vec<Rat> = out.vertex_images.iter().map(|p| p[1].clone()).collect();
        ys.sort();
        ys.dedup();
        assert_eq!(ys, vec![r("1/8"), r("5/8")]);
        // Two components, each a doubled cover of the base circle.
        assert_eq!(out.graph.components().len(), 2);
        assert_eq!(out.graph.edges().len(), 4);
        for e in out.graph.edges() {
            assert_eq!(e.length.as_rational().unwrap(), r("1/2"));
        }
    }

    #[test]
    fn pullback_identity_at_k1() {
        let c = horizontal_circle("1/4");
        let out = pullback_curve(&c, 1).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn pullback_of_empty_curve() {
        let torus = TropicalTorus::standard(2);
        let graph = MetricGraph::new(0, vec![], SymbolSet::empty()).unwrap();
        let c = CurveMap::new(graph, Target::Torus { torus }, vec![], vec![]).unwrap();
        let out = pullback_curve(&c, 3).unwrap();
        assert_eq!(out.graph.num_vertices(), 0);
        assert!(out.graph.edges().is_empty());
    }
}
