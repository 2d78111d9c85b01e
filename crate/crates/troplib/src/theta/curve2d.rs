use super::subdivision::{regularity_check, PeriodicSubdivision};
use super::{ThetaData, ThetaError};
use crate::curve::{
    balancing_check, pullback_curve, CurveMap, Edge, EdgeLength, GraphPoint, MetricGraph, Target,
};
use crate::exactnum::{content_i64, rat_mat_vec, Rat};
use serde::Serialize;
use std::collections::BTreeMap;

/// Theta divisor of a 2-torus as a parametrized trivalent curve, with
/// back-references into the dual subdivision.
#[derive(Clone, Debug, Serialize)]
pub struct TropicalDivisor2D {
    pub curve: CurveMap,
    /// Canonical cell index dual to each curve vertex.
    pub vertex_cells: Vec<usize>,
    /// Dual subdivision edge (pair of covectors) for each curve edge.
    pub edge_duals: Vec<(Vec<i64>, Vec<i64>)>,
}

fn ccw_hull(points: &[Vec<i64>]) -> Vec<Vec<i64>> {
    super::subdivision::convex_hull_2d(points)
}

/// Bend locus of a regular theta datum on a 2-torus: one trivalent vertex
/// per canonical cell of the dual subdivision (at its tie point), one edge
/// per orbit of interior dual edges, with weights the lattice lengths of the
/// dual edges. The result is balanced by construction and verified.
pub fn theta_curve_2d(
    td: &ThetaData,
    sub: &PeriodicSubdivision,
) -> Result<TropicalDivisor2D, ThetaError> {
    if td.dim() != 2 {
        return Err(ThetaError::UnsupportedDimension(td.dim()));
    }
    if !regularity_check(sub).regular {
        return Err(ThetaError::NotRegular);
    }
    let torus = td.polarization().torus().clone();
    let m_rows = torus.m_rat()?;

    // Curve vertices: canonical cells at their tie points.
    let images: Vec<Vec<Rat>> = sub
        .cells
        .iter()
        .map(|c| torus.canonicalize(&c.tie_point).map_err(ThetaError::from))
        .collect::<Result<_, _>>()?;

    // Orbit representatives of the subdivision edges.
    let mut edge_orbits: BTreeMap<(Vec<i64>, Vec<i64>), ()> = BTreeMap::new();
    for cell in &sub.cells {
        let hull = ccw_hull(&cell.points);
        for i in 0..hull.len() {
            let a = hull[i].clone();
            let b = hull[(i + 1) % hull.len()].clone();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rep = sub.canonical_point(&lo)?;
            let shift: Vec<i64> = lo.iter().zip(&rep).map(|(x, r)| x - r).collect();
            let key = (
                lo.iter().zip(&shift).map(|(x, s)| x - s).collect::<Vec<i64>>(),
                hi.iter().zip(&shift).map(|(x, s)| x - s).collect::<Vec<i64>>(),
            );
            edge_orbits.entry(key).or_insert(());
        }
    }

    // Incidences of a dual edge: canonical cells whose lattice translates
    // contain both endpoints.
    let lattice_shift = |gamma: &[i64]| -> Vec<i64> {
        (0..2)
            .map(|i| sub.lattice[i][0] * gamma[0] + sub.lattice[i][1] * gamma[1])
            .collect()
    };
    let mut graph_edges = Vec::new();
    let mut edge_dirs = Vec::new();
    let mut edge_duals = Vec::new();
    for (a, b) in edge_orbits.keys() {
        let mut incident: Vec<(usize, Vec<i64>)> = Vec::new();
        for (ci, cell) in sub.cells.iter().enumerate() {
            for g0 in -3i64..=3 {
                for g1 in -3i64..=3 {
                    let shift = lattice_shift(&[g0, g1]);
                    let contains = |p: &Vec<i64>| {
                        let q: Vec<i64> = p.iter().zip(&shift).map(|(x, s)| x - s).collect();
                        cell.points.binary_search(&q).is_ok()
                    };
                    if contains(a) && contains(b) {
                        incident.push((ci, vec![g0, g1]));
                    }
                }
            }
        }
        if incident.len() != 2 {
            return Err(ThetaError::Internal(format!(
                "dual edge with {} incident cells",
                incident.len()
            )));
        }
        let (c1, g1) = incident[0].clone();
        let (c2, g2) = incident[1].clone();
        // Tie points translate by M gamma when cells translate by kA^T gamma.
        let pos = |ci: usize, g: &Vec<i64>| -> Vec<Rat> {
            let gr: Vec<Rat> = g.iter().map(|&x| Rat::from_int(x)).collect();
            let mg = rat_mat_vec(&m_rows, &gr);
            sub.cells[ci]
                .tie_point
                .iter()
                .zip(&mg)
                .map(|(x, s)| x + s)
                .collect()
        };
        let x1 = pos(c1, &g1);
        let x2 = pos(c2, &g2);
        let delta: Vec<Rat> = x2.iter().zip(&x1).map(|(p, q)| p - q).collect();
        // Weight: lattice length of the dual edge; direction: its rotation.
        let dual_vec = vec![b[0] - a[0], b[1] - a[1]];
        let (w, prim) = crate::exactnum::primitive_i64(&dual_vec);
        let rot = vec![-prim[1], prim[0]];
        let c = parallel_factor(&delta, &rot).ok_or_else(|| {
            ThetaError::Internal("adjacent tie points not orthogonal to the dual edge".into())
        })?;
        if c.is_zero() {
            return Err(ThetaError::Internal("coinciding tie points".into()));
        }
        let dir: Vec<i64> = if c.is_positive() {
            rot.clone()
        } else {
            rot.iter().map(|&x| -x).collect()
        };
        let length = &c.abs() / &Rat::from_int(w);
        graph_edges.push(Edge {
            tail: c1,
            head: Some(c2),
            length: EdgeLength::rat(length),
            weight: w as u32,
            sign: 1,
        });
        edge_dirs.push(dir);
        edge_duals.push((a.clone(), b.clone()));
    }

    let graph = MetricGraph::new(sub.cells.len(), graph_edges, Default::default())
        .map_err(ThetaError::from)?;
    let curve = CurveMap::new(graph, Target::Torus { torus }, images, edge_dirs)
        .map_err(ThetaError::from)?;
    if !balancing_check(&curve).is_balanced() {
        return Err(ThetaError::Internal("theta curve fails balancing".into()));
    }
    for v in 0..curve.graph.num_vertices() {
        if curve.graph.valence(v) != 3 {
            return Err(ThetaError::Internal(format!(
                "theta curve vertex {v} has valence {}",
                curve.graph.valence(v)
            )));
        }
    }
    Ok(TropicalDivisor2D {
        curve,
        vertex_cells: (0..sub.cells.len()).collect(),
        edge_duals,
    })
}

fn parallel_factor(v: &[Rat], u: &[i64]) -> Option<Rat> {
    let i = u.iter().position(|&x| x != 0)?;
    let c = &v[i] / &Rat::from_int(u[i]);
    for (x, &ui) in v.iter().zip(u) {
        if x != &(&c * &Rat::from_int(ui)) {
            return None;
        }
    }
    Some(c)
}

/// Result of the two-point translation search.
#[derive(Clone, Debug)]
pub struct TwoPointPlacement {
    /// Translation applied to the curve, in canonical chart coordinates.
    pub tau: Vec<Rat>,
    /// Translated (and possibly densified) curve.
    pub curve: CurveMap,
    /// Marked point over the first target, interior to an edge.
    pub p0: GraphPoint,
    /// Marked point over the second target, interior to an edge.
    pub p: GraphPoint,
    /// Isogeny level used for densification; 1 when unused.
    pub pullback_k: u32,
}

/// Interior edge offset at which a curve passes through a torus point.
fn edge_point_at(curve: &CurveMap, e: usize, target: &[Rat]) -> Result<Option<Rat>, ThetaError> {
    let Target::Torus { torus } = &curve.target else {
        return Err(ThetaError::Internal("torus target expected".into()));
    };
    let m_rows = torus.m_rat()?;
    let m_inv = crate::exactnum::rat_inverse(&m_rows)?;
    let edge = curve.graph.edge(e);
    let len = curve
        .graph
        .edge(e)
        .length
        .as_rational()
        .ok_or(ThetaError::RequiresRationalData)?;
    let w = Rat::from_int(edge.weight as i64);
    let u = &curve.edge_dirs[e];
    let tail = &curve.vertex_images[edge.tail];
    let base: Vec<Rat> = target.iter().zip(tail).map(|(t, p)| t - p).collect();
    // gamma range from the segment extent.
    let mut bound = 0i64;
    for i in 0..2 {
        let reach = (0..2)
            .map(|j| {
                let extent = &(&len * &w) * &Rat::from_int(u[j].abs());
                &m_inv[i][j].abs() * &(&base[j].abs() + &extent)
            })
            .sum::<Rat>();
        bound = bound.max(
            num::ToPrimitive::to_i64(&reach.ceil_int())
                .ok_or_else(|| ThetaError::Internal("gamma bound overflow".into()))?,
        );
    }
    for g0 in -bound..=bound {
        for g1 in -bound..=bound {
            let gr = vec![Rat::from_int(g0), Rat::from_int(g1)];
            let mg = rat_mat_vec(&m_rows, &gr);
            let v: Vec<Rat> = base.iter().zip(&mg).map(|(x, s)| x - s).collect();
            if let Some(c) = parallel_factor(&v, u) {
                let s = &c / &w;
                if s.is_positive() && s < len {
                    return Ok(Some(s));
                }
            }
        }
    }
    Ok(None)
}

/// Find a translation placing both target points on edges of the curve; when
/// no translation works, densify by pulling the curve back along the
/// multiplication-by-`k` isogeny for `k = 2, 3, ...` and retry.
pub fn through_two_points(
    d: &TropicalDivisor2D,
    b0: &[Rat],
    b: &[Rat],
    max_pullback: u32,
) -> Result<TwoPointPlacement, ThetaError> {
    let Target::Torus { torus } = &d.curve.target else {
        return Err(ThetaError::Internal("torus target expected".into()));
    };
    let torus = torus.clone();
    let b0 = torus.canonicalize(b0)?;
    let b = torus.canonicalize(b)?;
    for k in 1..=max_pullback.max(1) {
        let curve = if k == 1 {
            d.curve.clone()
        } else {
            pullback_curve(&d.curve, k)?
        };
        if let Some(placement) = place_on_curve(&torus, &curve, &b0, &b, k)? {
            return Ok(placement);
        }
    }
    Err(ThetaError::SearchExhausted(max_pullback as usize))
}

fn place_on_curve(
    torus: &crate::torus::TropicalTorus,
    curve: &CurveMap,
    b0: &[Rat],
    b: &[Rat],
    k: u32,
) -> Result<Option<TwoPointPlacement>, ThetaError> {
    let m_rows = torus.m_rat()?;
    let m_inv = crate::exactnum::rat_inverse(&m_rows)?;
    let ne = curve.graph.edges().len();

    // Zero translation first.
    let mut direct0 = None;
    let mut direct1 = None;
    for e in 0..ne {
        if direct0.is_none() {
            if let Some(s) = edge_point_at(curve, e, b0)? {
                direct0 = Some((e, s));
            }
        }
        if direct1.is_none() {
            if let Some(t) = edge_point_at(curve, e, b)? {
                direct1 = Some((e, t));
            }
        }
    }
    if let (Some((e, s)), Some((f, t))) = (direct0, direct1) {
        return Ok(Some(TwoPointPlacement {
            tau: vec![Rat::zero(); 2],
            curve: curve.clone(),
            p0: GraphPoint::on_edge(e, s),
            p: GraphPoint::on_edge(f, t),
            pullback_k: k,
        }));
    }

    for e in 0..ne {
        for f in 0..ne {
            let ee = curve.graph.edge(e);
            let fe = curve.graph.edge(f);
            let le = curve.graph.edge_len_rat(e)?;
            let lf = curve.graph.edge_len_rat(f)?;
            let we = Rat::from_int(ee.weight as i64);
            let wf = Rat::from_int(fe.weight as i64);
            let ue = &curve.edge_dirs[e];
            let uf = &curve.edge_dirs[f];
            let pe = &curve.vertex_images[ee.tail];
            let pf = &curve.vertex_images[fe.tail];
            // (b0 - b) - (P_e - P_f) = s w_e u_e - t w_f u_f - M gamma
            let rhs_base: Vec<Rat> = (0..2)
                .map(|i| &(&b0[i] - &b[i]) - &(&pe[i] - &pf[i]))
                .collect();
            let mut bound = 0i64;
            for i in 0..2 {
                let reach = (0..2)
                    .map(|j| {
                        let ext = &(&(&le * &we) * &Rat::from_int(ue[j].abs()))
                            + &(&(&lf * &wf) * &Rat::from_int(uf[j].abs()));
                        &m_inv[i][j].abs() * &(&rhs_base[j].abs() + &ext)
                    })
                    .sum::<Rat>();
                bound = bound.max(
                    num::ToPrimitive::to_i64(&reach.ceil_int())
                        .ok_or_else(|| ThetaError::Internal("gamma bound overflow".into()))?,
                );
            }
            let det = ee.weight as i64 * fe.weight as i64 * (uf[0] * ue[1] - uf[1] * ue[0]);
            for g0 in -bound..=bound {
                for g1 in -bound..=bound {
                    let gr = vec![Rat::from_int(g0), Rat::from_int(g1)];
                    let mg = rat_mat_vec(&m_rows, &gr);
                    let v: Vec<Rat> = rhs_base.iter().zip(&mg).map(|(x, s)| x + s).collect();
                    let candidates: Vec<(Rat, Rat)> = if det != 0 {
                        // s we ue - t wf uf = v
                        let a = vec![
                            vec![&we * &Rat::from_int(ue[0]), -(&wf * &Rat::from_int(uf[0]))],
                            vec![&we * &Rat::from_int(ue[1]), -(&wf * &Rat::from_int(uf[1]))],
                        ];
                        match crate::exactnum::rat_solve(&a, &v) {
                            Ok(st) => vec![(st[0].clone(), st[1].clone())],
                            Err(_) => vec![],
                        }
                    } else {
                        // Parallel directions: v must be a multiple of u_e;
                        // one free parameter, try midpoints of either edge.
                        match parallel_factor(&v, ue) {
                            None => vec![],
                            Some(c) => {
                                let sigma = if ue == uf {
                                    Rat::one()
                                } else {
                                    -Rat::one()
                                };
                                let mut out = Vec::new();
                                let t_mid = &lf / &Rat::from_int(2);
                                let s1 = &(&c + &(&(&sigma * &wf) * &t_mid)) / &we;
                                out.push((s1, t_mid.clone()));
                                let s_mid = &le / &Rat::from_int(2);
                                let t1 = &(&(&(&we * &s_mid) - &c) / &sigma) / &wf;
                                out.push((s_mid, t1));
                                out
                            }
                        }
                    };
                    for (s, t) in candidates {
                        if s.is_positive() && s < le && t.is_positive() && t < lf {
                            // tau = b0 - P_e - s w_e u_e
                            let tau_raw: Vec<Rat> = (0..2)
                                .map(|i| {
                                    &(&b0[i] - &pe[i])
                                        - &(&(&s * &we) * &Rat::from_int(ue[i]))
                                })
                                .collect();
                            let images: Vec<Vec<Rat>> = curve
                                .vertex_images
                                .iter()
                                .map(|img| {
                                    torus.canonicalize(
                                        &img.iter()
                                            .zip(&tau_raw)
                                            .map(|(x, d)| x + d)
                                            .collect::<Vec<_>>(),
                                    )
                                })
                                .collect::<Result<_, _>>()?;
                            let translated = CurveMap::new(
                                curve.graph.clone(),
                                curve.target.clone(),
                                images,
                                curve.edge_dirs.clone(),
                            )?;
                            return Ok(Some(TwoPointPlacement {
                                tau: torus.canonicalize(&tau_raw)?,
                                curve: translated,
                                p0: GraphPoint::on_edge(e, s),
                                p: GraphPoint::on_edge(f, t),
                                pullback_k: k,
                            }));
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::super::search::{find_regular_theta, SearchOptions};
    use super::*;
    use crate::torus::{Polarization, TropicalTorus};

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    fn identity_divisor(seed: u64) -> (super::super::ThetaData, TropicalDivisor2D) {
        let torus = TropicalTorus::standard(2);
        let pol = Polarization::identity(&torus).unwrap();
        let (td, sub) = find_regular_theta(&pol, seed, SearchOptions::default()).unwrap();
        let curve = theta_curve_2d(&td, &sub).unwrap();
        (td, curve)
    }

    #[test]
    fn theta_curve_counts_and_balancing() {
        let (_, d) = identity_divisor(42);
        let v = d.curve.graph.num_vertices();
        let e = d.curve.graph.edges().len();
        assert_eq!(v, 8);
        assert_eq!(2 * e, 3 * v);
        // genus = e - v + 1 >= 2 for the level-two polarization
        assert!(e - v + 1 >= 2);
        assert!(balancing_check(&d.curve).is_balanced());
        for vert in 0..v {
            assert_eq!(d.curve.graph.valence(vert), 3);
        }
        for edge in d.curve.graph.edges() {
            assert_eq!(edge.weight, 1);
        }
    }

    #[test]
    fn through_points_already_on_the_curve() {
        let (_, d) = identity_divisor(42);
        // Take two interior points of different edges as the targets.
        let p0 = GraphPoint::on_edge(0, &d.curve.graph.edge_len_rat(0).unwrap() / &r("3"));
        let p1 = GraphPoint::on_edge(1, &d.curve.graph.edge_len_rat(1).unwrap() / &r("2"));
        let b0 = d.curve.point_image(&p0).unwrap();
        let b = d.curve.point_image(&p1).unwrap();
        let placement = through_two_points(&d, &b0, &b, 4).unwrap();
        assert_eq!(placement.tau, vec![r("0"), r("0")]);
        assert_eq!(placement.pullback_k, 1);
        assert_eq!(placement.curve.point_image(&placement.p0).unwrap(), b0);
        assert_eq!(placement.curve.point_image(&placement.p).unwrap(), b);
    }

    #[test]
    fn through_generic_points() {
        let (_, d) = identity_divisor(42);
        let b0 = vec![r("0"), r("0")];
        let b = vec![r("1/3"), r("1/7")];
        let placement = through_two_points(&d, &b0, &b, 6).unwrap();
        assert!(placement.pullback_k <= 6);
        assert_eq!(placement.curve.point_image(&placement.p0).unwrap(), b0);
        assert_eq!(placement.curve.point_image(&placement.p).unwrap(), b);
        // Marked points are interior by construction.
        for gp in [&placement.p0, &placement.p] {
            assert!(matches!(gp, GraphPoint::OnEdge { .. }));
        }
        assert!(balancing_check(&placement.curve).is_balanced());
    }
}
