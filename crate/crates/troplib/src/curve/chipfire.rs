use super::{CurveError, Divisor, EdgePL, GraphPoint, MetricGraph, PLFunction};
use crate::exactnum::{lcm_denominators, rat_solve, Rat};
use num::bigint::BigInt;
use num::ToPrimitive;

#[derive(Clone, Debug, PartialEq)]
pub enum LinEquivOutcome {
    Witness(PLFunction),
    NotEquivalent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinEquivEngine {
    /// Scale to an integer model, subdivide at lattice points and run the
    /// burning-based reduced-divisor algorithm; the witness is read off the
    /// cumulative firing counts.
    ChipFiring,
    /// Solve the length-weighted potential equations on the graph
    /// subdivided at the divisor support and test slope integrality.
    Potential,
}

/// Integer models beyond this node count switch to the potential engine.
const CHIP_FIRING_NODE_CAP: usize = 50_000;

/// Decide tropical linear equivalence of two divisors of equal degree on a
/// compact curve with unit weights and positive signs. On success the
/// witness `f` satisfies `div(f) = d1 - d2` exactly; it is normalized to
/// vanish at the lowest-index vertex of each component.
pub fn linear_equivalence(
    g: &MetricGraph,
    d1: &Divisor,
    d2: &Divisor,
) -> Result<LinEquivOutcome, CurveError> {
    linear_equivalence_via(g, d1, d2, None)
}

pub fn linear_equivalence_via(
    g: &MetricGraph,
    d1: &Divisor,
    d2: &Divisor,
    engine: Option<LinEquivEngine>,
) -> Result<LinEquivOutcome, CurveError> {
    if !g.is_compact() {
        return Err(CurveError::NonCompact);
    }
    if g.edges().iter().any(|e| e.weight != 1) {
        return Err(CurveError::UnsupportedWeights);
    }
    if g.edges().iter().any(|e| e.sign != 1) {
        return Err(CurveError::MixedSignsUnsupported);
    }
    d1.validate(g)?;
    d2.validate(g)?;
    if d1.degree() != d2.degree() {
        return Err(CurveError::DegreeMismatch);
    }
    let d = d1.sub(d2);

    let mut vertex_values = vec![Rat::zero(); g.num_vertices()];
    let mut edge_pls: Vec<EdgePL> = g.edges().iter().map(|_| EdgePL::constant()).collect();

    for comp in g.components() {
        let in_comp = |v: usize| comp.binary_search(&v).is_ok();
        let comp_terms: Vec<(GraphPoint, i64)> = d
            .terms()
            .iter()
            .filter(|(p, _)| match p {
                GraphPoint::Vertex(v) => in_comp(*v),
                GraphPoint::OnEdge { edge, .. } => in_comp(g.edge(*edge).tail),
            })
            .cloned()
            .collect();
        if comp_terms.iter().map(|(_, m)| m).sum::<i64>() != 0 {
            return Ok(LinEquivOutcome::NotEquivalent);
        }
        if comp_terms.is_empty() {
            continue;
        }
        let comp_div = Divisor::new(comp_terms);
        match solve_component(g, &comp, &comp_div, engine)? {
            None => return Ok(LinEquivOutcome::NotEquivalent),
            Some((values, pls)) => {
                for (&v, val) in comp.iter().zip(values) {
                    vertex_values[v] = val;
                }
                for (e, pl) in pls {
                    edge_pls[e] = pl;
                }
            }
        }
    }

    let witness = PLFunction {
        vertex_values,
        edges: edge_pls,
    };
    // The witness must reproduce the divisor difference exactly.
    let check = super::principal_divisor(g, &witness)?;
    if check != d {
        return Err(CurveError::Internal(
            "witness fails to reproduce the divisor difference".into(),
        ));
    }
    Ok(LinEquivOutcome::Witness(witness))
}

type ComponentWitness = (Vec<Rat>, Vec<(usize, EdgePL)>);

/// Solve on one component: values per component vertex (in `comp` order)
/// and per-edge PL data for the component's edges.
fn solve_component(
    g: &MetricGraph,
    comp: &[usize],
    d: &Divisor,
    engine: Option<LinEquivEngine>,
) -> Result<Option<ComponentWitness>, CurveError> {
    let comp_edges: Vec<usize> = (0..g.edges().len())
        .filter(|&e| comp.binary_search(&g.edge(e).tail).is_ok())
        .collect();

    // Common denominator of lengths and offsets.
    let mut denoms: Vec<Rat> = Vec::new();
    for &e in &comp_edges {
        denoms.push(g.edge_len_rat(e)?);
    }
    for (p, _) in d.terms() {
        if let GraphPoint::OnEdge { offset, .. } = p {
            denoms.push(offset.clone());
        }
    }
    let lambda = lcm_denominators(denoms.iter());

    let total_nodes: BigInt = comp_edges
        .iter()
        .map(|&e| {
            let len = g.edge_len_rat(e).unwrap();
            (&len * &Rat::from_bigint(lambda.clone())).to_integer().unwrap()
        })
        .sum::<BigInt>()
        + BigInt::from(comp.len());
    let use_chip = match engine {
        Some(LinEquivEngine::ChipFiring) => true,
        Some(LinEquivEngine::Potential) => false,
        None => total_nodes <= BigInt::from(CHIP_FIRING_NODE_CAP),
    };
    if use_chip {
        chip_firing_component(g, comp, &comp_edges, d, &lambda)
    } else {
        potential_component(g, comp, &comp_edges, d)
    }
}

fn chip_firing_component(
    g: &MetricGraph,
    comp: &[usize],
    comp_edges: &[usize],
    d: &Divisor,
    lambda: &BigInt,
) -> Result<Option<ComponentWitness>, CurveError> {
    let lam = Rat::from_bigint(lambda.clone());
    // Nodes: component vertices first, then interior subdivision points.
    let vnode = |v: usize| comp.binary_search(&v).unwrap();
    let mut node_count = comp.len();
    let mut edge_nodes: Vec<Vec<usize>> = Vec::with_capacity(comp_edges.len());
    let mut edge_units: Vec<usize> = Vec::with_capacity(comp_edges.len());
    for &e in comp_edges {
        let len = g.edge_len_rat(e)?;
        let units = (&len * &lam)
            .to_integer()
            .and_then(|z| z.to_usize())
            .ok_or_else(|| CurveError::Internal("scaled length overflow".into()))?;
        let head = g.edge(e).head.expect("compact");
        let mut nodes = Vec::with_capacity(units + 1);
        nodes.push(vnode(g.edge(e).tail));
        for _ in 1..units {
            nodes.push(node_count);
            node_count += 1;
        }
        nodes.push(vnode(head));
        edge_nodes.push(nodes);
        edge_units.push(units);
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for nodes in &edge_nodes {
        for w in nodes.windows(2) {
            if w[0] != w[1] {
                adj[w[0]].push(w[1]);
                adj[w[1]].push(w[0]);
            }
        }
    }

    let mut chips = vec![0i64; node_count];
    for (p, m) in d.terms() {
        let node = match p {
            GraphPoint::Vertex(v) => vnode(*v),
            GraphPoint::OnEdge { edge, offset } => {
                let ei = comp_edges.iter().position(|&x| x == *edge).unwrap();
                let idx = (offset * &lam)
                    .to_integer()
                    .and_then(|z| z.to_usize())
                    .ok_or_else(|| CurveError::Internal("scaled offset overflow".into()))?;
                edge_nodes[ei][idx]
            }
        };
        chips[node] += m;
    }

    let q = 0usize; // node of the lowest-index component vertex
    let sum_abs: i64 = chips.iter().map(|c| c.abs()).sum();
    let cap = 10_000 + 100 * node_count + 20 * node_count * (sum_abs.unsigned_abs() as usize);
    let mut firings = vec![0i64; node_count];

    // Make the configuration effective away from q by repeatedly firing the
    // sink together with all non-negative nodes.
    let mut rounds = 0usize;
    while chips.iter().enumerate().any(|(x, &c)| x != q && c < 0) {
        rounds += 1;
        if rounds > cap {
            return Err(CurveError::Internal("chip-firing phase 1 cap exceeded".into()));
        }
        let in_a: Vec<bool> = chips
            .iter()
            .enumerate()
            .map(|(x, &c)| x == q || c >= 0)
            .collect();
        let mut delta = vec![0i64; node_count];
        for x in 0..node_count {
            if in_a[x] {
                for &y in &adj[x] {
                    if !in_a[y] {
                        delta[x] -= 1;
                        delta[y] += 1;
                    }
                }
                firings[x] += 1;
            }
        }
        for (c, dl) in chips.iter_mut().zip(&delta) {
            *c += dl;
        }
    }

    // Dhar's burning loop: fire the unburnt set until the fire consumes
    // everything, producing the q-reduced representative.
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        if rounds > cap {
            return Err(CurveError::Internal("chip-firing phase 2 cap exceeded".into()));
        }
        let mut burnt = vec![false; node_count];
        let mut burnt_neighbors = vec![0i64; node_count];
        let mut queue = std::collections::VecDeque::from([q]);
        burnt[q] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !burnt[y] {
                    burnt_neighbors[y] += 1;
                    if burnt_neighbors[y] > chips[y] {
                        burnt[y] = true;
                        queue.push_back(y);
                    }
                }
            }
        }
        if burnt.iter().all(|&b| b) {
            break;
        }
        for x in 0..node_count {
            if !burnt[x] {
                for &y in &adj[x] {
                    if burnt[y] {
                        chips[x] -= 1;
                        chips[y] += 1;
                    }
                }
                firings[x] += 1;
            }
        }
    }

    if chips.iter().any(|&c| c != 0) {
        return Ok(None);
    }

    // Witness potentials: h = firings(q) - firings, scaled back.
    let h: Vec<i64> = firings.iter().map(|&f| firings[q] - f).collect();
    let values: Vec<Rat> = comp
        .iter()
        .enumerate()
        .map(|(i, _)| &Rat::from_int(h[i]) / &lam)
        .collect();
    let mut pls = Vec::new();
    for (ei, &e) in comp_edges.iter().enumerate() {
        let nodes = &edge_nodes[ei];
        let units = edge_units[ei];
        let slopes_raw: Vec<i64> = (0..units).map(|i| h[nodes[i + 1]] - h[nodes[i]]).collect();
        let mut breakpoints = Vec::new();
        let mut slopes = vec![slopes_raw[0]];
        for (i, s) in slopes_raw.iter().enumerate().skip(1) {
            if *s != *slopes.last().unwrap() {
                breakpoints.push(&Rat::from_int(i as i64) / &lam);
                slopes.push(*s);
            }
        }
        pls.push((e, EdgePL { breakpoints, slopes }));
    }
    Ok(Some((values, pls)))
}

fn potential_component(
    g: &MetricGraph,
    comp: &[usize],
    comp_edges: &[usize],
    d: &Divisor,
) -> Result<Option<ComponentWitness>, CurveError> {
    // Nodes: component vertices then interior divisor points; each edge is a
    // chain of segments between consecutive nodes.
    let vnode = |v: usize| comp.binary_search(&v).unwrap();
    let mut node_count = comp.len();
    let mut interior: Vec<Vec<(Rat, usize)>> = vec![Vec::new(); comp_edges.len()];
    let mut node_of_point: std::collections::BTreeMap<GraphPoint, usize> = Default::default();
    for (p, _) in d.terms() {
        if let GraphPoint::OnEdge { edge, offset } = p {
            let ei = comp_edges.iter().position(|&x| x == *edge).unwrap();
            interior[ei].push((offset.clone(), node_count));
            node_of_point.insert(p.clone(), node_count);
            node_count += 1;
        }
    }
    for chain in &mut interior {
        chain.sort_by(|a, b| a.0.cmp(&b.0));
    }

    // Segments (a, b, length).
    let mut segments: Vec<(usize, usize, Rat)> = Vec::new();
    for (ei, &e) in comp_edges.iter().enumerate() {
        let len = g.edge_len_rat(e)?;
        let head = g.edge(e).head.expect("compact");
        let mut prev = (Rat::zero(), vnode(g.edge(e).tail));
        for (off, node) in &interior[ei] {
            segments.push((prev.1, *node, off - &prev.0));
            prev = (off.clone(), *node);
        }
        segments.push((prev.1, vnode(head), &len - &prev.0));
    }

    // Weighted Laplacian system: div x = d, pinned at node 0.
    let mut mat = vec![vec![Rat::zero(); node_count]; node_count];
    let mut rhs = vec![Rat::zero(); node_count];
    for (a, b, len) in &segments {
        if a == b {
            continue;
        }
        let w = len.recip();
        mat[*a][*a] += &w;
        mat[*b][*b] += &w;
        mat[*a][*b] -= &w;
        mat[*b][*a] -= &w;
    }
    for (p, m) in d.terms() {
        let node = match p {
            GraphPoint::Vertex(v) => vnode(*v),
            GraphPoint::OnEdge { .. } => node_of_point[p],
        };
        rhs[node] = -Rat::from_int(*m);
    }
    mat[0] = vec![Rat::zero(); node_count];
    mat[0][0] = Rat::one();
    rhs[0] = Rat::zero();
    let x = rat_solve(&mat, &rhs)?;

    // Slopes must be integers.
    for (a, b, len) in &segments {
        if a == b {
            continue;
        }
        let slope = &(&x[*b] - &x[*a]) / len;
        if !slope.is_integer() {
            return Ok(None);
        }
    }

    let values: Vec<Rat> = (0..comp.len()).map(|i| x[i].clone()).collect();
    let mut pls = Vec::new();
    for (ei, &e) in comp_edges.iter().enumerate() {
        let len = g.edge_len_rat(e)?;
        let head = g.edge(e).head.expect("compact");
        let mut nodes = vec![(Rat::zero(), vnode(g.edge(e).tail))];
        nodes.extend(interior[ei].iter().cloned());
        nodes.push((len, vnode(head)));
        let mut breakpoints = Vec::new();
        let mut slopes: Vec<i64> = Vec::new();
        for w in nodes.windows(2) {
            let (o1, n1) = &w[0];
            let (o2, n2) = &w[1];
            let slope = if n1 == n2 {
                0
            } else {
                (&(&x[*n2] - &x[*n1]) / &(o2 - o1))
                    .to_integer()
                    .and_then(|z| z.to_i64())
                    .ok_or_else(|| CurveError::Internal("slope overflow".into()))?
            };
            match slopes.last() {
                Some(&s) if s == slope => {}
                Some(_) => {
                    breakpoints.push(o1.clone());
                    slopes.push(slope);
                }
                None => slopes.push(slope),
            }
        }
        pls.push((e, EdgePL { breakpoints, slopes }));
    }
    Ok(Some((values, pls)))
}

#[cfg(test)]
mod tests {
    use super::super::{abel_jacobi, principal_divisor, theta_graph};
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    fn circle1() -> MetricGraph {
        MetricGraph::circle(r("1")).unwrap()
    }

    fn pts(ds: &[(&str, i64)]) -> Divisor {
        Divisor::new(
            ds.iter()
                .map(|(o, m)| (GraphPoint::on_edge(0, r(o)), *m))
                .collect(),
        )
    }

    #[test]
    fn equal_divisors_give_zero_witness() {
        let g = circle1();
        let d = pts(&[("1/4", 1)]);
        match linear_equivalence(&g, &d, &d).unwrap() {
            LinEquivOutcome::Witness(f) => assert!(f.is_zero()),
            _ => panic!("expected zero witness"),
        }
    }

    #[test]
    fn fixed_sum_pairs_on_circle_are_equivalent() {
        let g = circle1();
        let d1 = pts(&[("1/10", 1), ("3/10", 1)]);
        let d2 = pts(&[("3/20", 1), ("1/4", 1)]);
        match linear_equivalence(&g, &d1, &d2).unwrap() {
            LinEquivOutcome::Witness(f) => {
                assert_eq!(principal_divisor(&g, &f).unwrap(), d1.sub(&d2));
            }
            _ => panic!("offsets with equal sums are equivalent on a circle"),
        }
    }

    #[test]
    fn distinct_points_on_circle_are_not_equivalent() {
        let g = circle1();
        let d1 = pts(&[("1/10", 1)]);
        let d2 = pts(&[("7/20", 1)]);
        assert_eq!(
            linear_equivalence(&g, &d1, &d2).unwrap(),
            LinEquivOutcome::NotEquivalent
        );
    }

    #[test]
    fn engines_agree_on_circle_cases() {
        let g = circle1();
        let cases = [
            (pts(&[("1/10", 1), ("3/10", 1)]), pts(&[("3/20", 1), ("1/4", 1)])),
            (pts(&[("1/10", 1)]), pts(&[("7/20", 1)])),
            (pts(&[("1/3", 2)]), pts(&[("2/3", 2)])),
        ];
        for (d1, d2) in cases {
            let a = linear_equivalence_via(&g, &d1, &d2, Some(LinEquivEngine::ChipFiring)).unwrap();
            let b = linear_equivalence_via(&g, &d1, &d2, Some(LinEquivEngine::Potential)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn witness_matches_abel_jacobi_on_theta_graph() {
        let g = theta_graph(r("1"), r("1"), r("1"));
        let d1 = Divisor::new(vec![
            (GraphPoint::on_edge(1, r("1/3")), 1),
            (GraphPoint::on_edge(2, r("1/3")), 1),
        ]);
        let d2 = Divisor::new(vec![(GraphPoint::vertex(0), 2)]);
        let eq = linear_equivalence(&g, &d1, &d2).unwrap();
        let aj = abel_jacobi(&g, &GraphPoint::vertex(0), &d1.sub(&d2)).unwrap();
        match eq {
            LinEquivOutcome::Witness(_) => assert!(aj.is_zero()),
            LinEquivOutcome::NotEquivalent => assert!(!aj.is_zero()),
        }
    }

    #[test]
    fn degree_mismatch_is_an_error() {
        let g = circle1();
        assert_eq!(
            linear_equivalence(&g, &pts(&[("1/4", 2)]), &pts(&[("1/2", 1)])),
            Err(CurveError::DegreeMismatch)
        );
    }

    #[test]
    fn weighted_edges_are_rejected() {
        let mut edges = circle1().edges().to_vec();
        edges[0].weight = 2;
        let g = MetricGraph::new(1, edges, crate::exactnum::SymbolSet::empty()).unwrap();
        assert_eq!(
            linear_equivalence(&g, &Divisor::empty(), &Divisor::empty()),
            Err(CurveError::UnsupportedWeights)
        );
    }
}
