//! Abstract and parametrized (mixed-sign) tropical curves: balancing,
//! Jacobians, Abel-Jacobi, divisors, integer-slope piecewise-linear
//! functions, linear equivalence via chip-firing, Jacobi inversion and class
//! division, mixed-vertex normalization and isogeny pullback.

mod chipfire;
mod jacobian;
mod map;

pub use chipfire::{linear_equivalence, linear_equivalence_via, LinEquivEngine, LinEquivOutcome};
pub use jacobian::{
    abel_jacobi, abel_jacobi_lift, abel_jacobi_mixed, divide_class, fundamental_cycles,
    jacobi_inversion, period_matrix, period_matrix_default, spanning_tree, DivisionResult,
    JacClass,
};
pub use map::{
    balancing_check, effective_balance_check, normalize_mixed_vertices, pullback_curve,
    BalanceReport, CurveMap, Target,
};

use crate::exactnum::{
    sign_of, LatticeError, LinAlgError, Rat, Sign, SignError, SymbolSet, SymbolicReal,
};
use crate::torus::TorusError;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CurveError {
    #[error("graph is not compact")]
    NonCompact,
    #[error("graph is not connected")]
    Disconnected,
    #[error("divisor has nonzero degree {0}")]
    NonzeroDegree(i64),
    #[error("divisors have different degrees")]
    DegreeMismatch,
    #[error("edge weights greater than 1 are unsupported here")]
    UnsupportedWeights,
    #[error("mixed-sign edges are unsupported here")]
    MixedSignsUnsupported,
    #[error("operation requires rational data")]
    RequiresRationalData,
    #[error("invalid graph point: {0}")]
    BadPoint(String),
    #[error("invalid piecewise-linear function: {0}")]
    BadFunction(String),
    #[error("slopes must be integral")]
    NonIntegerSlope,
    #[error("integration pairing is singular")]
    SingularPairing,
    #[error("input curve is not balanced")]
    UnbalancedInput,
    #[error("vertex star is not balanced for the given weights")]
    InputNotBalanced,
    #[error("invalid graph: {0}")]
    BadGraph(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Sign(#[from] SignError),
}

/// Edge length: finite exact value (symbolic allowed) or infinite for
/// semi-infinite edges.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeLength {
    Finite(SymbolicReal),
    Infinite,
}

impl EdgeLength {
    pub fn rat(r: Rat) -> Self {
        EdgeLength::Finite(SymbolicReal::from_rat(r))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, EdgeLength::Finite(_))
    }

    pub fn as_rational(&self) -> Option<Rat> {
        match self {
            EdgeLength::Finite(s) => s.as_rational(),
            EdgeLength::Infinite => None,
        }
    }
}

impl Serialize for EdgeLength {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            EdgeLength::Infinite => ser.serialize_str("inf"),
            EdgeLength::Finite(s) => s.serialize(ser),
        }
    }
}

impl<'de> Deserialize<'de> for EdgeLength {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Symbolic(SymbolicReal),
        }
        match Repr::deserialize(de)? {
            Repr::Text(s) if s == "inf" => Ok(EdgeLength::Infinite),
            Repr::Text(s) => {
                let r: Rat = s.parse().map_err(serde::de::Error::custom)?;
                Ok(EdgeLength::rat(r))
            }
            Repr::Symbolic(s) => Ok(EdgeLength::Finite(s)),
        }
    }
}

/// Oriented edge of a metric graph. A missing head marks a semi-infinite
/// edge, which must have infinite length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: Option<usize>,
    pub length: EdgeLength,
    pub weight: u32,
    pub sign: i8,
}

/// Which end of an edge meets a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndKind {
    Tail,
    Head,
}

/// One edge-end incident to a vertex.
#[derive(Clone, Copy, Debug)]
pub struct Incidence {
    pub edge: usize,
    pub end: EndKind,
}

/// Abstract tropical curve: a metric graph with edge weights and signs.
/// Orientation of edges is bookkeeping only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricGraph {
    vertices: usize,
    edges: Vec<Edge>,
    #[serde(skip_serializing_if = "SymbolSet::is_empty", default = "SymbolSet::empty")]
    symbols: SymbolSet,
}

impl MetricGraph {
    pub fn new(vertices: usize, edges: Vec<Edge>, symbols: SymbolSet) -> Result<Self, CurveError> {
        for (i, e) in edges.iter().enumerate() {
            if e.tail >= vertices || e.head.is_some_and(|h| h >= vertices) {
                return Err(CurveError::BadGraph(format!("edge {i} endpoint out of range")));
            }
            if e.head.is_none() != matches!(e.length, EdgeLength::Infinite) {
                return Err(CurveError::BadGraph(format!(
                    "edge {i}: semi-infinite edges are exactly those with infinite length"
                )));
            }
            if e.weight == 0 {
                return Err(CurveError::BadGraph(format!("edge {i} has weight 0")));
            }
            if e.sign != 1 && e.sign != -1 {
                return Err(CurveError::BadGraph(format!("edge {i} has sign {}", e.sign)));
            }
            if let EdgeLength::Finite(len) = &e.length {
                if sign_of(len, &symbols)? != Sign::Positive {
                    return Err(CurveError::BadGraph(format!(
                        "edge {i} length is not certified positive"
                    )));
                }
            }
        }
        Ok(MetricGraph {
            vertices,
            edges,
            symbols,
        })
    }

    /// Compact graph with unit weights and positive signs from rational
    /// lengths `(tail, head, length)`.
    pub fn from_lengths(vertices: usize, data: &[(usize, usize, Rat)]) -> Result<Self, CurveError> {
        let edges = data
            .iter()
            .map(|(t, h, l)| Edge {
                tail: *t,
                head: Some(*h),
                length: EdgeLength::rat(l.clone()),
                weight: 1,
                sign: 1,
            })
            .collect();
        MetricGraph::new(vertices, edges, SymbolSet::empty())
    }

    /// Circle of a given circumference: one vertex, one loop edge.
    pub fn circle(circumference: Rat) -> Result<Self, CurveError> {
        MetricGraph::from_lengths(1, &[(0, 0, circumference)])
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn symbols(&self) -> &SymbolSet {
        &self.symbols
    }

    pub fn is_compact(&self) -> bool {
        self.edges.iter().all(|e| e.length.is_finite())
    }

    pub fn incidences(&self, v: usize) -> Vec<Incidence> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.tail == v {
                out.push(Incidence {
                    edge: i,
                    end: EndKind::Tail,
                });
            }
            if e.head == Some(v) {
                out.push(Incidence {
                    edge: i,
                    end: EndKind::Head,
                });
            }
        }
        out
    }

    pub fn valence(&self, v: usize) -> usize {
        self.incidences(v).len()
    }

    /// Connected components as sorted vertex lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices).collect();
        fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            if let Some(h) = e.head {
                let a = find(&mut parent, e.tail);
                let b = find(&mut parent, h);
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..self.vertices {
            let root = find(&mut parent, v);
            groups.entry(root).or_default().push(v);
        }
        groups.into_values().collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn edge_len_rat(&self, e: usize) -> Result<Rat, CurveError> {
        self.edges[e]
            .length
            .as_rational()
            .ok_or(CurveError::RequiresRationalData)
    }

    /// First Betti number of a connected compact graph.
    pub fn genus(&self) -> Result<usize, CurveError> {
        if !self.is_compact() {
            return Err(CurveError::NonCompact);
        }
        if !self.is_connected() {
            return Err(CurveError::Disconnected);
        }
        Ok(self.edges.len() + 1 - self.vertices)
    }

    /// Validate a graph point; interior offsets need a rational edge length.
    pub fn validate_point(&self, p: &GraphPoint) -> Result<(), CurveError> {
        match p {
            GraphPoint::Vertex(v) => {
                if *v >= self.vertices {
                    return Err(CurveError::BadPoint(format!("vertex {v} out of range")));
                }
            }
            GraphPoint::OnEdge { edge, offset } => {
                if *edge >= self.edges.len() {
                    return Err(CurveError::BadPoint(format!("edge {edge} out of range")));
                }
                if !offset.is_positive() {
                    return Err(CurveError::BadPoint("offset must be positive".into()));
                }
                if let Some(len) = self.edges[*edge].length.as_rational() {
                    if offset >= &len {
                        return Err(CurveError::BadPoint(
                            "offset must be strictly interior".into(),
                        ));
                    }
                } else if self.edges[*edge].length.is_finite() {
                    return Err(CurveError::RequiresRationalData);
                }
            }
        }
        Ok(())
    }

    /// Subgraph induced by a vertex set, with index maps back into the
    /// original graph. Edges are kept when all their endpoints lie in the
    /// set (rays when their tail does).
    pub fn induced_subgraph(&self, vertex_set: &[usize]) -> (MetricGraph, SubgraphMaps) {
        let mut vmap = vec![usize::MAX; self.vertices];
        for (new, &old) in vertex_set.iter().enumerate() {
            vmap[old] = new;
        }
        let mut edges = Vec::new();
        let mut edge_map = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let tail_in = vmap[e.tail] != usize::MAX;
            let head_in = match e.head {
                Some(h) => vmap[h] != usize::MAX,
                None => tail_in,
            };
            if tail_in && head_in {
                edges.push(Edge {
                    tail: vmap[e.tail],
                    head: e.head.map(|h| vmap[h]),
                    ..e.clone()
                });
                edge_map.push(i);
            }
        }
        (
            MetricGraph {
                vertices: vertex_set.len(),
                edges,
                symbols: self.symbols.clone(),
            },
            SubgraphMaps {
                vertex_to_old: vertex_set.to_vec(),
                edge_to_old: edge_map,
            },
        )
    }
}

#[derive(Clone, Debug)]
pub struct SubgraphMaps {
    pub vertex_to_old: Vec<usize>,
    pub edge_to_old: Vec<usize>,
}

#[derive(Deserialize)]
struct GraphRepr {
    vertices: usize,
    edges: Vec<Edge>,
    #[serde(default)]
    symbols: Option<SymbolSet>,
}

impl<'de> Deserialize<'de> for MetricGraph {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let repr = GraphRepr::deserialize(de)?;
        MetricGraph::new(
            repr.vertices,
            repr.edges,
            repr.symbols.unwrap_or_else(SymbolSet::empty),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Point of a metric graph: a vertex, or an interior point of an edge at a
/// rational offset from the tail.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphPoint {
    #[serde(rename = "vertex")]
    Vertex(usize),
    #[serde(rename = "on_edge")]
    OnEdge { edge: usize, offset: Rat },
}

impl GraphPoint {
    pub fn vertex(v: usize) -> Self {
        GraphPoint::Vertex(v)
    }

    pub fn on_edge(edge: usize, offset: Rat) -> Self {
        GraphPoint::OnEdge { edge, offset }
    }
}

/// Finite integer combination of graph points; duplicates merged, zero
/// multiplicities dropped, terms sorted.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Divisor {
    terms: Vec<(GraphPoint, i64)>,
}

impl Divisor {
    pub fn new(terms: Vec<(GraphPoint, i64)>) -> Self {
        let mut map: std::collections::BTreeMap<GraphPoint, i64> = Default::default();
        for (p, m) in terms {
            *map.entry(p).or_insert(0) += m;
        }
        Divisor {
            terms: map.into_iter().filter(|(_, m)| *m != 0).collect(),
        }
    }

    pub fn empty() -> Self {
        Divisor::default()
    }

    pub fn of_point(p: GraphPoint) -> Self {
        Divisor::new(vec![(p, 1)])
    }

    pub fn terms(&self) -> &[(GraphPoint, i64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> i64 {
        self.terms.iter().map(|(_, m)| m).sum()
    }

    pub fn add(&self, other: &Divisor) -> Divisor {
        let mut all = self.terms.clone();
        all.extend(other.terms.iter().cloned());
        Divisor::new(all)
    }

    pub fn sub(&self, other: &Divisor) -> Divisor {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> Divisor {
        Divisor::new(self.terms.iter().map(|(p, m)| (p.clone(), m * k)).collect())
    }

    pub fn validate(&self, g: &MetricGraph) -> Result<(), CurveError> {
        for (p, _) in &self.terms {
            g.validate_point(p)?;
        }
        Ok(())
    }
}

/// Per-edge description of a continuous piecewise-linear function with
/// integer slopes against the unit-speed metric, parametrized tail to head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePL {
    /// Interior breakpoints, strictly increasing in `(0, length)`.
    pub breakpoints: Vec<Rat>,
    /// Slopes on the segments between breakpoints; `breakpoints.len() + 1`.
    pub slopes: Vec<i64>,
}

impl EdgePL {
    pub fn constant() -> Self {
        EdgePL {
            breakpoints: vec![],
            slopes: vec![0],
        }
    }
}

/// Continuous PL function on a compact metric graph with rational data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PLFunction {
    pub vertex_values: Vec<Rat>,
    pub edges: Vec<EdgePL>,
}

impl PLFunction {
    pub fn zero(g: &MetricGraph) -> Self {
        PLFunction {
            vertex_values: vec![Rat::zero(); g.num_vertices()],
            edges: g.edges().iter().map(|_| EdgePL::constant()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.vertex_values.iter().all(|v| v.is_zero())
            && self.edges.iter().all(|e| e.slopes.iter().all(|&s| s == 0))
    }

    pub fn validate(&self, g: &MetricGraph) -> Result<(), CurveError> {
        if self.vertex_values.len() != g.num_vertices() || self.edges.len() != g.edges().len() {
            return Err(CurveError::BadFunction("shape mismatch with graph".into()));
        }
        for (i, (epl, e)) in self.edges.iter().zip(g.edges()).enumerate() {
            let len = e
                .length
                .as_rational()
                .ok_or(CurveError::RequiresRationalData)?;
            if epl.slopes.len() != epl.breakpoints.len() + 1 {
                return Err(CurveError::BadFunction(format!(
                    "edge {i}: {} breakpoints with {} slopes",
                    epl.breakpoints.len(),
                    epl.slopes.len()
                )));
            }
            let mut prev = Rat::zero();
            for b in &epl.breakpoints {
                if b <= &prev || b >= &len {
                    return Err(CurveError::BadFunction(format!(
                        "edge {i}: breakpoints must be strictly increasing interior points"
                    )));
                }
                prev = b.clone();
            }
            let head = e.head.ok_or(CurveError::NonCompact)?;
            // Continuity along the edge.
            let mut val = self.vertex_values[e.tail].clone();
            let mut pos = Rat::zero();
            for (k, s) in epl.slopes.iter().enumerate() {
                let next = if k < epl.breakpoints.len() {
                    epl.breakpoints[k].clone()
                } else {
                    len.clone()
                };
                val += &(&Rat::from_int(*s) * &(&next - &pos));
                pos = next;
            }
            if val != self.vertex_values[head] {
                return Err(CurveError::BadFunction(format!(
                    "edge {i}: endpoint values break continuity"
                )));
            }
        }
        Ok(())
    }

    /// Value at a graph point.
    pub fn eval(&self, g: &MetricGraph, p: &GraphPoint) -> Result<Rat, CurveError> {
        g.validate_point(p)?;
        match p {
            GraphPoint::Vertex(v) => Ok(self.vertex_values[*v].clone()),
            GraphPoint::OnEdge { edge, offset } => {
                let e = g.edge(*edge);
                let epl = &self.edges[*edge];
                let mut val = self.vertex_values[e.tail].clone();
                let mut pos = Rat::zero();
                for (k, s) in epl.slopes.iter().enumerate() {
                    let seg_end = if k < epl.breakpoints.len() {
                        Rat::min2(&epl.breakpoints[k], offset)
                    } else {
                        offset.clone()
                    };
                    if seg_end > pos {
                        val += &(&Rat::from_int(*s) * &(&seg_end - &pos));
                        pos = seg_end;
                    }
                    if &pos >= offset {
                        break;
                    }
                }
                Ok(val)
            }
        }
    }

    /// Outgoing slope at a vertex into a given edge end.
    pub fn outgoing_slope(&self, inc: &Incidence) -> i64 {
        let epl = &self.edges[inc.edge];
        match inc.end {
            EndKind::Tail => epl.slopes[0],
            EndKind::Head => -*epl.slopes.last().unwrap(),
        }
    }
}

/// Divisor of a PL function: at each point, the sum of outgoing slopes.
/// On a compact graph the result has degree zero.
pub fn principal_divisor(g: &MetricGraph, f: &PLFunction) -> Result<Divisor, CurveError> {
    if !g.is_compact() {
        return Err(CurveError::NonCompact);
    }
    f.validate(g)?;
    let mut terms = Vec::new();
    for v in 0..g.num_vertices() {
        let mult: i64 = g.incidences(v).iter().map(|inc| f.outgoing_slope(inc)).sum();
        if mult != 0 {
            terms.push((GraphPoint::vertex(v), mult));
        }
    }
    for (i, epl) in f.edges.iter().enumerate() {
        for (k, b) in epl.breakpoints.iter().enumerate() {
            let jump = epl.slopes[k + 1] - epl.slopes[k];
            if jump != 0 {
                terms.push((GraphPoint::on_edge(i, b.clone()), jump));
            }
        }
    }
    Ok(Divisor::new(terms))
}

#[cfg(test)]
pub(crate) fn theta_graph(l1: Rat, l2: Rat, l3: Rat) -> MetricGraph {
    MetricGraph::from_lengths(2, &[(0, 1, l1), (0, 1, l2), (0, 1, l3)]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn graph_invariants() {
        let g = theta_graph(r("3"), r("5"), r("7"));
        assert_eq!(g.genus().unwrap(), 2);
        assert_eq!(g.valence(0), 3);
        assert!(g.is_connected());

        let bad = MetricGraph::new(
            1,
            vec![Edge {
                tail: 0,
                head: Some(0),
                length: EdgeLength::Infinite,
                weight: 1,
                sign: 1,
            }],
            SymbolSet::empty(),
        );
        assert!(bad.is_err());

        let ray = MetricGraph::new(
            1,
            vec![Edge {
                tail: 0,
                head: None,
                length: EdgeLength::Infinite,
                weight: 2,
                sign: -1,
            }],
            SymbolSet::empty(),
        )
        .unwrap();
        assert!(!ray.is_compact());
    }

    #[test]
    fn divisor_normalization() {
        let p = GraphPoint::vertex(0);
        let q = GraphPoint::on_edge(0, r("1/3"));
        let d = Divisor::new(vec![(p.clone(), 2), (q.clone(), 1), (p, -2)]);
        assert_eq!(d.terms(), &[(q, 1)]);
        assert_eq!(d.degree(), 1);
    }

    #[test]
    fn principal_divisor_constant_is_empty() {
        let g = MetricGraph::circle(r("1")).unwrap();
        let f = PLFunction::zero(&g);
        assert!(principal_divisor(&g, &f).unwrap().is_empty());
    }

    #[test]
    fn principal_divisor_tent_on_circle() {
        // Circle of length 1, slope +1 on (0, 1/2), -1 on (1/2, 1).
        let g = MetricGraph::circle(r("1")).unwrap();
        let f = PLFunction {
            vertex_values: vec![r("0")],
            edges: vec![EdgePL {
                breakpoints: vec![r("1/2")],
                slopes: vec![1, -1],
            }],
        };
        let d = principal_divisor(&g, &f).unwrap();
        assert_eq!(
            d.terms(),
            &[
                (GraphPoint::vertex(0), 2),
                (GraphPoint::on_edge(0, r("1/2")), -2),
            ]
        );
        assert_eq!(d.degree(), 0);
    }

    #[test]
    fn principal_divisor_segment_breakpoint() {
        // Segment of length 1, slope 0 then 1 after the midpoint.
        let g = MetricGraph::from_lengths(2, &[(0, 1, r("1"))]).unwrap();
        let f = PLFunction {
            vertex_values: vec![r("0"), r("1/2")],
            edges: vec![EdgePL {
                breakpoints: vec![r("1/2")],
                slopes: vec![0, 1],
            }],
        };
        let d = principal_divisor(&g, &f).unwrap();
        assert_eq!(
            d.terms(),
            &[
                (GraphPoint::vertex(1), -1),
                (GraphPoint::on_edge(0, r("1/2")), 1),
            ]
        );
    }

    #[test]
    fn pl_validation_catches_discontinuity() {
        let g = MetricGraph::from_lengths(2, &[(0, 1, r("1"))]).unwrap();
        let f = PLFunction {
            vertex_values: vec![r("0"), r("7")],
            edges: vec![EdgePL {
                breakpoints: vec![],
                slopes: vec![1],
            }],
        };
        assert!(matches!(f.validate(&g), Err(CurveError::BadFunction(_))));
    }

    #[test]
    fn eval_along_edge() {
        let g = MetricGraph::from_lengths(2, &[(0, 1, r("2"))]).unwrap();
        let f = PLFunction {
            vertex_values: vec![r("0"), r("0")],
            edges: vec![EdgePL {
                breakpoints: vec![r("1")],
                slopes: vec![1, -1],
            }],
        };
        f.validate(&g).unwrap();
        assert_eq!(f.eval(&g, &GraphPoint::on_edge(0, r("1/2"))).unwrap(), r("1/2"));
        assert_eq!(f.eval(&g, &GraphPoint::on_edge(0, r("3/2"))).unwrap(), r("1/2"));
    }

    #[test]
    fn graph_json_round_trip() {
        let g = theta_graph(r("3"), r("5"), r("7"));
        let js = serde_json::to_string(&g).unwrap();
        let back: MetricGraph = serde_json::from_str(&js).unwrap();
        assert_eq!(g, back);
    }
}
