//! Metric graphs: vertices, edges with length and conductivity, the doubled
//! (oriented) edge set, points, paths and transfer coefficients.

mod build;
mod json;
mod paths;

pub use build::{cubic_torus, cycle, homogeneous_tree, line_segment, random_connected, star, LatticeEmbedding};
pub use json::{GraphDoc, PeriodicDoc};
pub(crate) use paths::transfer_unchecked;
pub use paths::{
    path_count_check, transfer_coefficient, transfer_identities_audit, PathEnumerator, TransferAudit,
};

use crate::error::{invalid, Error, Result};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub source: String,
    pub target: String,
    pub length: f64,
    pub conductivity: f64,
}

impl EdgeSpec {
    pub fn new(id: impl Into<String>, source: impl Into<String>, target: impl Into<String>, length: f64, conductivity: f64) -> Self {
        EdgeSpec { id: id.into(), source: source.into(), target: target.into(), length, conductivity }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub source: usize,
    pub target: usize,
    pub length: f64,
    pub conductivity: f64,
}

/// An edge of the doubled graph: `+e` runs source to target, `-e` the other way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedEdge {
    pub edge: usize,
    pub reversed: bool,
}

impl DirectedEdge {
    pub fn forward(edge: usize) -> Self {
        DirectedEdge { edge, reversed: false }
    }

    pub fn backward(edge: usize) -> Self {
        DirectedEdge { edge, reversed: true }
    }

    pub fn reverse(self) -> Self {
        DirectedEdge { edge: self.edge, reversed: !self.reversed }
    }

    /// Dense index in `0..2|E|`.
    pub fn index(self) -> usize {
        2 * self.edge + self.reversed as usize
    }

    pub fn from_index(i: usize) -> Self {
        DirectedEdge { edge: i / 2, reversed: i % 2 == 1 }
    }

    /// Distance from the initial vertex of this orientation to the point at
    /// local coordinate `xi` of the underlying edge.
    pub fn position(self, xi: f64, length: f64) -> f64 {
        if self.reversed {
            length - xi
        } else {
            xi
        }
    }
}

impl fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.reversed { '-' } else { '+' }, self.edge)
    }
}

/// Cell data for graphs built from a `periodic` block.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCell {
    pub copies: usize,
    pub edges_per_copy: usize,
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<DirectedEdge>>,
    vertex_conductivity: Vec<f64>,
    vertex_lookup: HashMap<String, usize>,
    edge_lookup: HashMap<String, usize>,
    min_length: f64,
    max_length: f64,
    cell: Option<PeriodicCell>,
}

impl MetricGraph {
    pub fn new(vertices: Vec<String>, specs: Vec<EdgeSpec>) -> Result<Self> {
        if vertices.is_empty() {
            return invalid("graph has no vertices");
        }
        if specs.is_empty() {
            return invalid("graph has no edges");
        }
        let mut vertex_lookup = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if vertex_lookup.insert(v.clone(), i).is_some() {
                return invalid(format!("duplicate vertex id {v:?}"));
            }
        }
        let mut edges = Vec::with_capacity(specs.len());
        let mut edge_lookup = HashMap::new();
        for (i, s) in specs.into_iter().enumerate() {
            let source = *vertex_lookup
                .get(&s.source)
                .ok_or_else(|| Error::Invalid(format!("edge {:?}: unknown source vertex {:?}", s.id, s.source)))?;
            let target = *vertex_lookup
                .get(&s.target)
                .ok_or_else(|| Error::Invalid(format!("edge {:?}: unknown target vertex {:?}", s.id, s.target)))?;
            if source == target {
                return invalid(format!("edge {:?} is a self-loop at {:?}", s.id, s.source));
            }
            if !(s.length.is_finite() && s.length > 0.0) {
                return invalid(format!("edge {:?}: length must be positive and finite, got {}", s.id, s.length));
            }
            if !(s.conductivity.is_finite() && s.conductivity > 0.0) {
                return invalid(format!(
                    "edge {:?}: conductivity must be positive and finite, got {}",
                    s.id, s.conductivity
                ));
            }
            if edge_lookup.insert(s.id.clone(), i).is_some() {
                return invalid(format!("duplicate edge id {:?}", s.id));
            }
            edges.push(Edge { id: s.id, source, target, length: s.length, conductivity: s.conductivity });
        }

        let mut outgoing = vec![Vec::new(); vertices.len()];
        let mut vertex_conductivity = vec![0.0; vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.source].push(DirectedEdge::forward(i));
            outgoing[e.target].push(DirectedEdge::backward(i));
            vertex_conductivity[e.source] += e.conductivity;
            vertex_conductivity[e.target] += e.conductivity;
        }
        if let Some(v) = outgoing.iter().position(|o| o.is_empty()) {
            return invalid(format!("vertex {:?} is isolated", vertices[v]));
        }

        let min_length = edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
        let max_length = edges.iter().map(|e| e.length).fold(0.0, f64::max);
        let g = MetricGraph {
            vertices,
            edges,
            outgoing,
            vertex_conductivity,
            vertex_lookup,
            edge_lookup,
            min_length,
            max_length,
            cell: None,
        };
        if !g.is_connected() {
            return invalid("graph is disconnected");
        }
        Ok(g)
    }

    pub(crate) fn with_cell(mut self, cell: PeriodicCell) -> Self {
        self.cell = Some(cell);
        self
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for d in &self.outgoing[v] {
                let w = self.terminal(*d);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertex_lookup.get(id).copied()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edge_lookup.get(id).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn check_edge(&self, e: usize) -> Result<()> {
        if e < self.edges.len() {
            Ok(())
        } else {
            Err(Error::UnknownEdge(format!("edge index {e} (graph has {} edges)", self.edges.len())))
        }
    }

    pub fn length(&self, e: usize) -> f64 {
        self.edges[e].length
    }

    pub fn conductivity(&self, e: usize) -> f64 {
        self.edges[e].conductivity
    }

    /// c(v): sum of conductivities of incident edges.
    pub fn vertex_conductivity(&self, v: usize) -> f64 {
        self.vertex_conductivity[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.outgoing[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.outgoing.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_length(&self) -> f64 {
        self.min_length
    }

    pub fn max_length(&self) -> f64 {
        self.max_length
    }

    pub fn periodic_cell(&self) -> Option<&PeriodicCell> {
        self.cell.as_ref()
    }

    /// i(d)
    pub fn initial(&self, d: DirectedEdge) -> usize {
        let e = &self.edges[d.edge];
        if d.reversed {
            e.target
        } else {
            e.source
        }
    }

    /// t(d)
    pub fn terminal(&self, d: DirectedEdge) -> usize {
        let e = &self.edges[d.edge];
        if d.reversed {
            e.source
        } else {
            e.target
        }
    }

    /// Directed edges d with i(d) = v.
    pub fn outgoing(&self, v: usize) -> &[DirectedEdge] {
        &self.outgoing[v]
    }

    /// Directed edges that can follow `d` in a path.
    pub fn successors(&self, d: DirectedEdge) -> &[DirectedEdge] {
        &self.outgoing[self.terminal(d)]
    }

    /// Common edge length if all lengths agree to a relative `tol`.
    pub fn equilateral_length(&self, tol: f64) -> Option<f64> {
        let l = self.edges[0].length;
        self.edges.iter().all(|e| (e.length - l).abs() <= tol * l).then_some(l)
    }

    /// Total measure of the graph, sum of c(e)|e|.
    pub fn total_measure(&self) -> f64 {
        self.edges.iter().map(|e| e.conductivity * e.length).sum()
    }

    pub fn point(&self, edge: usize, xi: f64) -> Result<GraphPoint> {
        GraphPoint::new(self, edge, xi)
    }

    /// Parses `edge_id:xi`.
    pub fn parse_point(&self, s: &str) -> Result<GraphPoint> {
        let (id, xi) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Invalid(format!("point {s:?} is not of the form edge:xi")))?;
        let e = self.edge_index(id).ok_or_else(|| Error::UnknownEdge(id.to_string()))?;
        let xi: f64 = xi.trim().parse().map_err(|_| Error::Invalid(format!("bad coordinate in {s:?}")))?;
        GraphPoint::new(self, e, xi)
    }

    /// Shortest-path distances from vertex sources with initial offsets.
    fn dijkstra(&self, sources: &[(usize, f64)]) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let mut dist = vec![f64::INFINITY; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        for &(v, d) in sources {
            if d < dist[v] {
                dist[v] = d;
                heap.push(Item(d, v));
            }
        }
        while let Some(Item(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &de in &self.outgoing[v] {
                let w = self.terminal(de);
                let nd = d + self.edges[de.edge].length;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Item(nd, w));
                }
            }
        }
        dist
    }

    /// Geodesic distance between two points.
    pub fn distance(&self, x: &GraphPoint, y: &GraphPoint) -> f64 {
        let ex = &self.edges[x.edge];
        let ey = &self.edges[y.edge];
        let dist = self.dijkstra(&[(ex.source, x.xi), (ex.target, ex.length - x.xi)]);
        let mut d = (dist[ey.source] + y.xi).min(dist[ey.target] + ey.length - y.xi);
        if x.edge == y.edge {
            d = d.min((x.xi - y.xi).abs());
        }
        d
    }
}

/// A point (e, xi) with xi in [0, |e|]. Endpoints are resolved to their vertex,
/// and two points at the same vertex compare equal whatever edge carries them.
#[derive(Debug, Clone, Copy)]
pub struct GraphPoint {
    pub edge: usize,
    pub xi: f64,
    vertex: Option<usize>,
}

impl GraphPoint {
    pub fn new(g: &MetricGraph, edge: usize, xi: f64) -> Result<Self> {
        g.check_edge(edge)?;
        let e = g.edge(edge);
        let snap = 1e-12 * e.length;
        if !xi.is_finite() || xi < -snap || xi > e.length + snap {
            return invalid(format!("coordinate {xi} outside [0, {}] on edge {:?}", e.length, e.id));
        }
        let (xi, vertex) = if xi <= snap {
            (0.0, Some(e.source))
        } else if xi >= e.length - snap {
            (e.length, Some(e.target))
        } else {
            (xi, None)
        };
        Ok(GraphPoint { edge, xi, vertex })
    }

    pub fn vertex(&self) -> Option<usize> {
        self.vertex
    }

    pub fn label(&self, g: &MetricGraph) -> String {
        format!("{}:{}", g.edge(self.edge).id, self.xi)
    }
}

impl PartialEq for GraphPoint {
    fn eq(&self, other: &Self) -> bool {
        match (self.vertex, other.vertex) {
            (Some(a), Some(b)) => a == b,
            (None, None) => self.edge == other.edge && self.xi == other.xi,
            _ => false,
        }
    }
}

/// An admissible edge sequence with |P| = sum of all but the last edge length.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub edges: Vec<DirectedEdge>,
    pub length: f64,
    pub transfer: f64,
}

impl Path {
    pub fn empty(start: DirectedEdge) -> Self {
        Path { edges: vec![start], length: 0.0, transfer: 1.0 }
    }

    /// Number of steps m (edges minus one).
    pub fn steps(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn first(&self) -> DirectedEdge {
        self.edges[0]
    }

    pub fn last(&self) -> DirectedEdge {
        *self.edges.last().expect("paths are nonempty")
    }

    /// -P: reversed order and orientation, transfer recomputed.
    pub fn reversed(&self, g: &MetricGraph) -> Path {
        let edges: Vec<_> = self.edges.iter().rev().map(|d| d.reverse()).collect();
        let transfer = edges
            .windows(2)
            .map(|w| transfer_coefficient(g, w[0], w[1]).unwrap_or(0.0))
            .product();
        let length = edges[..edges.len() - 1].iter().map(|d| g.length(d.edge)).sum();
        Path { edges, length, transfer }
    }
}
