use super::{EdgeSpec, MetricGraph};
use crate::error::{invalid, Result};
use rand::Rng;

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Path graph v0 - v1 - ... - vn with edges e0..e(n-1).
pub fn line_segment(n_edges: usize, length: f64) -> Result<MetricGraph> {
    let edges = (0..n_edges)
        .map(|i| EdgeSpec::new(format!("e{i}"), format!("v{i}"), format!("v{}", i + 1), length, 1.0))
        .collect();
    MetricGraph::new(ids("v", n_edges + 1), edges)
}

/// Star with center `c` and edges `e{i}` oriented outward to leaves `l{i}`.
pub fn star(conductivities: &[f64], length: f64) -> Result<MetricGraph> {
    let mut vertices = vec!["c".to_string()];
    vertices.extend(ids("l", conductivities.len()));
    let edges = conductivities
        .iter()
        .enumerate()
        .map(|(i, &c)| EdgeSpec::new(format!("e{i}"), "c", format!("l{i}"), length, c))
        .collect();
    MetricGraph::new(vertices, edges)
}

/// Cycle v0 -> v1 -> ... -> v0.
pub fn cycle(n: usize, length: f64) -> Result<MetricGraph> {
    if n < 2 {
        return invalid("a cycle needs at least two edges");
    }
    let edges = (0..n)
        .map(|i| EdgeSpec::new(format!("e{i}"), format!("v{i}"), format!("v{}", (i + 1) % n), length, 1.0))
        .collect();
    MetricGraph::new(ids("v", n), edges)
}

/// Finite ball of the q-regular tree: the root has q children, every other
/// non-leaf vertex q-1. Returns the graph and the interior (degree q) vertices.
pub fn homogeneous_tree(q: usize, depth: usize, length: f64) -> Result<(MetricGraph, Vec<usize>)> {
    if q < 2 || depth == 0 {
        return invalid("tree needs q >= 2 and depth >= 1");
    }
    let mut vertices = vec!["r".to_string()];
    let mut edges = Vec::new();
    let mut frontier = vec![(0usize, q)];
    let mut interior = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::new();
        for (v, children) in frontier {
            interior.push(v);
            for _ in 0..children {
                let w = vertices.len();
                vertices.push(format!("t{w}"));
                edges.push(EdgeSpec::new(format!("e{}", edges.len()), vertices[v].clone(), vertices[w].clone(), length, 1.0));
                next.push((w, q - 1));
            }
        }
        frontier = next;
    }
    let g = MetricGraph::new(vertices, edges)?;
    Ok((g, interior))
}

/// Connected random graph without self-loops: a random spanning tree plus extra edges.
pub fn random_connected(
    rng: &mut impl Rng,
    n_vertices: usize,
    n_edges: usize,
    lengths: (f64, f64),
    conductivities: (f64, f64),
) -> Result<MetricGraph> {
    if n_vertices < 2 || n_edges + 1 < n_vertices {
        return invalid("need at least two vertices and n_edges >= n_vertices - 1");
    }
    let mut pairs = Vec::new();
    for v in 1..n_vertices {
        pairs.push((rng.gen_range(0..v), v));
    }
    while pairs.len() < n_edges {
        let a = rng.gen_range(0..n_vertices);
        let b = rng.gen_range(0..n_vertices);
        if a != b {
            pairs.push((a, b));
        }
    }
    let edges = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            EdgeSpec::new(
                format!("e{i}"),
                format!("v{a}"),
                format!("v{b}"),
                rng.gen_range(lengths.0..=lengths.1),
                rng.gen_range(conductivities.0..=conductivities.1),
            )
        })
        .collect();
    MetricGraph::new(ids("v", n_vertices), edges)
}

/// Axis data for the cubic lattice torus: edge `e` runs from a vertex to its
/// neighbour one unit along `axis[e]` (with wraparound).
#[derive(Debug, Clone)]
pub struct LatticeEmbedding {
    pub side: usize,
    pub dim: usize,
    pub axis: Vec<usize>,
}

/// Unit-length, unit-conductivity lattice torus (Z/side)^dim.
pub fn cubic_torus(side: usize, dim: usize) -> Result<(MetricGraph, LatticeEmbedding)> {
    if side < 3 || dim == 0 {
        return invalid("lattice torus needs side >= 3 and dim >= 1");
    }
    let n = side.pow(dim as u32);
    let coords = |mut i: usize| {
        let mut c = vec![0; dim];
        for x in c.iter_mut() {
            *x = i % side;
            i /= side;
        }
        c
    };
    let index = |c: &[usize]| c.iter().rev().fold(0, |acc, &x| acc * side + x);
    let mut edges = Vec::new();
    let mut axis = Vec::new();
    for v in 0..n {
        for a in 0..dim {
            let mut c = coords(v);
            c[a] = (c[a] + 1) % side;
            edges.push(EdgeSpec::new(format!("e{}", edges.len()), format!("v{v}"), format!("v{}", index(&c)), 1.0, 1.0));
            axis.push(a);
        }
    }
    Ok((MetricGraph::new(ids("v", n), edges)?, LatticeEmbedding { side, dim, axis }))
}
