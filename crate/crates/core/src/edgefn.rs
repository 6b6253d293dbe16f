//! Functions on the metric graph sampled per edge on uniform grids, and
//! functions on the vertex set.

use crate::graph::MetricGraph;
use crate::quad::simpson;
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Scalars an [`EdgeFunction`] can hold.
pub trait Field:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + 'static
{
    fn modulus(self) -> f64;
}

impl Field for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Field for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Default sampling density, samples per unit length.
pub const DEFAULT_RESOLUTION: f64 = 64.0;

/// Interval count for an edge: at least `per_unit * length`, rounded up to a multiple of 4.
pub fn intervals_for(length: f64, per_unit: f64) -> usize {
    let n = (per_unit * length - 1e-9).ceil().max(4.0) as usize;
    n.div_ceil(4) * 4
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction<T = f64> {
    lengths: Vec<f64>,
    samples: Vec<Vec<T>>,
}

impl<T: Field> EdgeFunction<T> {
    pub fn from_fn(g: &MetricGraph, per_unit: f64, mut f: impl FnMut(usize, f64) -> T) -> Self {
        let counts: Vec<usize> = g.edges().iter().map(|e| intervals_for(e.length, per_unit)).collect();
        Self::from_fn_counts(g, &counts, |e, xi| f(e, xi))
    }

    /// Explicit interval count per edge.
    pub fn from_fn_counts(g: &MetricGraph, counts: &[usize], mut f: impl FnMut(usize, f64) -> T) -> Self {
        let lengths: Vec<f64> = g.edges().iter().map(|e| e.length).collect();
        let samples = lengths
            .iter()
            .zip(counts)
            .enumerate()
            .map(|(e, (&l, &n))| (0..=n).map(|k| f(e, l * k as f64 / n as f64)).collect())
            .collect();
        EdgeFunction { lengths, samples }
    }

    pub fn constant(g: &MetricGraph, per_unit: f64, value: T) -> Self {
        Self::from_fn(g, per_unit, |_, _| value)
    }

    /// Same grid as `self`, new values.
    pub fn same_grid<S: Field>(&self, mut f: impl FnMut(usize, f64) -> S) -> EdgeFunction<S> {
        EdgeFunction {
            lengths: self.lengths.clone(),
            samples: (0..self.lengths.len())
                .map(|e| (0..=self.intervals(e)).map(|k| f(e, self.node(e, k))).collect())
                .collect(),
        }
    }

    pub fn from_samples(g: &MetricGraph, samples: Vec<Vec<T>>) -> Self {
        assert_eq!(samples.len(), g.edge_count());
        EdgeFunction { lengths: g.edges().iter().map(|e| e.length).collect(), samples }
    }

    pub fn edge_count(&self) -> usize {
        self.samples.len()
    }

    pub fn intervals(&self, e: usize) -> usize {
        self.samples[e].len() - 1
    }

    pub fn spacing(&self, e: usize) -> f64 {
        self.lengths[e] / self.intervals(e) as f64
    }

    pub fn node(&self, e: usize, k: usize) -> f64 {
        self.lengths[e] * k as f64 / self.intervals(e) as f64
    }

    pub fn samples(&self, e: usize) -> &[T] {
        &self.samples[e]
    }

    pub fn samples_mut(&mut self, e: usize) -> &mut [T] {
        &mut self.samples[e]
    }

    pub fn all_samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    /// Linear interpolation at (e, xi).
    pub fn eval(&self, e: usize, xi: f64) -> T {
        let s = &self.samples[e];
        let n = s.len() - 1;
        let u = (xi / self.lengths[e] * n as f64).clamp(0.0, n as f64);
        let k = (u.floor() as usize).min(n - 1);
        let w = u - k as f64;
        s[k] * (1.0 - w) + s[k + 1] * w
    }

    pub fn map<S: Field>(&self, f: impl Fn(T) -> S) -> EdgeFunction<S> {
        EdgeFunction {
            lengths: self.lengths.clone(),
            samples: self.samples.iter().map(|s| s.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    pub fn zip_with<S: Field, R: Field>(&self, other: &EdgeFunction<S>, f: impl Fn(T, S) -> R) -> EdgeFunction<R> {
        assert!(self.same_layout(other), "edge functions on different grids");
        EdgeFunction {
            lengths: self.lengths.clone(),
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn same_layout<S>(&self, other: &EdgeFunction<S>) -> bool {
        self.lengths == other.lengths && self.samples.iter().zip(&other.samples).all(|(a, b)| a.len() == b.len())
    }

    /// Integral against dc = c(e) dxi, composite Simpson per edge.
    pub fn integrate(&self, g: &MetricGraph) -> T {
        self.samples
            .iter()
            .enumerate()
            .fold(T::default(), |acc, (e, s)| acc + simpson(s, self.spacing(e)) * g.conductivity(e))
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().flatten().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// (int |u|^2 dc)^{1/2}
    pub fn l2_norm(&self, g: &MetricGraph) -> f64 {
        self.map(|v| v.modulus().powi(2)).integrate(g).sqrt()
    }

    pub fn l1_norm(&self, g: &MetricGraph) -> f64 {
        self.map(|v| v.modulus()).integrate(g)
    }

    /// Largest disagreement of endpoint samples at a common vertex.
    pub fn vertex_spread(&self, g: &MetricGraph) -> f64 {
        let mut spread: f64 = 0.0;
        for v in 0..g.vertex_count() {
            let vals: Vec<T> = g
                .outgoing(v)
                .iter()
                .map(|d| {
                    let s = &self.samples[d.edge];
                    if d.reversed {
                        s[s.len() - 1]
                    } else {
                        s[0]
                    }
                })
                .collect();
            for a in &vals {
                for b in &vals {
                    spread = spread.max((*a - *b).modulus());
                }
            }
        }
        spread
    }

    /// Vertex-continuity flag at the given tolerance.
    pub fn is_continuous(&self, g: &MetricGraph, tol: f64) -> bool {
        self.vertex_spread(g) <= tol
    }

    /// Value at a vertex, averaged over incident edge endpoints.
    pub fn vertex_value(&self, g: &MetricGraph, v: usize) -> T {
        let out = g.outgoing(v);
        let sum = out.iter().fold(T::default(), |acc, d| {
            let s = &self.samples[d.edge];
            acc + if d.reversed { s[s.len() - 1] } else { s[0] }
        });
        sum * (1.0 / out.len() as f64)
    }

    pub fn max_abs_diff(&self, other: &EdgeFunction<T>) -> f64 {
        assert!(self.same_layout(other));
        self.samples
            .iter()
            .flatten()
            .zip(other.samples.iter().flatten())
            .map(|(&a, &b)| (a - b).modulus())
            .fold(0.0, f64::max)
    }

    /// ||self - other||_2 / ||other||_2 with the measure dc.
    pub fn relative_l2_diff(&self, other: &EdgeFunction<T>, g: &MetricGraph) -> f64 {
        let d = self.zip_with(other, |a, b| a - b);
        d.l2_norm(g) / other.l2_norm(g)
    }

    /// Restriction to a coarser grid whose interval counts divide ours.
    pub fn restrict(&self, counts: &[usize]) -> EdgeFunction<T> {
        EdgeFunction {
            lengths: self.lengths.clone(),
            samples: self
                .samples
                .iter()
                .zip(counts)
                .map(|(s, &n)| {
                    let stride = (s.len() - 1) / n;
                    assert_eq!(stride * n, s.len() - 1, "grids are not nested");
                    s.iter().step_by(stride).copied().collect()
                })
                .collect(),
        }
    }

    pub fn interval_counts(&self) -> Vec<usize> {
        (0..self.samples.len()).map(|e| self.intervals(e)).collect()
    }
}

/// A function on the vertex set with c(v)-weighted norms.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField<T = Complex64> {
    pub values: Vec<T>,
}

impl<T: Field> VertexField<T> {
    pub fn new(values: Vec<T>) -> Self {
        VertexField { values }
    }

    /// (sum_v c(v) |z(v)|^p)^{1/p}; p = infinity gives the sup norm.
    pub fn norm(&self, g: &MetricGraph, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max);
        }
        self.values
            .iter()
            .enumerate()
            .map(|(v, z)| g.vertex_conductivity(v) * z.modulus().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}
