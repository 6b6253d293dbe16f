use super::ode;
use crate::error::{invalid, Result};
use num_complex::Complex64 as C;
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
enum Shape {
    Zero,
    Constant(f64),
    Sampled(Arc<Vec<f64>>),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// The potential V shared by every edge, given in the normalized coordinate
/// s = x / l on [0, 1].
#[derive(Clone)]
pub struct EdgePotential {
    shape: Shape,
    sup: f64,
}

impl fmt::Debug for EdgePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Zero => write!(f, "EdgePotential::Zero"),
            Shape::Constant(v) => write!(f, "EdgePotential::Constant({v})"),
            Shape::Sampled(s) => write!(f, "EdgePotential::Sampled({} points)", s.len()),
            Shape::Function(_) => write!(f, "EdgePotential::Function(sup {})", self.sup),
        }
    }
}

impl EdgePotential {
    pub fn zero() -> Self {
        EdgePotential { shape: Shape::Zero, sup: 0.0 }
    }

    pub fn constant(v0: f64) -> Result<Self> {
        if !v0.is_finite() {
            return invalid("potential must be finite");
        }
        Ok(EdgePotential { shape: Shape::Constant(v0), sup: v0.abs() })
    }

    /// Piecewise-linear through `values` on a uniform grid of [0, 1].
    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return invalid("sampled potential needs at least two finite values");
        }
        let sup = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(EdgePotential { shape: Shape::Sampled(Arc::new(values)), sup })
    }

    /// Any bounded function; `sup` must bound |V| on [0, 1].
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static, sup: f64) -> Result<Self> {
        if !(sup.is_finite() && sup >= 0.0) {
            return invalid("potential bound must be finite and nonnegative");
        }
        Ok(EdgePotential { shape: Shape::Function(Arc::new(f)), sup })
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// Some(v0) when V is constant.
    pub fn constant_value(&self) -> Option<f64> {
        match self.shape {
            Shape::Zero => Some(0.0),
            Shape::Constant(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Constant(v) => *v,
            Shape::Sampled(vals) => {
                let n = vals.len() - 1;
                let u = (s * n as f64).clamp(0.0, n as f64);
                let k = (u.floor() as usize).min(n - 1);
                let w = u - k as f64;
                vals[k] * (1.0 - w) + vals[k + 1] * w
            }
            Shape::Function(f) => f(s),
        }
    }

    /// V(s) = V(1 - s) on a fine grid.
    pub fn is_symmetric(&self) -> bool {
        if self.constant_value().is_some() {
            return true;
        }
        let tol = 1e-12 * self.sup.max(1.0);
        (0..=256).all(|k| {
            let s = k as f64 / 256.0;
            (self.eval(s) - self.eval(1.0 - s)).abs() <= tol
        })
    }
}

/// c_lambda and s_lambda on [0, l] with their endpoint data.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub lambda: C,
    pub length: f64,
    potential: EdgePotential,
    /// c(l), c'(l), s(l), s'(l)
    pub c1: C,
    pub c1_prime: C,
    pub s1: C,
    pub s1_prime: C,
}

/// (c, c', s, s') for -psi'' + v0 psi = lambda psi at x.
fn closed_form(mu: C, x: f64) -> [C; 4] {
    // mu = lambda - v0; c'' = -mu c
    let z = mu * x * x;
    let (c, s) = if z.norm() < 1.0 {
        let (mut c, mut s) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        let (mut tc, mut ts) = (C::new(1.0, 0.0), C::new(x, 0.0));
        for n in 0..40 {
            c += tc;
            s += ts;
            let n = n as f64;
            tc *= -z / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
            ts *= -z / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
            if tc.norm() < 1e-18 && ts.norm() < 1e-18 * x.max(1e-300) {
                break;
            }
        }
        (c, s)
    } else {
        let k = mu.sqrt();
        ((k * x).cos(), (k * x).sin() / k)
    };
    [c, -mu * s, s, c]
}

impl FundamentalPair {
    pub fn new(v: &EdgePotential, lambda: C, length: f64) -> Self {
        let end = Self::values_at(v, lambda, length, &[length])[0];
        FundamentalPair {
            lambda,
            length,
            potential: v.clone(),
            c1: end[0],
            c1_prime: end[1],
            s1: end[2],
            s1_prime: end[3],
        }
    }

    fn values_at(v: &EdgePotential, lambda: C, length: f64, xs: &[f64]) -> Vec<[C; 4]> {
        match v.constant_value() {
            Some(v0) => xs.iter().map(|&x| closed_form(lambda - v0, x)).collect(),
            None => {
                let vv = v.clone();
                let q = move |x: f64| C::new(vv.eval(x / length), 0.0) - lambda;
                let one = C::new(1.0, 0.0);
                let zero = C::new(0.0, 0.0);
                ode::integrate(q, [one, zero, zero, one], xs, 1e-12)
            }
        }
    }

    /// (c, c', s, s') at sorted points of [0, l].
    pub fn eval(&self, xs: &[f64]) -> Vec<[C; 4]> {
        Self::values_at(&self.potential, self.lambda, self.length, xs)
    }

    /// D = (c(l) + s'(l)) / 2
    pub fn discriminant(&self) -> C {
        0.5 * (self.c1 + self.s1_prime)
    }

    /// s' c - s c' at the far end; identically 1.
    pub fn wronskian(&self) -> C {
        self.s1_prime * self.c1 - self.s1 * self.c1_prime
    }
}

pub fn fundamental_pair(v: &EdgePotential, lambda: C, length: f64) -> FundamentalPair {
    FundamentalPair::new(v, lambda, length)
}

pub fn floquet_discriminant(v: &EdgePotential, lambda: C, length: f64) -> C {
    FundamentalPair::new(v, lambda, length).discriminant()
}
