//! Quadrature rules: Gauss-Legendre nodes, adaptive Gauss-Kronrod, composite
//! Simpson weights and a fourth-order cumulative integral on uniform grids.

use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub(crate) fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

const MAX_PANELS: usize = 1 << 16;

/// Adaptive Gauss-Kronrod 7-15 on [a, b]; returns (value, error estimate).
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut stack = vec![(a, b, 0u32)];
    let (mut total, mut err) = (0.0, 0.0);
    let (first, _) = gk15(&mut f, a, b);
    let scale = first.abs();
    let mut panels = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&mut f, lo, hi);
        panels += 1;
        let local_tol = (abs_tol.max(rel_tol * scale)) * (hi - lo).abs() / (b - a).abs();
        // noise-limited integrands never meet the tolerance; the error
        // estimate still reports what was achieved
        if e <= local_tol || depth >= 40 || panels >= MAX_PANELS {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    (total, err)
}

/// Composite Simpson weights for n (even) intervals of width h.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals");
    let mut w = vec![0.0; n + 1];
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = if k == 0 || k == n {
            h / 3.0
        } else if k % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// Simpson sum over uniform samples; generic over the value type.
pub fn simpson<T>(values: &[T], h: f64) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len() - 1;
    let w = simpson_weights(n, h);
    values.iter().zip(&w).fold(T::default(), |acc, (&v, &wk)| acc + v * wk)
}

/// I_k = integral of f from x_0 to x_k, fourth order accurate on a uniform grid
/// (at least four intervals).
pub fn cumulative<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = f.len() - 1;
    assert!(n >= 4, "cumulative integration needs at least four intervals");
    let c = h / 24.0;
    let mut out = vec![T::default(); n + 1];
    for k in 0..n {
        let cell = if k == 0 {
            f[0] * 9.0 + f[1] * 19.0 + f[2] * -5.0 + f[3] * 1.0
        } else if k == n - 1 {
            f[n - 3] * 1.0 + f[n - 2] * -5.0 + f[n - 1] * 19.0 + f[n] * 9.0
        } else {
            f[k - 1] * -1.0 + f[k] * 13.0 + f[k + 1] * 13.0 + f[k + 2] * -1.0
        };
        out[k + 1] = out[k] + cell * c;
    }
    out
}

/// Like [`cumulative`] but integrates the local quintic interpolant on each
/// cell, sixth order (at least five intervals).
pub fn cumulative6<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = f.len() - 1;
    assert!(n >= 5, "sixth-order cumulative integration needs at least five intervals");
    // weights[o] integrate over [0, 1] the Lagrange basis on nodes o - 2 .. o + 3, shifted
    let (gx, gw) = gauss_legendre(8);
    let weights: Vec<[f64; 6]> = (0..6)
        .map(|shift| {
            let nodes: Vec<f64> = (0..6).map(|j| j as f64 - shift as f64).collect();
            let mut w = [0.0; 6];
            for (x, wq) in gx.iter().zip(&gw) {
                let t = 0.5 * (x + 1.0);
                for j in 0..6 {
                    let mut lj = 1.0;
                    for m in 0..6 {
                        if m != j {
                            lj *= (t - nodes[m]) / (nodes[j] - nodes[m]);
                        }
                    }
                    w[j] += 0.5 * wq * lj;
                }
            }
            w
        })
        .collect();
    let mut out = vec![T::default(); n + 1];
    for k in 0..n {
        let start = k.saturating_sub(2).min(n - 5);
        let w = &weights[k - start];
        let cell = (0..6).fold(T::default(), |acc, j| acc + f[start + j] * w[j]);
        out[k + 1] = out[k] + cell * h;
    }
    out
}

/// Finite-difference weights for the `order`-th derivative at `x0` from values
/// at `nodes` (Fornberg's recursion).
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_handles_peaks() {
        let (v, _) = integrate(|x| (-x * x / 1e-4).exp(), -1.0, 1.0, 1e-14, 1e-13);
        assert!((v - (std::f64::consts::PI * 1e-4).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fornberg_matches_known_stencils() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 1);
        let expect = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    fn cumulative_error(rule: fn(&[f64], f64) -> Vec<f64>, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let f: Vec<f64> = (0..=n).map(|k| (3.0 * k as f64 * h).cos()).collect();
        rule(&f, h)
            .iter()
            .enumerate()
            .map(|(k, c)| (c - (3.0 * k as f64 * h).sin() / 3.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cumulative_is_fourth_order() {
        let (coarse, fine) = (cumulative_error(cumulative, 32), cumulative_error(cumulative, 64));
        assert!(fine < 1e-6 && coarse / fine > 12.0, "{coarse:e} {fine:e}");
    }

    #[test]
    fn sixth_order_cumulative() {
        let (coarse, fine) = (cumulative_error(cumulative6, 32), cumulative_error(cumulative6, 64));
        assert!(fine < 1e-9 && coarse / fine > 48.0, "{coarse:e} {fine:e}");
    }
}
