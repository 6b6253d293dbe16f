//! Dormand-Prince 5(4) for the complex linear system y'' = q(x) y carried as
//! two solutions with derivatives.

use num_complex::Complex64 as C;

pub(crate) type State = [C; 4];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn rhs(q: &impl Fn(f64) -> C, x: f64, y: &State) -> State {
    let qx = q(x);
    [y[1], qx * y[0], y[3], qx * y[2]]
}

fn comb(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += k[i] * (h * c);
        }
    }
    out
}

/// Integrates from x = 0 with y(0) = y0 and records y at each (sorted) point.
pub(crate) fn integrate(q: impl Fn(f64) -> C, y0: State, points: &[f64], tol: f64) -> Vec<State> {
    let mut out = Vec::with_capacity(points.len());
    let mut x: f64 = 0.0;
    let mut y = y0;
    let mut h: f64 = 1e-3;
    let mut k1 = rhs(&q, x, &y);
    for &target in points {
        debug_assert!(target >= x - 1e-15, "points must be sorted");
        while target - x > 1e-15 * target.abs().max(1.0) {
            let step = h.min(target - x);
            let k2 = rhs(&q, x + step / 5.0, &comb(&y, step, &[(A21, &k1)]));
            let k3 = rhs(&q, x + 0.3 * step, &comb(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(&q, x + 0.8 * step, &comb(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = rhs(
                &q,
                x + 8.0 / 9.0 * step,
                &comb(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                &q,
                x + step,
                &comb(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y5 = comb(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = rhs(&q, x + step, &y5);
            let mut err: f64 = 0.0;
            for i in 0..4 {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
                let scale = tol * (1.0 + y[i].norm().max(y5[i].norm()));
                err = err.max(e.norm() / scale);
            }
            if err <= 1.0 {
                x += step;
                y = y5;
                k1 = k7;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if step == h || err > 1.0 {
                h = step * factor;
            }
            if x + 1e-15 >= target {
                x = target;
            }
        }
        out.push(y);
    }
    out
}
