//! Even kernel profiles on the real line with certified tail bounds, and the
//! weighted L1 norm sum_m 3^m ||f||_{L1([m l, inf))}.

use crate::error::{invalid, Error, Result};
use crate::quad::{gl16, integrate};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Heat,
    Polyharmonic(u32),
    Tabulated,
    Custom,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Heat => write!(f, "heat"),
            ProfileKind::Polyharmonic(m) => write!(f, "poly:{m}"),
            ProfileKind::Tabulated => write!(f, "tabulated"),
            ProfileKind::Custom => write!(f, "custom"),
        }
    }
}

#[derive(Clone)]
enum Imp {
    Heat { t: f64 },
    Poly { tau: f64, table: Arc<PolyTable> },
    Tab { step: f64, values: Arc<Vec<f64>>, suffix_tail: Arc<Vec<f64>>, suffix_max: Arc<Vec<f64>> },
    Custom { eval: RealFn, tail: RealFn, envelope: RealFn },
}

/// An even function f on the real line with evaluator, L1 tail bound
/// `tail(r) >= int_r^inf |f|` and envelope `envelope(r) >= sup_{|s|>=r} |f(s)|`.
#[derive(Clone)]
pub struct KernelProfile {
    kind: ProfileKind,
    time: Option<f64>,
    imp: Imp,
}

impl fmt::Debug for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelProfile").field("kind", &self.kind).field("time", &self.time).finish()
    }
}

/// Unit-time polyharmonic profile g(y) = (1/pi) int_0^inf exp(-s^{2m}) cos(ys) ds
/// with contour-shift bounds |g(y)| <= C(eta) exp(-eta |y|).
struct PolyTable {
    m: u32,
    s_max: f64,
    etas: Vec<f64>,
    ln_c: Vec<f64>,
    y_cut: f64,
    g0: f64,
    /// abs_suffix[k] = int_{k ABS_STEP}^{y_cut} |g|
    abs_suffix: Vec<f64>,
}

const ABS_STEP: f64 = 1.0 / 32.0;

impl PolyTable {
    fn get(m: u32) -> Arc<PolyTable> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<PolyTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("profile cache poisoned");
        map.entry(m).or_insert_with(|| Arc::new(PolyTable::build(m))).clone()
    }

    fn build(m: u32) -> PolyTable {
        let p = 2 * m as i32;
        // exp(-S^{2m}) < 1e-16
        let s_max = 37f64.powf(1.0 / p as f64);
        let g0 = statrs::function::gamma::gamma(1.0 + 1.0 / p as f64) / PI;
        let mut etas = vec![0.0];
        // g0 is the exact peak; the margin absorbs rounding in eval_unit
        let mut ln_c = vec![g0.ln() + 1e-12];
        for k in 1..=160 {
            let eta = 0.05 * k as f64;
            let exponent = |s: f64| -(Complex64::new(s, eta).powi(p)).re;
            // locate the peak of the integrand and a cutoff beyond which it is negligible
            let mut peak = f64::NEG_INFINITY;
            let mut s = 0.0;
            let mut cutoff = s_max;
            while s < 10.0 * (eta + s_max) {
                let e = exponent(s);
                peak = peak.max(e);
                if e < peak - 80.0 && s > eta {
                    cutoff = s;
                    break;
                }
                s += 0.01 * (1.0 + eta);
            }
            // exponent(s) - peak loses ~1e-11 to cancellation for large eta
            let (v, _) = integrate(|s| (exponent(s) - peak).exp(), 0.0, cutoff, 1e-10, 1e-9);
            // (1/2 pi) int over R, integrand even in s; 1% safety margin
            ln_c.push(peak + (v / PI * 1.01).ln());
            etas.push(eta);
        }
        let mut t = PolyTable { m, s_max, etas, ln_c, y_cut: f64::INFINITY, g0, abs_suffix: Vec::new() };
        let mut y = 1.0;
        while t.envelope_unit(y) > 1e-22 * g0 {
            y += 0.25;
        }
        t.y_cut = y;
        let n = (y / ABS_STEP).ceil() as usize;
        let mut suffix = vec![0.0; n + 1];
        for k in (0..n).rev() {
            suffix[k] = suffix[k + 1] + t.abs_piece(k as f64 * ABS_STEP, (k + 1) as f64 * ABS_STEP);
        }
        t.abs_suffix = suffix;
        t
    }

    /// int_a^b |g| over a short piece, split at a sign change if there is one.
    fn abs_piece(&self, a: f64, b: f64) -> f64 {
        let gl = |a: f64, b: f64| {
            let (xs, ws) = gl16();
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            h * xs.iter().zip(ws).map(|(x, w)| w * self.eval_unit(c + h * x)).sum::<f64>()
        };
        let (fa, fb) = (self.eval_unit(a), self.eval_unit(b));
        if fa * fb >= 0.0 {
            return gl(a, b).abs();
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.eval_unit(mid) * fa > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        gl(a, lo).abs() + gl(lo, b).abs()
    }

    /// int_y^{y_cut} |g|
    fn abs_from(&self, y: f64) -> f64 {
        let y = y.max(0.0);
        let k = (y / ABS_STEP).floor() as usize;
        if k + 1 >= self.abs_suffix.len() {
            return 0.0;
        }
        self.abs_suffix[k + 1] + self.abs_piece(y, (k + 1) as f64 * ABS_STEP)
    }

    fn eval_unit(&self, y: f64) -> f64 {
        let y = y.abs();
        if y > self.y_cut {
            return 0.0;
        }
        let width = (self.s_max / 4.0).min(if y > 0.0 { PI / (2.0 * y) } else { f64::INFINITY });
        let panels = (self.s_max / width).ceil() as usize;
        let h = self.s_max / panels as f64;
        let (xs, ws) = gl16();
        let p = 2 * self.m as i32;
        let mut sum = 0.0;
        for k in 0..panels {
            let c = (k as f64 + 0.5) * h;
            for (x, w) in xs.iter().zip(ws) {
                let s = c + 0.5 * h * x;
                sum += w * (-s.powi(p)).exp() * (y * s).cos();
            }
        }
        sum * 0.5 * h / PI
    }

    fn envelope_unit(&self, y: f64) -> f64 {
        let y = y.max(0.0);
        self.etas
            .iter()
            .zip(&self.ln_c)
            .map(|(eta, lc)| (lc - eta * y).exp())
            .fold(f64::INFINITY, f64::min)
    }

    fn tail_unit(&self, y: f64) -> f64 {
        let y = y.max(0.0);
        self.etas
            .iter()
            .zip(&self.ln_c)
            .skip(1)
            .map(|(eta, lc)| (lc - eta * y).exp() / eta)
            .fold(f64::INFINITY, f64::min)
    }
}

impl KernelProfile {
    /// h_t(x) = exp(-x^2/4t) / sqrt(4 pi t)
    pub fn heat(t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(KernelProfile { kind: ProfileKind::Heat, time: Some(t), imp: Imp::Heat { t } })
    }

    /// k_t(x) = (1/(pi tau)) int_0^inf exp(-s^{2m}) cos(x s / tau) ds, tau = t^{1/2m}.
    pub fn polyharmonic(m: u32, t: f64) -> Result<Self> {
        check_time(t)?;
        if m == 0 || m > 6 {
            return invalid(format!("polyharmonic order must be in 1..=6, got {m}"));
        }
        let tau = t.powf(1.0 / (2.0 * m as f64));
        Ok(KernelProfile {
            kind: ProfileKind::Polyharmonic(m),
            time: Some(t),
            imp: Imp::Poly { tau, table: PolyTable::get(m) },
        })
    }

    /// Even piecewise-linear profile with f(k step) = values[k], zero beyond the table.
    pub fn tabulated(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return invalid("tabulated profile needs a positive step and at least two finite values");
        }
        let n = values.len();
        let mut suffix_tail = vec![0.0f64; n];
        let mut suffix_max = vec![0.0f64; n + 1];
        for k in (0..n).rev() {
            suffix_max[k] = suffix_max[k + 1].max(values[k].abs());
            if k + 1 < n {
                suffix_tail[k] = suffix_tail[k + 1] + 0.5 * step * (values[k].abs() + values[k + 1].abs());
            }
        }
        Ok(KernelProfile {
            kind: ProfileKind::Tabulated,
            time: None,
            imp: Imp::Tab {
                step,
                values: Arc::new(values),
                suffix_tail: Arc::new(suffix_tail),
                suffix_max: Arc::new(suffix_max),
            },
        })
    }

    /// User profile. The caller certifies `tail(r) >= int_r^inf |f|` and
    /// `envelope(r) >= sup_{|s| >= r} |f(s)|`; truncation soundness rests on both.
    pub fn custom(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail: impl Fn(f64) -> f64 + Send + Sync + 'static,
        envelope: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        KernelProfile {
            kind: ProfileKind::Custom,
            time: None,
            imp: Imp::Custom { eval: Arc::new(eval), tail: Arc::new(tail), envelope: Arc::new(envelope) },
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.imp {
            Imp::Heat { t } => (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt(),
            Imp::Poly { tau, table } => table.eval_unit(x / tau) / tau,
            Imp::Tab { step, values, .. } => {
                let u = x.abs() / step;
                let k = u.floor() as usize;
                if k + 1 >= values.len() {
                    if k + 1 == values.len() && u == k as f64 {
                        values[k]
                    } else {
                        0.0
                    }
                } else {
                    let w = u - k as f64;
                    values[k] * (1.0 - w) + values[k + 1] * w
                }
            }
            Imp::Custom { eval, .. } => eval(x),
        }
    }

    /// Upper bound for int_r^inf |f|, r >= 0. Negative r is clamped to 0.
    pub fn tail(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match &self.imp {
            Imp::Heat { t } => 0.5 * statrs::function::erf::erfc(r / (2.0 * t.sqrt())),
            Imp::Poly { tau, table } => table.tail_unit(r / tau).min(table.g0 * 2.0 * table.s_max),
            Imp::Tab { step, values, suffix_tail, .. } => {
                let u = r / step;
                let k = u.floor() as usize;
                if k + 1 >= values.len() {
                    return 0.0;
                }
                let partial = ((k + 1) as f64 * step - r) * values[k].abs().max(values[k + 1].abs());
                partial + suffix_tail[k + 1]
            }
            Imp::Custom { tail, .. } => tail(r),
        }
    }

    /// Upper bound for sup over |s| >= r of |f(s)|.
    pub fn envelope(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match &self.imp {
            Imp::Heat { t } => (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).sqrt(),
            Imp::Poly { tau, table } => table.envelope_unit(r / tau) / tau,
            Imp::Tab { step, suffix_max, .. } => {
                let k = (r / step).floor() as usize;
                suffix_max[k.min(suffix_max.len() - 1)]
            }
            Imp::Custom { envelope, .. } => envelope(r),
        }
    }

    /// Natural length scale, used to place breakpoints in quadratures.
    fn scale(&self) -> f64 {
        match &self.imp {
            Imp::Heat { t } => t.sqrt(),
            Imp::Poly { tau, .. } => *tau,
            Imp::Tab { step, values, .. } => step * values.len() as f64 / 8.0,
            Imp::Custom { .. } => 1.0,
        }
    }

    /// int_a^b |f| for 0 <= a <= b.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.imp {
            Imp::Heat { t } => {
                let s = 2.0 * t.sqrt();
                let (ea, eb) = (statrs::function::erf::erfc(a / s), statrs::function::erf::erfc(b / s));
                0.5 * (ea - eb).max(0.0)
            }
            Imp::Poly { tau, table } => (table.abs_from(a / tau) - table.abs_from(b / tau)).max(0.0),
            Imp::Tab { step, values, .. } => {
                let n = values.len() - 1;
                let end = n as f64 * step;
                let (a, b) = (a.min(end), b.min(end));
                let mut total = 0.0;
                let mut x = a;
                while x < b {
                    let k = ((x / step).floor() as usize).min(n - 1);
                    let right = ((k + 1) as f64 * step).min(b);
                    let (p, q) = (self.eval(x), self.eval(right));
                    let w = right - x;
                    total += if p * q >= 0.0 {
                        0.5 * w * (p.abs() + q.abs())
                    } else {
                        0.5 * w * (p * p + q * q) / (p.abs() + q.abs())
                    };
                    if right <= x {
                        break;
                    }
                    x = right;
                }
                total
            }
            _ => {
                // split into chunks of a few length scales for the adaptive rule
                let chunk = 2.0 * self.scale();
                let mut total = 0.0;
                let mut lo = a;
                while lo < b {
                    let hi = (lo + chunk).min(b);
                    total += integrate(|x| self.eval(x).abs(), lo, hi, 1e-17, 1e-12).0;
                    lo = hi;
                }
                total
            }
        }
    }

    /// Numerical int_r^inf |f| for any real r (the even extension is used for r < 0).
    pub fn abs_mass_beyond(&self, r: f64) -> f64 {
        if r < 0.0 {
            return self.abs_mass_beyond(0.0) + self.abs_integral(0.0, -r);
        }
        match &self.imp {
            Imp::Heat { .. } => return self.tail(r),
            Imp::Poly { tau, table } => return table.abs_from(r / tau) + table.tail_unit(table.y_cut.max(r / tau)),
            _ => {}
        }
        // integrate until the certified tail is negligible
        let step = 4.0 * self.scale();
        let mut hi = r + step;
        let floor = 1e-18 * self.tail(0.0).max(f64::MIN_POSITIVE);
        let mut guard = 0;
        while self.tail(hi) > floor && guard < 4000 {
            hi += step;
            guard += 1;
        }
        self.abs_integral(r, hi) + self.tail(hi)
    }

    /// Integral of f over the real line.
    pub fn total_integral(&self) -> f64 {
        match &self.imp {
            Imp::Heat { .. } | Imp::Poly { .. } => 1.0,
            _ => {
                let step = 4.0 * self.scale();
                let mut hi = step;
                let mut guard = 0;
                while self.tail(hi) > 1e-18 && guard < 4000 {
                    hi += step;
                    guard += 1;
                }
                let mut total = 0.0;
                let mut lo = 0.0;
                while lo < hi {
                    let up = (lo + step).min(hi);
                    total += integrate(|x| self.eval(x), lo, up, 1e-17, 1e-12).0;
                    lo = up;
                }
                2.0 * total
            }
        }
    }

    /// sum_m 3^m w(m) with w(m) = mass(m l) certified against 3^m tail(m l).
    fn weighted_sum(&self, ell_min: f64, mass: impl Fn(usize) -> f64, bound: impl Fn(usize) -> f64) -> Result<f64> {
        if !(ell_min > 0.0) {
            return invalid("minimal edge length must be positive");
        }
        let mut total = 0.0;
        for m in 0..400usize {
            let w3 = 3f64.powi(m as i32);
            total += w3 * mass(m);
            let b1 = 3.0 * w3 * bound(m + 1);
            let b2 = 9.0 * w3 * bound(m + 2);
            if b1 <= 1e-13 * total {
                let ratio = if b1 > 0.0 { b2 / b1 } else { 0.0 };
                if ratio < 1.0 {
                    return Ok(total);
                }
            }
            if !total.is_finite() {
                break;
            }
        }
        Err(Error::NotInL1 { ell_min })
    }

    /// ||f||_{L1 weighted} = sum_{m >= 0} 3^m int_{m l}^inf |f|.
    pub fn l1_weighted_norm(&self, ell_min: f64) -> Result<f64> {
        self.weighted_sum(
            ell_min,
            |m| self.abs_mass_beyond(m as f64 * ell_min),
            |m| self.tail(m as f64 * ell_min),
        )
    }

    /// Weighted norm of the translate f(. - s), taking the mean of its two half-line tails.
    pub fn shifted_norm(&self, s: f64, ell_min: f64) -> Result<f64> {
        self.weighted_sum(
            ell_min,
            |m| {
                let r = m as f64 * ell_min;
                0.5 * (self.abs_mass_beyond(r - s) + self.abs_mass_beyond(r + s))
            },
            |m| self.tail(m as f64 * ell_min - s.abs()),
        )
    }

    /// Certified shift constant: 1.1 times the max of ||tau_s f|| / ||f|| over a
    /// 64-point grid of s in [-l_max, l_max].
    pub fn shift_bound(&self, ell_min: f64, ell_max: f64) -> Result<f64> {
        let base = self.l1_weighted_norm(ell_min)?;
        let mut worst: f64 = 1.0;
        for k in 0..64 {
            let s = -ell_max + 2.0 * ell_max * k as f64 / 63.0;
            worst = worst.max(self.shifted_norm(s, ell_min)? / base);
        }
        Ok(1.1 * worst)
    }

    /// (f * g)(x) on the line, tabulated at spacing `step` up to `half_width`.
    pub fn convolve_line(&self, other: &KernelProfile, step: f64, half_width: f64) -> Result<KernelProfile> {
        let reach = half_width + self.support_hint().max(other.support_hint());
        let n = (half_width / step).ceil() as usize;
        let values = (0..=n)
            .map(|k| {
                let x = k as f64 * step;
                let pieces = 64;
                let h = 2.0 * reach / pieces as f64;
                (0..pieces)
                    .map(|j| {
                        let lo = -reach + j as f64 * h;
                        integrate(|s| self.eval(s) * other.eval(x - s), lo, lo + h, 1e-16, 1e-11).0
                    })
                    .sum()
            })
            .collect();
        KernelProfile::tabulated(step, values)
    }

    fn support_hint(&self) -> f64 {
        match &self.imp {
            Imp::Tab { step, values, .. } => step * (values.len() - 1) as f64,
            _ => {
                let mut r = self.scale();
                while self.tail(r) > 1e-17 && r < 1e6 {
                    r *= 1.5;
                }
                r
            }
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        invalid(format!("time must be positive and finite, got {t}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_order_one_is_heat() {
        let p = KernelProfile::polyharmonic(1, 0.3).unwrap();
        let h = KernelProfile::heat(0.3).unwrap();
        for k in 0..40 {
            let x = 0.1 * k as f64;
            assert!((p.eval(x) - h.eval(x)).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn poly_bounds_dominate() {
        let p = KernelProfile::polyharmonic(2, 0.05).unwrap();
        for k in 0..60 {
            let r = 0.05 * k as f64;
            assert!(p.envelope(r) >= p.eval(r).abs(), "r={r} env={} f={}", p.envelope(r), p.eval(r));
            assert!(p.tail(r) >= p.abs_integral(r, r + 20.0));
        }
    }
}
