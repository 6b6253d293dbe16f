use std::f64::consts::PI;

/// Heat kernel on the line, e^{-x^2/4t} / sqrt(4 pi t).
pub fn gaussian(t: f64, x: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// Heat kernel on a star of d infinitely long unit-conductivity edges, by the
/// method of images. Points are (edge, distance from the center).
pub fn closed_form_star_kernel(d: usize, t: f64, x: (usize, f64), y: (usize, f64)) -> f64 {
    let reflect = 2.0 / d as f64;
    if x.0 == y.0 {
        gaussian(t, x.1 - y.1) + (reflect - 1.0) * gaussian(t, x.1 + y.1)
    } else {
        reflect * gaussian(t, x.1 + y.1)
    }
}
