//! Fixed-panel Gauss-Kronrod and Simpson quadrature.
//!
//! Oscillatory wavenumber integrals are evaluated on a uniform panel
//! subdivision with a 7-point Gauss rule embedded in a 15-point Kronrod
//! rule; the panel-wise |K15 - G7| differences accumulate into an a
//! posteriori error estimate. Panel counts are chosen by the caller from
//! the oscillation scale (more panels for smaller epsilon), so no adaptive
//! bisection is needed and evaluation stays deterministic.

use num_complex::Complex64;

/// Kronrod abscissae on [0, 1] side of the symmetric 15-point rule.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights paired with `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (odd-index Kronrod nodes).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Integral and error estimate of a complex integrand over `[a, b]`
/// split into `panels` equal panels.
pub fn gauss_kronrod_complex<F>(mut f: F, a: f64, b: f64, panels: usize) -> (Complex64, f64)
where
    F: FnMut(f64) -> Complex64,
{
    assert!(panels > 0, "need at least one panel");
    assert!(b > a, "empty or reversed interval");
    let width = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let center = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut k15 = Complex64::new(0.0, 0.0);
        let mut g7 = Complex64::new(0.0, 0.0);
        for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
            let fsum = if x == 0.0 {
                f(center)
            } else {
                f(center - half * x) + f(center + half * x)
            };
            k15 += wk * fsum;
            if j % 2 == 1 {
                g7 += WG[j / 2] * fsum;
            }
        }
        total += half * k15;
        err += (half * (k15 - g7)).norm();
    }
    (total, err)
}

/// Flattened (node, weight) pairs of the composite 15-point Kronrod rule,
/// for integrands whose per-node work is shared across many outputs.
pub(crate) fn kronrod_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    assert!(panels > 0, "need at least one panel");
    assert!(b > a, "empty or reversed interval");
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut out = Vec::with_capacity(panels * 15);
    for p in 0..panels {
        let center = a + p as f64 * width + half;
        for (&x, &wk) in XGK.iter().zip(WGK.iter()) {
            if x == 0.0 {
                out.push((center, half * wk));
            } else {
                out.push((center - half * x, half * wk));
                out.push((center + half * x, half * wk));
            }
        }
    }
    out
}

/// Real-valued counterpart of [`gauss_kronrod_complex`].
pub fn gauss_kronrod_real<F>(mut f: F, a: f64, b: f64, panels: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (v, e) = gauss_kronrod_complex(|x| Complex64::new(f(x), 0.0), a, b, panels);
    (v.re, e)
}

/// Composite Simpson rule for a function on `[a, b]` with `n` subintervals
/// (`n` must be even and positive).
pub fn simpson_fn<F>(f: F, a: f64, b: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even interval count");
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Composite Simpson rule over uniformly sampled values with spacing `dx`.
/// Even sample counts fall back to Simpson on the leading odd run plus a
/// trapezoid correction on the last interval.
pub fn simpson_samples(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    assert!(n >= 2, "need at least two samples");
    if n == 2 {
        return 0.5 * dx * (values[0] + values[1]);
    }
    let odd_len = if n % 2 == 1 { n } else { n - 1 };
    let mut sum = values[0] + values[odd_len - 1];
    for (i, v) in values.iter().enumerate().take(odd_len - 1).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut integral = sum * dx / 3.0;
    if n % 2 == 0 {
        integral += 0.5 * dx * (values[n - 2] + values[n - 1]);
    }
    integral
}
