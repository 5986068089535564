//! Independent oracles for the cell eigensolver. A transfer-matrix
//! monodromy route reaches the same dispersion relation through ODE
//! propagation across the cell, and a conservative finite-difference
//! discretization reaches the same eigenvalues through a second, unrelated
//! approximation scheme. Neither shares code with the Fourier-Galerkin
//! solver they check.

use num_complex::Complex64;
use std::f64::consts::PI;
use wavetrain::cell_spectrum::{group_velocity_hf, solve_bloch_sized};
use wavetrain::high_contrast::{hc_solve_branch, HighContrastMedium};
use wavetrain::CellCoefficient;

/// Half-trace of the monodromy matrix of -(a u')' = omega^2 u over one
/// cell. Bloch eigenvalues at quasimomentum xi are the roots of
/// half_trace(omega) = cos(xi).
fn monodromy_half_trace(coeff: &CellCoefficient, omega: f64) -> f64 {
    // state (u, a u'); per constant segment of length l the propagator is
    // [[cos(k l), sin(k l) / (a k)], [-a k sin(k l), cos(k l)]], k = omega / sqrt(a)
    let mut m = [[1.0f64, 0.0], [0.0, 1.0]];
    for (y0, y1, a) in coeff.segments_at(0.0) {
        let l = y1 - y0;
        let k = omega / a.sqrt();
        let (s, c) = (k * l).sin_cos();
        let (p01, p10) = if omega == 0.0 {
            (l / a, 0.0)
        } else {
            (s / (a * k), -a * k * s)
        };
        m = [
            [c * m[0][0] + p01 * m[1][0], c * m[0][1] + p01 * m[1][1]],
            [p10 * m[0][0] + c * m[1][0], p10 * m[0][1] + c * m[1][1]],
        ];
    }
    0.5 * (m[0][0] + m[1][1])
}

/// Total travel time of the cell, sum of l / sqrt(a); sets the omega scale
/// on which the half-trace oscillates.
fn optical_length(coeff: &CellCoefficient) -> f64 {
    coeff
        .segments_at(0.0)
        .iter()
        .map(|&(y0, y1, a)| (y1 - y0) / a.sqrt())
        .sum()
}

/// First `count` roots of half_trace(omega) = cos(xi), by scan and
/// bisection. Roots are simple for xi away from 0 and +-pi.
fn monodromy_roots(coeff: &CellCoefficient, xi: f64, count: usize) -> Vec<f64> {
    let target = xi.cos();
    let g = |w: f64| monodromy_half_trace(coeff, w) - target;
    let beta = optical_length(coeff);
    let step = PI / (beta * 400.0);
    let upper = (count as f64 + 2.5) * PI / beta;
    let mut roots = Vec::with_capacity(count);
    let mut w0 = step * 1e-6;
    let mut g0 = g(w0);
    while w0 < upper && roots.len() < count {
        let w1 = w0 + step;
        let g1 = g(w1);
        if g0 == 0.0 {
            roots.push(w0);
        } else if g0 * g1 < 0.0 {
            let (mut lo, mut hi) = (w0, w1);
            for _ in 0..90 {
                let mid = 0.5 * (lo + hi);
                if g(lo) * g(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        w0 = w1;
        g0 = g1;
    }
    assert_eq!(roots.len(), count, "scan exhausted before {count} roots");
    roots
}

#[test]
fn monodromy_dispersion_pins_galerkin_eigenvalues() {
    let media = [
        CellCoefficient::two_phase(4.0, 1.0, 0.3).unwrap(),
        CellCoefficient::two_phase(100.0, 1.0, 0.5).unwrap(),
        CellCoefficient::piecewise(vec![(0.25, 2.0), (0.35, 0.5), (0.4, 7.0)]).unwrap(),
    ];
    let xis = [0.4, PI / 2.0, 2.2, -1.1];
    let mut worst = 0.0f64;
    for coeff in &media {
        for &xi in &xis {
            let pairs = solve_bloch_sized(coeff, xi, 0.0, 4, 384).unwrap();
            let roots = monodromy_roots(coeff, xi, 4);
            for (pair, root) in pairs.iter().zip(&roots) {
                let rel = (pair.omega - root).abs() / root;
                worst = worst.max(rel);
            }
        }
    }
    // Galerkin truncation shrinks cubically in the mode count; measured
    // worst case at 384 modes is 8e-8 across these media and bands
    assert!(
        worst < 2.5e-7,
        "worst Galerkin vs monodromy relative gap {worst:.3e}"
    );
}

#[test]
fn frozen_strong_contrast_root_agrees_on_both_routes() {
    // first band of the 100:1 half-cell medium at xi = pi/2; the literal
    // was produced by the monodromy bisection and is re-derived here
    let coeff = CellCoefficient::two_phase(100.0, 1.0, 0.5).unwrap();
    let frozen = 2.145_435_783_270_888_6;
    let root = monodromy_roots(&coeff, PI / 2.0, 1)[0];
    assert!(
        (root - frozen).abs() < 1e-11,
        "monodromy root {root:.16} drifted from frozen {frozen:.16}"
    );
    let pair = &solve_bloch_sized(&coeff, PI / 2.0, 0.0, 1, 384).unwrap()[0];
    assert!(
        (pair.omega - frozen).abs() < 1e-8,
        "Galerkin {:.16} vs frozen {frozen:.16}",
        pair.omega
    );
}

/// Applies the conservative finite-difference Bloch operator: harmonic
/// coefficient means on flux intervals, wrap entries carrying e^{+-i xi}.
fn fd_apply(means: &[f64], xi: f64, u: &[Complex64], out: &mut [Complex64]) {
    let n = means.len();
    let n2 = (n * n) as f64;
    let wrap = Complex64::new(0.0, xi).exp();
    for j in 0..n {
        let up = if j + 1 == n { u[0] * wrap } else { u[j + 1] };
        let dn = if j == 0 { u[n - 1] * wrap.conj() } else { u[j - 1] };
        let a_up = means[j];
        let a_dn = means[(j + n - 1) % n];
        out[j] = (u[j] * (a_up + a_dn) - up * a_up - dn * a_dn) * n2;
    }
}

/// Solves (T + corners - shift) x = b where T is the Hermitian tridiagonal
/// part of the fd operator: cyclic Thomas via a rank-one bordering.
fn fd_solve(means: &[f64], xi: f64, shift: f64, b: &[Complex64]) -> Vec<Complex64> {
    let n = means.len();
    let n2 = (n * n) as f64;
    let wrap = Complex64::new(0.0, xi).exp();
    let diag: Vec<Complex64> = (0..n)
        .map(|j| {
            Complex64::new(
                n2 * (means[j] + means[(j + n - 1) % n]) - shift,
                0.0,
            )
        })
        .collect();
    let sub: Vec<Complex64> = (1..n)
        .map(|j| Complex64::new(-n2 * means[j - 1], 0.0))
        .collect();
    // corners: A[0][n-1] = -n^2 a_{-1/2} conj(wrap), A[n-1][0] = conj of that
    let c0 = Complex64::new(-n2 * means[n - 1], 0.0) * wrap.conj();
    let cn = c0.conj();
    // bordered form A = B + u w^T with u = (gamma, 0, .., 0, cn),
    // w = (1, 0, .., 0, c0 / gamma); B stays tridiagonal
    let gamma = -diag[0];
    let mut d = diag.clone();
    d[0] -= gamma;
    d[n - 1] -= cn * c0 / gamma;

    let tri_solve = |rhs: &[Complex64]| -> Vec<Complex64> {
        let mut dp = vec![Complex64::new(0.0, 0.0); n];
        let mut rp = vec![Complex64::new(0.0, 0.0); n];
        dp[0] = d[0];
        rp[0] = rhs[0];
        for j in 1..n {
            let m = sub[j - 1] / dp[j - 1];
            dp[j] = d[j] - m * sub[j - 1].conj();
            rp[j] = rhs[j] - m * rp[j - 1];
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        x[n - 1] = rp[n - 1] / dp[n - 1];
        for j in (0..n - 1).rev() {
            x[j] = (rp[j] - sub[j].conj() * x[j + 1]) / dp[j];
        }
        x
    };

    let mut uvec = vec![Complex64::new(0.0, 0.0); n];
    uvec[0] = gamma;
    uvec[n - 1] = cn;
    let x = tri_solve(b);
    let z = tri_solve(&uvec);
    let w_dot = |v: &[Complex64]| v[0] + (c0 / gamma) * v[n - 1];
    let factor = w_dot(&x) / (Complex64::new(1.0, 0.0) + w_dot(&z));
    x.iter().zip(&z).map(|(xi, zi)| xi - zi * factor).collect()
}

/// Eigenvalue of the fd operator nearest the shift, by inverse iteration.
fn fd_eigenvalue(coeff: &CellCoefficient, n: usize, xi: f64, shift: f64) -> f64 {
    let means: Vec<f64> = (0..n)
        .map(|j| {
            let y0 = j as f64 / n as f64;
            let y1 = (j + 1) as f64 / n as f64;
            (1.0 / n as f64) / coeff.inverse_integral(y0, y1, 0.0)
        })
        .collect();
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new((3.7 * j as f64 + 0.5).sin(), (1.3 * j as f64).cos()))
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|c| *c /= nv);
    let mut lambda = shift;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..60 {
        let w = fd_solve(&means, xi, shift, &v);
        let nw = norm(&w);
        v = w.into_iter().map(|c| c / nw).collect();
        fd_apply(&means, xi, &v, &mut out);
        let rq: Complex64 = v.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
        let new = rq.re;
        if (new - lambda).abs() <= 1e-13 * new.abs().max(1.0) {
            lambda = new;
            break;
        }
        lambda = new;
    }
    lambda
}

#[test]
fn finite_difference_discretization_converges_to_galerkin() {
    // even grid counts put the interfaces of the half cell on grid nodes,
    // keeping the harmonic-mean scheme cleanly second order
    let coeff = CellCoefficient::two_phase(9.0, 1.0, 0.5).unwrap();
    let xi = 1.2;
    let pairs = solve_bloch_sized(&coeff, xi, 0.0, 3, 384).unwrap();
    for pair in &pairs {
        let lambda = pair.omega * pair.omega;
        let om: Vec<f64> = [2048usize, 4096, 8192]
            .iter()
            .map(|&n| fd_eigenvalue(&coeff, n, xi, lambda).max(0.0).sqrt())
            .collect();
        // self-convergence ratio is free of any reference error
        let ratio = (om[0] - om[1]) / (om[1] - om[2]);
        assert!(
            (3.4..4.6).contains(&ratio),
            "band {}: differences {:.3e} / {:.3e}, ratio {ratio:.2} not h^2",
            pair.branch_index,
            om[0] - om[1],
            om[1] - om[2]
        );
        // Richardson extrapolation cancels the h^2 term
        let om_extrap = (4.0 * om[2] - om[1]) / 3.0;
        assert!(
            (om_extrap - pair.omega).abs() < 1e-7 * pair.omega,
            "band {}: extrapolated {om_extrap:.12} vs Galerkin {:.12}",
            pair.branch_index,
            pair.omega
        );
    }
}

#[test]
fn hellmann_feynman_slope_matches_offset_eigensolves() {
    let coeff = CellCoefficient::two_phase(4.0, 1.0, 0.3).unwrap();
    let xi = 0.9;
    let delta = 1e-3;
    let pairs = solve_bloch_sized(&coeff, xi, 0.0, 3, 128).unwrap();
    let plus = solve_bloch_sized(&coeff, xi + delta, 0.0, 3, 128).unwrap();
    let minus = solve_bloch_sized(&coeff, xi - delta, 0.0, 3, 128).unwrap();
    for (b, pair) in pairs.iter().enumerate() {
        let hf = group_velocity_hf(pair, &coeff, 0.0).unwrap();
        assert!(!hf.flagged);
        let fd = (plus[b].omega - minus[b].omega) / (2.0 * delta);
        assert!(
            (hf.value - fd).abs() <= 1e-4 * fd.abs(),
            "band {b}: identity slope {:.10} vs differenced {fd:.10}",
            hf.value
        );
    }
}

#[test]
fn large_coupling_eigenvalues_approach_the_limit_root() {
    let kappa = 1.3;
    let medium = HighContrastMedium::new(0.5, 1.0).unwrap();
    let limit = hc_solve_branch(1, kappa, &medium).unwrap().omega;
    let mut gaps = Vec::new();
    for a1 in [1e3, 1e4, 1e5, 1e6] {
        let coeff = CellCoefficient::two_phase(a1, 1.0, 0.5).unwrap();
        let omega = solve_bloch_sized(&coeff, kappa, 0.0, 2, 160).unwrap()[1].omega;
        gaps.push(omega - limit);
    }
    for w in gaps.windows(2) {
        assert!(
            w[1].abs() < w[0].abs(),
            "gap sequence not monotone: {gaps:?}"
        );
        assert!(
            w[0].signum() == w[1].signum(),
            "approach changes side: {gaps:?}"
        );
    }
    assert!(
        gaps.last().unwrap().abs() <= 5e-3,
        "final gap {:.3e} too large",
        gaps.last().unwrap()
    );
}
