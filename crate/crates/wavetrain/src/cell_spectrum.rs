//! Bloch spectrum of the shifted unit-cell operator −(d/dy+iξ) a (d/dy+iξ).
//!
//! The operator is discretized by a flux-factorized Fourier-Galerkin rule:
//! with D = diag(2πm + ξ) acting on Fourier modes m = −M/2 .. M/2−1 and
//! T the Toeplitz matrix of Fourier coefficients of 1/a, the discrete
//! operator is L(ξ) = D T⁻¹ D. Factorizing through 1/a keeps the flux
//! a(U' + iξU) in the approximation space, which preserves the interface
//! continuity conditions for discontinuous a; eigenvalues converge at
//! O(M⁻³) for piecewise-constant coefficients (spectrally for smooth a)
//! instead of the O(M⁻¹) of the plain product rule.
//!
//! The first ξ-derivative of any band comes from the Hellmann-Feynman
//! identity d(Ω²)/dξ = 2 Re⟨T⁻¹D û, û⟩, which is exact at the discrete
//! level because T⁻¹D û is exactly the Galerkin flux; curvature and the
//! frequency derivative of the eigenfunction fall back to controlled
//! finite differences.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::coefficient::CellCoefficient;
use crate::error::{Error, Result};

/// Default Fourier mode count for piecewise media.
pub const DEFAULT_MODES: usize = 256;

/// Relative residual bound each returned eigenpair must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Derivative queries on the acoustic branch are rejected this close to
/// ξ = 0, where Ω = √eigenvalue loses smoothness.
pub const ACOUSTIC_GUARD: f64 = 1e-3;

/// Minimum |Ω(ξ+δ) − Ω(ξ−δ)| below which the Ω-parametrization of the
/// eigenfunction is declared flat.
pub const FLAT_BAND_TOL: f64 = 1e-8;

/// Default offset for the dedicated ±δ eigensolves behind U_Ω.
pub const OMEGA_DERIVATIVE_DELTA: f64 = 5e-4;

/// A value together with a marker that a fallback or one-sided rule
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    /// True when a fallback (one-sided stencil, finite-difference limit)
    /// was used instead of the primary rule.
    pub flagged: bool,
}

/// Which coefficient the gauge rule pinned to the positive real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeTag {
    /// The cell mean (zeroth Fourier coefficient) was rotated real ≥ 0.
    CellMean,
    /// Mean was below threshold; the largest-modulus coefficient at this
    /// mode was rotated real positive instead.
    LargestCoefficient(i64),
}

/// One normalized, gauge-fixed eigenpair of the shifted cell operator.
#[derive(Debug, Clone)]
pub struct BlochEigenpair {
    pub branch_index: usize,
    pub xi: f64,
    pub t: f64,
    pub omega: f64,
    /// Fourier coefficients over modes m = −M/2 .. M/2−1, unit ℓ²-norm
    /// (Parseval makes the cell L²-norm exactly 1).
    pub coefficients: Vec<Complex64>,
    pub gauge_tag: GaugeTag,
    /// ‖L û − Ω² û‖₂ relative to the largest eigenvalue of the
    /// discretized operator (the backward-error scale).
    pub residual: f64,
}

impl BlochEigenpair {
    /// Number of Fourier modes.
    pub fn modes(&self) -> usize {
        self.coefficients.len()
    }

    /// Mode number of coefficient index j.
    pub fn mode_number(&self, j: usize) -> i64 {
        j as i64 - (self.modes() / 2) as i64
    }

    /// Cell mean ∫_Q U dy (the zeroth Fourier coefficient).
    pub fn cell_mean(&self) -> Complex64 {
        self.coefficients[self.modes() / 2]
    }

    /// Evaluates U at a single point y (1-periodic).
    pub fn value_at(&self, y: f64) -> Complex64 {
        let half = (self.modes() / 2) as i64;
        let mut u = Complex64::new(0.0, 0.0);
        for (j, c) in self.coefficients.iter().enumerate() {
            let m = j as i64 - half;
            u += c * Complex64::new(0.0, 2.0 * PI * m as f64 * y).exp();
        }
        u
    }

    /// Evaluates U on a uniform y-grid of `ny` points over [0, 1).
    pub fn values(&self, ny: usize) -> Vec<Complex64> {
        (0..ny)
            .map(|i| self.value_at(i as f64 / ny as f64))
            .collect()
    }
}

/// Discrete Hermitian representation of −(d/dy+iξ) a (d/dy+iξ) in the
/// Fourier-Galerkin basis, kept in factorized form.
pub struct ShiftedOperator {
    pub xi: f64,
    /// Diagonal entries 2πm + ξ.
    d: Vec<f64>,
    /// Inverse of the Toeplitz matrix of Fourier coefficients of 1/a.
    b: DMatrix<Complex64>,
}

impl ShiftedOperator {
    /// Mode count M.
    pub fn modes(&self) -> usize {
        self.d.len()
    }

    /// Dense Hermitian matrix L = D B D.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let m = self.modes();
        DMatrix::from_fn(m, m, |i, j| self.d[i] * self.b[(i, j)] * self.d[j])
    }

    /// Galerkin coefficients of the flux a(U'+iξU) divided by i, i.e.
    /// B D û. The physical flux is i·(this vector) in the same basis.
    pub fn flux_coefficients(&self, u: &[Complex64]) -> Vec<Complex64> {
        let m = self.modes();
        assert_eq!(u.len(), m);
        let du = DVector::from_iterator(m, u.iter().zip(&self.d).map(|(c, d)| c * *d));
        let bdu = &self.b * du;
        bdu.iter().copied().collect()
    }

    /// Hellmann-Feynman derivative d(Ω²)/dξ = 2 Re⟨B D û, û⟩ for a unit
    /// eigenvector û of this operator.
    pub fn omega_squared_derivative(&self, u: &[Complex64]) -> f64 {
        let bdu = self.flux_coefficients(u);
        2.0 * bdu
            .iter()
            .zip(u)
            .map(|(f, c)| (f * c.conj()).re)
            .sum::<f64>()
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if !((-PI..PI).contains(&xi)) {
        return Err(Error::OutsideBrillouin { xi });
    }
    Ok(())
}

fn check_modes(coeff: &CellCoefficient, m: usize) -> Result<()> {
    if m < 8 || m % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "mode count {m} must be even and at least 8"
        )));
    }
    if coeff.is_sampled() && (m < 64 || !m.is_power_of_two()) {
        return Err(Error::InvalidInput(format!(
            "mode count {m} must be a power of two >= 64 for sampled profiles"
        )));
    }
    Ok(())
}

/// Assembles the factorized Galerkin operator with `m` Fourier modes.
pub fn assemble_shifted_operator(
    coeff: &CellCoefficient,
    xi: f64,
    t: f64,
    m: usize,
) -> Result<ShiftedOperator> {
    check_xi(xi)?;
    check_modes(coeff, m)?;
    let inv_coeffs = coeff.inverse_fourier_coefficients(m, t);
    // Toeplitz T[i][j] = c_{m_i - m_j}; enforce exact Hermitian symmetry by
    // mirroring the k >= 0 entries.
    let idx0 = m as i64 - 1;
    let mut t_mat = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for i in 0..m {
        for j in 0..m {
            let k = i as i64 - j as i64;
            let c = if k >= 0 {
                inv_coeffs[(k + idx0) as usize]
            } else {
                inv_coeffs[(-k + idx0) as usize].conj()
            };
            t_mat[(i, j)] = c;
        }
    }
    let chol = Cholesky::new(t_mat).ok_or_else(|| {
        Error::Numerical("Toeplitz matrix of 1/a is not positive definite".into())
    })?;
    let mut b = chol.inverse();
    // symmetrize away the inversion's rounding skew
    for i in 0..m {
        for j in (i + 1)..m {
            let avg = 0.5 * (b[(i, j)] + b[(j, i)].conj());
            b[(i, j)] = avg;
            b[(j, i)] = avg.conj();
        }
        b[(i, i)] = Complex64::new(b[(i, i)].re, 0.0);
    }
    let half = (m / 2) as i64;
    let d = (0..m)
        .map(|j| 2.0 * PI * (j as i64 - half) as f64 + xi)
        .collect();
    Ok(ShiftedOperator { xi, d, b })
}

/// Rotates `coeffs` into the cell-mean-real-nonnegative gauge (fallback:
/// largest-modulus coefficient real positive). Applying twice is bit-for-bit
/// identical to applying once: a vector already in gauge is returned
/// untouched.
pub fn gauge_fix(coeffs: &mut [Complex64]) -> GaugeTag {
    let mean_idx = coeffs.len() / 2;
    let (target, tag) = if coeffs[mean_idx].norm() >= 1e-10 {
        (mean_idx, GaugeTag::CellMean)
    } else {
        let mut best = 0;
        for (j, c) in coeffs.iter().enumerate() {
            if c.norm() > coeffs[best].norm() {
                best = j;
            }
        }
        (
            best,
            GaugeTag::LargestCoefficient(best as i64 - mean_idx as i64),
        )
    };
    let z = coeffs[target];
    // one rotation leaves |Im| at a couple of ulps; treat that as in-gauge
    if z.re > 0.0 && z.im.abs() <= 4.0 * f64::EPSILON * z.re {
        return tag;
    }
    let r = z.norm();
    if r == 0.0 {
        return tag; // identically zero vector; nothing to rotate
    }
    let phase = z.conj() / r;
    for c in coeffs.iter_mut() {
        *c *= phase;
    }
    tag
}

/// Solves for the `n_max` lowest eigenpairs at quasimomentum ξ with an
/// explicit mode count.
pub fn solve_bloch_sized(
    coeff: &CellCoefficient,
    xi: f64,
    t: f64,
    n_max: usize,
    m: usize,
) -> Result<Vec<BlochEigenpair>> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    if n_max > m / 2 {
        return Err(Error::InvalidInput(format!(
            "n_max = {n_max} too large for {m} modes"
        )));
    }
    let op = assemble_shifted_operator(coeff, xi, t, m)?;
    let l_mat = op.matrix();
    let eig = l_mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // backward-error scale: residuals are meaningful relative to the
    // operator norm, not to a single eigenvalue (the acoustic branch has
    // lambda = xi^2 -> 0 while the matrix stays large)
    let scale = eig
        .eigenvalues
        .iter()
        .fold(f64::MIN_POSITIVE, |m, &v| m.max(v.abs()));

    let mut pairs = Vec::with_capacity(n_max);
    for (branch, &col) in order.iter().take(n_max).enumerate() {
        let lambda = eig.eigenvalues[col].max(0.0);
        let omega = lambda.sqrt();
        let mut coeffs: Vec<Complex64> = eig.eigenvectors.column(col).iter().copied().collect();
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in coeffs.iter_mut() {
            *c /= norm;
        }
        let gauge_tag = gauge_fix(&mut coeffs);
        // residual in the operator norm sense
        let v = DVector::from_column_slice(&coeffs);
        let res_vec = &l_mat * &v - &v * Complex64::new(lambda, 0.0);
        let residual = res_vec.norm() / scale;
        if residual > RESIDUAL_TOL {
            return Err(Error::Eigensolver {
                xi,
                residual,
                tolerance: RESIDUAL_TOL,
            });
        }
        pairs.push(BlochEigenpair {
            branch_index: branch,
            xi,
            t,
            omega,
            coefficients: coeffs,
            gauge_tag,
            residual,
        });
    }
    Ok(pairs)
}

/// Solves for the `n_max` lowest eigenpairs with the default mode count.
pub fn solve_bloch(
    coeff: &CellCoefficient,
    xi: f64,
    t: f64,
    n_max: usize,
) -> Result<Vec<BlochEigenpair>> {
    solve_bloch_sized(coeff, xi, t, n_max, DEFAULT_MODES)
}

/// Group velocity Ω_ξ from the Hellmann-Feynman identity, using only the
/// pair's own eigenfunction. Near Ω = 0 (acoustic point) the identity's
/// division by Ω degenerates and a one-sided finite difference of Ω(ξ) is
/// returned instead, flagged.
pub fn group_velocity_hf(
    pair: &BlochEigenpair,
    coeff: &CellCoefficient,
    t: f64,
) -> Result<Flagged<f64>> {
    let m = pair.modes();
    if pair.omega < 1e-10 {
        // acoustic limit: one-sided difference on the same branch
        let delta = 1e-4;
        let xi2 = if pair.xi + delta < PI {
            pair.xi + delta
        } else {
            pair.xi - delta
        };
        let other = solve_bloch_sized(coeff, xi2, t, pair.branch_index + 1, m)?;
        let omega2 = other[pair.branch_index].omega;
        return Ok(Flagged {
            value: (omega2 - pair.omega) / (xi2 - pair.xi),
            flagged: true,
        });
    }
    let op = assemble_shifted_operator(coeff, pair.xi, t, m)?;
    let d_omega_sq = op.omega_squared_derivative(&pair.coefficients);
    Ok(Flagged {
        value: d_omega_sq / (2.0 * pair.omega),
        flagged: false,
    })
}

/// One band tabulated on a uniform ξ-grid over [−π, π), with group
/// velocity and curvature arrays and per-node eigenfunctions.
#[derive(Debug, Clone)]
pub struct BlochBranch {
    pub branch_index: usize,
    pub t: f64,
    pub xi_grid: Vec<f64>,
    pub omegas: Vec<f64>,
    pub group_velocity: Vec<f64>,
    pub curvature: Vec<f64>,
    /// Nodes whose curvature stencil was one-sided (within 2 cells of ±π).
    pub curvature_one_sided: Vec<bool>,
    pub eigenfunctions: Vec<BlochEigenpair>,
    coeff: CellCoefficient,
    modes: usize,
}

impl BlochBranch {
    /// The coefficient this branch was solved from.
    pub fn coefficient(&self) -> &CellCoefficient {
        &self.coeff
    }

    /// Fourier mode count used for the solves.
    pub fn mode_count(&self) -> usize {
        self.modes
    }

    /// Grid spacing of the ξ-grid.
    pub fn xi_spacing(&self) -> f64 {
        self.xi_grid[1] - self.xi_grid[0]
    }
}

/// Fourth-order first-derivative of uniformly gridded samples; one-sided
/// 5-point stencils at the 2 nodes nearest each end. Returns the
/// derivative and the one-sided marker per node.
pub(crate) fn derivative_fourth_order(g: &[f64], dx: f64) -> (Vec<f64>, Vec<bool>) {
    let n = g.len();
    assert!(n >= 5, "need at least 5 nodes for the 4th-order stencil");
    let mut d = vec![0.0; n];
    let mut one_sided = vec![false; n];
    for i in 0..n {
        if i >= 2 && i + 2 < n {
            d[i] = (-g[i + 2] + 8.0 * g[i + 1] - 8.0 * g[i - 1] + g[i - 2]) / (12.0 * dx);
        } else if i < 2 {
            // forward 5-point, 4th order
            d[i] = (-25.0 * g[i] + 48.0 * g[i + 1] - 36.0 * g[i + 2] + 16.0 * g[i + 3]
                - 3.0 * g[i + 4])
                / (12.0 * dx);
            one_sided[i] = true;
        } else {
            d[i] = (25.0 * g[i] - 48.0 * g[i - 1] + 36.0 * g[i - 2] - 16.0 * g[i - 3]
                + 3.0 * g[i - 4])
                / (12.0 * dx);
            one_sided[i] = true;
        }
    }
    (d, one_sided)
}

/// Solves the lowest `n_branches` bands on a uniform `n_xi`-point grid over
/// [−π, π) and tabulates Ω, Ω_ξ (Hellmann-Feynman) and Ω_ξξ (fourth-order
/// differences of Ω_ξ).
pub fn solve_branches_sized(
    coeff: &CellCoefficient,
    t: f64,
    n_branches: usize,
    n_xi: usize,
    m: usize,
) -> Result<Vec<BlochBranch>> {
    if n_xi < 5 {
        return Err(Error::InvalidInput(
            "need at least 5 xi-grid points".into(),
        ));
    }
    let dxi = 2.0 * PI / n_xi as f64;
    let xi_grid: Vec<f64> = (0..n_xi).map(|j| -PI + j as f64 * dxi).collect();
    let columns: Vec<Result<Vec<(BlochEigenpair, f64)>>> = xi_grid
        .par_iter()
        .map(|&xi| {
            let pairs = solve_bloch_sized(coeff, xi, t, n_branches, m)?;
            pairs
                .into_iter()
                .map(|p| {
                    let gv = group_velocity_hf(&p, coeff, t)?;
                    Ok((p, gv.value))
                })
                .collect()
        })
        .collect();

    let mut branches = Vec::with_capacity(n_branches);
    for b in 0..n_branches {
        branches.push(BlochBranch {
            branch_index: b,
            t,
            xi_grid: xi_grid.clone(),
            omegas: Vec::with_capacity(n_xi),
            group_velocity: Vec::with_capacity(n_xi),
            curvature: Vec::new(),
            curvature_one_sided: Vec::new(),
            eigenfunctions: Vec::with_capacity(n_xi),
            coeff: coeff.clone(),
            modes: m,
        });
    }
    for col in columns {
        let col = col?;
        for (b, (pair, gv)) in col.into_iter().enumerate() {
            branches[b].omegas.push(pair.omega);
            branches[b].group_velocity.push(gv);
            branches[b].eigenfunctions.push(pair);
        }
    }
    for br in branches.iter_mut() {
        let (curv, flags) = derivative_fourth_order(&br.group_velocity, dxi);
        br.curvature = curv;
        br.curvature_one_sided = flags;
    }
    Ok(branches)
}

/// [`solve_branches_sized`] with the default mode count.
pub fn solve_branches(
    coeff: &CellCoefficient,
    t: f64,
    n_branches: usize,
    n_xi: usize,
) -> Result<Vec<BlochBranch>> {
    solve_branches_sized(coeff, t, n_branches, n_xi, DEFAULT_MODES)
}

/// Curvature Ω_ξξ at ξ, from the branch's tabulated fourth-order values
/// (cubic interpolation between nodes). Flagged when a one-sided node
/// contributes.
pub fn curvature(branch: &BlochBranch, xi: f64) -> Result<Flagged<f64>> {
    let grid = &branch.xi_grid;
    let n = grid.len();
    if xi < grid[0] || xi > grid[n - 1] {
        return Err(Error::InvalidInput(format!(
            "xi = {xi} outside the tabulated grid [{}, {}]",
            grid[0],
            grid[n - 1]
        )));
    }
    if branch.branch_index == 0 && xi.abs() < ACOUSTIC_GUARD {
        return Err(Error::DegeneratePoint(format!(
            "curvature query at |xi| = {} inside the acoustic guard band {ACOUSTIC_GUARD}",
            xi.abs()
        )));
    }
    let dxi = branch.xi_spacing();
    let pos = (xi - grid[0]) / dxi;
    let nearest = pos.round() as usize;
    if (pos - pos.round()).abs() < 1e-9 && nearest < n {
        return Ok(Flagged {
            value: branch.curvature[nearest],
            flagged: branch.curvature_one_sided[nearest],
        });
    }
    // cubic Lagrange through the 4 surrounding nodes
    let i1 = (pos.floor() as usize).min(n - 2);
    let i0 = i1.saturating_sub(1);
    let base = i0.min(n - 4);
    let mut value = 0.0;
    let mut flagged = false;
    for a in 0..4 {
        let ia = base + a;
        let mut w = 1.0;
        for bidx in 0..4 {
            if bidx != a {
                let ib = base + bidx;
                w *= (xi - grid[ib]) / (grid[ia] - grid[ib]);
            }
        }
        value += w * branch.curvature[ia];
        flagged |= branch.curvature_one_sided[ia];
    }
    Ok(Flagged { value, flagged })
}

/// The frequency derivative U_Ω of the eigenfunction, from dedicated
/// eigensolves at ξ ± δ phase-aligned against U(ξ).
#[derive(Debug, Clone)]
pub struct EigenfunctionOmegaDerivative {
    /// Fourier coefficients of U_Ω over the same modes as the source pair.
    pub coefficients: Vec<Complex64>,
    /// Re ∫ U_Ω conj(U) dy; the solvability lemma says the overlap is
    /// purely imaginary, so this should vanish.
    pub real_overlap: f64,
    /// g₁ = −i ∫ U_Ω conj(U) dy, real-valued by the same lemma.
    pub g1: f64,
    /// Offset actually used for the ±δ solves.
    pub delta: f64,
}

/// Computes U_Ω at quasimomentum ξ on the branch, with an explicit
/// finite-difference offset δ (`None` uses the default).
pub fn eigenfunction_omega_derivative(
    branch: &BlochBranch,
    xi: f64,
    delta: Option<f64>,
) -> Result<EigenfunctionOmegaDerivative> {
    let delta = delta.unwrap_or(OMEGA_DERIVATIVE_DELTA);
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    check_xi(xi)?;
    if branch.branch_index == 0 && xi.abs() < ACOUSTIC_GUARD {
        return Err(Error::DegeneratePoint(format!(
            "U_Omega query at |xi| = {} inside the acoustic guard band {ACOUSTIC_GUARD}",
            xi.abs()
        )));
    }
    if xi - delta < -PI || xi + delta >= PI {
        return Err(Error::InvalidInput(format!(
            "xi = {xi} closer than delta = {delta} to the zone boundary"
        )));
    }
    let nb = branch.branch_index + 1;
    let coeff = branch.coefficient();
    let m = branch.mode_count();
    let center = &solve_bloch_sized(coeff, xi, branch.t, nb, m)?[branch.branch_index];
    let plus = &solve_bloch_sized(coeff, xi + delta, branch.t, nb, m)?[branch.branch_index];
    let minus = &solve_bloch_sized(coeff, xi - delta, branch.t, nb, m)?[branch.branch_index];
    let d_omega = plus.omega - minus.omega;
    if d_omega.abs() < FLAT_BAND_TOL {
        return Err(Error::FlatBand {
            xi,
            delta: d_omega.abs(),
            threshold: FLAT_BAND_TOL,
        });
    }
    // rotate each neighbor so its overlap with the center is real positive
    let align = |v: &[Complex64]| -> Vec<Complex64> {
        let ov: Complex64 = v
            .iter()
            .zip(&center.coefficients)
            .map(|(a, c)| a * c.conj())
            .sum();
        let r = ov.norm();
        let phase = if r > 0.0 {
            ov.conj() / r
        } else {
            Complex64::new(1.0, 0.0)
        };
        v.iter().map(|a| a * phase).collect()
    };
    let up = align(&plus.coefficients);
    let um = align(&minus.coefficients);
    let coefficients: Vec<Complex64> = up
        .iter()
        .zip(&um)
        .map(|(p, q)| (p - q) / d_omega)
        .collect();
    let overlap: Complex64 = coefficients
        .iter()
        .zip(&center.coefficients)
        .map(|(a, c)| a * c.conj())
        .sum();
    Ok(EigenfunctionOmegaDerivative {
        coefficients,
        real_overlap: overlap.re,
        g1: overlap.im,
        delta,
    })
}
