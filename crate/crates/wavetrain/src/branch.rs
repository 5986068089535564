//! Uniform dispersion interface over one spectral band.
//!
//! Ray tracing, transport and reconstruction only ever ask a band five
//! questions: Omega, Omega_xi, Omega_xixi, the cell eigenfunction, and time
//! integrals of the first three along [0, t]. Two implementations answer
//! them: a numerically tabulated Bloch branch (cubic in xi on the uniform
//! grid, linear between time stamps, with exact integrals of the piecewise
//! linear time interpolant) and the closed-form infinite-contrast limit
//! branch (exact roots and implicit derivatives on demand).

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cell_spectrum::{self, BlochBranch, ACOUSTIC_GUARD};
use crate::coefficient::CellCoefficient;
use crate::error::{Error, Result};
use crate::high_contrast::{
    hc_curvature_exact, hc_eigenfunction, hc_group_velocity_exact, hc_solve_branch,
    HighContrastMedium,
};

/// Which phase branch of the two conjugate wave families is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveSign {
    Plus,
    Minus,
}

impl WaveSign {
    /// +1 for the upper sign, -1 for the lower.
    pub fn signum(&self) -> f64 {
        match self {
            WaveSign::Plus => 1.0,
            WaveSign::Minus => -1.0,
        }
    }
}

/// One band of a dispersion relation, possibly time-dependent.
pub trait Dispersion: Sync {
    /// Band frequency Omega(t, xi) >= 0.
    fn omega(&self, t: f64, xi: f64) -> Result<f64>;
    /// Group velocity Omega_xi(t, xi).
    fn group_velocity(&self, t: f64, xi: f64) -> Result<f64>;
    /// Band curvature Omega_xixi(t, xi).
    fn curvature(&self, t: f64, xi: f64) -> Result<f64>;
    /// Normalized cell eigenfunction U(y) at quasimomentum xi.
    fn eigenfunction(&self, t: f64, xi: f64, y: f64) -> Result<Complex64>;
    /// U at many cell coordinates for one (t, xi); batch form so
    /// implementations can amortize per-quasimomentum work.
    fn eigenfunction_profile(&self, t: f64, xi: f64, ys: &[f64]) -> Result<Vec<Complex64>> {
        ys.iter().map(|&y| self.eigenfunction(t, xi, y)).collect()
    }
    /// True when the band does not depend on t.
    fn is_static(&self) -> bool;
    /// Band index.
    fn band_index(&self) -> usize;

    /// int_0^t Omega(s, xi) ds.
    fn omega_time_integral(&self, t: f64, xi: f64) -> Result<f64>;
    /// int_0^t Omega_xi(s, xi) ds.
    fn group_velocity_time_integral(&self, t: f64, xi: f64) -> Result<f64>;
    /// int_0^t Omega_xixi(s, xi) ds.
    fn curvature_time_integral(&self, t: f64, xi: f64) -> Result<f64>;
}

fn check_xi(xi: f64) -> Result<()> {
    if !((-PI..PI).contains(&xi)) {
        return Err(Error::OutsideBrillouin { xi });
    }
    Ok(())
}

/// A band tabulated at one or more time stamps.
///
/// Scalar fields (Omega, Omega_xi, Omega_xixi) interpolate cubically in xi
/// with periodic wrap-around (the band is 2pi-periodic); eigenfunction
/// Fourier coefficients interpolate linearly between the two nearest
/// xi-nodes. Between time stamps everything is linear in t and clamped
/// beyond the last stamp.
pub struct NumericBranch {
    stamps: Vec<(f64, BlochBranch)>,
}

#[derive(Clone, Copy)]
enum Field {
    Omega,
    GroupVelocity,
    Curvature,
}

impl NumericBranch {
    /// Wraps already tabulated per-stamp branches (all for the same band,
    /// same grids, stamp times strictly increasing starting at 0).
    pub fn new(stamps: Vec<(f64, BlochBranch)>) -> Result<Self> {
        if stamps.is_empty() {
            return Err(Error::InvalidInput("no time stamps".into()));
        }
        if stamps[0].0 != 0.0 {
            return Err(Error::InvalidInput("first time stamp must be 0".into()));
        }
        let b0 = &stamps[0].1;
        for (t, b) in &stamps {
            if b.branch_index != b0.branch_index || b.xi_grid.len() != b0.xi_grid.len() {
                return Err(Error::InvalidInput(
                    "stamps must share band index and xi-grid".into(),
                ));
            }
            if !t.is_finite() {
                return Err(Error::InvalidInput("non-finite stamp time".into()));
            }
        }
        for w in stamps.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidInput(
                    "stamp times must be strictly increasing".into(),
                ));
            }
        }
        Ok(NumericBranch { stamps })
    }

    /// Solves the band for a static coefficient.
    pub fn solve(
        coeff: &CellCoefficient,
        branch_index: usize,
        n_xi: usize,
        m: usize,
    ) -> Result<Self> {
        let branches = cell_spectrum::solve_branches_sized(coeff, 0.0, branch_index + 1, n_xi, m)?;
        let branch = branches.into_iter().nth(branch_index).unwrap();
        NumericBranch::new(vec![(0.0, branch)])
    }

    /// Solves the band at each requested time stamp of a time-dependent
    /// coefficient.
    pub fn solve_time_dependent(
        coeff: &CellCoefficient,
        branch_index: usize,
        n_xi: usize,
        m: usize,
        times: &[f64],
    ) -> Result<Self> {
        let mut stamps = Vec::with_capacity(times.len());
        for &t in times {
            let branches =
                cell_spectrum::solve_branches_sized(coeff, t, branch_index + 1, n_xi, m)?;
            let branch = branches.into_iter().nth(branch_index).unwrap();
            stamps.push((t, branch));
        }
        NumericBranch::new(stamps)
    }

    /// The tabulated branch at the first stamp.
    pub fn base(&self) -> &BlochBranch {
        &self.stamps[0].1
    }

    fn field_array<'a>(branch: &'a BlochBranch, field: Field) -> &'a [f64] {
        match field {
            Field::Omega => &branch.omegas,
            Field::GroupVelocity => &branch.group_velocity,
            Field::Curvature => &branch.curvature,
        }
    }

    /// Periodic cubic interpolation of a stamp's scalar field at xi.
    fn interp_xi(branch: &BlochBranch, field: Field, xi: f64) -> f64 {
        let arr = Self::field_array(branch, field);
        let n = arr.len();
        let dxi = branch.xi_spacing();
        let pos = (xi - branch.xi_grid[0]) / dxi;
        let i1 = pos.floor() as i64;
        let frac = pos - i1 as f64;
        // cubic Lagrange on nodes i1-1 .. i1+2, wrapped periodically
        let idx = |k: i64| -> usize {
            let m = (i1 + k).rem_euclid(n as i64);
            m as usize
        };
        let xs = [-1.0, 0.0, 1.0, 2.0];
        let mut value = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (frac - xs[b]) / (xs[a] - xs[b]);
                }
            }
            value += w * arr[idx(a as i64 - 1)];
        }
        value
    }

    /// Value of a scalar field at (t, xi): cubic in xi per stamp, linear
    /// in t between stamps, clamped outside.
    fn field_value(&self, field: Field, t: f64, xi: f64) -> f64 {
        let n = self.stamps.len();
        if n == 1 || t <= self.stamps[0].0 {
            return Self::interp_xi(&self.stamps[0].1, field, xi);
        }
        if t >= self.stamps[n - 1].0 {
            return Self::interp_xi(&self.stamps[n - 1].1, field, xi);
        }
        let i = self.stamps.partition_point(|(s, _)| *s <= t) - 1;
        let (t0, ref b0) = self.stamps[i];
        let (t1, ref b1) = self.stamps[i + 1];
        let w = (t - t0) / (t1 - t0);
        (1.0 - w) * Self::interp_xi(b0, field, xi) + w * Self::interp_xi(b1, field, xi)
    }

    /// Exact integral over [0, t] of the piecewise-linear-in-time
    /// interpolant of a scalar field at fixed xi.
    fn field_time_integral(&self, field: Field, t: f64, xi: f64) -> f64 {
        assert!(t >= 0.0, "negative integration time");
        let n = self.stamps.len();
        if n == 1 {
            return t * Self::interp_xi(&self.stamps[0].1, field, xi);
        }
        let mut acc = 0.0;
        let mut covered = 0.0;
        for i in 0..n - 1 {
            let (t0, ref b0) = self.stamps[i];
            let (t1, ref b1) = self.stamps[i + 1];
            if covered >= t {
                break;
            }
            let seg_end = t1.min(t);
            if seg_end <= t0 {
                break;
            }
            let v0 = Self::interp_xi(b0, field, xi);
            let v1 = Self::interp_xi(b1, field, xi);
            let a = t0.max(0.0);
            // linear interpolant between (t0, v0) and (t1, v1)
            let val = |s: f64| v0 + (v1 - v0) * (s - t0) / (t1 - t0);
            acc += 0.5 * (val(a) + val(seg_end)) * (seg_end - a);
            covered = seg_end;
        }
        if t > self.stamps[n - 1].0 {
            let v_last = Self::interp_xi(&self.stamps[n - 1].1, field, xi);
            acc += (t - self.stamps[n - 1].0) * v_last;
        }
        acc
    }

    fn guard_acoustic(&self, xi: f64) -> Result<()> {
        if self.base().branch_index == 0 && xi.abs() < ACOUSTIC_GUARD {
            return Err(Error::DegeneratePoint(format!(
                "derivative query at |xi| = {} inside the acoustic guard band {ACOUSTIC_GUARD}",
                xi.abs()
            )));
        }
        Ok(())
    }
}

impl Dispersion for NumericBranch {
    fn omega(&self, t: f64, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        Ok(self.field_value(Field::Omega, t, xi))
    }

    fn group_velocity(&self, t: f64, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        self.guard_acoustic(xi)?;
        Ok(self.field_value(Field::GroupVelocity, t, xi))
    }

    fn curvature(&self, t: f64, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        self.guard_acoustic(xi)?;
        Ok(self.field_value(Field::Curvature, t, xi))
    }

    fn eigenfunction(&self, t: f64, xi: f64, y: f64) -> Result<Complex64> {
        check_xi(xi)?;
        // linear interpolation of Fourier coefficients between the two
        // nearest xi-nodes of the bracketing time stamps
        let eval_stamp = |branch: &BlochBranch| -> Complex64 {
            let dxi = branch.xi_spacing();
            let pos = (xi - branch.xi_grid[0]) / dxi;
            let n = branch.xi_grid.len();
            let i0 = (pos.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let w = (pos - i0 as f64).clamp(0.0, 1.0);
            let f0 = &branch.eigenfunctions[i0];
            let f1 = &branch.eigenfunctions[i1];
            let mut u = Complex64::new(0.0, 0.0);
            let half = (f0.modes() / 2) as i64;
            for (j, (c0, c1)) in f0.coefficients.iter().zip(&f1.coefficients).enumerate() {
                let c = c0 * (1.0 - w) + c1 * w;
                let m = j as i64 - half;
                u += c * Complex64::new(0.0, 2.0 * PI * m as f64 * y).exp();
            }
            u
        };
        let n = self.stamps.len();
        if n == 1 || t <= self.stamps[0].0 {
            return Ok(eval_stamp(&self.stamps[0].1));
        }
        if t >= self.stamps[n - 1].0 {
            return Ok(eval_stamp(&self.stamps[n - 1].1));
        }
        let i = self.stamps.partition_point(|(s, _)| *s <= t) - 1;
        let (t0, ref b0) = self.stamps[i];
        let (t1, ref b1) = self.stamps[i + 1];
        let w = (t - t0) / (t1 - t0);
        Ok(eval_stamp(b0) * (1.0 - w) + eval_stamp(b1) * w)
    }

    fn eigenfunction_profile(&self, t: f64, xi: f64, ys: &[f64]) -> Result<Vec<Complex64>> {
        check_xi(xi)?;
        // interpolate the coefficient vector once, then synthesize at each y
        let stamp_coeffs = |branch: &BlochBranch| -> Vec<Complex64> {
            let dxi = branch.xi_spacing();
            let pos = (xi - branch.xi_grid[0]) / dxi;
            let n = branch.xi_grid.len();
            let i0 = (pos.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let w = (pos - i0 as f64).clamp(0.0, 1.0);
            let f0 = &branch.eigenfunctions[i0];
            let f1 = &branch.eigenfunctions[i1];
            f0.coefficients
                .iter()
                .zip(&f1.coefficients)
                .map(|(c0, c1)| c0 * (1.0 - w) + c1 * w)
                .collect()
        };
        let n = self.stamps.len();
        let coeffs = if n == 1 || t <= self.stamps[0].0 {
            stamp_coeffs(&self.stamps[0].1)
        } else if t >= self.stamps[n - 1].0 {
            stamp_coeffs(&self.stamps[n - 1].1)
        } else {
            let i = self.stamps.partition_point(|(s, _)| *s <= t) - 1;
            let (t0, ref b0) = self.stamps[i];
            let (t1, ref b1) = self.stamps[i + 1];
            let w = (t - t0) / (t1 - t0);
            stamp_coeffs(b0)
                .iter()
                .zip(&stamp_coeffs(b1))
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect()
        };
        let half = (coeffs.len() / 2) as i64;
        Ok(ys
            .iter()
            .map(|&y| {
                let mut u = Complex64::new(0.0, 0.0);
                for (j, c) in coeffs.iter().enumerate() {
                    let m = j as i64 - half;
                    u += c * Complex64::new(0.0, 2.0 * PI * m as f64 * y).exp();
                }
                u
            })
            .collect())
    }

    fn is_static(&self) -> bool {
        self.stamps.len() == 1
    }

    fn band_index(&self) -> usize {
        self.base().branch_index
    }

    fn omega_time_integral(&self, t: f64, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        Ok(self.field_time_integral(Field::Omega, t, xi))
    }

    fn group_velocity_time_integral(&self, t: f64, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        self.guard_acoustic(xi)?;
        Ok(self.field_time_integral(Field::GroupVelocity, t, xi))
    }

    fn curvature_time_integral(&self, t: f64, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        self.guard_acoustic(xi)?;
        Ok(self.field_time_integral(Field::Curvature, t, xi))
    }
}

/// The closed-form infinite-contrast band: exact dispersion roots and
/// implicit derivatives, no tabulation, always static.
pub struct LimitBranch {
    pub medium: HighContrastMedium,
    pub n: usize,
    /// Solved band points memoized by wavenumber bits; quadratures visit
    /// the same nodes for every evaluation point.
    cache: std::sync::RwLock<std::collections::HashMap<u64, crate::high_contrast::HCBandPoint>>,
}

impl LimitBranch {
    pub fn new(medium: HighContrastMedium, n: usize) -> Self {
        LimitBranch {
            medium,
            n,
            cache: std::sync::RwLock::new(std::collections::HashMap::new()),
        }
    }

    fn point(&self, xi: f64) -> Result<crate::high_contrast::HCBandPoint> {
        let key = xi.to_bits();
        if let Some(p) = self.cache.read().unwrap().get(&key) {
            return Ok(*p);
        }
        let p = hc_solve_branch(self.n, xi, &self.medium)?;
        self.cache.write().unwrap().insert(key, p);
        Ok(p)
    }
}

impl Dispersion for LimitBranch {
    fn omega(&self, _t: f64, xi: f64) -> Result<f64> {
        Ok(self.point(xi)?.omega)
    }

    fn group_velocity(&self, _t: f64, xi: f64) -> Result<f64> {
        hc_group_velocity_exact(&self.point(xi)?, &self.medium)
    }

    fn curvature(&self, _t: f64, xi: f64) -> Result<f64> {
        hc_curvature_exact(&self.point(xi)?, &self.medium)
    }

    fn eigenfunction(&self, _t: f64, xi: f64, y: f64) -> Result<Complex64> {
        hc_eigenfunction(y, &self.point(xi)?, &self.medium)
    }

    fn is_static(&self) -> bool {
        true
    }

    fn band_index(&self) -> usize {
        self.n
    }

    fn omega_time_integral(&self, t: f64, xi: f64) -> Result<f64> {
        Ok(t * self.omega(0.0, xi)?)
    }

    fn group_velocity_time_integral(&self, t: f64, xi: f64) -> Result<f64> {
        Ok(t * self.group_velocity(0.0, xi)?)
    }

    fn curvature_time_integral(&self, t: f64, xi: f64) -> Result<f64> {
        Ok(t * self.curvature(0.0, xi)?)
    }
}
