//! Local wave observables and energy bookkeeping.
//!
//! From the phase family phi(t, x, kappa) three local fields are read off:
//! the stationary quasimomentum kappa_hat solving phi_kappa = x, the local
//! wavenumber k_hat = kappa_hat - phi_x, and the local frequency
//! omega_hat = -phi_t. They satisfy the dispersion relation
//! omega_hat = -(+/-) Omega(t, k_hat) and are transported at the group
//! velocity, which this module verifies by finite-difference residuals.
//! The energy between two group-velocity-moving endpoints,
//! Q(t) = int_{x1(t)}^{x2(t)} |u|^2 dx, is constant in time at leading
//! order; it is evaluated either from the two-scale factorized density of
//! a reconstructed packet or by direct quadrature of fine-grid snapshots.

use crate::branch::{Dispersion, WaveSign};
use crate::eikonal::{phase_field, InitialPhase, PhaseState};
use crate::error::{Error, Result};
use crate::reference::FieldSnapshot;
use crate::wavepacket::{Envelope, PacketSpec};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Step used for the phi_t finite difference.
const TIME_PROBE: f64 = 1e-5;

/// kappa_hat, k_hat, omega_hat sampled on an x-t grid. Entries are valid
/// where `excluded` is false; points are excluded when the stationary
/// equation has no isolated root in the search window (fold or flat phase)
/// or a probe fails.
pub struct LocalWaveData {
    pub sign: WaveSign,
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// Stationary quasimomentum per (t, x); layout [t index][x index].
    pub kappa_hat: Vec<Vec<f64>>,
    pub k_hat: Vec<Vec<f64>>,
    pub omega_hat: Vec<Vec<f64>>,
    pub excluded: Vec<Vec<bool>>,
    /// max |omega_hat + (+/-) Omega(t, k_hat)| over included points: the
    /// module's defining invariant, re-evaluated pointwise.
    pub dispersion_residual: f64,
}

impl LocalWaveData {
    pub fn excluded_count(&self) -> usize {
        self.excluded
            .iter()
            .map(|row| row.iter().filter(|&&e| e).count())
            .sum()
    }
}

struct KappaProbe {
    /// d phi / d kappa at fixed (t, x).
    dphi: f64,
    /// phi_x at the inverted foot point.
    slope: f64,
}

/// Analytic kappa-derivative of the phase: differentiating
/// x = sigma + s G(xi0) and phi = g(sigma) + s (g'(sigma) G + W) through
/// the foot-point map sigma(t, x, kappa), with G = int Omega_xi,
/// C = int Omega_xixi, W = int Omega, xi0 = kappa - g'(sigma).
fn probe(state: &PhaseState, t: f64, x: f64) -> Result<KappaProbe> {
    let (_, slope, sigma) = phase_field(state, t, x)?;
    let s = state.sign.signum();
    let gp = state.g.derivative(sigma);
    let gpp = state.g.second_derivative(sigma);
    let xi0 = state.kappa - gp;
    let gv_int = state.branch.group_velocity_time_integral(t, xi0)?;
    let curv_int = state.branch.curvature_time_integral(t, xi0)?;
    let jac = 1.0 - s * gpp * curv_int;
    if jac.abs() < 1e-12 {
        return Err(Error::Numerical("vanishing ray jacobian".into()));
    }
    let sigma_k = -s * curv_int / jac;
    let dphi =
        gp * sigma_k + s * (gpp * sigma_k * gv_int + (gp * curv_int + gv_int) * (1.0 - gpp * sigma_k));
    Ok(KappaProbe { dphi, slope })
}

/// Root of phi_kappa(t, x, kappa) = x inside `window`, or None when the
/// scan finds no isolated sign change (fold or flat region).
fn kappa_root(state: &mut PhaseState, t: f64, x: f64, window: (f64, f64)) -> Option<f64> {
    const SCAN: usize = 24;
    let (lo, hi) = window;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket: Option<((f64, f64), (f64, f64))> = None;
    let mut found = 0usize;
    for i in 0..=SCAN {
        let k = lo + (hi - lo) * i as f64 / SCAN as f64;
        state.kappa = k;
        let f = match probe(state, t, x) {
            Ok(p) => p.dphi - x,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if f == 0.0 {
            bracket = Some(((k, f), (k, f)));
            found += 1;
            prev = Some((k, f));
            continue;
        }
        if let Some((pk, pf)) = prev {
            if pf * f < 0.0 {
                bracket = Some(((pk, pf), (k, f)));
                found += 1;
            }
        }
        prev = Some((k, f));
    }
    if found != 1 {
        return None;
    }
    let ((mut a, mut fa), (mut b, _)) = bracket.expect("found == 1");
    if a == b {
        return Some(a);
    }
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        state.kappa = m;
        let fm = match probe(state, t, x) {
            Ok(p) => p.dphi - x,
            Err(_) => return None,
        };
        if fm == 0.0 {
            return Some(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Some(0.5 * (a + b))
}

/// Assemble the local fields over a grid by per-point root-finding in
/// kappa. `kappa_window` is the search interval; the paper's standing
/// assumption phi_kappakappa != 0 must hold there, and points violating it
/// come back excluded rather than failing the whole grid.
pub fn local_fields(
    sign: WaveSign,
    g: &InitialPhase,
    branch: &dyn Dispersion,
    t_grid: &[f64],
    x_grid: &[f64],
    kappa_window: (f64, f64),
) -> Result<LocalWaveData> {
    if t_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    if t_grid.iter().any(|&t| t < 2.0 * TIME_PROBE) {
        return Err(Error::InvalidInput(
            "times must exceed the phi_t probe step".into(),
        ));
    }
    if !(kappa_window.0 < kappa_window.1)
        || kappa_window.0 < -PI
        || kappa_window.1 >= PI
    {
        return Err(Error::InvalidInput(
            "kappa window must be an interval inside [-pi, pi)".into(),
        ));
    }
    let s = sign.signum();
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let mut state = PhaseState::new(sign, g.clone(), 0.5 * (kappa_window.0 + kappa_window.1), branch);
            let nx = x_grid.len();
            let mut kap = vec![0.0; nx];
            let mut kh = vec![0.0; nx];
            let mut oh = vec![0.0; nx];
            let mut exc = vec![false; nx];
            let mut worst = 0.0f64;
            for (j, &x) in x_grid.iter().enumerate() {
                let root = match kappa_root(&mut state, t, x, kappa_window) {
                    Some(r) => r,
                    None => {
                        exc[j] = true;
                        continue;
                    }
                };
                state.kappa = root;
                let pr = match probe(&state, t, x) {
                    Ok(p) => p,
                    Err(_) => {
                        exc[j] = true;
                        continue;
                    }
                };
                let khat = root - pr.slope;
                if !(-PI..PI).contains(&khat) {
                    exc[j] = true;
                    continue;
                }
                let phi_pm = (
                    phase_field(&state, t + TIME_PROBE, x),
                    phase_field(&state, t - TIME_PROBE, x),
                );
                let (phi_p, phi_m) = match phi_pm {
                    (Ok((p, _, _)), Ok((m, _, _))) => (p, m),
                    _ => {
                        exc[j] = true;
                        continue;
                    }
                };
                let omega_hat = -(phi_p - phi_m) / (2.0 * TIME_PROBE);
                let om = match state.branch.omega(t, khat) {
                    Ok(v) => v,
                    Err(_) => {
                        exc[j] = true;
                        continue;
                    }
                };
                kap[j] = root;
                kh[j] = khat;
                oh[j] = omega_hat;
                worst = worst.max((omega_hat + s * om).abs());
            }
            (kap, kh, oh, exc, worst)
        })
        .collect();
    let mut kappa_hat = Vec::with_capacity(rows.len());
    let mut k_hat = Vec::with_capacity(rows.len());
    let mut omega_hat = Vec::with_capacity(rows.len());
    let mut excluded = Vec::with_capacity(rows.len());
    let mut dispersion_residual = 0.0f64;
    for (kap, kh, oh, exc, worst) in rows {
        kappa_hat.push(kap);
        k_hat.push(kh);
        omega_hat.push(oh);
        excluded.push(exc);
        dispersion_residual = dispersion_residual.max(worst);
    }
    Ok(LocalWaveData {
        sign,
        t_grid: t_grid.to_vec(),
        x_grid: x_grid.to_vec(),
        kappa_hat,
        k_hat,
        omega_hat,
        excluded,
        dispersion_residual,
    })
}

fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::InvalidInput(
            "need at least three grid points for interior differences".into(),
        ));
    }
    let d = grid[1] - grid[0];
    if !(d > 0.0) {
        return Err(Error::InvalidInput("grid must be increasing".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - d).abs() > 1e-9 * d {
            return Err(Error::InvalidInput("grid must be uniform".into()));
        }
    }
    Ok(d)
}

/// Max-norm finite-difference residuals of the two conservation laws
/// kappa_hat_t + (+/-) Omega_xi(t, k_hat) kappa_hat_x = 0 and the same for
/// k_hat, over interior points whose full stencil is included.
pub fn transport_residuals(data: &LocalWaveData, branch: &dyn Dispersion) -> Result<(f64, f64)> {
    let dt = uniform_spacing(&data.t_grid)?;
    let dx = uniform_spacing(&data.x_grid)?;
    let nt = data.t_grid.len();
    let nx = data.x_grid.len();
    let s = data.sign.signum();
    let mut r_kappa = 0.0f64;
    let mut r_k = 0.0f64;
    let mut used = 0usize;
    for i in 1..nt - 1 {
        for j in 1..nx - 1 {
            let stencil_ok = !data.excluded[i][j]
                && !data.excluded[i + 1][j]
                && !data.excluded[i - 1][j]
                && !data.excluded[i][j + 1]
                && !data.excluded[i][j - 1];
            if !stencil_ok {
                continue;
            }
            let v = match branch.group_velocity(data.t_grid[i], data.k_hat[i][j]) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let rk = (data.kappa_hat[i + 1][j] - data.kappa_hat[i - 1][j]) / (2.0 * dt)
                + s * v * (data.kappa_hat[i][j + 1] - data.kappa_hat[i][j - 1]) / (2.0 * dx);
            let rh = (data.k_hat[i + 1][j] - data.k_hat[i - 1][j]) / (2.0 * dt)
                + s * v * (data.k_hat[i][j + 1] - data.k_hat[i][j - 1]) / (2.0 * dx);
            r_kappa = r_kappa.max(rk.abs());
            r_k = r_k.max(rh.abs());
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidInput(
            "no interior grid point has a fully included stencil".into(),
        ));
    }
    Ok((r_kappa, r_k))
}

/// Two-scale energy density of a reconstructed packet at (t, x):
/// |utilde(0, kappa_hat)|^2 (Omega(0)/Omega(t)) 2 pi eps / |int Omega_kk|,
/// the cell average of |U|^2 being 1 by normalization. Zero when no
/// stationary point lies in `kappa_window`.
pub fn asymptotic_energy_density(
    spec: &PacketSpec,
    t: f64,
    x: f64,
    kappa_window: (f64, f64),
) -> Result<f64> {
    if matches!(spec.envelope, Envelope::Delta { .. }) {
        return Err(Error::InvalidInput(
            "delta envelopes have no square-integrable density".into(),
        ));
    }
    let s = spec.sign.signum();
    let f = |k: f64| -> Result<f64> {
        Ok(s * spec.branch.group_velocity_time_integral(t, k)? - x)
    };
    let (mut a, mut b) = kappa_window;
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        b = a;
    } else if fb == 0.0 {
        a = b;
    } else if fa * fb > 0.0 {
        return Ok(0.0);
    }
    for _ in 0..90 {
        if a == b {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let kh = 0.5 * (a + b);
    let amp = spec
        .envelope
        .smooth_eval(0.0, kh)
        .expect("delta envelopes rejected above");
    let om0 = spec.branch.omega(0.0, kh)?;
    let omt = spec.branch.omega(t, kh)?;
    let ci = spec.branch.curvature_time_integral(t, kh)?;
    if ci.abs() < 1e-14 {
        return Err(Error::DegenerateStationaryPhase {
            kappa: kh,
            second: ci / t.max(1e-300),
            threshold: 1e-14,
        });
    }
    Ok(amp.norm_sqr() * (om0 / omt) * 2.0 * PI * spec.epsilon / ci.abs())
}

/// Where the |u|^2 samples come from.
pub enum EnergySource<'a> {
    /// Two-scale factorized density of a reconstructed packet.
    Asymptotic(&'a PacketSpec<'a>),
    /// Fine-grid snapshots of the real field u^eps. Note the real field
    /// carries half the complex form's |u|^2 after cell averaging; the
    /// factor cancels in Q(t)/Q(0) drift ratios.
    Fdtd {
        snapshots: &'a [FieldSnapshot],
        x: &'a [f64],
        branch: &'a dyn Dispersion,
        sign: WaveSign,
    },
}

fn simpson_try<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, n: usize) -> Result<f64> {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

/// Trapezoid of u^2 over [lo, hi] on the snapshot grid, with linear
/// interpolation at the clipped ends.
fn trapezoid_between(x: &[f64], u: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if x.len() != u.len() || x.len() < 2 {
        return Err(Error::InvalidInput("snapshot grid mismatch".into()));
    }
    if lo < x[0] || hi > x[x.len() - 1] {
        return Err(Error::Window(format!(
            "integration range [{lo:.4}, {hi:.4}] leaves the snapshot window"
        )));
    }
    let value_at = |p: f64| -> f64 {
        let i = x.partition_point(|&v| v < p).clamp(1, x.len() - 1);
        let w = (p - x[i - 1]) / (x[i] - x[i - 1]);
        let uv = u[i - 1] * (1.0 - w) + u[i] * w;
        uv * uv
    };
    let mut total = 0.0;
    let mut a = lo;
    let mut fa = value_at(lo);
    let mut i = x.partition_point(|&v| v <= lo);
    while i < x.len() && x[i] < hi {
        let fb = u[i] * u[i];
        total += 0.5 * (x[i] - a) * (fa + fb);
        a = x[i];
        fa = fb;
        i += 1;
    }
    let fb = value_at(hi);
    total += 0.5 * (hi - a) * (fa + fb);
    Ok(total)
}

/// Q(t) = int_{x1(t)}^{x2(t)} |u|^2 dx with endpoints riding the group
/// velocities of kappa1 and kappa2. Constant in time at leading order.
pub fn energy_between_characteristics(
    source: &EnergySource,
    kappa1: f64,
    kappa2: f64,
    t_list: &[f64],
) -> Result<Vec<f64>> {
    if !(kappa1 < kappa2) {
        return Err(Error::InvalidInput("need kappa1 < kappa2".into()));
    }
    let (branch, sign) = match source {
        EnergySource::Asymptotic(spec) => (spec.branch, spec.sign),
        EnergySource::Fdtd { branch, sign, .. } => (*branch, *sign),
    };
    let s = sign.signum();
    let mut orientation: Option<bool> = None;
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let x1 = s * branch.group_velocity_time_integral(t, kappa1)?;
        let x2 = s * branch.group_velocity_time_integral(t, kappa2)?;
        let d = x2 - x1;
        if d.abs() < 1e-12 || *orientation.get_or_insert(d > 0.0) != (d > 0.0) {
            // the two endpoint rays have met or swapped order
            return Err(Error::CausticCrossing {
                lo: x1.min(x2),
                hi: x1.max(x2),
            });
        }
        let (lo, hi) = if d > 0.0 { (x1, x2) } else { (x2, x1) };
        let q = match source {
            EnergySource::Asymptotic(spec) => simpson_try(
                |x| asymptotic_energy_density(spec, t, x, (kappa1, kappa2)),
                lo,
                hi,
                800,
            )?,
            EnergySource::Fdtd { snapshots, x, .. } => {
                let snap = snapshots
                    .iter()
                    .min_by(|p, q| (p.t - t).abs().total_cmp(&(q.t - t).abs()))
                    .ok_or_else(|| Error::InvalidInput("no snapshots supplied".into()))?;
                if (snap.t - t).abs() > 1e-6 * t.abs().max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "no snapshot near t = {t} (closest {0})",
                        snap.t
                    )));
                }
                trapezoid_between(x, &snap.u, lo, hi)?
            }
        };
        out.push(q);
    }
    Ok(out)
}

/// Max-norm finite-difference residual of the energy conservation law
/// E_t + ((+/-) Omega_xi(k_hat) E)_x over the data grid.
pub fn energy_flux_check(
    data: &LocalWaveData,
    energy: &[Vec<f64>],
    branch: &dyn Dispersion,
) -> Result<f64> {
    let dt = uniform_spacing(&data.t_grid)?;
    let dx = uniform_spacing(&data.x_grid)?;
    let nt = data.t_grid.len();
    let nx = data.x_grid.len();
    if energy.len() != nt || energy.iter().any(|row| row.len() != nx) {
        return Err(Error::InvalidInput(
            "energy grid shape differs from the local-field grid".into(),
        ));
    }
    let s = data.sign.signum();
    let mut flux = vec![vec![f64::NAN; nx]; nt];
    for i in 0..nt {
        for j in 0..nx {
            if data.excluded[i][j] {
                continue;
            }
            if let Ok(v) = branch.group_velocity(data.t_grid[i], data.k_hat[i][j]) {
                flux[i][j] = s * v * energy[i][j];
            }
        }
    }
    let mut worst = 0.0f64;
    let mut used = 0usize;
    for i in 1..nt - 1 {
        for j in 1..nx - 1 {
            let vals = [
                energy[i + 1][j],
                energy[i - 1][j],
                flux[i][j + 1],
                flux[i][j - 1],
            ];
            if vals.iter().any(|v| !v.is_finite()) || data.excluded[i][j] {
                continue;
            }
            let r = (energy[i + 1][j] - energy[i - 1][j]) / (2.0 * dt)
                + (flux[i][j + 1] - flux[i][j - 1]) / (2.0 * dx);
            worst = worst.max(r.abs());
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidInput(
            "no interior grid point has a fully included stencil".into(),
        ));
    }
    Ok(worst)
}
