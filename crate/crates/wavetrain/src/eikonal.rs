//! Leading-order eikonal and transport solver.
//!
//! The phase solves phi_t = +-Omega(t, kappa - phi_x) and is propagated by
//! characteristics: along dx/dt = +-Omega_xi the slope phi_x is a Riemann
//! invariant, so each path launched at sigma0 keeps xi0 = kappa - g'(sigma0)
//! frozen and reduces x(t) and phi(t) to time quadratures. The squared
//! amplitude obeys a continuity law for (u0)^2 Omega carried at the group
//! velocity; in Lagrangian form (u0)^2(t) = (u0)^2(0) Omega(0)/Omega(t) / J
//! with the geometric spreading J = 1 -+ g''(sigma0) int_0^t Omega_xixi.
//! Caustics (J <= 0) are detected and reported, never crossed silently.

use crate::branch::{Dispersion, WaveSign};
use crate::cell_spectrum::{
    self, derivative_fourth_order, BlochBranch, OMEGA_DERIVATIVE_DELTA,
};
use crate::error::{Error, Result};

/// Initial phase g(sigma) with consistent first and second derivatives.
#[derive(Debug, Clone)]
pub enum InitialPhase {
    Zero,
    Linear { slope: f64 },
    /// g(sigma) = coefficient * sigma^2.
    Quadratic { coefficient: f64 },
    /// Uniformly sampled values with derivative tables; linear extension
    /// outside the sampled range.
    Sampled {
        start: f64,
        step: f64,
        values: Vec<f64>,
        slope: Vec<f64>,
        curvature: Vec<f64>,
    },
}

impl InitialPhase {
    /// Builds a sampled phase from values alone; derivative tables come
    /// from fourth-order finite differences and are checked for
    /// consistency with the values.
    pub fn sampled(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 8 {
            return Err(Error::InvalidInput(
                "sampled initial phase needs at least 8 values".into(),
            ));
        }
        if !(step > 0.0) || !start.is_finite() {
            return Err(Error::InvalidInput("invalid sample grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite phase sample".into()));
        }
        let (slope, _) = derivative_fourth_order(&values, step);
        let (curvature, _) = derivative_fourth_order(&slope, step);
        let scale = slope.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        // coarseness gate: the leading derivative truncation is
        // step^2 |g'''| / 6, with g''' estimated by differencing the
        // curvature table; noisy tables inflate the estimate and are
        // rejected by the same bound
        let g3 = curvature
            .windows(2)
            .fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / step));
        let coarseness = g3 * step * step / 6.0;
        if coarseness > 1e-3 * scale {
            return Err(Error::InvalidInput(format!(
                "phase samples too coarse: estimated slope truncation {coarseness:.3e} \
                 exceeds 1e-3 of the slope scale {scale:.3e}"
            )));
        }
        Ok(InitialPhase::Sampled {
            start,
            step,
            values,
            slope,
            curvature,
        })
    }

    fn interp(start: f64, step: f64, table: &[f64], s: f64) -> f64 {
        let n = table.len();
        let pos = (s - start) / step;
        // cubic Lagrange on the 4 surrounding nodes, clamped at the edges
        let base = ((pos.floor() as i64) - 1).clamp(0, n as i64 - 4) as usize;
        let frac = pos - base as f64;
        let mut value = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (frac - b as f64) / (a as f64 - b as f64);
                }
            }
            value += w * table[base + a];
        }
        value
    }

    fn sampled_range(start: f64, step: f64, len: usize) -> (f64, f64) {
        (start, start + step * (len - 1) as f64)
    }

    /// g(sigma).
    pub fn value(&self, s: f64) -> f64 {
        match self {
            InitialPhase::Zero => 0.0,
            InitialPhase::Linear { slope } => slope * s,
            InitialPhase::Quadratic { coefficient } => coefficient * s * s,
            InitialPhase::Sampled {
                start,
                step,
                values,
                slope,
                ..
            } => {
                let (lo, hi) = Self::sampled_range(*start, *step, values.len());
                if s < lo {
                    values[0] + slope[0] * (s - lo)
                } else if s > hi {
                    values[values.len() - 1] + slope[slope.len() - 1] * (s - hi)
                } else {
                    Self::interp(*start, *step, values, s)
                }
            }
        }
    }

    /// g'(sigma).
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            InitialPhase::Zero => 0.0,
            InitialPhase::Linear { slope } => *slope,
            InitialPhase::Quadratic { coefficient } => 2.0 * coefficient * s,
            InitialPhase::Sampled {
                start,
                step,
                values,
                slope,
                ..
            } => {
                let (lo, hi) = Self::sampled_range(*start, *step, values.len());
                if s < lo {
                    slope[0]
                } else if s > hi {
                    slope[slope.len() - 1]
                } else {
                    Self::interp(*start, *step, slope, s)
                }
            }
        }
    }

    /// g''(sigma).
    pub fn second_derivative(&self, s: f64) -> f64 {
        match self {
            InitialPhase::Zero | InitialPhase::Linear { .. } => 0.0,
            InitialPhase::Quadratic { coefficient } => 2.0 * coefficient,
            InitialPhase::Sampled {
                start,
                step,
                values,
                curvature,
                ..
            } => {
                let (lo, hi) = Self::sampled_range(*start, *step, values.len());
                if s < lo || s > hi {
                    0.0
                } else {
                    Self::interp(*start, *step, curvature, s)
                }
            }
        }
    }

    /// True when g'' vanishes identically (no geometric spreading).
    pub fn is_affine(&self) -> bool {
        matches!(self, InitialPhase::Zero | InitialPhase::Linear { .. })
    }
}

/// Everything needed to propagate one phase branch: sign choice, initial
/// phase, packet quasimomentum, and the dispersion band.
pub struct PhaseState<'a> {
    pub sign: WaveSign,
    pub g: InitialPhase,
    pub kappa: f64,
    pub branch: &'a dyn Dispersion,
}

impl<'a> PhaseState<'a> {
    pub fn new(
        sign: WaveSign,
        g: InitialPhase,
        kappa: f64,
        branch: &'a dyn Dispersion,
    ) -> Self {
        PhaseState {
            sign,
            g,
            kappa,
            branch,
        }
    }

    /// Frozen quasimomentum of the characteristic through sigma.
    fn xi_at(&self, sigma: f64) -> f64 {
        self.kappa - self.g.derivative(sigma)
    }
}

/// One traced characteristic with its phase, slope and unit-launch
/// squared-amplitude transport factor.
#[derive(Debug, Clone)]
pub struct CharacteristicPath {
    pub sigma0: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub phase: Vec<f64>,
    /// phi_x along the path, a Riemann invariant equal to g'(sigma0).
    pub phase_slope: f64,
    /// Transport factor Omega(0)/Omega(t)/J(t); multiply by the launch
    /// value of (u0)^2 to obtain the squared amplitude along the path.
    pub amplitude_sq: Vec<f64>,
    /// Measured max_t |phi_x(t) - phi_x(0)| from flanking characteristics.
    pub slope_drift: f64,
}

struct PathAccumulator {
    x: f64,
    phi: f64,
    curvature_integral: f64,
}

/// Traces the characteristic launched at sigma0 to t_final with fixed
/// steps near dt. Simpson stages per step (the RK4 quadrature limit for
/// state-independent right sides); the slope invariant is verified from a
/// flanking pair of characteristics and the measured drift stored.
pub fn trace_characteristic(
    state: &PhaseState,
    sigma0: f64,
    t_final: f64,
    dt: f64,
) -> Result<CharacteristicPath> {
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput("t_final and dt must be positive".into()));
    }
    let n_steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / n_steps as f64;
    let s = state.sign.signum();

    let delta = 1e-3 * sigma0.abs().max(1.0);
    let sigmas = [sigma0, sigma0 - delta, sigma0 + delta];
    let mut xis = [0.0; 3];
    for (i, &sg) in sigmas.iter().enumerate() {
        xis[i] = state.xi_at(sg);
        // probe: every evaluation below would fail identically
        state.branch.omega(0.0, xis[i])?;
    }
    let g1_0 = state.g.derivative(sigma0);
    let g2_0 = state.g.second_derivative(sigma0);
    let need_curvature = g2_0 != 0.0;

    let mut paths: Vec<PathAccumulator> = sigmas
        .iter()
        .map(|&sg| PathAccumulator {
            x: sg,
            phi: state.g.value(sg),
            curvature_integral: 0.0,
        })
        .collect();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut positions = Vec::with_capacity(n_steps + 1);
    let mut phase = Vec::with_capacity(n_steps + 1);
    let mut amplitude_sq = Vec::with_capacity(n_steps + 1);
    let mut slope_samples: Vec<f64> = Vec::with_capacity(n_steps + 1);

    let omega0 = state.branch.omega(0.0, xis[0])?;

    let record = |t: f64,
                      paths: &[PathAccumulator],
                      times: &mut Vec<f64>,
                      positions: &mut Vec<f64>,
                      phase: &mut Vec<f64>,
                      amplitude_sq: &mut Vec<f64>,
                      slope_samples: &mut Vec<f64>|
     -> Result<()> {
        times.push(t);
        positions.push(paths[0].x);
        phase.push(paths[0].phi);
        let dx = paths[2].x - paths[1].x;
        if dx <= 0.0 {
            let lo = times[times.len().saturating_sub(2)];
            return Err(Error::CausticCrossing { lo, hi: t });
        }
        slope_samples.push((paths[2].phi - paths[1].phi) / dx);
        let j = 1.0 - s * g2_0 * paths[0].curvature_integral;
        if j <= 0.0 {
            let lo = times[times.len().saturating_sub(2)];
            return Err(Error::CausticCrossing { lo, hi: t });
        }
        let omega_t = state.branch.omega(t, xis[0])?;
        amplitude_sq.push(omega0 / omega_t / j);
        Ok(())
    };

    record(
        0.0,
        &paths,
        &mut times,
        &mut positions,
        &mut phase,
        &mut amplitude_sq,
        &mut slope_samples,
    )?;

    for step in 0..n_steps {
        let t0 = step as f64 * h;
        let stages = [t0, t0 + 0.5 * h, t0 + h];
        for (i, path) in paths.iter_mut().enumerate() {
            let g1 = state.g.derivative(sigmas[i]);
            let mut vx = 0.0;
            let mut vphi = 0.0;
            let mut vc = 0.0;
            for (k, &ts) in stages.iter().enumerate() {
                let w = if k == 1 { 4.0 } else { 1.0 };
                let gv = state.branch.group_velocity(ts, xis[i])?;
                let om = state.branch.omega(ts, xis[i])?;
                vx += w * s * gv;
                vphi += w * s * (g1 * gv + om);
                if need_curvature && i == 0 {
                    vc += w * state.branch.curvature(ts, xis[i])?;
                }
            }
            path.x += h / 6.0 * vx;
            path.phi += h / 6.0 * vphi;
            if need_curvature && i == 0 {
                path.curvature_integral += h / 6.0 * vc;
            }
        }
        record(
            t0 + h,
            &paths,
            &mut times,
            &mut positions,
            &mut phase,
            &mut amplitude_sq,
            &mut slope_samples,
        )?;
    }

    let slope0 = slope_samples[0];
    let slope_drift = slope_samples
        .iter()
        .fold(0.0f64, |m, v| m.max((v - slope0).abs()));

    Ok(CharacteristicPath {
        sigma0,
        times,
        positions,
        phase,
        phase_slope: g1_0,
        amplitude_sq,
        slope_drift,
    })
}

/// Position of the characteristic launched at sigma, at time t.
fn position_of(state: &PhaseState, sigma: f64, t: f64) -> Result<f64> {
    let xi = state.xi_at(sigma);
    let drift = state.branch.group_velocity_time_integral(t, xi)?;
    Ok(sigma + state.sign.signum() * drift)
}

/// Spreading Jacobian dx/dsigma at time t for the path launched at sigma.
fn jacobian_of(state: &PhaseState, sigma: f64, t: f64) -> Result<f64> {
    let g2 = state.g.second_derivative(sigma);
    if g2 == 0.0 {
        return Ok(1.0);
    }
    let xi = state.xi_at(sigma);
    let c = state.branch.curvature_time_integral(t, xi)?;
    Ok(1.0 - state.sign.signum() * g2 * c)
}

/// Inverts the characteristic map sigma -> x(t; sigma) and evaluates the
/// phase. Returns (phi, phi_x, sigma).
pub fn phase_field(state: &PhaseState, t: f64, x: f64) -> Result<(f64, f64, f64)> {
    if t < 0.0 {
        return Err(Error::InvalidInput("negative time".into()));
    }
    if t == 0.0 {
        return Ok((state.g.value(x), state.g.derivative(x), x));
    }

    let f = |sigma: f64| -> Result<f64> { Ok(position_of(state, sigma, t)? - x) };

    // expand a bracket around the ballistic guess
    let mut lo = x;
    let mut hi = x;
    let mut flo = f(lo)?;
    let mut fhi = flo;
    let mut radius = 0.5 * x.abs().max(1.0);
    let mut expansions = 0;
    while flo * fhi > 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numerical(format!(
                "no characteristic reaches x = {x} at t = {t}"
            )));
        }
        lo -= radius;
        hi += radius;
        radius *= 2.0;
        flo = f(lo)?;
        fhi = f(hi)?;
    }

    // fold detection across the bracket before trusting a unique root
    let probes = 16;
    let mut prev_sigma = lo;
    let mut prev_j = jacobian_of(state, lo, t)?;
    for i in 1..=probes {
        let sg = lo + (hi - lo) * i as f64 / probes as f64;
        let j = jacobian_of(state, sg, t)?;
        if prev_j <= 0.0 || j <= 0.0 || prev_j.signum() != j.signum() {
            return Err(Error::CausticCrossing {
                lo: prev_sigma,
                hi: sg,
            });
        }
        prev_sigma = sg;
        prev_j = j;
    }

    // safeguarded Newton on f with derivative J
    let mut sigma = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fv = f(sigma)?;
        if fv.abs() <= 1e-12 * x.abs().max(1.0) {
            break;
        }
        if fv * flo < 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
            flo = fv;
        }
        let j = jacobian_of(state, sigma, t)?;
        let newton = sigma - fv / j;
        sigma = if j.abs() > 1e-14 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() < 1e-15 * sigma.abs().max(1.0) {
            break;
        }
    }

    let xi = state.xi_at(sigma);
    let g1 = state.g.derivative(sigma);
    let s = state.sign.signum();
    let phi = state.g.value(sigma)
        + s * (g1 * state.branch.group_velocity_time_integral(t, xi)?
            + state.branch.omega_time_integral(t, xi)?);
    Ok((phi, g1, sigma))
}

/// Amplitude u0(x, t) >= 0 transported from the launch profile u0_init.
pub fn amplitude_field<F: Fn(f64) -> f64>(
    state: &PhaseState,
    t: f64,
    x: f64,
    u0_init: F,
) -> Result<f64> {
    let (_, _, sigma) = phase_field(state, t, x)?;
    let init = u0_init(sigma);
    if init < 0.0 {
        return Err(Error::InvalidInput(
            "initial amplitude must be nonnegative".into(),
        ));
    }
    if t == 0.0 {
        return Ok(init);
    }
    let xi = state.xi_at(sigma);
    if !state.branch.is_static() {
        // the transport exponent rewrite divides by the group velocity
        // when the band drifts in time; refuse the regime it cannot
        // certify even though the Lagrangian form stays finite
        let probes = 32;
        for i in 0..=probes {
            let ts = t * i as f64 / probes as f64;
            let gv = state.branch.group_velocity(ts, xi)?;
            if gv.abs() < 1e-10 {
                return Err(Error::DegenerateTransportExponent {
                    t: ts,
                    group_velocity: gv,
                });
            }
        }
    }
    let j = jacobian_of(state, sigma, t)?;
    if j <= 0.0 {
        return Err(Error::CausticCrossing { lo: sigma, hi: sigma });
    }
    let ratio = state.branch.omega(0.0, xi)? / state.branch.omega(t, xi)?;
    Ok((init * init * ratio / j).sqrt())
}

/// Residuals of the two solvability identities behind the transport
/// derivation, recomputed from eigenfunctions at one branch point.
#[derive(Debug, Clone)]
pub struct SolvabilityReport {
    pub xi: f64,
    pub band: usize,
    pub omega: f64,
    /// |Re <U_Omega, U>|; the overlap is purely imaginary.
    pub real_overlap: f64,
    /// Im <U_Omega, U>, the real coupling constant.
    pub g1: f64,
    /// Relative gap between the flux-integral identity for (Omega^2)_xi
    /// and its finite-difference value across the same band.
    pub coupling_residual: f64,
}

/// Recomputes both solvability identities at (branch, xi).
pub fn verify_solvability_constants(
    branch: &BlochBranch,
    xi: f64,
) -> Result<SolvabilityReport> {
    let coeff = branch.coefficient();
    let t = branch.t;
    let m = branch.mode_count();
    let band = branch.branch_index;

    let deriv = cell_spectrum::eigenfunction_omega_derivative(branch, xi, None)?;

    let solve_at = |x: f64| -> Result<(f64, Vec<num_complex::Complex64>)> {
        let pairs = cell_spectrum::solve_bloch_sized(coeff, x, t, band + 1, m)?;
        let p = &pairs[band];
        Ok((p.omega, p.coefficients.clone()))
    };
    let (omega, coeffs) = solve_at(xi)?;

    // flux identity for the squared-eigenvalue derivative
    let op = cell_spectrum::assemble_shifted_operator(coeff, xi, t, m)?;
    let hf = op.omega_squared_derivative(&coeffs);

    // centered finite difference of Omega^2 across the band
    let delta = OMEGA_DERIVATIVE_DELTA;
    let (wp, _) = solve_at(xi + delta)?;
    let (wm, _) = solve_at(xi - delta)?;
    let fd = (wp * wp - wm * wm) / (2.0 * delta);
    let coupling_residual = (hf - fd).abs() / fd.abs().max(1e-12);

    Ok(SolvabilityReport {
        xi,
        band,
        omega,
        real_overlap: deriv.real_overlap.abs(),
        g1: deriv.g1,
        coupling_residual,
    })
}
