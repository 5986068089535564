//! Leading-order wave-packet reconstruction.
//!
//! The solution is a quasimomentum superposition over one band: each kappa
//! contributes a Bloch wave carried at the group velocity with an
//! oscillatory phase (kappa x -+ int Omega)/epsilon. Three evaluators:
//! direct panel quadrature of the kappa-integral (the oracle), its
//! stationary-phase asymptotics (sum over kappa-hat solving
//! +-int Omega_kappa = x), and the delta-pulse specialization where the
//! spectral envelope collapses to a single kappa-star.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::branch::{Dispersion, WaveSign};
use crate::error::{Error, Result};
use crate::quadrature::gauss_kronrod_complex;

/// Smooth spectral-envelope factor or pulse profile.
pub type EnvelopeFn2 = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;
pub type EnvelopeFn1 = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial spectral content of the packet.
#[derive(Clone)]
pub enum Envelope {
    /// General smooth u-tilde(x, kappa), compactly supported in x.
    Smooth(EnvelopeFn2),
    /// u-tilde(x, kappa) = space(x) * spectrum(kappa); the factored form
    /// unlocks fast prepared-initial-data assembly.
    Separable {
        space: EnvelopeFn1,
        spectrum: EnvelopeFn1,
    },
    /// f(x) delta(kappa - kappa_star).
    Delta { kappa_star: f64, f: ProfileFn },
}

impl Envelope {
    /// Evaluates the smooth forms; None for delta envelopes.
    pub fn smooth_eval(&self, x: f64, kappa: f64) -> Option<Complex64> {
        match self {
            Envelope::Smooth(f) => Some(f(x, kappa)),
            Envelope::Separable { space, spectrum } => Some(space(x) * spectrum(kappa)),
            Envelope::Delta { .. } => None,
        }
    }

    /// Gaussian-in-x times Gaussian-in-kappa envelope.
    pub fn gaussian(x0: f64, x_width: f64, kappa0: f64, kappa_width: f64) -> Envelope {
        let space: EnvelopeFn1 = Arc::new(move |x: f64| {
            Complex64::new((-((x - x0) / x_width).powi(2)).exp(), 0.0)
        });
        let spectrum: EnvelopeFn1 = Arc::new(move |k: f64| {
            Complex64::new((-((k - kappa0) / kappa_width).powi(2)).exp(), 0.0)
        });
        Envelope::Separable { space, spectrum }
    }
}

/// One packet: envelope, scale, phase-branch sign, and the band.
pub struct PacketSpec<'a> {
    pub envelope: Envelope,
    pub epsilon: f64,
    pub sign: WaveSign,
    pub branch: &'a dyn Dispersion,
}

impl<'a> PacketSpec<'a> {
    pub fn new(
        envelope: Envelope,
        epsilon: f64,
        sign: WaveSign,
        branch: &'a dyn Dispersion,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        Ok(PacketSpec {
            envelope,
            epsilon,
            sign,
            branch,
        })
    }
}

/// A root of the stationary-phase condition with its nondegeneracy data.
#[derive(Debug, Clone)]
pub struct StationaryPoint {
    pub kappa: f64,
    /// int_0^t Omega_kappakappa ds at the root.
    pub curvature_integral: f64,
    /// |curvature_integral| < 1e-6: the Fresnel factor is unreliable.
    pub degenerate: bool,
}

/// How a reconstructed field was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    StationaryPhase,
    Quadrature,
}

/// Sampled leading-order field with per-point stationary-point records.
pub struct ReconstructedField {
    pub x_grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub stationary: Vec<Vec<StationaryPoint>>,
    /// True where no stationary point exists: the field is asymptotically
    /// smaller than any power of epsilon and recorded as zero.
    pub negligible: Vec<bool>,
    pub method: MethodTag,
}

const SCAN_POINTS: usize = 1024;
const DEGENERACY_TOL: f64 = 1e-6;

/// All kappa-hat in the zone solving +-int_0^t Omega_kappa ds = x, by
/// sign scan and bisection; clusters collapsing to the scan resolution
/// are merged. An empty list is a valid answer.
pub fn stationary_points(
    x: f64,
    t: f64,
    branch: &dyn Dispersion,
    sign: WaveSign,
) -> Result<Vec<StationaryPoint>> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("stationary points need t > 0".into()));
    }
    let s = sign.signum();
    let dk = 2.0 * PI / SCAN_POINTS as f64;
    let f = |kappa: f64| -> Option<f64> {
        match branch.group_velocity_time_integral(t, kappa) {
            Ok(v) => Some(s * v - x),
            Err(_) => None,
        }
    };

    let mut roots: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..SCAN_POINTS {
        let kappa = -PI + i as f64 * dk;
        let value = f(kappa);
        if let (Some((k0, f0)), Some(f1)) = (prev, value) {
            if f0 == 0.0 {
                roots.push(k0);
            } else if f0 * f1 < 0.0 {
                // bisection; the scan guarantees a bracket
                let (mut lo, mut hi, mut flo) = (k0, kappa, f0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = match f(mid) {
                        Some(v) => v,
                        None => break,
                    };
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if flo * fm < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        if let Some(v) = value {
            prev = Some((kappa, v));
        } else {
            prev = None;
        }
    }
    // a plateau of exact zeros would register every node: merge clusters
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::new();
    for r in roots {
        match merged.last() {
            Some(&last) if (r - last).abs() < 1.5 * dk => {
                let n = merged.len();
                merged[n - 1] = 0.5 * (last + r);
            }
            _ => merged.push(r),
        }
    }

    let mut points = Vec::with_capacity(merged.len());
    for kappa in merged {
        let curvature_integral = branch.curvature_time_integral(t, kappa)?;
        points.push(StationaryPoint {
            kappa,
            curvature_integral,
            degenerate: curvature_integral.abs() < DEGENERACY_TOL,
        });
    }
    Ok(points)
}

/// The common per-kappa integrand factor: envelope at the transported
/// argument, Omega-ratio amplitude, Bloch eigenfunction, carrier phase.
fn integrand(
    spec: &PacketSpec,
    x: f64,
    t: f64,
    kappa: f64,
) -> Result<Complex64> {
    let branch = spec.branch;
    let s = spec.sign.signum();
    let shift = x - s * branch.group_velocity_time_integral(t, kappa)?;
    let envelope = spec
        .envelope
        .smooth_eval(shift, kappa)
        .ok_or_else(|| Error::InvalidInput("smooth envelope required".into()))?;
    let ratio = (branch.omega(0.0, kappa)? / branch.omega(t, kappa)?).sqrt();
    let y = (x / spec.epsilon).rem_euclid(1.0);
    let cell = branch.eigenfunction(t, kappa, y)?;
    let phase = (kappa * x - s * branch.omega_time_integral(t, kappa)?) / spec.epsilon;
    Ok(envelope * ratio * cell * Complex64::new(0.0, phase).exp())
}

/// Direct panel quadrature of the kappa-integral over the zone, with the
/// panel count tied to the carrier oscillation rate. Returns the value
/// and the quadrature error estimate.
pub fn reconstruct_quadrature_with_error(
    spec: &PacketSpec,
    x: f64,
    t: f64,
) -> Result<(Complex64, f64)> {
    if t < 0.0 {
        return Err(Error::InvalidInput("negative time".into()));
    }
    if matches!(spec.envelope, Envelope::Delta { .. }) {
        return Err(Error::InvalidInput(
            "quadrature reconstruction needs a smooth envelope".into(),
        ));
    }
    let panels = ((40.0 / spec.epsilon).ceil() as usize).max(64);
    let mut failure: Option<Error> = None;
    let (value, err) = gauss_kronrod_complex(
        |kappa| match integrand(spec, x, t, kappa) {
            Ok(v) => v,
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
                Complex64::new(0.0, 0.0)
            }
        },
        -PI,
        PI,
        panels,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok((value, err)),
    }
}

/// Quadrature reconstruction at one point.
pub fn reconstruct_quadrature(spec: &PacketSpec, x: f64, t: f64) -> Result<Complex64> {
    Ok(reconstruct_quadrature_with_error(spec, x, t)?.0)
}

/// Stationary-phase reconstruction at one point: the sum over kappa-hat
/// with the standard Fresnel normalization sqrt(2 pi eps / |Phi''|) and
/// phase e^{i pi/4 sgn Phi''}, Phi'' = -+ int Omega_kappakappa.
pub fn reconstruct_stationary_phase(spec: &PacketSpec, x: f64, t: f64) -> Result<Complex64> {
    let points = stationary_points(x, t, spec.branch, spec.sign)?;
    reconstruct_from_points(spec, x, t, &points)
}

fn reconstruct_from_points(
    spec: &PacketSpec,
    x: f64,
    t: f64,
    points: &[StationaryPoint],
) -> Result<Complex64> {
    if matches!(spec.envelope, Envelope::Delta { .. }) {
        return Err(Error::InvalidInput(
            "delta envelopes use the delta-pulse evaluator".into(),
        ));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let s = spec.sign.signum();
    for p in points {
        if p.degenerate {
            return Err(Error::AiryRegime { kappa: p.kappa });
        }
        let amp = integrand(spec, x, t, p.kappa)?;
        let phase_second = -s * p.curvature_integral;
        let fresnel = (2.0 * PI * spec.epsilon / p.curvature_integral.abs()).sqrt();
        let corner = Complex64::new(0.0, 0.25 * PI * phase_second.signum()).exp();
        sum += amp * fresnel * corner;
    }
    Ok(sum)
}

/// Stationary-phase field on a grid; points with no kappa-hat are zero
/// and flagged negligible.
pub fn field_stationary_phase(
    spec: &PacketSpec,
    t: f64,
    x_grid: &[f64],
) -> Result<ReconstructedField> {
    let rows: Result<Vec<(Complex64, Vec<StationaryPoint>, bool)>> = x_grid
        .par_iter()
        .map(|&x| {
            let points = stationary_points(x, t, spec.branch, spec.sign)?;
            if points.is_empty() {
                return Ok((Complex64::new(0.0, 0.0), points, true));
            }
            let value = reconstruct_from_points(spec, x, t, &points)?;
            Ok((value, points, false))
        })
        .collect();
    let rows = rows?;
    Ok(ReconstructedField {
        x_grid: x_grid.to_vec(),
        values: rows.iter().map(|r| r.0).collect(),
        stationary: rows.iter().map(|r| r.1.clone()).collect(),
        negligible: rows.iter().map(|r| r.2).collect(),
        method: MethodTag::StationaryPhase,
    })
}

/// Quadrature field on a grid.
pub fn field_quadrature(spec: &PacketSpec, t: f64, x_grid: &[f64]) -> Result<ReconstructedField> {
    let values: Result<Vec<Complex64>> = x_grid
        .par_iter()
        .map(|&x| reconstruct_quadrature(spec, x, t))
        .collect();
    let values = values?;
    Ok(ReconstructedField {
        x_grid: x_grid.to_vec(),
        values,
        stationary: vec![Vec::new(); x_grid.len()],
        negligible: vec![false; x_grid.len()],
        method: MethodTag::Quadrature,
    })
}

/// Mollified delta-pulse field value at one point: the explicit
/// stationary-phase formula for a spectral delta at kappa_star, with the
/// Dirac factor replaced by a unit-mass Gaussian of the given width
/// (default 4 epsilon).
pub fn delta_pulse_value(
    spec: &PacketSpec,
    t: f64,
    x: f64,
    width: Option<f64>,
) -> Result<Complex64> {
    let (kappa_star, f) = match &spec.envelope {
        Envelope::Delta { kappa_star, f } => (*kappa_star, f.clone()),
        _ => {
            return Err(Error::InvalidInput(
                "delta-pulse evaluation needs a delta envelope".into(),
            ))
        }
    };
    if !(t > 0.0) {
        return Err(Error::InvalidInput("delta pulse needs t > 0".into()));
    }
    let w = width.unwrap_or(4.0 * spec.epsilon);
    if !(w > 0.0) {
        return Err(Error::Window("mollification width must be positive".into()));
    }
    let branch = spec.branch;
    let s = spec.sign.signum();
    let curv_int = branch.curvature_time_integral(t, kappa_star)?;
    if curv_int.abs() < 1e-8 * t {
        return Err(Error::DegenerateStationaryPhase {
            kappa: kappa_star,
            second: curv_int / t,
            threshold: 1e-8,
        });
    }
    let center = s * branch.group_velocity_time_integral(t, kappa_star)?;
    let z = x - center;
    let mollifier = (-(z * z) / (2.0 * w * w)).exp() / (w * (2.0 * PI).sqrt());
    let y = (x / spec.epsilon).rem_euclid(1.0);
    let cell = branch.eigenfunction(t, kappa_star, y)?;
    let phase =
        (kappa_star * x - s * branch.omega_time_integral(t, kappa_star)?) / spec.epsilon;
    let corner = -s * 0.25 * PI * curv_int.signum();
    let value = f(0.0) / curv_int.abs().sqrt()
        * mollifier
        * cell
        * Complex64::new(0.0, phase + corner).exp();
    Ok(value)
}

/// Samples the delta-pulse field on a uniform window.
pub fn delta_pulse_field(
    spec: &PacketSpec,
    t: f64,
    x_window: (f64, f64),
    n_points: usize,
    width: Option<f64>,
) -> Result<ReconstructedField> {
    if n_points < 2 || !(x_window.1 > x_window.0) {
        return Err(Error::Window(format!(
            "invalid sampling window [{}, {}] with {} points",
            x_window.0, x_window.1, n_points
        )));
    }
    let dx = (x_window.1 - x_window.0) / (n_points - 1) as f64;
    let x_grid: Vec<f64> = (0..n_points).map(|i| x_window.0 + i as f64 * dx).collect();
    let values: Result<Vec<Complex64>> = x_grid
        .par_iter()
        .map(|&x| delta_pulse_value(spec, t, x, width))
        .collect();
    let values = values?;
    let kappa_star = match &spec.envelope {
        Envelope::Delta { kappa_star, .. } => *kappa_star,
        _ => unreachable!(),
    };
    let curv_int = spec.branch.curvature_time_integral(t, kappa_star)?;
    let point = StationaryPoint {
        kappa: kappa_star,
        curvature_integral: curv_int,
        degenerate: false,
    };
    Ok(ReconstructedField {
        stationary: vec![vec![point]; x_grid.len()],
        negligible: vec![false; x_grid.len()],
        x_grid,
        values,
        method: MethodTag::StationaryPhase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::LimitBranch;
    use crate::coefficient::CellCoefficient;
    use crate::high_contrast::{
        hc_band_asymptotics, hc_eigenfunction_extrema, hc_pulse_amplitudes, hc_solve_branch,
        HighContrastMedium,
    };
    use approx::assert_relative_eq;

    fn hc_branch(n: usize) -> LimitBranch {
        LimitBranch::new(HighContrastMedium::new(0.5, 1.0).unwrap(), n)
    }

    #[test]
    fn zero_envelope_reconstructs_to_zero() {
        let lb = hc_branch(2);
        let zero: EnvelopeFn2 = Arc::new(|_, _| Complex64::new(0.0, 0.0));
        let spec =
            PacketSpec::new(Envelope::Smooth(zero), 1.0 / 20.0, WaveSign::Plus, &lb).unwrap();
        let v = reconstruct_quadrature(&spec, 0.3, 0.5).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn second_band_carries_two_stationary_points_inside_the_fan() {
        let lb = hc_branch(2);
        let t = 1.0;
        // max group speed on band 2 is near (2/pi) sin kappa's scale
        let points = stationary_points(0.3, t, &lb, WaveSign::Plus).unwrap();
        assert_eq!(points.len(), 2, "{points:?}");
        for p in &points {
            assert!(p.kappa > 0.0 && p.kappa < PI, "{points:?}");
            assert!(!p.degenerate);
        }
        // outrun the fan: no stationary point survives
        let empty = stationary_points(3.0, t, &lb, WaveSign::Plus).unwrap();
        assert!(empty.is_empty(), "{empty:?}");
    }

    #[test]
    fn outside_the_fan_the_field_is_flagged_negligible() {
        let lb = hc_branch(2);
        let spec = PacketSpec::new(
            Envelope::gaussian(0.0, 1.0, 1.3, 0.4),
            1.0 / 40.0,
            WaveSign::Plus,
            &lb,
        )
        .unwrap();
        let field = field_stationary_phase(&spec, 1.0, &[3.0, 4.0]).unwrap();
        assert!(field.negligible.iter().all(|&b| b));
        assert!(field.values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(field.method, MethodTag::StationaryPhase);
    }

    #[test]
    fn linear_dispersion_is_rejected_as_airy_degenerate() {
        // constant medium, first band: Omega'' = 0, the Fresnel factor
        // has no meaning
        let coeff = CellCoefficient::constant(4.0).unwrap();
        let nb = crate::branch::NumericBranch::solve(&coeff, 0, 128, 64).unwrap();
        let spec = PacketSpec::new(
            Envelope::gaussian(0.0, 1.0, 1.0, 0.5),
            1.0 / 20.0,
            WaveSign::Plus,
            &nb,
        )
        .unwrap();
        let t = 0.5;
        let err = reconstruct_stationary_phase(&spec, 2.0 * t, t).unwrap_err();
        assert!(matches!(err, Error::AiryRegime { .. }), "{err:?}");
    }

    #[test]
    fn symmetrized_reconstruction_is_real() {
        // real even spectrum, real space factor: the +/- pair is a
        // conjugate pair, so the symmetrized field is real
        let lb = hc_branch(1);
        let envelope = Envelope::gaussian(0.0, 1.5, 0.0, 1.0);
        let eps = 1.0 / 20.0;
        let plus = PacketSpec::new(envelope.clone(), eps, WaveSign::Plus, &lb).unwrap();
        let minus = PacketSpec::new(envelope, eps, WaveSign::Minus, &lb).unwrap();
        let t = 0.4;
        for &x in &[0.0, 0.12, 0.5, 1.1] {
            let up = reconstruct_quadrature(&plus, x, t).unwrap();
            let um = reconstruct_quadrature(&minus, x, t).unwrap();
            let sym = 0.5 * (up + um);
            assert!(
                sym.im.abs() <= 1e-6 * sym.norm().max(1e-12),
                "x={x}: {sym}"
            );
        }
    }

    #[test]
    fn stationary_phase_tracks_the_quadrature_oracle() {
        // the asymptotics need the Fresnel width sqrt(eps / |Phi''|) well
        // inside the spectral envelope width; here 0.16 vs 0.8
        let lb = hc_branch(2);
        let eps = 1.0 / 80.0;
        let envelope = Envelope::gaussian(0.0, 1.0, 0.8, 0.8);
        let spec = PacketSpec::new(envelope, eps, WaveSign::Plus, &lb).unwrap();
        let t = 1.0;
        let x_grid: Vec<f64> = (0..24).map(|i| 0.15 + 0.30 * (i as f64 / 23.0)).collect();
        let sp = field_stationary_phase(&spec, t, &x_grid).unwrap();
        let qd = field_quadrature(&spec, t, &x_grid).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in sp.values.iter().zip(&qd.values) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.15, "relative L2 gap {rel}");
    }

    #[test]
    fn delta_pulse_centers_on_the_group_ray_and_decays_as_sqrt_t() {
        let lb = hc_branch(2);
        let kappa_star = 1.1;
        let f: ProfileFn = Arc::new(|_| 1.0);
        let eps = 1.0 / 40.0;
        let spec = PacketSpec::new(
            Envelope::Delta {
                kappa_star,
                f: f.clone(),
            },
            eps,
            WaveSign::Plus,
            &lb,
        )
        .unwrap();
        let gv = lb.group_velocity(0.0, kappa_star).unwrap();

        // the envelope of |u| peaks within a mollification width of the
        // predicted center
        let t = 1.0;
        let w = 4.0 * eps;
        let field = delta_pulse_field(&spec, t, (gv - 0.5, gv + 0.5), 2001, None).unwrap();
        let (mut best_x, mut best) = (0.0, 0.0);
        for (x, v) in field.x_grid.iter().zip(&field.values) {
            if v.norm() > best {
                best = v.norm();
                best_x = *x;
            }
        }
        assert!((best_x - gv * t).abs() <= w, "peak at {best_x}, ray {}", gv * t);

        // after dividing out the cell eigenfunction the center value
        // scales exactly as t^{-1/2}
        let value_at_center = |tt: f64| -> f64 {
            let xc = gv * tt;
            let v = delta_pulse_value(&spec, tt, xc, None).unwrap();
            let y = (xc / eps).rem_euclid(1.0);
            let cell = lb.eigenfunction(tt, kappa_star, y).unwrap();
            v.norm() / cell.norm()
        };
        let ratio = value_at_center(4.0) / value_at_center(1.0);
        assert_relative_eq!(ratio, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn delta_pulse_rejects_flat_dispersion() {
        let coeff = CellCoefficient::constant(1.0).unwrap();
        let nb = crate::branch::NumericBranch::solve(&coeff, 0, 128, 64).unwrap();
        let f: ProfileFn = Arc::new(|_| 1.0);
        let spec = PacketSpec::new(
            Envelope::Delta {
                kappa_star: 1.0,
                f,
            },
            1.0 / 40.0,
            WaveSign::Plus,
            &nb,
        )
        .unwrap();
        let err = delta_pulse_value(&spec, 1.0, 1.0, None).unwrap_err();
        assert!(
            matches!(err, Error::DegenerateStationaryPhase { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn delta_pulse_stiff_and_soft_amplitudes_match_the_eigenfunction_extrema() {
        // two routes to the same pulse amplitudes: sample the field and
        // divide out the mollifier, or use the closed-form eigenfunction
        // extrema with the exact curvature
        let medium = HighContrastMedium::new(0.5, 1.0).unwrap();
        let n = 2;
        let lb = LimitBranch::new(medium, n);
        let kappa_star = 1.0;
        let t = 1.0;
        let eps = 1.0 / 40.0;
        let f: ProfileFn = Arc::new(|_| 1.0);
        let spec = PacketSpec::new(
            Envelope::Delta {
                kappa_star,
                f,
            },
            eps,
            WaveSign::Plus,
            &lb,
        )
        .unwrap();

        let gv = lb.group_velocity(0.0, kappa_star).unwrap();
        let curv = lb.curvature(0.0, kappa_star).unwrap();
        let center = gv * t;
        let w = 4.0 * eps;

        // sample one full cell adjacent to the pulse center, mollifier
        // divided out exactly
        let cell_index = (center / eps).ceil();
        let sample = |y: f64| -> f64 {
            let x = eps * (cell_index + y);
            let v = delta_pulse_value(&spec, t, x, None).unwrap();
            let z = x - center;
            let mollifier = (-(z * z) / (2.0 * w * w)).exp() / (w * (2.0 * PI).sqrt());
            v.norm() / mollifier
        };
        let ny = 8192;
        let h = medium.h;
        let mut stiff_max = 0.0f64;
        let (mut soft_max, mut soft_arg) = (0.0f64, h);
        for i in 0..ny {
            let y = (i as f64 + 0.5) / ny as f64;
            let v = sample(y);
            if y <= h {
                stiff_max = stiff_max.max(v);
            } else if v > soft_max {
                soft_max = v;
                soft_arg = y;
            }
        }
        // parabolic refinement of the soft maximum
        let dy = 1.0 / ny as f64;
        let (vm, v0, vp) = (
            sample(soft_arg - dy),
            sample(soft_arg),
            sample(soft_arg + dy),
        );
        let denom = vm - 2.0 * v0 + vp;
        if denom < 0.0 {
            let shift = 0.5 * (vm - vp) / denom;
            soft_max = sample(soft_arg + shift * dy).max(v0);
        }

        let point = hc_solve_branch(n, kappa_star, &medium).unwrap();
        let (stiff_ex, soft_ex) = hc_eigenfunction_extrema(&point, &medium).unwrap();
        let scale = 1.0 / (t * curv.abs()).sqrt();
        assert_relative_eq!(stiff_max, scale * stiff_ex, max_relative = 1e-6);
        assert_relative_eq!(soft_max, scale * soft_ex, max_relative = 1e-6);

        // third route through the closed pulse forms: their soft prefactor
        // absorbs a factor sqrt(1-h) relative to the normalized
        // eigenfunction, and their stiff amplitude carries the asymptotic
        // sine factor instead of sin(beta Omega) at the exact root
        let amp = hc_pulse_amplitudes(n, kappa_star, &medium, t, 1.0).unwrap();
        let asym = hc_band_asymptotics(n, kappa_star, &medium).unwrap();
        let sine_exact = (point.omega * medium.soft_length() / medium.a2.sqrt()).sin();
        let reconciled =
            amp.ratio * medium.soft_length().sqrt() * (sine_exact / asym.sine_factor);
        assert_relative_eq!(stiff_max / soft_max, reconciled, max_relative = 1e-5);
    }
}
