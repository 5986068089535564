//! Subcommand drivers. Each resolves its effective configuration (flags
//! overridden by the config file), runs the library pipeline with
//! parallel sweeps where the grids allow it, and emits one artifact
//! directory through a single writer.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use wavetrain::branch::{Dispersion, LimitBranch, NumericBranch, WaveSign};
use wavetrain::cell_spectrum::{self, DEFAULT_MODES};
use wavetrain::diagnostics::{
    energy_between_characteristics, local_fields, transport_residuals, EnergySource,
};
use wavetrain::eikonal::{
    amplitude_field, phase_field, trace_characteristic, verify_solvability_constants,
    InitialPhase, PhaseState,
};
use wavetrain::high_contrast::{
    hc_band_edges, hc_solve_branch, HighContrastMedium, ROOT_RESIDUAL_TOL,
};
use wavetrain::reference::{run_fdtd, Boundary, FineGridState};
use wavetrain::wavepacket::{
    delta_pulse_field, field_quadrature, field_stationary_phase, Envelope, PacketSpec,
};
use wavetrain::CellCoefficient;

use crate::artifact::{num, ArtifactDir, Manifest};
use crate::config::{
    complex_columns, ExperimentConfig, MediumSpec, MethodSpec, ResolvedMedium,
};
use crate::CliError;

const DEFAULT_N_XI: usize = 64;
const DEFAULT_PPC: usize = 32;
const DEFAULT_CFL: f64 = 0.5;

/// Effective numerical knobs with their recorded defaults.
struct Numerics {
    n_xi: usize,
    modes: usize,
    ppc: usize,
    cfl: f64,
}

fn numerics(cfg: &ExperimentConfig) -> Numerics {
    let r = cfg.resolution.clone().unwrap_or_default();
    Numerics {
        n_xi: r.n_xi.unwrap_or(DEFAULT_N_XI),
        modes: r.modes.unwrap_or(DEFAULT_MODES),
        ppc: r.points_per_cell.unwrap_or(DEFAULT_PPC),
        cfl: r.cfl.unwrap_or(DEFAULT_CFL),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + i as f64 * step).collect()
}

fn require<'a, T>(opt: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    opt.as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required parameter: {what}")))
}

fn out_root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| PathBuf::from("artifacts"))
}

/// Half-open index range `lo..hi`.
fn parse_range(text: &str) -> Result<(usize, usize), CliError> {
    let err = || CliError::Usage(format!("band range '{text}' is not of the form lo..hi"));
    let (lo, hi) = text.split_once("..").ok_or_else(err)?;
    let lo: usize = lo.parse().map_err(|_| err())?;
    let hi: usize = hi.parse().map_err(|_| err())?;
    if lo >= hi {
        return Err(CliError::Usage(format!(
            "band range {lo}..{hi} is empty"
        )));
    }
    Ok((lo, hi))
}

/// One dispersion band built from the resolved medium.
enum BuiltBranch {
    Limit(LimitBranch),
    Numeric(NumericBranch),
}

impl BuiltBranch {
    fn as_dispersion(&self) -> &dyn Dispersion {
        match self {
            BuiltBranch::Limit(b) => b,
            BuiltBranch::Numeric(b) => b,
        }
    }
}

fn build_branch(
    medium: &ResolvedMedium,
    band: usize,
    nm: &Numerics,
) -> Result<BuiltBranch, CliError> {
    match medium {
        ResolvedMedium::Limit(m) => Ok(BuiltBranch::Limit(LimitBranch::new(*m, band))),
        ResolvedMedium::Finite(c) => Ok(BuiltBranch::Numeric(NumericBranch::solve(
            c, band, nm.n_xi, nm.modes,
        )?)),
    }
}

fn branch_resolution(
    medium: &ResolvedMedium,
    nm: &Numerics,
) -> BTreeMap<String, serde_json::Value> {
    let mut map = BTreeMap::new();
    if matches!(medium, ResolvedMedium::Finite(_)) {
        map.insert("n_xi".into(), nm.n_xi.into());
        map.insert("modes".into(), nm.modes.into());
    }
    map
}

fn relative_l2_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y).norm_sqr();
        norm += x.norm_sqr();
    }
    (diff / norm.max(1e-300)).sqrt()
}

/// Band intervals and dispersion samples of the infinite-contrast cell.
pub fn bands(
    medium_flag: Option<String>,
    n_flag: Option<String>,
    out_flag: Option<PathBuf>,
    file_cfg: Option<ExperimentConfig>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::empty();
    if let Some(text) = medium_flag {
        cfg.medium = Some(MediumSpec::parse_flag(&text)?);
    }
    cfg.bands = n_flag;
    cfg.output = out_flag;
    let cfg = cfg.merged_under(file_cfg);
    cfg.validate_semantics()?;

    let medium_spec = require(&cfg.medium, "medium (--medium h=<fraction>,a2=<value>)")?;
    let range = require(&cfg.bands, "band range (--n lo..hi)")?;
    let (lo, hi) = parse_range(range)?;
    let ResolvedMedium::Limit(medium) = medium_spec.resolve()? else {
        return Err(CliError::Usage(
            "band intervals are defined for the infinite-contrast medium; pass h and a2 only"
                .into(),
        ));
    };

    let mut interval_rows = Vec::with_capacity(hi - lo);
    for n in lo..hi {
        let (w_lo, w_hi) = hc_band_edges(n, &medium)?;
        interval_rows.push(format!("{n},{},{}", num(w_lo), num(w_hi)));
    }
    // dispersion samples over half the zone; the band is even in kappa.
    // Endpoints stay strictly inside so edge-degenerate eigenfunctions
    // never enter the root bracketing.
    let kappas = linspace(0.02, PI - 0.02, 97);
    let mut dispersion_rows = Vec::with_capacity((hi - lo) * kappas.len());
    for n in lo..hi {
        for &kappa in &kappas {
            let point = hc_solve_branch(n, kappa, &medium)?;
            dispersion_rows.push(format!("{n},{},{}", num(kappa), num(point.omega)));
        }
    }

    let mut dir = ArtifactDir::create(&out_root(&cfg), &format!("bands-{}", cfg.hash()))?;
    dir.write_csv("intervals.csv", "band,omega_lo,omega_hi", &interval_rows)?;
    dir.write_csv("dispersion.csv", "band,kappa,omega", &dispersion_rows)?;
    let mut manifest = Manifest::new("bands", &cfg);
    manifest
        .tolerances
        .insert("band_edge_residual".into(), 1e-10);
    manifest
        .tolerances
        .insert("dispersion_root_residual".into(), ROOT_RESIDUAL_TOL);
    let path = dir.finish(manifest)?;
    println!("bands artifact: {}", path.display());
    Ok(())
}

/// Phase and transported amplitude along characteristics.
pub fn eikonal(out_flag: Option<PathBuf>, file_cfg: Option<ExperimentConfig>) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::empty();
    cfg.output = out_flag;
    let cfg = cfg.merged_under(file_cfg);
    cfg.validate_semantics()?;

    let medium = require(&cfg.medium, "medium")?.resolve()?;
    let band = *require(&cfg.band, "band")?;
    let sign = require(&cfg.sign, "sign")?.to_wave();
    let phase = require(&cfg.initial_phase, "initial_phase")?;
    let time = require(&cfg.time, "time")?;
    let window = require(&cfg.window, "window")?;
    let nm = numerics(&cfg);

    let branch = build_branch(&medium, band, &nm)?;
    let state = PhaseState::new(sign, phase.g.build(), phase.kappa, branch.as_dispersion());
    let amplitude = phase.amplitude.build();
    let xs = window.grid();
    let mut rows = Vec::with_capacity(time.snapshots * xs.len());
    for &t in &time.times() {
        let per_x: Result<Vec<String>, wavetrain::Error> = xs
            .par_iter()
            .map(|&x| {
                let (phi, phi_x, sigma) = phase_field(&state, t, x)?;
                let amp = amplitude_field(&state, t, x, |s| amplitude(s))?;
                Ok(format!(
                    "{},{},{},{},{},{}",
                    num(t),
                    num(x),
                    num(sigma),
                    num(phi),
                    num(phi_x),
                    num(amp)
                ))
            })
            .collect();
        rows.extend(per_x?);
    }

    let mut dir = ArtifactDir::create(&out_root(&cfg), &format!("eikonal-{}", cfg.hash()))?;
    dir.write_csv("eikonal.csv", "t,x,sigma,phi,phi_x,amplitude", &rows)?;
    let mut manifest = Manifest::new("eikonal", &cfg);
    manifest.resolution = branch_resolution(&medium, &nm);
    let path = dir.finish(manifest)?;
    println!("eikonal artifact: {}", path.display());
    Ok(())
}

/// Wave-packet reconstruction by quadrature and stationary phase.
pub fn packet(
    method_flag: Option<String>,
    out_flag: Option<PathBuf>,
    file_cfg: Option<ExperimentConfig>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::empty();
    if let Some(text) = method_flag {
        cfg.method = Some(MethodSpec::parse_flag(&text)?);
    }
    cfg.output = out_flag;
    let cfg = cfg.merged_under(file_cfg);
    cfg.validate_semantics()?;

    let medium = require(&cfg.medium, "medium")?.resolve()?;
    let band = *require(&cfg.band, "band")?;
    let sign = require(&cfg.sign, "sign")?.to_wave();
    let envelope = require(&cfg.envelope, "envelope")?;
    let epsilons = require(&cfg.epsilons, "epsilons")?;
    let time = require(&cfg.time, "time")?;
    let window = require(&cfg.window, "window")?;
    let nm = numerics(&cfg);

    let branch = build_branch(&medium, band, &nm)?;
    let disp = branch.as_dispersion();
    let times = time.times();
    let xs = window.grid();

    let mut snapshot_rows = Vec::new();
    let mut convergence_rows = Vec::new();
    let mut q_rows = Vec::new();
    let method = cfg.method.unwrap_or(MethodSpec::Both);

    if envelope.is_delta() {
        if times.iter().any(|&t| t <= 0.0) {
            return Err(CliError::Usage(
                "delta-pulse evaluation needs strictly positive times; set time.t0 > 0".into(),
            ));
        }
        for &eps in epsilons {
            let spec = PacketSpec::new(envelope.build(), eps, sign, disp)?;
            for &t in &times {
                let field = delta_pulse_field(&spec, t, (window.x0, window.x1), window.points, None)?;
                for (x, v) in field.x_grid.iter().zip(&field.values) {
                    snapshot_rows.push(format!(
                        "delta,{},{},{},{}",
                        num(eps),
                        num(t),
                        num(*x),
                        complex_columns(*v)
                    ));
                }
            }
        }
    } else {
        let want_quad = matches!(method, MethodSpec::Quadrature | MethodSpec::Both);
        let want_sp = matches!(method, MethodSpec::StationaryPhase | MethodSpec::Both);
        if want_sp && times.iter().any(|&t| t <= 0.0) {
            return Err(CliError::Usage(
                "stationary-phase evaluation needs strictly positive times; set time.t0 > 0 or method=quadrature".into(),
            ));
        }
        for &eps in epsilons {
            let spec = PacketSpec::new(envelope.build(), eps, sign, disp)?;
            for &t in &times {
                let quad = if want_quad {
                    Some(field_quadrature(&spec, t, &xs)?)
                } else {
                    None
                };
                let sp = if want_sp {
                    Some(field_stationary_phase(&spec, t, &xs)?)
                } else {
                    None
                };
                for (tag, field) in [("quadrature", &quad), ("stationary_phase", &sp)] {
                    if let Some(f) = field {
                        for (x, v) in f.x_grid.iter().zip(&f.values) {
                            snapshot_rows.push(format!(
                                "{tag},{},{},{},{}",
                                num(eps),
                                num(t),
                                num(*x),
                                complex_columns(*v)
                            ));
                        }
                    }
                }
                if let (Some(qf), Some(sf)) = (&quad, &sp) {
                    let gap = relative_l2_gap(&qf.values, &sf.values);
                    convergence_rows.push(format!("{},{},{}", num(eps), num(t), num(gap)));
                }
            }
            if let Some([k1, k2]) = cfg.q_kappa_window {
                let ts: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
                if !ts.is_empty() {
                    let qs = energy_between_characteristics(
                        &EnergySource::Asymptotic(&spec),
                        k1,
                        k2,
                        &ts,
                    )?;
                    for (t, q) in ts.iter().zip(&qs) {
                        q_rows.push(format!("asymptotic,{},{},{}", num(eps), num(*t), num(*q)));
                    }
                }
            }
        }
    }

    let mut dir = ArtifactDir::create(&out_root(&cfg), &format!("packet-{}", cfg.hash()))?;
    dir.write_csv("snapshots.csv", "method,eps,t,x,re,im,abs", &snapshot_rows)?;
    if !convergence_rows.is_empty() {
        dir.write_csv("convergence.csv", "eps,t,rel_l2_gap", &convergence_rows)?;
    }
    if !q_rows.is_empty() {
        dir.write_csv("q.csv", "source,eps,t,q", &q_rows)?;
    }
    let mut manifest = Manifest::new("packet", &cfg);
    manifest.resolution = branch_resolution(&medium, &nm);
    manifest
        .resolution
        .insert("method".into(), method.name().into());
    let path = dir.finish(manifest)?;
    println!("packet artifact: {}", path.display());
    Ok(())
}

/// Fine-grid simulation of the fast-oscillation field.
pub fn reference(out_flag: Option<PathBuf>, file_cfg: Option<ExperimentConfig>) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::empty();
    cfg.output = out_flag;
    let cfg = cfg.merged_under(file_cfg);
    cfg.validate_semantics()?;

    let medium = require(&cfg.medium, "medium")?.resolve()?;
    let band = *require(&cfg.band, "band")?;
    let sign = require(&cfg.sign, "sign")?.to_wave();
    let envelope = require(&cfg.envelope, "envelope")?;
    let epsilons = require(&cfg.epsilons, "epsilons")?;
    let time = require(&cfg.time, "time")?;
    let window = require(&cfg.window, "window")?;
    let nm = numerics(&cfg);

    let ResolvedMedium::Finite(coeff) = &medium else {
        return Err(CliError::Usage(
            "the reference simulation needs a finite-contrast medium: {a1, a2, h} or {file}"
                .into(),
        ));
    };
    if envelope.is_delta() {
        return Err(CliError::Usage(
            "the reference simulation needs a smooth envelope".into(),
        ));
    }
    let branch = NumericBranch::solve(coeff, band, nm.n_xi, nm.modes)?;
    let times = time.times();

    let mut snapshot_rows = Vec::new();
    let mut energy_rows = Vec::new();
    let mut q_rows = Vec::new();
    for &eps in epsilons {
        let mut state = FineGridState::new(
            coeff,
            eps,
            (window.x0, window.x1),
            nm.ppc,
            nm.cfl,
            Boundary::Sponge,
        )?;
        let spec = PacketSpec::new(envelope.build(), eps, sign, &branch)?;
        state.load_packet(&spec)?;
        let snaps = run_fdtd(&mut state, time.t1, &times)?;
        for snap in &snaps {
            energy_rows.push(format!(
                "{},{},{},{}",
                num(eps),
                num(snap.t),
                num(state.energy_of(&snap.u, &snap.u_t)),
                num(state.energy_centroid(&snap.u, &snap.u_t))
            ));
            for ((x, u), v) in state.x.iter().zip(&snap.u).zip(&snap.u_t) {
                snapshot_rows.push(format!(
                    "{},{},{},{},{}",
                    num(eps),
                    num(snap.t),
                    num(*x),
                    num(*u),
                    num(*v)
                ));
            }
        }
        if let Some([k1, k2]) = cfg.q_kappa_window {
            let ts: Vec<f64> = snaps.iter().map(|s| s.t).filter(|&t| t > 0.0).collect();
            if !ts.is_empty() {
                let qs = energy_between_characteristics(
                    &EnergySource::Fdtd {
                        snapshots: &snaps,
                        x: &state.x,
                        branch: &branch,
                        sign,
                    },
                    k1,
                    k2,
                    &ts,
                )?;
                for (t, q) in ts.iter().zip(&qs) {
                    q_rows.push(format!("fdtd,{},{},{}", num(eps), num(*t), num(*q)));
                }
            }
        }
    }

    let mut dir = ArtifactDir::create(&out_root(&cfg), &format!("reference-{}", cfg.hash()))?;
    dir.write_csv("snapshots.csv", "eps,t,x,u,u_t", &snapshot_rows)?;
    dir.write_csv("energy.csv", "eps,t,energy,centroid", &energy_rows)?;
    if !q_rows.is_empty() {
        dir.write_csv("q.csv", "source,eps,t,q", &q_rows)?;
    }
    let mut manifest = Manifest::new("reference", &cfg);
    manifest.resolution.insert("n_xi".into(), nm.n_xi.into());
    manifest.resolution.insert("modes".into(), nm.modes.into());
    manifest
        .resolution
        .insert("points_per_cell".into(), nm.ppc.into());
    manifest.resolution.insert("cfl".into(), nm.cfl.into());
    manifest
        .resolution
        .insert("boundary".into(), "sponge".into());
    let path = dir.finish(manifest)?;
    println!("reference artifact: {}", path.display());
    Ok(())
}

/// One validation check with its verdict.
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn check(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

type CsvSpec = (&'static str, &'static str, Vec<String>);

/// Solvability-lemma residuals: eigenfunction frequency-derivative
/// orthogonality and the flux identity for the squared-frequency slope,
/// swept over media, bands, and quasimomenta.
fn lemma_suite(
    checks: &mut Vec<Check>,
    csvs: &mut Vec<CsvSpec>,
    tolerances: &mut BTreeMap<String, f64>,
) -> Result<(), CliError> {
    const MODES: usize = 128;
    const ORTHOGONALITY_TOL: f64 = 1e-6;
    const COUPLING_TOL: f64 = 1e-5;
    let media: Vec<(&str, CellCoefficient)> = vec![
        ("contrast4", CellCoefficient::two_phase(4.0, 1.0, 0.3)?),
        ("contrast100", CellCoefficient::two_phase(100.0, 1.0, 0.5)?),
        (
            "threephase",
            CellCoefficient::piecewise(vec![(0.3, 2.25), (0.5, 1.0), (0.2, 6.25)])?,
        ),
    ];
    // quasimomenta clear of the acoustic guard and the zone edges, where
    // frequency-derivative quantities degenerate
    let xis = linspace(-PI + 0.25, PI - 0.25, 16);
    let mut rows = Vec::new();
    for (label, coeff) in &media {
        let branches = cell_spectrum::solve_branches_sized(coeff, 0.0, 4, 8, MODES)?;
        let tasks: Vec<(usize, f64)> = (0..4)
            .flat_map(|band| xis.iter().map(move |&xi| (band, xi)))
            .collect();
        let reports: Result<Vec<_>, wavetrain::Error> = tasks
            .par_iter()
            .map(|&(band, xi)| {
                verify_solvability_constants(&branches[band], xi).map(|r| (band, xi, r))
            })
            .collect();
        let mut worst_overlap = 0.0f64;
        let mut worst_coupling = 0.0f64;
        for (band, xi, report) in reports? {
            worst_overlap = worst_overlap.max(report.real_overlap);
            worst_coupling = worst_coupling.max(report.coupling_residual);
            rows.push(format!(
                "{label},{band},{},{},{}",
                num(xi),
                num(report.real_overlap),
                num(report.coupling_residual)
            ));
        }
        checks.push(check(
            format!("lemmas/{label}/orthogonality"),
            worst_overlap,
            ORTHOGONALITY_TOL,
        ));
        checks.push(check(
            format!("lemmas/{label}/hellmann_feynman"),
            worst_coupling,
            COUPLING_TOL,
        ));
    }
    tolerances.insert("lemmas_orthogonality".into(), ORTHOGONALITY_TOL);
    tolerances.insert("lemmas_hellmann_feynman".into(), COUPLING_TOL);
    csvs.push((
        "lemmas.csv",
        "medium,band,xi,orthogonality_residual,hellmann_feynman_residual",
        rows,
    ));
    Ok(())
}

/// Constant-coefficient exactness: Bloch frequencies of a uniform cell
/// against the closed-form folded dispersion.
fn spectrum_suite(
    checks: &mut Vec<Check>,
    csvs: &mut Vec<CsvSpec>,
    tolerances: &mut BTreeMap<String, f64>,
) -> Result<(), CliError> {
    const TOL: f64 = 1e-10;
    let c = 2.0f64;
    let coeff = CellCoefficient::constant(c * c)?;
    let n_xi = 32;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for j in 0..n_xi {
        let xi = -PI + (j as f64 + 0.5) * 2.0 * PI / n_xi as f64;
        let pairs = cell_spectrum::solve_bloch_sized(&coeff, xi, 0.0, 9, 24)?;
        let mut exact: Vec<f64> = (-4..=4)
            .map(|m| c * (2.0 * PI * m as f64 + xi).abs())
            .collect();
        exact.sort_by(f64::total_cmp);
        for (band, pair) in pairs.iter().enumerate() {
            let rel = (pair.omega - exact[band]).abs() / exact[band];
            worst = worst.max(rel);
            rows.push(format!(
                "{},{band},{},{},{}",
                num(xi),
                num(exact[band]),
                num(pair.omega),
                num(rel)
            ));
        }
    }
    checks.push(check("spectrum/constant_coefficient_exactness", worst, TOL));
    tolerances.insert("spectrum_exactness".into(), TOL);
    csvs.push(("spectrum.csv", "xi,band,omega_exact,omega,rel_error", rows));
    Ok(())
}

/// Ray-transport checks on the infinite-contrast cell: phase-slope
/// constancy along characteristics, conservation-law residuals of the
/// local wave fields, and constancy of the energy between rays.
fn transport_suite(
    seed: u64,
    checks: &mut Vec<Check>,
    csvs: &mut Vec<CsvSpec>,
    tolerances: &mut BTreeMap<String, f64>,
) -> Result<(), CliError> {
    const SLOPE_TOL: f64 = 1e-8;
    const RESIDUAL_TOL: f64 = 1e-4;
    const Q_DRIFT_TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let medium = HighContrastMedium::new(0.5, 1.0)?;

    // the odd band keeps a nonzero group velocity over the probed window
    let branch = LimitBranch::new(medium, 1);
    let curvature_coeff: f64 = rng.gen_range(0.08..0.12);
    let kappa: f64 = rng.gen_range(0.7..1.0);
    let g = InitialPhase::Quadratic {
        coefficient: curvature_coeff,
    };
    let state = PhaseState::new(WaveSign::Plus, g, kappa, &branch);
    let mut character_rows = Vec::new();
    let mut worst_drift = 0.0f64;
    for &sigma0 in &linspace(-1.0, 1.0, 9) {
        let path = trace_characteristic(&state, sigma0, 1.0, 0.02)?;
        worst_drift = worst_drift.max(path.slope_drift);
        character_rows.push(format!("{},{}", num(sigma0), num(path.slope_drift)));
    }
    checks.push(check(
        "transport/phase_slope_constancy",
        worst_drift,
        SLOPE_TOL,
    ));

    let t_grid = linspace(0.9, 1.0, 201);
    let x_grid = linspace(-0.70, -0.55, 121);
    let data = local_fields(
        WaveSign::Plus,
        &InitialPhase::Zero,
        &branch,
        &t_grid,
        &x_grid,
        (0.35, 1.35),
    )?;
    let (r_kappa, r_k) = transport_residuals(&data, &branch)?;
    checks.push(check(
        "transport/quasimomentum_conservation",
        r_kappa,
        RESIDUAL_TOL,
    ));
    checks.push(check("transport/wavenumber_conservation", r_k, RESIDUAL_TOL));

    // energy between rays rides a band whose curvature keeps one sign
    // over the bracketing quasimomenta
    let branch_q = LimitBranch::new(medium, 2);
    let kappa0: f64 = rng.gen_range(0.75..0.85);
    let envelope = Envelope::gaussian(0.0, 0.2, kappa0, 0.25);
    let spec = PacketSpec::new(envelope, 1.0 / 40.0, WaveSign::Plus, &branch_q)?;
    let ts = [0.4, 0.7, 1.0];
    let qs = energy_between_characteristics(&EnergySource::Asymptotic(&spec), 0.5, 1.1, &ts)?;
    let mut q_rows = Vec::new();
    let mut drift = 0.0f64;
    for (t, q) in ts.iter().zip(&qs) {
        drift = drift.max(((q - qs[0]) / qs[0]).abs());
        q_rows.push(format!("{},{}", num(*t), num(*q)));
    }
    checks.push(check("transport/energy_between_rays", drift, Q_DRIFT_TOL));

    tolerances.insert("transport_phase_slope".into(), SLOPE_TOL);
    tolerances.insert("transport_residual".into(), RESIDUAL_TOL);
    tolerances.insert("transport_q_drift".into(), Q_DRIFT_TOL);
    csvs.push((
        "characteristics.csv",
        "sigma0,slope_drift",
        character_rows,
    ));
    csvs.push(("q.csv", "t,q", q_rows));
    Ok(())
}

/// Named validation suites with pass/fail verdicts.
pub fn validate(
    suite_flag: Option<String>,
    seed_flag: Option<u64>,
    out_flag: Option<PathBuf>,
    file_cfg: Option<ExperimentConfig>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::empty();
    cfg.suite = suite_flag;
    cfg.seed = seed_flag;
    cfg.output = out_flag;
    let cfg = cfg.merged_under(file_cfg);
    cfg.validate_semantics()?;

    let suite = require(&cfg.suite, "suite (--suite lemmas|spectrum|transport|all)")?.clone();
    let known = ["lemmas", "spectrum", "transport", "all"];
    if !known.contains(&suite.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown suite '{suite}'; accepted: lemmas, spectrum, transport, all"
        )));
    }
    let seed = cfg.seed.unwrap_or(0);

    let mut checks = Vec::new();
    let mut csvs: Vec<CsvSpec> = Vec::new();
    let mut tolerances = BTreeMap::new();
    if suite == "lemmas" || suite == "all" {
        lemma_suite(&mut checks, &mut csvs, &mut tolerances)?;
    }
    if suite == "spectrum" || suite == "all" {
        spectrum_suite(&mut checks, &mut csvs, &mut tolerances)?;
    }
    if suite == "transport" || suite == "all" {
        transport_suite(seed, &mut checks, &mut csvs, &mut tolerances)?;
    }

    let mut dir = ArtifactDir::create(&out_root(&cfg), &format!("validate-{}", cfg.hash()))?;
    let check_rows: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{}",
                c.name,
                num(c.value),
                num(c.tolerance),
                u8::from(c.pass)
            )
        })
        .collect();
    dir.write_csv("checks.csv", "name,value,tolerance,pass", &check_rows)?;
    for (name, header, rows) in &csvs {
        dir.write_csv(name, header, rows)?;
    }
    let mut manifest = Manifest::new("validate", &cfg);
    manifest.tolerances = tolerances;
    if suite == "transport" || suite == "all" {
        manifest.seed = Some(seed);
    }
    manifest.verdicts = Some(
        checks
            .iter()
            .map(|c| (c.name.clone(), c.pass))
            .collect(),
    );
    let path = dir.finish(manifest)?;

    for c in &checks {
        println!(
            "{}: value {:.3e} tolerance {:.1e} {}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Validation(format!(
            "{failed} of {} checks failed; report at {}",
            checks.len(),
            path.display()
        )));
    }
    println!(
        "validate artifact: {} ({} checks passed)",
        path.display(),
        checks.len()
    );
    Ok(())
}

fn read_artifact_csv(path: &Path, producer: &str) -> Result<(String, Vec<Vec<String>>), CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "{} is missing; produce it with `{producer}`",
            path.display()
        )));
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Usage(format!("{} is empty", path.display())))?
        .to_string();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

/// Plot-ready long-format CSVs derived from an existing artifact.
pub fn plotdata(artifact: &Path) -> Result<(), CliError> {
    let manifest_path = artifact.join("manifest.json");
    if !manifest_path.exists() {
        return Err(CliError::Usage(format!(
            "{} has no manifest.json; produce an artifact first with `wavetrain bands`, `wavetrain packet`, or `wavetrain reference`",
            artifact.display()
        )));
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .map_err(|e| CliError::Usage(format!("manifest {}: {e}", manifest_path.display())))?;
    let command = manifest
        .get("command")
        .and_then(|v| v.as_str())
        .ok_or_else(|| {
            CliError::Usage(format!(
                "manifest {} has no command field",
                manifest_path.display()
            ))
        })?
        .to_string();

    let staging = artifact.join(".plots.partial");
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    let mut written: Vec<&str> = Vec::new();
    let write_fig = |name: &str, header: &str, rows: &[String]| -> Result<(), CliError> {
        let mut text = String::new();
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(staging.join(name), text)?;
        Ok(())
    };

    match command.as_str() {
        "bands" => {
            let (header, rows) = read_artifact_csv(&artifact.join("dispersion.csv"), "wavetrain bands")?;
            let flat: Vec<String> = rows.iter().map(|r| r.join(",")).collect();
            write_fig("fig_band_structure.csv", &header, &flat)?;
            written.push("fig_band_structure.csv");
        }
        "packet" => {
            let (_, rows) = read_artifact_csv(&artifact.join("snapshots.csv"), "wavetrain packet")?;
            let snap: Vec<String> = rows
                .iter()
                .map(|r| format!("{}-eps{},{},{},{}", r[0], r[1], r[2], r[3], r[6]))
                .collect();
            write_fig("fig_packet_snapshots.csv", "series,t,x,value", &snap)?;
            written.push("fig_packet_snapshots.csv");
            let conv_path = artifact.join("convergence.csv");
            if conv_path.exists() {
                let (_, rows) = read_artifact_csv(&conv_path, "wavetrain packet")?;
                let conv: Vec<String> = rows
                    .iter()
                    .map(|r| format!("gap-t{},{},{}", r[1], r[0], r[2]))
                    .collect();
                write_fig("fig_convergence.csv", "series,eps,error", &conv)?;
                written.push("fig_convergence.csv");
            }
            let q_path = artifact.join("q.csv");
            if q_path.exists() {
                let (_, rows) = read_artifact_csv(&q_path, "wavetrain packet")?;
                let q: Vec<String> = rows
                    .iter()
                    .map(|r| format!("{}-eps{},{},{}", r[0], r[1], r[2], r[3]))
                    .collect();
                write_fig("fig_q_of_t.csv", "series,t,q", &q)?;
                written.push("fig_q_of_t.csv");
            }
        }
        "reference" => {
            let (_, rows) =
                read_artifact_csv(&artifact.join("snapshots.csv"), "wavetrain reference")?;
            let snap: Vec<String> = rows
                .iter()
                .map(|r| format!("fdtd-eps{},{},{},{}", r[0], r[1], r[2], r[3]))
                .collect();
            write_fig("fig_packet_snapshots.csv", "series,t,x,value", &snap)?;
            written.push("fig_packet_snapshots.csv");
            let q_path = artifact.join("q.csv");
            if q_path.exists() {
                let (_, rows) = read_artifact_csv(&q_path, "wavetrain reference")?;
                let q: Vec<String> = rows
                    .iter()
                    .map(|r| format!("{}-eps{},{},{}", r[0], r[1], r[2], r[3]))
                    .collect();
                write_fig("fig_q_of_t.csv", "series,t,q", &q)?;
                written.push("fig_q_of_t.csv");
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "artifact kind '{other}' has no plot-data mapping; plotdata consumes bands, packet, or reference artifacts"
            )));
        }
    }

    let plots = artifact.join("plots");
    if plots.exists() {
        fs::remove_dir_all(&plots)?;
    }
    fs::rename(&staging, &plots)?;
    println!("plot data: {} ({} files)", plots.display(), written.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parser_accepts_half_open_forms_only() {
        assert_eq!(parse_range("0..6").unwrap(), (0, 6));
        assert_eq!(parse_range("2..3").unwrap(), (2, 3));
        assert!(parse_range("3..3").is_err());
        assert!(parse_range("5").is_err());
        assert!(parse_range("a..b").is_err());
    }

    #[test]
    fn l2_gap_is_relative_to_the_first_field() {
        let a = vec![Complex64::new(2.0, 0.0); 4];
        let b = vec![Complex64::new(2.0, 0.2); 4];
        let gap = relative_l2_gap(&a, &b);
        assert!((gap - 0.1).abs() < 1e-12);
    }
}
