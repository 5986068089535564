//! Experiment configuration: one JSON document with an explicit schema
//! version and no hidden defaults for physical parameters. Flags build a
//! partial configuration; a `--config` file overrides whatever it sets.
//! The canonical serialization of the effective configuration is hashed
//! to name the artifact directory.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use wavetrain::branch::WaveSign;
use wavetrain::eikonal::InitialPhase;
use wavetrain::high_contrast::HighContrastMedium;
use wavetrain::wavepacket::Envelope;
use wavetrain::CellCoefficient;

use crate::CliError;

/// Config documents this build understands.
pub const SCHEMA_VERSION: u32 = 1;

/// Medium description; exactly one accepted form must be present:
/// {h, a2} for the infinite-contrast cell, {a1, a2, h} for a finite
/// two-phase cell, or {file} for a coefficient JSON document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// A medium ready for solvers.
pub enum ResolvedMedium {
    Limit(HighContrastMedium),
    Finite(CellCoefficient),
}

impl MediumSpec {
    /// Parses the flag form `h=0.5,a2=1`.
    pub fn parse_flag(text: &str) -> Result<MediumSpec, CliError> {
        let mut spec = MediumSpec::default();
        for part in text.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("medium entry '{part}' is not key=value")))?;
            let parse = |v: &str| -> Result<f64, CliError> {
                v.parse()
                    .map_err(|_| CliError::Usage(format!("medium value '{v}' is not a number")))
            };
            match key.trim() {
                "h" => spec.h = Some(parse(value)?),
                "a1" => spec.a1 = Some(parse(value)?),
                "a2" => spec.a2 = Some(parse(value)?),
                "file" => spec.file = Some(PathBuf::from(value)),
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown medium key '{other}'; accepted: h, a1, a2, file"
                    )))
                }
            }
        }
        Ok(spec)
    }

    /// Builds the solver-side medium, reading a coefficient file if named.
    pub fn resolve(&self) -> Result<ResolvedMedium, CliError> {
        match (self.file.as_ref(), self.a1, self.a2, self.h) {
            (Some(path), None, None, None) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("coefficient file {}: {e}", path.display()))
                })?;
                Ok(ResolvedMedium::Finite(CellCoefficient::from_json(&text)?))
            }
            (None, Some(a1), Some(a2), Some(h)) => {
                Ok(ResolvedMedium::Finite(CellCoefficient::two_phase(a1, a2, h)?))
            }
            (None, None, Some(a2), Some(h)) => {
                Ok(ResolvedMedium::Limit(HighContrastMedium::new(h, a2)?))
            }
            _ => Err(CliError::Usage(
                "medium must be {h, a2} (infinite contrast), {a1, a2, h} (two-phase), or {file}".into(),
            )),
        }
    }
}

/// Which phase branch of the two conjugate wave families is propagated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignSpec {
    Plus,
    Minus,
}

impl SignSpec {
    pub fn to_wave(self) -> WaveSign {
        match self {
            SignSpec::Plus => WaveSign::Plus,
            SignSpec::Minus => WaveSign::Minus,
        }
    }
}

/// Initial spectral content of a packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeSpec {
    /// Gaussian in x times Gaussian in kappa.
    Gaussian {
        x0: f64,
        x_width: f64,
        kappa0: f64,
        kappa_width: f64,
    },
    /// Gaussian spatial profile times a spectral delta at kappa_star.
    Delta { kappa_star: f64, x_width: f64 },
}

impl EnvelopeSpec {
    pub fn validate(&self, path: &str) -> Result<(), CliError> {
        let widths = match self {
            EnvelopeSpec::Gaussian {
                x_width,
                kappa_width,
                ..
            } => vec![*x_width, *kappa_width],
            EnvelopeSpec::Delta { x_width, .. } => vec![*x_width],
        };
        for w in widths {
            if !(w > 0.0) || !w.is_finite() {
                return Err(CliError::Usage(format!(
                    "{path}: envelope widths must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Envelope {
        match *self {
            EnvelopeSpec::Gaussian {
                x0,
                x_width,
                kappa0,
                kappa_width,
            } => Envelope::gaussian(x0, x_width, kappa0, kappa_width),
            EnvelopeSpec::Delta { kappa_star, x_width } => Envelope::Delta {
                kappa_star,
                f: Arc::new(move |x: f64| (-(x / x_width).powi(2)).exp()),
            },
        }
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, EnvelopeSpec::Delta { .. })
    }
}

/// Initial phase profile g for eikonal runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseProfileSpec {
    Zero,
    Linear { slope: f64 },
    Quadratic { coefficient: f64 },
}

impl PhaseProfileSpec {
    pub fn build(&self) -> InitialPhase {
        match *self {
            PhaseProfileSpec::Zero => InitialPhase::Zero,
            PhaseProfileSpec::Linear { slope } => InitialPhase::Linear { slope },
            PhaseProfileSpec::Quadratic { coefficient } => InitialPhase::Quadratic { coefficient },
        }
    }
}

/// Launch amplitude profile for eikonal transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeSpec {
    Gaussian { x0: f64, width: f64 },
    Constant { value: f64 },
}

impl AmplitudeSpec {
    pub fn build(&self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        match *self {
            AmplitudeSpec::Gaussian { x0, width } => {
                Arc::new(move |x: f64| (-((x - x0) / width).powi(2)).exp())
            }
            AmplitudeSpec::Constant { value } => Arc::new(move |_| value),
        }
    }
}

/// Eikonal initial data: packet quasimomentum, slow phase, launch amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPhaseSpec {
    pub kappa: f64,
    pub g: PhaseProfileSpec,
    pub amplitude: AmplitudeSpec,
}

/// Uniform snapshot times t0..t1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub snapshots: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        if self.snapshots == 1 {
            return vec![self.t1];
        }
        let dt = (self.t1 - self.t0) / (self.snapshots - 1) as f64;
        (0..self.snapshots).map(|i| self.t0 + i as f64 * dt).collect()
    }
}

/// Uniform spatial evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub x0: f64,
    pub x1: f64,
    pub points: usize,
}

impl WindowSpec {
    pub fn grid(&self) -> Vec<f64> {
        let dx = (self.x1 - self.x0) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.x0 + i as f64 * dx).collect()
    }
}

/// Numerical resolution knobs; all have recorded defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_xi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points_per_cell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
}

/// Field reconstruction method selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Quadrature,
    StationaryPhase,
    Both,
}

impl MethodSpec {
    pub fn parse_flag(text: &str) -> Result<MethodSpec, CliError> {
        match text {
            "quadrature" => Ok(MethodSpec::Quadrature),
            "stationary_phase" => Ok(MethodSpec::StationaryPhase),
            "both" => Ok(MethodSpec::Both),
            other => Err(CliError::Usage(format!(
                "unknown method '{other}'; accepted: quadrature, stationary_phase, both"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Quadrature => "quadrature",
            MethodSpec::StationaryPhase => "stationary_phase",
            MethodSpec::Both => "both",
        }
    }
}

/// One experiment: physical parameters are always explicit, never
/// defaulted. The output directory deserializes but is excluded from the
/// canonical serialization, so relocating artifacts keeps their identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub medium: Option<MediumSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<SignSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_phase: Option<InitialPhaseSpec>,
    /// Endpoint quasimomenta of the energy observable Q(t).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_kappa_window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A configuration with nothing set; flags fill it in.
    pub fn empty() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            medium: None,
            band: None,
            sign: None,
            envelope: None,
            epsilons: None,
            time: None,
            window: None,
            initial_phase: None,
            q_kappa_window: None,
            method: None,
            resolution: None,
            bands: None,
            suite: None,
            seed: None,
            output: None,
        }
    }

    /// Reads and validates a config file; parse diagnostics carry the
    /// file, line, and offending field.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Err(CliError::Usage(format!(
                "config {} is empty; a schema_version field is required",
                path.display()
            )));
        }
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.validate_semantics()?;
        Ok(cfg)
    }

    /// Field-level checks beyond the schema shape.
    pub fn validate_semantics(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "schema_version {} is not supported; this build reads version {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if let Some(eps) = &self.epsilons {
            if eps.is_empty() {
                return Err(CliError::Usage("epsilons: list is empty".into()));
            }
            for &e in eps {
                if !(e > 0.0) || !e.is_finite() {
                    return Err(CliError::Usage(format!(
                        "epsilons: {e} is not a positive finite scale"
                    )));
                }
            }
            let mut sorted = eps.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::Usage("epsilons: values must be distinct".into()));
            }
        }
        if let Some(t) = &self.time {
            if !(t.t1 > t.t0) || t.t0 < 0.0 || t.snapshots == 0 {
                return Err(CliError::Usage(format!(
                    "time: need 0 <= t0 < t1 and snapshots >= 1, got t0={}, t1={}, snapshots={}",
                    t.t0, t.t1, t.snapshots
                )));
            }
        }
        if let Some(w) = &self.window {
            if !(w.x1 > w.x0) || w.points < 2 {
                return Err(CliError::Usage(format!(
                    "window: need x0 < x1 and points >= 2, got x0={}, x1={}, points={}",
                    w.x0, w.x1, w.points
                )));
            }
        }
        if let Some(env) = &self.envelope {
            env.validate("envelope")?;
        }
        if let Some([k1, k2]) = self.q_kappa_window {
            if !(k1 < k2) {
                return Err(CliError::Usage(format!(
                    "q_kappa_window: need kappa1 < kappa2, got [{k1}, {k2}]"
                )));
            }
        }
        if let Some(m) = &self.medium {
            if let Some(file) = &m.file {
                if !file.exists() {
                    return Err(CliError::Usage(format!(
                        "medium.file {} does not exist",
                        file.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Overrides every field the file configuration sets.
    pub fn merged_under(mut self, file: Option<ExperimentConfig>) -> ExperimentConfig {
        let Some(f) = file else { return self };
        self.schema_version = f.schema_version;
        macro_rules! take {
            ($field:ident) => {
                if f.$field.is_some() {
                    self.$field = f.$field;
                }
            };
        }
        take!(medium);
        take!(band);
        take!(sign);
        take!(envelope);
        take!(epsilons);
        take!(time);
        take!(window);
        take!(initial_phase);
        take!(q_kappa_window);
        take!(method);
        take!(resolution);
        take!(bands);
        take!(suite);
        take!(seed);
        take!(output);
        self
    }

    /// Canonical serialization; field order is fixed by the struct.
    pub fn canonical(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialization cannot fail")
    }

    /// Hex digest prefix naming the artifact directory.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.canonical()).expect("canonical json");
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Complex field value formatted for CSV output.
pub fn complex_columns(v: Complex64) -> String {
    format!(
        "{},{},{}",
        crate::artifact::num(v.re),
        crate::artifact::num(v.im),
        crate::artifact::num(v.norm())
    )
}
