//! Unit-cell material coefficients a(y, t), 1-periodic in the fast variable.
//!
//! Two profiles are supported: exact piecewise-constant segments and uniform
//! samples (interpreted as piecewise-constant on sample cells, so both reduce
//! to one canonical segment form). Optional time dependence is a list of
//! stamped value rows over the fixed geometry, interpolated linearly in t.
//! All spectral assembly downstream needs Fourier coefficients of 1/a, which
//! are evaluated in closed form per segment; no quadrature is involved.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Spatial shape of the coefficient at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientProfile {
    /// `(length, value)` runs covering the unit cell in order from y = 0.
    Piecewise { segments: Vec<(f64, f64)> },
    /// Uniform samples on [0, 1), one constant value per sample cell.
    Sampled { samples: Vec<f64> },
}

/// Stamped value rows for a time-dependent coefficient. The geometry
/// (segment lengths or sample count) is fixed by the base profile; only the
/// values move. Rows are interpolated linearly in t and clamped beyond the
/// last stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDependence {
    /// Strictly increasing stamp times starting at 0.
    pub times: Vec<f64>,
    /// One value row per stamp; row length matches the base profile.
    pub values: Vec<Vec<f64>>,
}

/// A validated, possibly time-dependent cell coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCoefficient {
    #[serde(flatten)]
    profile: CoefficientProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_dependence: Option<TimeDependence>,
}

impl CellCoefficient {
    /// Builds a static piecewise-constant coefficient from `(length, value)`
    /// runs. Lengths must be positive and sum to 1; values must be positive.
    pub fn piecewise(segments: Vec<(f64, f64)>) -> Result<Self> {
        let c = CellCoefficient {
            profile: CoefficientProfile::Piecewise { segments },
            time_dependence: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Builds the canonical two-phase cell: value `a1` on (0, h], `a2` on
    /// (h, 1).
    pub fn two_phase(a1: f64, a2: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidInput(format!(
                "phase fraction h = {h} must lie strictly inside (0, 1)"
            )));
        }
        Self::piecewise(vec![(h, a1), (1.0 - h, a2)])
    }

    /// Builds a static uniformly sampled coefficient on [0, 1).
    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        let c = CellCoefficient {
            profile: CoefficientProfile::Sampled { samples: values },
            time_dependence: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Constant coefficient a = c (a single segment).
    pub fn constant(c: f64) -> Result<Self> {
        Self::piecewise(vec![(1.0, c)])
    }

    /// Attaches stamped value rows making the coefficient time-dependent.
    pub fn with_time_dependence(mut self, td: TimeDependence) -> Result<Self> {
        self.time_dependence = Some(td);
        self.validate()?;
        Ok(self)
    }

    /// Parses and validates a coefficient from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: CellCoefficient = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("coefficient JSON: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// True when no time dependence is attached.
    pub fn is_static(&self) -> bool {
        self.time_dependence.is_none()
    }

    /// True for sampled (as opposed to piecewise segment) profiles.
    pub fn is_sampled(&self) -> bool {
        matches!(self.profile, CoefficientProfile::Sampled { .. })
    }

    fn base_values(&self) -> Vec<f64> {
        match &self.profile {
            CoefficientProfile::Piecewise { segments } => {
                segments.iter().map(|&(_, v)| v).collect()
            }
            CoefficientProfile::Sampled { samples: values } => values.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lengths, nvals) = match &self.profile {
            CoefficientProfile::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(Error::InvalidInput("no segments".into()));
                }
                let total: f64 = segments.iter().map(|&(l, _)| l).sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "segment lengths sum to {total}, expected 1"
                    )));
                }
                for &(l, _) in segments {
                    if !(l > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "segment length {l} must be positive"
                        )));
                    }
                }
                (
                    segments.iter().map(|&(l, _)| l).collect::<Vec<_>>(),
                    segments.len(),
                )
            }
            CoefficientProfile::Sampled { samples: values } => {
                if values.len() < 2 {
                    return Err(Error::InvalidInput(
                        "sampled coefficient needs at least 2 samples".into(),
                    ));
                }
                let n = values.len();
                (vec![1.0 / n as f64; n], n)
            }
        };
        debug_assert_eq!(lengths.len(), nvals);
        let check_row = |row: &[f64]| -> Result<()> {
            if row.len() != nvals {
                return Err(Error::InvalidInput(format!(
                    "value row length {} does not match profile ({} values)",
                    row.len(),
                    nvals
                )));
            }
            for &v in row {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "coefficient value {v} must be positive and finite"
                    )));
                }
            }
            Ok(())
        };
        check_row(&self.base_values())?;
        if let Some(td) = &self.time_dependence {
            if td.times.is_empty() || td.times.len() != td.values.len() {
                return Err(Error::InvalidInput(
                    "time dependence needs matching, nonempty times and value rows".into(),
                ));
            }
            if td.times[0] != 0.0 {
                return Err(Error::InvalidInput("first time stamp must be 0".into()));
            }
            for w in td.times.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::InvalidInput(
                        "time stamps must be strictly increasing".into(),
                    ));
                }
            }
            for row in &td.values {
                check_row(row)?;
            }
        }
        Ok(())
    }

    /// Segment values at time t (row interpolation when time-dependent).
    fn values_at(&self, t: f64) -> Vec<f64> {
        let Some(td) = &self.time_dependence else {
            return self.base_values();
        };
        let times = &td.times;
        if t <= times[0] {
            return td.values[0].clone();
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return td.values[last].clone();
        }
        let i = times.partition_point(|&s| s <= t) - 1;
        let w = (t - times[i]) / (times[i + 1] - times[i]);
        td.values[i]
            .iter()
            .zip(&td.values[i + 1])
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect()
    }

    /// Canonical segment form `(y_start, y_end, value)` at time t, covering
    /// [0, 1] in order.
    pub fn segments_at(&self, t: f64) -> Vec<(f64, f64, f64)> {
        let values = self.values_at(t);
        let lengths: Vec<f64> = match &self.profile {
            CoefficientProfile::Piecewise { segments } => {
                segments.iter().map(|&(l, _)| l).collect()
            }
            CoefficientProfile::Sampled { samples: values } => vec![1.0 / values.len() as f64; values.len()],
        };
        let mut out = Vec::with_capacity(values.len());
        let mut y = 0.0;
        for (i, (&l, &v)) in lengths.iter().zip(values.iter()).enumerate() {
            let y1 = if i + 1 == values.len() { 1.0 } else { y + l };
            out.push((y, y1, v));
            y = y1;
        }
        out
    }

    /// Point value a(y, t); y is wrapped into the unit cell.
    pub fn value(&self, y: f64, t: f64) -> f64 {
        let yw = y - y.floor();
        // wrapped value is in [0,1); the last segment owns the right edge
        for &(y0, y1, v) in &self.segments_at(t) {
            if yw < y1 || y1 == 1.0 {
                debug_assert!(yw >= y0 - 1e-15);
                return v;
            }
        }
        unreachable!("segments cover the unit cell");
    }

    /// Largest coefficient value at time t (CFL bounds).
    pub fn max_value(&self, t: f64) -> f64 {
        self.values_at(t).iter().copied().fold(f64::MIN, f64::max)
    }

    /// Largest coefficient value over a list of times (sampling the stamps).
    pub fn max_value_over(&self, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| self.max_value(t))
            .fold(f64::MIN, f64::max)
    }

    /// Integral of 1/a over the (periodically extended) interval [y0, y1].
    pub fn inverse_integral(&self, y0: f64, y1: f64, t: f64) -> f64 {
        assert!(y1 >= y0);
        let segs = self.segments_at(t);
        let cell_total: f64 = segs.iter().map(|&(a, b, v)| (b - a) / v).sum();
        let primitive = |y: f64| -> f64 {
            // integral of 1/a from 0 to y for y in [0,1]
            let mut acc = 0.0;
            for &(a, b, v) in &segs {
                if y <= a {
                    break;
                }
                acc += (y.min(b) - a) / v;
            }
            acc
        };
        let extended = |y: f64| -> f64 {
            let n = y.floor();
            n * cell_total + primitive(y - n)
        };
        extended(y1) - extended(y0)
    }

    /// Harmonic mean of a over one cell at time t.
    pub fn harmonic_mean(&self, t: f64) -> f64 {
        1.0 / self.inverse_integral(0.0, 1.0, t)
    }

    /// Fourier coefficients of 1/a at time t for frequencies
    /// k = -(m-1) ..= (m-1): c_k = int_0^1 e^{-2 pi i k y} / a(y) dy,
    /// returned with c_k at index `k + (m - 1)`. Exact per segment.
    pub fn inverse_fourier_coefficients(&self, m: usize, t: f64) -> Vec<Complex64> {
        assert!(m >= 1);
        let segs = self.segments_at(t);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * m - 1];
        for k_idx in 0..(2 * m - 1) {
            let k = k_idx as i64 - (m as i64 - 1);
            let mut c = Complex64::new(0.0, 0.0);
            if k == 0 {
                for &(y0, y1, v) in &segs {
                    c += Complex64::new((y1 - y0) / v, 0.0);
                }
            } else {
                let tpik = Complex64::new(0.0, 2.0 * PI * k as f64);
                for &(y0, y1, v) in &segs {
                    let e0 = (-tpik * y0).exp();
                    let e1 = (-tpik * y1).exp();
                    c += (e0 - e1) / (tpik * v);
                }
            }
            coeffs[k_idx] = c;
        }
        coeffs
    }
}
