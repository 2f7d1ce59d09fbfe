//! Norms on the grid: `L^p`, homogeneous Sobolev `H^s`, and the
//! time-weighted `X^s` norm
//!
//! ```text
//! ||u||_{X^s} = sup_t ||u(t)||_{H^s} + sup_{t > 0} t^alpha ||u(t)||_{L^4},   alpha = 1/2 - s/4.
//! ```
//!
//! Suprema are taken over the stored time slices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{forward_transform, RealField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpExponent {
    One,
    Two,
    Four,
    Infinity,
}

impl LpExponent {
    pub fn value(self) -> f64 {
        match self {
            LpExponent::One => 1.0,
            LpExponent::Two => 2.0,
            LpExponent::Four => 4.0,
            LpExponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            LpExponent::Infinity => 0.0,
            p => 1.0 / p.value(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LpExponent::One => "1",
            LpExponent::Two => "2",
            LpExponent::Four => "4",
            LpExponent::Infinity => "inf",
        }
    }
}

impl std::str::FromStr for LpExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(LpExponent::One),
            "2" => Ok(LpExponent::Two),
            "4" => Ok(LpExponent::Four),
            "inf" | "infinity" => Ok(LpExponent::Infinity),
            other => Err(Error::InvalidArgument(format!(
                "unsupported Lebesgue exponent `{other}` (expected 1, 2, 4 or inf)"
            ))),
        }
    }
}

/// Sobolev exponent `s` in `[0, 2)` with its time weight `alpha = 1/2 - s/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevIndex {
    s: f64,
    alpha: f64,
}

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "Sobolev exponent must lie in [0, 2), got {s}"
            )));
        }
        Ok(Self {
            s,
            alpha: 0.5 - s / 4.0,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Whether the linear-estimate argument (which needs `1/4 - s/2 >= 0`)
    /// covers this exponent.
    pub fn proof_safe(&self) -> bool {
        self.s <= 0.5
    }
}

pub fn lp_norm(f: &RealField, p: LpExponent) -> f64 {
    let dx = f.grid().dx();
    let xs = f.samples();
    match p {
        LpExponent::One => xs.iter().map(|v| v.abs()).sum::<f64>() * dx,
        LpExponent::Two => (xs.iter().map(|v| v * v).sum::<f64>() * dx).sqrt(),
        LpExponent::Four => (xs.iter().map(|v| (v * v) * (v * v)).sum::<f64>() * dx).powf(0.25),
        LpExponent::Infinity => f.max_abs(),
    }
}

/// `||D^s f||_{L^2}` evaluated on the spectral side.
pub fn sobolev_norm_spectral(spectrum: &SpectralField, s: f64) -> f64 {
    let energy = if s == 0.0 {
        spectrum.weighted_energy(|_, _| 1.0)
    } else {
        spectrum.weighted_energy(|k, xi| if k == 0 { 0.0 } else { xi.abs().powf(2.0 * s) })
    };
    (spectrum.grid().length() * energy).sqrt()
}

pub fn sobolev_norm(f: &RealField, idx: SobolevIndex) -> f64 {
    sobolev_norm_spectral(&forward_transform(f), idx.s())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XsNormReport {
    pub sobolev_sup: f64,
    pub weighted_l4_sup: f64,
    pub total: f64,
}

impl XsNormReport {
    pub fn zero() -> Self {
        Self {
            sobolev_sup: 0.0,
            weighted_l4_sup: 0.0,
            total: 0.0,
        }
    }

    fn new(sobolev_sup: f64, weighted_l4_sup: f64) -> Self {
        Self {
            sobolev_sup,
            weighted_l4_sup,
            total: sobolev_sup + weighted_l4_sup,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c.abs() * self.sobolev_sup, c.abs() * self.weighted_l4_sup)
    }
}

/// Per-slice contributions to the `X^s` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceNorms {
    pub time: f64,
    pub sobolev: f64,
    pub l4: f64,
}

impl SliceNorms {
    pub fn compute(time: f64, field: &RealField, idx: SobolevIndex) -> Self {
        Self {
            time,
            sobolev: sobolev_norm(field, idx),
            l4: lp_norm(field, LpExponent::Four),
        }
    }

    /// `t^alpha ||f||_{L^4}`; zero at `t = 0`.
    pub fn weighted_l4(&self, alpha: f64) -> f64 {
        if self.time > 0.0 {
            self.time.powf(alpha) * self.l4
        } else {
            0.0
        }
    }
}

/// Reduces per-slice norms to an [`XsNormReport`].
pub fn xs_norm_from_slices(slices: &[SliceNorms], idx: SobolevIndex) -> Result<XsNormReport> {
    if slices.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let sobolev_sup = slices.iter().map(|s| s.sobolev).fold(0.0, f64::max);
    let weighted = slices
        .iter()
        .map(|s| s.weighted_l4(idx.alpha()))
        .fold(0.0, f64::max);
    Ok(XsNormReport::new(sobolev_sup, weighted))
}

/// `X^s` norm of one field's time history. The `t = 0` slice contributes to
/// the Sobolev supremum only.
pub fn xs_norm<'a, I>(times: &[f64], slices: I, idx: SobolevIndex) -> Result<XsNormReport>
where
    I: IntoIterator<Item = &'a RealField>,
{
    let norms: Vec<SliceNorms> = times
        .iter()
        .zip(slices)
        .map(|(&t, f)| SliceNorms::compute(t, f, idx))
        .collect();
    if norms.len() != times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} time points but {} slices",
            times.len(),
            norms.len()
        )));
    }
    xs_norm_from_slices(&norms, idx)
}

/// `||(u, v)||_{X^s x X^s} = ||u||_{X^s} + ||v||_{X^s}`.
pub fn pair_norm(report_u: &XsNormReport, report_v: &XsNormReport) -> f64 {
    report_u.total + report_v.total
}
