use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::beta::AlphaCase;
use super::{ensemble_field, max_ratio, sample_seed, EstimateReport};
use crate::dynamics::{dealiased_product, duhamel_integral, uniform_times};
use crate::error::{Error, Result};
use crate::spaces::{
    lp_norm, sobolev_norm, sobolev_norm_spectral, xs_norm_from_slices, LpExponent, SliceNorms,
    SobolevIndex, XsNormReport,
};
use crate::spectral::{forward_transform, inverse_transform, GridSpec, RealField, SpectralField};

fn check_run(n_samples: usize, horizon: f64, n_t: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if n_t < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 time steps, got {n_t}"
        )));
    }
    Ok(())
}

fn slice_norms(times: &[f64], spectra: &[SpectralField], idx: SobolevIndex) -> Result<Vec<SliceNorms>> {
    times
        .iter()
        .zip(spectra)
        .map(|(&time, spectrum)| {
            Ok(SliceNorms {
                time,
                sobolev: sobolev_norm_spectral(spectrum, idx.s()),
                l4: lp_norm(&inverse_transform(spectrum)?, LpExponent::Four),
            })
        })
        .collect()
}

fn describe(report: EstimateReport, idx: SobolevIndex, horizon: f64, n_t: usize, grid: &GridSpec) -> EstimateReport {
    report
        .param("s", idx.s())
        .param("alpha", idx.alpha())
        .param("alpha_case", AlphaCase::of(idx).label())
        .param("proof_safe", idx.proof_safe())
        .param("T", horizon)
        .param("n_t", n_t)
        .param("n_points", grid.n_points())
        .param("half_length", grid.half_length())
}

fn linear_ratio(phi: &RealField, idx: SobolevIndex, times: &[f64]) -> Result<f64> {
    let spectrum = forward_transform(phi);
    let flow: Vec<_> = times.iter().map(|&t| spectrum.heat(t)).collect();
    let norms = xs_norm_from_slices(&slice_norms(times, &flow, idx)?, idx)?;
    Ok(norms.total / sobolev_norm(phi, idx))
}

/// Empirical `C_l` in `||S(t) phi||_{X^s} <= C_l ||phi||_{H^s}`.
pub fn verify_linear_estimate(
    seed: u64,
    n_samples: usize,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    grid: GridSpec,
) -> Result<EstimateReport> {
    check_run(n_samples, horizon, n_t)?;
    let times = uniform_times(horizon, n_t)?;
    let ratios = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| linear_ratio(&ensemble_field(seed, i, grid, true)?, idx, &times))
        .collect::<Result<Vec<f64>>>()?;
    let max = max_ratio(ratios);
    let mut report = describe(
        EstimateReport::new("linear_estimate", seed).param("estimate", "empirical"),
        idx,
        horizon,
        n_t,
        &grid,
    );
    report.n_samples = n_samples;
    report.max_ratio = max;
    report.pass = max.is_finite() && max > 0.0;
    Ok(report)
}

/// Time profile multiplying a fixed spatial field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TemporalProfile {
    Constant,
    /// `(tau / (t + tau))^alpha`, a resolved version of `t^{-alpha}`.
    Decay { tau: f64 },
    /// `t / T`.
    Ramp,
}

impl TemporalProfile {
    pub fn value(self, t: f64, alpha: f64, horizon: f64) -> f64 {
        match self {
            TemporalProfile::Constant => 1.0,
            TemporalProfile::Decay { tau } => (tau / (t + tau)).powf(alpha),
            TemporalProfile::Ramp => t / horizon,
        }
    }

    fn draw(rng: &mut ChaCha8Rng, horizon: f64) -> Self {
        match rng.random_range(0..4) {
            0 => TemporalProfile::Constant,
            1 => TemporalProfile::Decay { tau: horizon / 10.0 },
            2 => TemporalProfile::Decay { tau: horizon / 5.0 },
            _ => TemporalProfile::Ramp,
        }
    }
}

/// One bilinear measurement. `sobolev_component` and `l4_component` are the
/// two parts of the Duhamel term's `X^s` norm divided by
/// `sup_{t>0} t^{2 alpha} ||f||_{L^4} ||g||_{L^4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BilinearSample {
    pub ratio: f64,
    pub lhs: XsNormReport,
    pub f_norm: f64,
    pub g_norm: f64,
    pub l4_product_sup: f64,
    pub sobolev_component: f64,
    pub l4_component: f64,
}

impl BilinearSample {
    /// Relative gap between `ratio` and the recombined components.
    pub fn recombination_defect(&self) -> f64 {
        let recombined = (self.sobolev_component + self.l4_component) * self.l4_product_sup
            / (self.f_norm * self.g_norm);
        (recombined - self.ratio).abs() / self.ratio.abs().max(f64::MIN_POSITIVE)
    }
}

fn profile_xs_norm(
    field: &RealField,
    profile: TemporalProfile,
    idx: SobolevIndex,
    times: &[f64],
) -> XsNormReport {
    let horizon = *times.last().expect("nonempty time grid");
    let hs = sobolev_norm(field, idx);
    let l4 = lp_norm(field, LpExponent::Four);
    let slices: Vec<SliceNorms> = times
        .iter()
        .map(|&t| {
            let a = profile.value(t, idx.alpha(), horizon).abs();
            SliceNorms {
                time: t,
                sobolev: a * hs,
                l4: a * l4,
            }
        })
        .collect();
    xs_norm_from_slices(&slices, idx).expect("nonempty slices")
}

/// Measures `||int_0^t S(t - t') (f g) dt'||_{X^s} / (||f||_{X^s} ||g||_{X^s})`
/// for `f = p_f(t) F(x)`, `g = p_g(t) G(x)`. Returns `None` when either side
/// vanishes.
pub fn bilinear_ratio(
    f: (&RealField, TemporalProfile),
    g: (&RealField, TemporalProfile),
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
) -> Result<Option<BilinearSample>> {
    let times = uniform_times(horizon, n_t)?;
    let alpha = idx.alpha();
    let product = dealiased_product(f.0, g.0)?;
    let weights: Vec<f64> = times
        .iter()
        .map(|&t| f.1.value(t, alpha, horizon) * g.1.value(t, alpha, horizon))
        .collect();
    let forcing: Vec<SpectralField> = weights
        .iter()
        .map(|&w| {
            let mut p = product.clone();
            p.scale(w);
            p
        })
        .collect();
    let integral = duhamel_integral(horizon / n_t as f64, &forcing);
    let lhs = xs_norm_from_slices(&slice_norms(&times, &integral, idx)?, idx)?;

    let f_norm = profile_xs_norm(f.0, f.1, idx, &times).total;
    let g_norm = profile_xs_norm(g.0, g.1, idx, &times).total;
    let l4 = lp_norm(f.0, LpExponent::Four) * lp_norm(g.0, LpExponent::Four);
    let l4_product_sup = times
        .iter()
        .zip(&weights)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, w)| t.powf(2.0 * alpha) * w.abs() * l4)
        .fold(0.0, f64::max);
    if f_norm == 0.0 || g_norm == 0.0 || l4_product_sup == 0.0 || lhs.total == 0.0 {
        return Ok(None);
    }
    Ok(Some(BilinearSample {
        ratio: lhs.total / (f_norm * g_norm),
        lhs,
        f_norm,
        g_norm,
        l4_product_sup,
        sobolev_component: lhs.sobolev_sup / l4_product_sup,
        l4_component: lhs.weighted_l4_sup / l4_product_sup,
    }))
}

/// The bilinear ensemble: pair `i` combines ensemble fields with profiles
/// drawn from `{1, (tau/(t+tau))^alpha with tau = T/10, T/5, t/T}`.
/// Degenerate pairs are dropped.
pub fn bilinear_samples(
    seed: u64,
    n_samples: usize,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    grid: GridSpec,
) -> Result<Vec<BilinearSample>> {
    check_run(n_samples, horizon, n_t)?;
    let seed_f = sample_seed(seed, u64::MAX);
    let seed_g = sample_seed(seed, u64::MAX - 1);
    let samples = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
            let pf = TemporalProfile::draw(&mut rng, horizon);
            let pg = TemporalProfile::draw(&mut rng, horizon);
            let f = ensemble_field(seed_f, i, grid, true)?;
            // mixes band-limited and bump shapes across pairs
            let g = ensemble_field(seed_g, i ^ ((i >> 1) & 1), grid, true)?;
            bilinear_ratio((&f, pf), (&g, pg), idx, horizon, n_t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(samples.into_iter().flatten().collect())
}

/// Empirical `C_b` in
/// `||int_0^t S(t - t') (f g) dt'||_{X^s} <= C_b ||f||_{X^s} ||g||_{X^s}`.
pub fn verify_bilinear(
    seed: u64,
    n_samples: usize,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    grid: GridSpec,
) -> Result<EstimateReport> {
    let samples = bilinear_samples(seed, n_samples, idx, horizon, n_t, grid)?;
    let max = max_ratio(samples.iter().map(|s| s.ratio));
    let mut report = describe(
        EstimateReport::new("bilinear_estimate", seed).param("estimate", "empirical"),
        idx,
        horizon,
        n_t,
        &grid,
    );
    report.n_samples = samples.len();
    report.max_ratio = max;
    report.pass = !samples.is_empty() && max.is_finite() && max > 0.0;
    Ok(report)
}

/// The two components of the bilinear bound measured separately against
/// `sup t^{2 alpha} ||f||_{L^4} ||g||_{L^4}`: the `H^s` part and the
/// weighted `L^4` part. Passes when both are finite and recombine to the
/// bilinear ratio sample by sample within `1e-10`.
pub fn verify_lem1_components(
    seed: u64,
    n_samples: usize,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    grid: GridSpec,
) -> Result<(EstimateReport, EstimateReport)> {
    let samples = bilinear_samples(seed, n_samples, idx, horizon, n_t, grid)?;
    let defect = max_ratio(samples.iter().map(BilinearSample::recombination_defect));
    let build = |name: &str, pick: fn(&BilinearSample) -> f64| {
        let max = max_ratio(samples.iter().map(pick));
        let mut report = describe(
            EstimateReport::new(name, seed)
                .param("estimate", "empirical")
                .param("recombination_defect", defect),
            idx,
            horizon,
            n_t,
            &grid,
        );
        report.n_samples = samples.len();
        report.max_ratio = max;
        report.pass = !samples.is_empty() && max.is_finite() && defect <= 1e-10;
        report
    };
    Ok((
        build("lem1_sobolev_component", |s| s.sobolev_component),
        build("lem1_l4_component", |s| s.l4_component),
    ))
}
