//! Periodic-domain Fourier machinery.
//!
//! The real line is replaced by the torus `[-L, L)` sampled at `n` points
//! `x_j = -L + j dx`, `dx = 2L / n`. A [`SpectralField`] holds the
//! coefficients `c_k` of the trigonometric interpolant
//!
//! ```text
//! f(x) = sum_k c_k exp(i xi_k x),   xi_k = pi k / L,   k in {-n/2, ..., n/2 - 1}
//! ```
//!
//! so a pure mode `cos(k pi x / L)` has coefficients `1/2` at `+-k`. With this
//! convention Parseval reads `(1 / 2L) sum_j |f_j|^2 dx = sum_k |c_k|^2`.
//!
//! Fractional derivatives and the heat semigroup are diagonal multipliers
//! depending only on `|xi_k|`, so they preserve Hermitian symmetry exactly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default half-length of the periodic domain, `32 pi`.
pub const DEFAULT_HALF_LENGTH: f64 = 32.0 * PI;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1024;

/// Relative imaginary residual tolerated by [`inverse_transform`].
const REAL_FIELD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_points: usize,
    half_length: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, half_length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half_length must be positive and finite, got {half_length}"
            )));
        }
        Ok(Self {
            n_points,
            half_length,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Domain length `2L`.
    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn dx(&self) -> f64 {
        // n is a power of two, so this division is exact scaling.
        self.length() / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|j| self.x(j))
    }

    /// Integer wavenumber stored at FFT-order slot `slot`.
    pub fn wavenumber(&self, slot: usize) -> i64 {
        let n = self.n_points as i64;
        let s = slot as i64;
        if s < n / 2 {
            s
        } else {
            s - n
        }
    }

    /// FFT-order slot holding wavenumber `k` (taken modulo `n`).
    pub fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.n_points as i64) as usize
    }

    /// Angular frequency `xi_k = pi k / L`.
    pub fn frequency(&self, k: i64) -> f64 {
        PI * k as f64 / self.half_length
    }

    /// Same grid with twice the points on the same domain.
    pub fn refined(&self) -> Self {
        Self {
            n_points: self.n_points * 2,
            half_length: self.half_length,
        }
    }

    /// Largest wavenumber kept by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n_points / 3) as i64
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_POINTS,
            half_length: DEFAULT_HALF_LENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                samples.len()
            )));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "sample {j} is not finite ({})",
                samples[j]
            )));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n_points()],
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            samples: vec![value; grid.n_points()],
        }
    }

    /// Samples `f` at the grid points. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.points().map(f).collect();
        assert!(
            samples.iter().all(|v| v.is_finite()),
            "field generator produced a non-finite sample"
        );
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// `int f dx` by the (spectrally exact) rectangle rule.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn without_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    /// FFT order: slot `j` holds wavenumber `grid.wavenumber(j)`.
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coefficients: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    /// Builds a field from coefficients in FFT order.
    pub fn from_coefficients(grid: GridSpec, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.n_points() {
            return Err(Error::InvalidField(format!(
                "expected {} coefficients, got {}",
                grid.n_points(),
                coefficients.len()
            )));
        }
        Ok(Self { grid, coefficients })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Coefficients in FFT order.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficient(&self, k: i64) -> Complex64 {
        self.coefficients[self.grid.slot(k)]
    }

    pub fn set_coefficient(&mut self, k: i64, value: Complex64) {
        let slot = self.grid.slot(k);
        self.coefficients[slot] = value;
    }

    /// Iterates `(k, xi_k, c_k)`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, f64, Complex64)> + '_ {
        self.coefficients.iter().enumerate().map(move |(slot, &c)| {
            let k = self.grid.wavenumber(slot);
            (k, self.grid.frequency(k), c)
        })
    }

    /// Multiplies every coefficient by `m(k, xi_k)`.
    pub fn multiply(&self, m: impl Fn(i64, f64) -> f64) -> Self {
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(slot, &c)| {
                let k = self.grid.wavenumber(slot);
                c * m(k, self.grid.frequency(k))
            })
            .collect();
        Self {
            grid: self.grid,
            coefficients,
        }
    }

    pub fn riesz(&self, r: f64) -> Self {
        riesz_derivative(self, r)
    }

    pub fn heat(&self, t: f64) -> Self {
        heat_semigroup(self, t)
    }

    /// Zeroes every mode with `|k| > n/3`.
    pub fn dealiased(mut self) -> Self {
        let cutoff = self.grid.dealias_cutoff();
        for slot in 0..self.coefficients.len() {
            if self.grid.wavenumber(slot).abs() > cutoff {
                self.coefficients[slot] = Complex64::new(0.0, 0.0);
            }
        }
        self
    }

    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coefficients.iter_mut().zip(&other.coefficients) {
            *a += b * c;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.coefficients {
            *a *= c;
        }
    }

    /// `sum_k w(xi_k) |c_k|^2`.
    pub fn weighted_energy(&self, w: impl Fn(i64, f64) -> f64) -> f64 {
        self.modes().map(|(k, xi, c)| w(k, xi) * c.norm_sqr()).sum()
    }

    /// `L^2` norm of the represented function, `sqrt(2L sum |c_k|^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.length() * self.weighted_energy(|_, _| 1.0)).sqrt()
    }

    /// Largest deviation from Hermitian symmetry, `max |c_{-k} - conj(c_k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_points() as i64;
        (0..n / 2 + 1)
            .map(|k| (self.coefficient(-k) - self.coefficient(k).conj()).norm())
            .fold(0.0, f64::max)
    }
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    type PlanCache = Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>;
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// `(-1)^k`: the phase from sampling at `x_j = -L + j dx` instead of `j dx`.
fn shift_sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn forward_transform(f: &RealField) -> SpectralField {
    let grid = *f.grid();
    let n = grid.n_points();
    let (fwd, _) = plans(n);
    let mut buf: Vec<Complex64> = f
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fwd.process(&mut buf);
    let scale = 1.0 / n as f64;
    for (slot, c) in buf.iter_mut().enumerate() {
        *c *= scale * shift_sign(grid.wavenumber(slot));
    }
    // Real input: enforce exact Hermitian symmetry.
    let half = n / 2;
    buf[0] = Complex64::new(buf[0].re, 0.0);
    buf[half] = Complex64::new(buf[half].re, 0.0);
    for slot in 1..half {
        let mirror = n - slot;
        let avg = (buf[slot] + buf[mirror].conj()) * 0.5;
        buf[slot] = avg;
        buf[mirror] = avg.conj();
    }
    SpectralField {
        grid,
        coefficients: buf,
    }
}

pub fn inverse_transform(spectrum: &SpectralField) -> Result<RealField> {
    let grid = *spectrum.grid();
    let n = grid.n_points();
    let (_, inv) = plans(n);
    let mut buf: Vec<Complex64> = spectrum
        .coefficients()
        .iter()
        .enumerate()
        .map(|(slot, &c)| c * shift_sign(grid.wavenumber(slot)))
        .collect();
    inv.process(&mut buf);
    let magnitude = buf.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
    let residual = buf.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    if residual > REAL_FIELD_TOL * magnitude.max(f64::MIN_POSITIVE) {
        return Err(Error::NonRealField {
            residual,
            magnitude,
        });
    }
    RealField::new(grid, buf.into_iter().map(|c| c.re).collect())
}

/// Riesz multiplier `|xi|^r`. Intended for `r` in `[-1, 2]`.
///
/// The zero mode is kept when `r == 0` (so `D^0` is the identity and
/// `H^0 = L^2`) and annihilated otherwise, since homogeneous spaces are
/// defined modulo constants.
pub fn riesz_derivative(spectrum: &SpectralField, r: f64) -> SpectralField {
    if r == 0.0 {
        return spectrum.clone();
    }
    spectrum.multiply(|k, xi| if k == 0 { 0.0 } else { xi.abs().powf(r) })
}

/// Heat semigroup `S(t)`: multiplier `exp(-t xi^2)`.
pub fn heat_semigroup(spectrum: &SpectralField, t: f64) -> SpectralField {
    assert!(
        t >= 0.0 && t.is_finite(),
        "heat semigroup needs a finite t >= 0, got {t}"
    );
    if t == 0.0 {
        return spectrum.clone();
    }
    spectrum.multiply(|_, xi| (-t * xi * xi).exp())
}

/// Mean-zero real field with spectral support in `1 <= |k| <= cutoff` and
/// `L^2` norm `amplitude`.
///
/// Coefficients are drawn in the order `k = 1, 2, ..., cutoff` (real part,
/// then imaginary part) from a standard normal generator seeded by `seed`, so
/// the same seed yields the same function on every grid that resolves it.
pub fn random_band_limited_field(
    seed: u64,
    cutoff: usize,
    amplitude: f64,
    grid: GridSpec,
) -> Result<RealField> {
    if cutoff == 0 || cutoff >= grid.n_points() / 2 {
        return Err(Error::InvalidArgument(format!(
            "cutoff must lie in 1..{} for n_points = {}, got {cutoff}",
            grid.n_points() / 2,
            grid.n_points()
        )));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = SpectralField::zeros(grid);
    for k in 1..=cutoff as i64 {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let c = Complex64::new(re, im);
        spectrum.set_coefficient(k, c);
        spectrum.set_coefficient(-k, c.conj());
    }
    let norm = spectrum.l2_norm();
    spectrum.scale(amplitude / norm);
    inverse_transform(&spectrum)
}

/// Periodized Gaussian `height * exp(-(x - center)^2 / (2 width^2))`, using
/// the nearest periodic image of `center`.
pub fn gaussian_bump(grid: GridSpec, center: f64, width: f64, height: f64) -> Result<RealField> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bump width must be positive, got {width}"
        )));
    }
    if !center.is_finite() || !height.is_finite() {
        return Err(Error::InvalidArgument(
            "bump center and height must be finite".into(),
        ));
    }
    let period = grid.length();
    Ok(RealField::from_fn(grid, |x| {
        let d = (x - center + grid.half_length()).rem_euclid(period) - grid.half_length();
        height * (-0.5 * (d / width).powi(2)).exp()
    }))
}
