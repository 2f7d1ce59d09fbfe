//! Reference computations independent of the Picard path: an RK4 integrator
//! for the space-homogeneous reduction, a Strang splitting integrator for the
//! full system, and adaptive Gauss-Kronrod quadrature for integrands with
//! endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dynamics::{KmParams, KmState, MuSign, Trajectory};
use crate::error::{Error, Result};
use crate::spaces::SobolevIndex;
use crate::spectral::{forward_transform, inverse_transform, RealField};

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    lin: f64,
}

impl OdeTrajectory {
    /// Value at `t` by cubic Hermite interpolation with the exact vector field.
    pub fn sample(&self, t: f64) -> Option<(f64, f64)> {
        let last = *self.times.last()?;
        if t < 0.0 || t > last * (1.0 + 1e-12) {
            return None;
        }
        let h = self.times[1] - self.times[0];
        let pos = t / h;
        let near = pos.round();
        if (pos - near).abs() < 1e-9 {
            let i = (near as usize).min(self.times.len() - 1);
            return Some((self.u[i], self.v[i]));
        }
        let i = (pos.floor() as usize).min(self.times.len() - 2);
        let s = (t - self.times[i]) / h;
        let (du0, dv0) = sir_rhs(self.u[i], self.v[i], self.lin);
        let (du1, dv1) = sir_rhs(self.u[i + 1], self.v[i + 1], self.lin);
        let herm = |y0: f64, y1: f64, d0: f64, d1: f64| {
            let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
            let h10 = s.powi(3) - 2.0 * s * s + s;
            let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
            let h11 = s.powi(3) - s * s;
            h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
        };
        Some((
            herm(self.u[i], self.u[i + 1], du0, du1),
            herm(self.v[i], self.v[i + 1], dv0, dv1),
        ))
    }
}

fn sir_rhs(u: f64, v: f64, lin: f64) -> (f64, f64) {
    (-u * v, u * v + lin * v)
}

fn rk4_step(u: f64, v: f64, lin: f64, h: f64) -> (f64, f64) {
    let (a1, b1) = sir_rhs(u, v, lin);
    let (a2, b2) = sir_rhs(u + 0.5 * h * a1, v + 0.5 * h * b1, lin);
    let (a3, b3) = sir_rhs(u + 0.5 * h * a2, v + 0.5 * h * b2, lin);
    let (a4, b4) = sir_rhs(u + h * a3, v + h * b3, lin);
    (
        u + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        v + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
}

fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(dt > 0.0 && dt <= horizon / 10.0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "step {dt} must satisfy 0 < dt <= T/10 = {}",
            horizon / 10.0
        )));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}

/// Classical RK4 for `u' = -uv`, `v' = uv + sigma mu v`.
///
/// The step is adjusted to `T / round(T / dt)` so the last point is `T`.
pub fn rk4_sir(
    u0: f64,
    v0: f64,
    mu: f64,
    mu_sign: MuSign,
    horizon: f64,
    dt: f64,
) -> Result<OdeTrajectory> {
    let steps = step_count(horizon, dt)?;
    let h = horizon / steps as f64;
    let lin = mu_sign.sigma() * mu;
    let mut times = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    let (mut u, mut v) = (u0, v0);
    times.push(0.0);
    us.push(u);
    vs.push(v);
    for n in 1..=steps {
        (u, v) = rk4_step(u, v, lin, h);
        times.push(horizon * n as f64 / steps as f64);
        us.push(u);
        vs.push(v);
    }
    Ok(OdeTrajectory {
        times,
        u: us,
        v: vs,
        lin,
    })
}

const OVERFLOW: f64 = 1e6;

/// Strang splitting: half heat step (exact multiplier), one pointwise RK4
/// reaction step, half heat step. Stores every step.
pub fn splitting_solve(
    phi: &RealField,
    psi: &RealField,
    params: &KmParams,
    idx: SobolevIndex,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let grid = *phi.grid();
    if *psi.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let steps = step_count(horizon, dt)?;
    let h = horizon / steps as f64;
    let lin = params.linear_coefficient();
    let half_heat = |f: &RealField| inverse_transform(&forward_transform(f).heat(0.5 * h));

    let mut times = vec![0.0];
    let mut states = vec![KmState::new(phi.clone(), psi.clone())?];
    let (mut u, mut v) = (phi.clone(), psi.clone());
    for n in 1..=steps {
        let uh = half_heat(&u)?;
        let vh = half_heat(&v)?;
        let mut us = Vec::with_capacity(grid.n_points());
        let mut vs = Vec::with_capacity(grid.n_points());
        for (&a, &b) in uh.samples().iter().zip(vh.samples()) {
            let (a1, b1) = rk4_step(a, b, lin, h);
            us.push(a1);
            vs.push(b1);
        }
        let magnitude = us.iter().chain(&vs).fold(0.0_f64, |m, x| m.max(x.abs()));
        if !magnitude.is_finite() || magnitude > OVERFLOW {
            return Err(Error::ReactionOverflow {
                time: horizon * n as f64 / steps as f64,
                magnitude,
            });
        }
        u = half_heat(&RealField::new(grid, us)?)?;
        v = half_heat(&RealField::new(grid, vs)?)?;
        times.push(horizon * n as f64 / steps as f64);
        states.push(KmState::new(u.clone(), v.clone())?);
    }
    Trajectory::new(times, states, *params, idx)
}

/// A quadrature node with its distances to both interval endpoints, each
/// computed without cancellation near its own endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub x: f64,
    pub to_lower: f64,
    pub to_upper: f64,
}

// 15-point Kronrod nodes (positive half) and weights; Gauss 7-point weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Anchor {
    Lower,
    Upper,
}

/// Subinterval `[near, far]` of offsets measured from one endpoint.
#[derive(Debug, Clone, Copy)]
struct Piece {
    anchor: Anchor,
    near: f64,
    far: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

struct Interval<F> {
    a: f64,
    b: f64,
    f: F,
}

impl<F: Fn(Abscissa) -> f64> Interval<F> {
    fn node(&self, anchor: Anchor, offset: f64) -> Abscissa {
        let width = self.b - self.a;
        match anchor {
            Anchor::Lower => Abscissa {
                x: self.a + offset,
                to_lower: offset,
                to_upper: width - offset,
            },
            Anchor::Upper => Abscissa {
                x: self.b - offset,
                to_lower: width - offset,
                to_upper: offset,
            },
        }
    }

    fn piece(&self, anchor: Anchor, near: f64, far: f64) -> Piece {
        let center = 0.5 * (near + far);
        let half = 0.5 * (far - near);
        let fc = (self.f)(self.node(anchor, center));
        let mut kronrod = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        for j in 0..7 {
            let d = half * XGK[j];
            let pair = (self.f)(self.node(anchor, center - d)) + (self.f)(self.node(anchor, center + d));
            kronrod += WGK[j] * pair;
            if j % 2 == 1 {
                gauss += WG[j / 2] * pair;
            }
        }
        Piece {
            anchor,
            near,
            far,
            value: kronrod * half,
            error: ((kronrod - gauss) * half).abs(),
        }
    }
}

const MAX_PIECES: usize = 20_000;

/// Adaptive 7/15 Gauss-Kronrod quadrature of `f` over `(a, b)` to absolute
/// tolerance `tol`.
///
/// All nodes are interior, so integrable endpoint singularities are allowed.
/// The interval is split at its midpoint and each half is parameterized by the
/// offset from its own endpoint; `f` receives both endpoint distances and
/// should use them (rather than `x - a` or `b - x`) for singular factors.
pub fn adaptive_quadrature(
    f: impl Fn(Abscissa) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs finite a < b, got ({a}, {b})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    let interval = Interval { a, b, f };
    let half = 0.5 * (b - a);
    let mut heap = BinaryHeap::new();
    heap.push(interval.piece(Anchor::Lower, 0.0, half));
    heap.push(interval.piece(Anchor::Upper, 0.0, half));
    let mut settled_value = 0.0;
    let mut settled_error = 0.0;
    let mut open_value: f64 = heap.iter().map(|p| p.value).sum();
    let mut open_error: f64 = heap.iter().map(|p| p.error).sum();
    let mut pieces = 2;
    loop {
        let mut total = settled_value + open_value;
        let mut error = settled_error + open_error;
        if error <= tol {
            // running sums drift; confirm against a fresh sum
            open_value = heap.iter().map(|p| p.value).sum();
            open_error = heap.iter().map(|p| p.error).sum();
            total = settled_value + open_value;
            error = settled_error + open_error;
        }
        if !total.is_finite() || !error.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                estimate: total,
                error,
                intervals: pieces,
            });
        }
        if error <= tol {
            return Ok(total);
        }
        let Some(worst) = heap.pop() else {
            return Ok(total);
        };
        if pieces >= MAX_PIECES {
            return Err(Error::QuadratureNonConvergence {
                estimate: total,
                error,
                intervals: pieces,
            });
        }
        open_value -= worst.value;
        open_error -= worst.error;
        let mid = 0.5 * (worst.near + worst.far);
        if mid <= worst.near || mid >= worst.far {
            // cannot split further in floating point
            settled_value += worst.value;
            settled_error += worst.error;
            continue;
        }
        for piece in [
            interval.piece(worst.anchor, worst.near, mid),
            interval.piece(worst.anchor, mid, worst.far),
        ] {
            open_value += piece.value;
            open_error += piece.error;
            heap.push(piece);
        }
        pieces += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{gaussian_bump, random_band_limited_field, GridSpec};
    use std::f64::consts::PI;

    #[test]
    fn disease_free_equilibrium() {
        let tr = rk4_sir(0.7, 0.0, 0.5, MuSign::Paper, 1.0, 0.01).unwrap();
        assert!(tr.u.iter().all(|&u| u == 0.7));
        assert!(tr.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conservative_case_keeps_total() {
        let tr = rk4_sir(0.6, 0.3, 0.0, MuSign::Epidemiological, 2.0, 0.01).unwrap();
        for (u, v) in tr.u.iter().zip(&tr.v) {
            assert!((u + v - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let reference = rk4_sir(0.5, 0.4, 0.7, MuSign::Epidemiological, 1.0, 1e-4).unwrap();
        let (ur, vr) = reference.sample(1.0).unwrap();
        let err = |dt| {
            let tr = rk4_sir(0.5, 0.4, 0.7, MuSign::Epidemiological, 1.0, dt).unwrap();
            let (u, v) = tr.sample(1.0).unwrap();
            (u - ur).abs().max((v - vr).abs())
        };
        let ratio = err(0.05) / err(0.025);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_rejects_coarse_step() {
        assert!(rk4_sir(0.5, 0.1, 0.1, MuSign::Paper, 1.0, 0.2).is_err());
    }

    #[test]
    fn hermite_sampling_between_nodes() {
        let tr = rk4_sir(0.5, 0.4, 0.7, MuSign::Epidemiological, 1.0, 1e-3).unwrap();
        let fine = rk4_sir(0.5, 0.4, 0.7, MuSign::Epidemiological, 1.0, 1e-4).unwrap();
        let (a, b) = tr.sample(0.12345).unwrap();
        let (c, d) = fine.sample(0.12345).unwrap();
        assert!((a - c).abs() < 1e-10 && (b - d).abs() < 1e-10);
        assert!(tr.sample(1.5).is_none());
    }

    #[test]
    fn splitting_with_zero_psi_is_heat_flow() {
        let g = GridSpec::new(64, 8.0 * PI).unwrap();
        let phi = random_band_limited_field(2, 10, 1.0, g).unwrap();
        let psi = RealField::zeros(g);
        let p = KmParams::new(0.5, MuSign::Paper).unwrap();
        let idx = SobolevIndex::new(0.0).unwrap();
        let tr = splitting_solve(&phi, &psi, &p, idx, 0.2, 0.01).unwrap();
        for (t, s) in tr.times().iter().zip(tr.states()) {
            let exact = inverse_transform(&forward_transform(&phi).heat(*t)).unwrap();
            assert!(s.u().sub(&exact).unwrap().max_abs() < 1e-12);
            assert_eq!(s.v().max_abs(), 0.0);
        }
    }

    #[test]
    fn splitting_on_constants_matches_rk4() {
        let g = GridSpec::new(16, PI).unwrap();
        let p = KmParams::new(0.5, MuSign::Epidemiological).unwrap();
        let idx = SobolevIndex::new(0.0).unwrap();
        let tr = splitting_solve(
            &RealField::constant(g, 0.6),
            &RealField::constant(g, 0.3),
            &p,
            idx,
            1.0,
            0.01,
        )
        .unwrap();
        let ode = rk4_sir(0.6, 0.3, 0.5, MuSign::Epidemiological, 1.0, 0.01).unwrap();
        let last = tr.states().last().unwrap();
        assert!((last.u().samples()[3] - ode.u.last().unwrap()).abs() < 1e-12);
        assert!((last.v().samples()[7] - ode.v.last().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn splitting_detects_overflow() {
        let g = GridSpec::new(16, PI).unwrap();
        let p = KmParams::new(0.0, MuSign::Paper).unwrap();
        let idx = SobolevIndex::new(0.0).unwrap();
        let big = gaussian_bump(g, 0.0, 0.5, -1e4).unwrap();
        let r = splitting_solve(&big, &big, &p, idx, 1.0, 0.1);
        assert!(matches!(r, Err(Error::ReactionOverflow { .. })));
    }

    #[test]
    fn quadrature_of_constant() {
        let v = adaptive_quadrature(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_of_inverse_sqrt() {
        let v = adaptive_quadrature(|p| p.to_lower.powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn quadrature_of_arcsine_density() {
        let v = adaptive_quadrature(
            |p| p.to_upper.powf(-0.5) * p.to_lower.powf(-0.5),
            0.0,
            1.0,
            1e-11,
        )
        .unwrap();
        assert!((v - PI).abs() < 1e-8, "{}", v - PI);
    }

    #[test]
    fn quadrature_strong_singularity_at_upper_end() {
        // int_0^3 (3 - y)^{-0.9} dy = 10 * 3^{0.1}
        let v = adaptive_quadrature(|p| p.to_upper.powf(-0.9), 0.0, 3.0, 1e-11).unwrap();
        assert!((v - 10.0 * 3f64.powf(0.1)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn quadrature_validates_input() {
        assert!(adaptive_quadrature(|_| 1.0, 1.0, 0.0, 1e-8).is_err());
        assert!(adaptive_quadrature(|_| 1.0, 0.0, 1.0, 0.0).is_err());
        // non-integrable: 1/y
        assert!(adaptive_quadrature(|p| 1.0 / p.to_lower, 0.0, 1.0, 1e-10).is_err());
    }
}
