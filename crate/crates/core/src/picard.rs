//! Fixed-point solution of the mild formulation by Picard iteration, the
//! data-size gate under which the iteration is expected to contract, and
//! probes that measure the contraction and Lipschitz constants directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{duhamel_apply, uniform_times, KmParams, KmState, Trajectory};
use crate::error::{Error, Result};
use crate::lab::{ensemble_field, sample_seed};
use crate::spaces::{sobolev_norm, SobolevIndex};
use crate::spectral::{GridSpec, RealField};

/// Smallness gate built from empirical linear and bilinear constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellPosednessGate {
    pub c_ell_hat: f64,
    pub c_b_hat: f64,
    pub rho: f64,
    pub data_threshold: f64,
    /// `1 / (6 mu)`, infinite when `mu = 0`.
    pub horizon_bound: f64,
}

impl WellPosednessGate {
    pub fn new(c_ell_hat: f64, c_b_hat: f64, mu: f64) -> Result<Self> {
        for (name, value) in [("c_ell_hat", c_ell_hat), ("c_b_hat", c_b_hat)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mu must be nonnegative, got {mu}"
            )));
        }
        Ok(Self {
            c_ell_hat,
            c_b_hat,
            rho: 1.0 / (3.0 * c_b_hat),
            data_threshold: 1.0 / (18.0 * c_ell_hat * c_b_hat),
            horizon_bound: if mu == 0.0 {
                f64::INFINITY
            } else {
                1.0 / (6.0 * mu)
            },
        })
    }

    /// `2 rho C_b + 2 mu T`.
    pub fn contraction_factor(&self, mu: f64, horizon: f64) -> f64 {
        2.0 * self.rho * self.c_b_hat + 2.0 * mu * horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallnessDecision {
    pub data_norm: f64,
    pub data_threshold: f64,
    pub horizon: f64,
    pub horizon_bound: f64,
    pub admitted: bool,
    pub proof_safe: bool,
    pub gate: &'static str,
}

impl SmallnessDecision {
    pub fn explain(&self) -> String {
        let verdict = if self.admitted { "admitted" } else { "rejected" };
        format!(
            "{verdict} by empirical gate: data norm {:.6e} vs threshold {:.6e}, horizon {:.6e} vs bound {:.6e}",
            self.data_norm, self.data_threshold, self.horizon, self.horizon_bound
        )
    }
}

/// Admits `(phi, psi)` when `||phi||_{H^s} + ||psi||_{H^s} <= 1/(18 C_l C_b)`
/// and `T < 1/(6 mu)`.
pub fn smallness_check(
    phi: &RealField,
    psi: &RealField,
    idx: SobolevIndex,
    gate: &WellPosednessGate,
    horizon: f64,
) -> SmallnessDecision {
    let data_norm = sobolev_norm(phi, idx) + sobolev_norm(psi, idx);
    SmallnessDecision {
        data_norm,
        data_threshold: gate.data_threshold,
        horizon,
        horizon_bound: gate.horizon_bound,
        admitted: data_norm <= gate.data_threshold && horizon < gate.horizon_bound,
        proof_safe: idx.proof_safe(),
        gate: "empirical",
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    /// Absolute, or relative to `rho` when a gate is given.
    pub tol: f64,
    pub max_iter: usize,
    pub gate: Option<WellPosednessGate>,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            gate: None,
        }
    }
}

impl PicardSettings {
    pub fn effective_tol(&self) -> f64 {
        match self.gate {
            Some(g) => self.tol * g.rho,
            None => self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardDiagnostics {
    pub iterations: usize,
    pub successive_diffs: Vec<f64>,
    pub rate_estimate: f64,
    pub converged: bool,
    pub tol: f64,
}

/// Geometric mean of consecutive ratios, `(d_last / d_first)^{1/(n-1)}`.
fn rate_estimate(diffs: &[f64]) -> f64 {
    match diffs {
        [] | [_] => 0.0,
        [first, .., last] => {
            if *first == 0.0 {
                0.0
            } else {
                (last / first).powf(1.0 / (diffs.len() - 1) as f64)
            }
        }
    }
}

/// Iterates the Duhamel map from the zero trajectory until two successive
/// iterates differ by less than the tolerance in `X^s x X^s`.
pub fn picard_solve(
    phi: &RealField,
    psi: &RealField,
    params: KmParams,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    settings: &PicardSettings,
) -> Result<(Trajectory, PicardDiagnostics)> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            settings.tol
        )));
    }
    if settings.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if phi.grid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    let tol = settings.effective_tol();
    let mut current = Trajectory::zeros(*phi.grid(), horizon, n_t, params, idx)?;
    let mut diffs = Vec::new();
    for iteration in 1..=settings.max_iter {
        let next = duhamel_apply(&current, phi, psi)?;
        if let Some(gate) = settings.gate {
            let norm = next.pair_norm()?;
            let limit = 10.0 * gate.rho;
            if !(norm <= limit) {
                return Err(Error::Divergence {
                    iteration,
                    norm,
                    limit,
                });
            }
        }
        let diff = next.difference(&current)?.pair_norm()?;
        if !diff.is_finite() {
            return Err(Error::Divergence {
                iteration,
                norm: diff,
                limit: f64::INFINITY,
            });
        }
        diffs.push(diff);
        current = next;
        if diff < tol {
            let rate = rate_estimate(&diffs);
            return Ok((
                current,
                PicardDiagnostics {
                    iterations: iteration,
                    successive_diffs: diffs,
                    rate_estimate: rate,
                    converged: true,
                    tol,
                },
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iter,
        last_diff: *diffs.last().expect("max_iter >= 1"),
        tol,
    })
}

/// Random trajectory `w(t, x) = a(t) F(x) + b(t) G(x)` per component, built
/// from ensemble fields with smooth time profiles.
fn random_trajectory(
    seed: u64,
    grid: GridSpec,
    times: &[f64],
    params: KmParams,
    idx: SobolevIndex,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = *times.last().expect("nonempty times");
    let component = |rng: &mut ChaCha8Rng| -> Result<Vec<RealField>> {
        let f = ensemble_field(rng.random(), rng.random_range(0..64), grid, false)?;
        let g = ensemble_field(rng.random(), rng.random_range(0..64), grid, false)?;
        let (a0, a1): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (b0, b1): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        times
            .iter()
            .map(|&t| {
                let x = t / horizon;
                f.scaled(a0 + a1 * x).add(&g.scaled(b0 * (1.0 - x) + b1 * x * x))
            })
            .collect()
    };
    let us = component(&mut rng)?;
    let vs = component(&mut rng)?;
    let states = us
        .into_iter()
        .zip(vs)
        .map(|(u, v)| KmState::new(u, v))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), states, params, idx)
}

/// Rescales `w` to pair norm `target`.
fn rescaled(w: &Trajectory, target: f64) -> Result<Trajectory> {
    let norm = w.pair_norm()?;
    if norm == 0.0 {
        return Err(Error::InvalidArgument("cannot rescale a zero trajectory".into()));
    }
    Ok(w.scaled(target / norm))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionProbe {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub theoretical_factor: f64,
    pub rho: f64,
    pub skipped: usize,
}

/// Measures `||T(w1) - T(w2)|| / ||w1 - w2||` in `X^s x X^s` over seeded
/// pairs inside the ball of radius `rho`. Even pairs are independent draws
/// with norms in `[0.3, 1] rho`; odd pairs perturb `w1` by at most `0.1 rho`,
/// on `v` only for every other one.
#[allow(clippy::too_many_arguments)]
pub fn contraction_probe(
    phi: &RealField,
    psi: &RealField,
    params: KmParams,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    gate: &WellPosednessGate,
    seed: u64,
    n_pairs: usize,
) -> Result<ContractionProbe> {
    let decision = smallness_check(phi, psi, idx, gate, horizon);
    if !decision.admitted {
        return Err(Error::NotAdmitted(decision.explain()));
    }
    let grid = *phi.grid();
    let times = uniform_times(horizon, n_t)?;
    let rho = gate.rho;
    let results = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, usize)> {
            let mut skipped = 0;
            for attempt in 0u64.. {
                let pair_seed = sample_seed(seed, i.wrapping_mul(1 << 20).wrapping_add(attempt));
                let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
                let base = random_trajectory(rng.random(), grid, &times, params, idx)?;
                let w1 = rescaled(&base, rho * rng.random_range(0.3..0.9))?;
                let w2 = if i % 2 == 0 {
                    let other = random_trajectory(rng.random(), grid, &times, params, idx)?;
                    rescaled(&other, rho * rng.random_range(0.3..1.0))?
                } else {
                    let mut bump = random_trajectory(rng.random(), grid, &times, params, idx)?;
                    if i % 4 == 3 {
                        bump = v_only(&bump)?;
                    }
                    if bump.pair_norm()? == 0.0 {
                        skipped += 1;
                        continue;
                    }
                    let bump = rescaled(&bump, rho * rng.random_range(0.001..0.1))?;
                    add(&w1, &bump)?
                };
                let gap = w1.difference(&w2)?.pair_norm()?;
                if gap == 0.0 {
                    skipped += 1;
                    continue;
                }
                let image = duhamel_apply(&w1, phi, psi)?
                    .difference(&duhamel_apply(&w2, phi, psi)?)?
                    .pair_norm()?;
                return Ok((image / gap, skipped));
            }
            unreachable!("attempt counter is unbounded")
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = results.iter().map(|r| r.1).sum();
    let ratios: Vec<f64> = results.into_iter().map(|r| r.0).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ContractionProbe {
        ratios,
        max_ratio,
        theoretical_factor: gate.contraction_factor(params.mu, horizon),
        rho,
        skipped,
    })
}

fn v_only(w: &Trajectory) -> Result<Trajectory> {
    let states = w
        .states()
        .iter()
        .map(|s| KmState::new(RealField::zeros(*s.grid()), s.v().clone()))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(w.times().to_vec(), states, *w.params(), w.idx())
}

fn add(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    a.difference(&b.scaled(-1.0))
}

/// Initial data for the Lipschitz probe.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPair {
    pub first: (RealField, RealField),
    pub second: (RealField, RealField),
}

/// Seeded admitted data pairs: `d1` has data norm in `[0.2, 0.8]` of the
/// threshold, `d2 = d1 + e` with `e` of relative size in `[0.01, 0.2]`.
/// Every third pair perturbs `psi` only.
pub fn lipschitz_data_pairs(
    seed: u64,
    n_pairs: usize,
    grid: GridSpec,
    idx: SobolevIndex,
    gate: &WellPosednessGate,
) -> Result<Vec<DataPair>> {
    let threshold = gate.data_threshold;
    (0..n_pairs as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
            let field = |rng: &mut ChaCha8Rng| {
                ensemble_field(rng.random(), rng.random_range(0..64), grid, true)
            };
            let phi = field(&mut rng)?;
            let psi = field(&mut rng)?;
            let norm = sobolev_norm(&phi, idx) + sobolev_norm(&psi, idx);
            let scale = threshold * rng.random_range(0.2..0.8) / norm;
            let (phi, psi) = (phi.scaled(scale), psi.scaled(scale));
            let dphi = if i % 3 == 2 {
                RealField::zeros(grid)
            } else {
                field(&mut rng)?
            };
            let dpsi = field(&mut rng)?;
            let dnorm = sobolev_norm(&dphi, idx) + sobolev_norm(&dpsi, idx);
            let base = sobolev_norm(&phi, idx) + sobolev_norm(&psi, idx);
            let mut dscale = base * rng.random_range(0.01..0.2) / dnorm;
            // keep the perturbed datum admitted
            let room = (threshold - base) / dnorm;
            dscale = dscale.min(0.99 * room);
            let second = (phi.add(&dphi.scaled(dscale))?, psi.add(&dpsi.scaled(dscale))?);
            Ok(DataPair {
                first: (phi, psi),
                second,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzProbe {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `C_l / (1 - C)`.
    pub bound: f64,
    pub contraction_factor: f64,
    pub skipped: usize,
}

/// Solves both problems of every pair and returns
/// `||W(d1) - W(d2)||_{X^s x X^s} / ||d1 - d2||_{H^s x H^s}` with the bound
/// `C_l / (1 - C)`, `C` the measured contraction factor.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_probe(
    pairs: &[DataPair],
    params: KmParams,
    idx: SobolevIndex,
    horizon: f64,
    n_t: usize,
    gate: &WellPosednessGate,
    contraction_factor: f64,
    settings: &PicardSettings,
) -> Result<LipschitzProbe> {
    if !(0.0..1.0).contains(&contraction_factor) {
        return Err(Error::InvalidArgument(format!(
            "contraction factor must lie in [0, 1), got {contraction_factor}"
        )));
    }
    for pair in pairs {
        for (phi, psi) in [&pair.first, &pair.second] {
            let decision = smallness_check(phi, psi, idx, gate, horizon);
            if !decision.admitted {
                return Err(Error::NotAdmitted(decision.explain()));
            }
        }
    }
    let results = pairs
        .par_iter()
        .map(|pair| -> Result<Option<f64>> {
            let data_gap = sobolev_norm(&pair.first.0.sub(&pair.second.0)?, idx)
                + sobolev_norm(&pair.first.1.sub(&pair.second.1)?, idx);
            if data_gap == 0.0 {
                return Ok(None);
            }
            let (w1, _) = picard_solve(&pair.first.0, &pair.first.1, params, idx, horizon, n_t, settings)?;
            let (w2, _) =
                picard_solve(&pair.second.0, &pair.second.1, params, idx, horizon, n_t, settings)?;
            Ok(Some(w1.difference(&w2)?.pair_norm()? / data_gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let ratios: Vec<f64> = results.into_iter().flatten().collect();
    Ok(LipschitzProbe {
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        bound: gate.c_ell_hat / (1.0 - contraction_factor),
        contraction_factor,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MuSign;
    use crate::spectral::{forward_transform, inverse_transform, random_band_limited_field};
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(128, 16.0 * PI).unwrap()
    }

    fn idx() -> SobolevIndex {
        SobolevIndex::new(1.0).unwrap()
    }

    #[test]
    fn gate_arithmetic() {
        let gate = WellPosednessGate::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(gate.rho, 1.0 / 3.0);
        assert!((gate.data_threshold - 0.055_555_555_555_555_6).abs() < 1e-15);
        assert_eq!(gate.data_threshold, 1.0 / 18.0);
        assert_eq!(WellPosednessGate::new(1.0, 1.0, 0.0).unwrap().horizon_bound, f64::INFINITY);
        assert!((gate.contraction_factor(1.0, 1.0 / 12.0) - 5.0 / 6.0).abs() < 1e-15);
        assert!(WellPosednessGate::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_data_admitted() {
        let gate = WellPosednessGate::new(2.0, 3.0, 1.0).unwrap();
        let z = RealField::zeros(grid());
        let d = smallness_check(&z, &z, idx(), &gate, 0.1);
        assert!(d.admitted);
        assert_eq!(d.data_norm, 0.0);
    }

    #[test]
    fn horizon_rejection() {
        let gate = WellPosednessGate::new(1.0, 1.0, 2.0).unwrap();
        let z = RealField::zeros(grid());
        let d = smallness_check(&z, &z, idx(), &gate, 0.1);
        assert!(!d.admitted);
        assert!(d.explain().contains("rejected"));
    }

    #[test]
    fn zero_data_converges_in_one_iteration() {
        let z = RealField::zeros(grid());
        let params = KmParams::new(1.0, MuSign::Paper).unwrap();
        let (traj, diag) =
            picard_solve(&z, &z, params, idx(), 0.1, 10, &PicardSettings::default()).unwrap();
        assert_eq!(diag.iterations, 1);
        assert_eq!(diag.successive_diffs, vec![0.0]);
        assert!(traj.u_slices().all(|u| u.max_abs() == 0.0));
    }

    #[test]
    fn heat_flow_reduction() {
        let g = grid();
        let phi = random_band_limited_field(3, 10, 0.05, g).unwrap();
        let z = RealField::zeros(g);
        let params = KmParams::new(1.0, MuSign::Paper).unwrap();
        let (traj, diag) =
            picard_solve(&phi, &z, params, idx(), 0.2, 20, &PicardSettings::default()).unwrap();
        assert!(diag.converged);
        let phi_hat = forward_transform(&phi);
        for (t, state) in traj.times().iter().zip(traj.states()) {
            assert_eq!(state.v().max_abs(), 0.0);
            let exact = inverse_transform(&phi_hat.heat(*t)).unwrap();
            assert!(state.u().sub(&exact).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn converged_run_is_self_consistent() {
        let g = grid();
        let phi = random_band_limited_field(5, 8, 0.05, g).unwrap();
        let psi = random_band_limited_field(6, 8, 0.05, g).unwrap();
        let params = KmParams::new(0.5, MuSign::Epidemiological).unwrap();
        let settings = PicardSettings::default();
        let (traj, diag) = picard_solve(&phi, &psi, params, idx(), 0.1, 20, &settings).unwrap();
        assert_eq!(diag.successive_diffs.len(), diag.iterations);
        assert!(diag.rate_estimate >= 0.0 && diag.rate_estimate < 1.0);
        let again = duhamel_apply(&traj, &phi, &psi).unwrap();
        assert!(again.difference(&traj).unwrap().pair_norm().unwrap() < 2.0 * settings.tol);
        let diffs = &diag.successive_diffs;
        assert!(diffs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn nonconvergence_is_reported() {
        let g = grid();
        let phi = random_band_limited_field(5, 8, 0.05, g).unwrap();
        let params = KmParams::new(0.5, MuSign::Paper).unwrap();
        let settings = PicardSettings {
            tol: 1e-14,
            max_iter: 2,
            gate: None,
        };
        let err = picard_solve(&phi, &phi, params, idx(), 0.1, 10, &settings).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
    }

    #[test]
    fn divergence_is_reported_when_gated() {
        let g = grid();
        let phi = random_band_limited_field(5, 8, 100.0, g).unwrap();
        let params = KmParams::new(0.5, MuSign::Paper).unwrap();
        let settings = PicardSettings {
            gate: Some(WellPosednessGate::new(1.0, 1.0, 0.5).unwrap()),
            ..PicardSettings::default()
        };
        let err = picard_solve(&phi, &phi, params, idx(), 0.1, 10, &settings).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 1, .. }));
    }

    #[test]
    fn epidemiological_mass_of_u_decreases() {
        let g = grid();
        let phi = random_band_limited_field(8, 6, 0.02, g).unwrap().map(|x| x + 0.05);
        let psi = random_band_limited_field(9, 6, 0.02, g).unwrap().map(|x| x + 0.05);
        assert!(phi.samples().iter().chain(psi.samples()).all(|x| *x >= 0.0));
        let params = KmParams::new(0.5, MuSign::Epidemiological).unwrap();
        let (traj, _) =
            picard_solve(&phi, &psi, params, idx(), 0.2, 20, &PicardSettings::default()).unwrap();
        let mass: Vec<f64> = traj.u_slices().map(RealField::integral).collect();
        assert!(mass.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn contraction_probe_rejects_large_horizon() {
        let gate = WellPosednessGate::new(1.0, 1.0, 1.0).unwrap();
        let z = RealField::zeros(grid());
        let params = KmParams::new(1.0, MuSign::Paper).unwrap();
        let err = contraction_probe(&z, &z, params, idx(), 0.5, 10, &gate, 1, 2).unwrap_err();
        match err {
            Error::NotAdmitted(msg) => assert!(msg.contains("1.666667e-1")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn contraction_probe_ratios() {
        let gate = WellPosednessGate::new(1.0, 2.0, 1.0).unwrap();
        let z = RealField::zeros(grid());
        let params = KmParams::new(1.0, MuSign::Paper).unwrap();
        let probe = contraction_probe(&z, &z, params, idx(), 1.0 / 12.0, 12, &gate, 4, 8).unwrap();
        assert_eq!(probe.ratios.len(), 8);
        assert!(probe.ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        assert!(probe.ratios.iter().all(|r| *r <= probe.max_ratio));
        assert!((probe.theoretical_factor - 5.0 / 6.0).abs() < 1e-12);
        let again = contraction_probe(&z, &z, params, idx(), 1.0 / 12.0, 12, &gate, 4, 8).unwrap();
        assert_eq!(probe, again);
    }

    #[test]
    fn lipschitz_identical_pair_is_skipped() {
        let g = grid();
        let gate = WellPosednessGate::new(1.0, 1.0, 1.0).unwrap();
        let phi = random_band_limited_field(1, 4, 0.01, g).unwrap();
        let pair = DataPair {
            first: (phi.clone(), phi.clone()),
            second: (phi.clone(), phi),
        };
        let params = KmParams::new(1.0, MuSign::Paper).unwrap();
        let probe = lipschitz_probe(
            &[pair],
            params,
            idx(),
            0.1,
            10,
            &gate,
            0.5,
            &PicardSettings::default(),
        )
        .unwrap();
        assert_eq!(probe.skipped, 1);
        assert!(probe.ratios.is_empty());
        assert_eq!(probe.bound, 2.0);
    }

    #[test]
    fn lipschitz_pairs_are_admitted_and_finite() {
        let g = grid();
        let gate = WellPosednessGate::new(2.0, 1.0, 1.0).unwrap();
        let pairs = lipschitz_data_pairs(3, 4, g, idx(), &gate).unwrap();
        let params = KmParams::new(1.0, MuSign::Paper).unwrap();
        let probe = lipschitz_probe(
            &pairs,
            params,
            idx(),
            0.1,
            10,
            &gate,
            0.5,
            &PicardSettings::default(),
        )
        .unwrap();
        assert_eq!(probe.ratios.len(), 4);
        assert!(probe.ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    }
}
