//! The Kermack-McKendrick system on the torus,
//!
//! ```text
//! u_t = u_xx - u v
//! v_t = v_xx + u v + sigma mu v
//! ```
//!
//! in mild (Duhamel) form. `sigma` is `+1` for [`MuSign::Paper`] and `-1` for
//! [`MuSign::Epidemiological`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{pair_norm, xs_norm, SobolevIndex, XsNormReport};
use crate::spectral::{forward_transform, inverse_transform, GridSpec, RealField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSign {
    /// `v_t = v_xx + uv + mu v`.
    #[default]
    Paper,
    /// `v_t = v_xx + uv - mu v`, the sign of the dimensional I-equation.
    Epidemiological,
}

impl MuSign {
    pub fn sigma(self) -> f64 {
        match self {
            MuSign::Paper => 1.0,
            MuSign::Epidemiological => -1.0,
        }
    }
}

/// Dimensional transmission and diffusion rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalRates {
    pub beta: f64,
    pub d_s: f64,
    pub d_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmParams {
    pub mu: f64,
    pub mu_sign: MuSign,
    pub rates: Option<DimensionalRates>,
}

impl KmParams {
    pub fn new(mu: f64, mu_sign: MuSign) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mu must be finite and nonnegative, got {mu}"
            )));
        }
        Ok(Self {
            mu,
            mu_sign,
            rates: None,
        })
    }

    pub fn with_rates(mut self, rates: DimensionalRates) -> Result<Self> {
        for (name, v) in [("beta", rates.beta), ("d_s", rates.d_s), ("d_i", rates.d_i)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        self.rates = Some(rates);
        Ok(self)
    }

    /// Coefficient of `v` in the v-equation forcing, `sigma * mu`.
    pub fn linear_coefficient(&self) -> f64 {
        self.mu_sign.sigma() * self.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmState {
    u: RealField,
    v: RealField,
}

impl KmState {
    pub fn new(u: RealField, v: RealField) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            u: RealField::zeros(grid),
            v: RealField::zeros(grid),
        }
    }

    pub fn u(&self) -> &RealField {
        &self.u
    }

    pub fn v(&self) -> &RealField {
        &self.v
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            u: self.u.sub(&other.u)?,
            v: self.v.sub(&other.v)?,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.scaled(c),
            v: self.v.scaled(c),
        }
    }
}

/// Uniform time grid `t_n = n T / N_t`, `n = 0..=N_t`.
pub fn uniform_times(horizon: f64, n_t: usize) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time horizon must be positive, got {horizon}"
        )));
    }
    if n_t < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 time steps, got {n_t}"
        )));
    }
    Ok((0..=n_t)
        .map(|n| horizon * n as f64 / n_t as f64)
        .collect())
}

/// Time history of a [`KmState`] on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<KmState>,
    params: KmParams,
    idx: SobolevIndex,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: Vec<KmState>,
        params: KmParams,
        idx: SobolevIndex,
    ) -> Result<Self> {
        if times.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs at least 3 slices, got {}",
                times.len()
            )));
        }
        if times.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} time points but {} states",
                times.len(),
                states.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument("time grid must start at 0".into()));
        }
        let dt = times[1] - times[0];
        let uniform = times
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
        if !uniform {
            return Err(Error::InvalidArgument(
                "time grid must be strictly increasing and uniform".into(),
            ));
        }
        let grid = *states[0].grid();
        if states.iter().any(|s| *s.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            times,
            states,
            params,
            idx,
        })
    }

    pub fn zeros(
        grid: GridSpec,
        horizon: f64,
        n_t: usize,
        params: KmParams,
        idx: SobolevIndex,
    ) -> Result<Self> {
        let times = uniform_times(horizon, n_t)?;
        let states = vec![KmState::zeros(grid); times.len()];
        Self::new(times, states, params, idx)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[KmState] {
        &self.states
    }

    pub fn params(&self) -> &KmParams {
        &self.params
    }

    pub fn idx(&self) -> SobolevIndex {
        self.idx
    }

    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon() / self.n_steps() as f64
    }

    pub fn u_slices(&self) -> impl Iterator<Item = &RealField> {
        self.states.iter().map(KmState::u)
    }

    pub fn v_slices(&self) -> impl Iterator<Item = &RealField> {
        self.states.iter().map(KmState::v)
    }

    pub fn with_idx(mut self, idx: SobolevIndex) -> Self {
        self.idx = idx;
        self
    }

    pub fn with_params(mut self, params: KmParams) -> Self {
        self.params = params;
        self
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.times.len() != other.times.len() {
            return Err(Error::InvalidArgument(
                "trajectories have different time grids".into(),
            ));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: self.times.clone(),
            states,
            params: self.params,
            idx: self.idx,
        })
    }

    /// Every `stride`-th slice, starting at `t = 0`. The last slice must be
    /// kept, so `stride` has to divide the step count.
    pub fn subsampled(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.n_steps().is_multiple_of(stride) {
            return Err(Error::InvalidArgument(format!(
                "stride {stride} does not divide {} steps",
                self.n_steps()
            )));
        }
        Self::new(
            self.times.iter().step_by(stride).copied().collect(),
            self.states.iter().step_by(stride).cloned().collect(),
            self.params,
            self.idx,
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            times: self.times.clone(),
            states: self.states.iter().map(|s| s.scaled(c)).collect(),
            params: self.params,
            idx: self.idx,
        }
    }

    /// `X^s` norms of the two components.
    pub fn xs_norms(&self) -> Result<(XsNormReport, XsNormReport)> {
        Ok((
            xs_norm(&self.times, self.u_slices(), self.idx)?,
            xs_norm(&self.times, self.v_slices(), self.idx)?,
        ))
    }

    /// `||(u, v)||_{X^s x X^s}`.
    pub fn pair_norm(&self) -> Result<f64> {
        let (u, v) = self.xs_norms()?;
        Ok(pair_norm(&u, &v))
    }

    /// `sup_t max(||u||_{L^2}, ||v||_{L^2})` of the difference with `other`.
    pub fn sup_l2_distance(&self, other: &Self) -> Result<f64> {
        let diff = self.difference(other)?;
        Ok(diff
            .states
            .iter()
            .map(|s| {
                crate::spaces::lp_norm(s.u(), crate::spaces::LpExponent::Two)
                    .max(crate::spaces::lp_norm(s.v(), crate::spaces::LpExponent::Two))
            })
            .fold(0.0, f64::max))
    }
}

/// Initial data of the nondimensional system together with the scaling
/// bookkeeping that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NondimensionalData {
    pub phi: RealField,
    pub psi: RealField,
    pub mu_eff: f64,
    /// Physical length per nondimensional length for `u`, `sqrt(D_S / beta)`.
    pub x_scale_u: f64,
    /// Physical length per nondimensional length for `v`, `sqrt(D_I / beta)`.
    pub x_scale_v: f64,
    /// Physical time per nondimensional time, `1 / beta`.
    pub t_scale: f64,
}

/// Maps dimensional `(S_0, I_0)` and rates to nondimensional data.
///
/// The fields are expected on the target grid already; values are unchanged
/// by the coordinate rescaling and the linear coefficient is relabeled as
/// `mu * beta`.
pub fn nondimensionalize(
    s0: &RealField,
    i0: &RealField,
    params: &KmParams,
) -> Result<NondimensionalData> {
    let rates = params.rates.ok_or(Error::MissingDimensionalParameters)?;
    if s0.grid() != i0.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(NondimensionalData {
        phi: s0.clone(),
        psi: i0.clone(),
        mu_eff: params.mu * rates.beta,
        x_scale_u: (rates.d_s / rates.beta).sqrt(),
        x_scale_v: (rates.d_i / rates.beta).sqrt(),
        t_scale: 1.0 / rates.beta,
    })
}

/// Inverse of [`nondimensionalize`]: returns `(S_0, I_0, mu)`.
pub fn dimensionalize(
    data: &NondimensionalData,
    rates: &DimensionalRates,
) -> (RealField, RealField, f64) {
    (data.phi.clone(), data.psi.clone(), data.mu_eff / rates.beta)
}

/// Trapezoid approximation of `I(t_n) = int_0^{t_n} S(t_n - t') F(t') dt'` on
/// a uniform grid with step `dt`, for all `n`.
///
/// Uses the exact recurrence `I_n = S(dt)(I_{n-1} + dt/2 F_{n-1}) + dt/2 F_n`,
/// which reproduces the composite trapezoid sum over the stored slices.
pub fn duhamel_integral(dt: f64, forcing: &[SpectralField]) -> Vec<SpectralField> {
    let Some(first) = forcing.first() else {
        return Vec::new();
    };
    let grid = *first.grid();
    let damping: Vec<f64> = (0..grid.n_points())
        .map(|slot| {
            let xi = grid.frequency(grid.wavenumber(slot));
            (-dt * xi * xi).exp()
        })
        .collect();
    let half = 0.5 * dt;
    let mut out = Vec::with_capacity(forcing.len());
    let mut acc = SpectralField::zeros(grid);
    out.push(acc.clone());
    for n in 1..forcing.len() {
        acc.add_scaled(half, &forcing[n - 1]);
        let damped: Vec<_> = acc
            .coefficients()
            .iter()
            .zip(&damping)
            .map(|(c, d)| c * d)
            .collect();
        acc = SpectralField::from_coefficients(grid, damped).expect("length preserved");
        acc.add_scaled(half, &forcing[n]);
        out.push(acc.clone());
    }
    out
}

/// Dealiased spectrum of the pointwise product `u v`.
pub fn dealiased_product(u: &RealField, v: &RealField) -> Result<SpectralField> {
    Ok(forward_transform(&u.mul(v)?).dealiased())
}

/// One application of the Duhamel map `(T_1, T_2)` to `traj`:
///
/// ```text
/// T_1 = S(t) phi - int_0^t S(t - t') (u v) dt'
/// T_2 = S(t) psi + int_0^t S(t - t') (u v + sigma mu v) dt'
/// ```
pub fn duhamel_apply(traj: &Trajectory, phi: &RealField, psi: &RealField) -> Result<Trajectory> {
    let grid = *traj.grid();
    if *phi.grid() != grid || *psi.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let lin = traj.params().linear_coefficient();
    let mut forcing_u = Vec::with_capacity(traj.states.len());
    let mut forcing_v = Vec::with_capacity(traj.states.len());
    for state in &traj.states {
        let product = dealiased_product(state.u(), state.v())?;
        let mut fu = product.clone();
        fu.scale(-1.0);
        let mut fv = product;
        if lin != 0.0 {
            fv.add_scaled(lin, &forward_transform(state.v()));
        }
        forcing_u.push(fu);
        forcing_v.push(fv);
    }
    let dt = traj.dt();
    let integral_u = duhamel_integral(dt, &forcing_u);
    let integral_v = duhamel_integral(dt, &forcing_v);

    let phi_hat = forward_transform(phi);
    let psi_hat = forward_transform(psi);
    let mut states = Vec::with_capacity(traj.states.len());
    states.push(KmState::new(phi.clone(), psi.clone())?);
    for n in 1..traj.times.len() {
        let t = traj.times[n];
        let mut u_hat = phi_hat.heat(t);
        u_hat.add_scaled(1.0, &integral_u[n]);
        let mut v_hat = psi_hat.heat(t);
        v_hat.add_scaled(1.0, &integral_v[n]);
        states.push(KmState::new(
            inverse_transform(&u_hat)?,
            inverse_transform(&v_hat)?,
        )?);
    }
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
        params: traj.params,
        idx: traj.idx,
    })
}

/// Total mass `int (u + v) dx` per slice.
pub fn total_mass(traj: &Trajectory) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| s.u().integral() + s.v().integral())
        .collect()
}

/// Central-difference `d/dt int (u + v) dx - sigma mu int v dx` at each
/// interior slice.
pub fn mass_balance_residual(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.times.len() < 3 {
        return Err(Error::InvalidArgument(
            "mass balance needs at least 3 slices".into(),
        ));
    }
    let mass = total_mass(traj);
    let lin = traj.params.linear_coefficient();
    let dt = traj.dt();
    Ok((1..traj.times.len() - 1)
        .map(|n| {
            let rate = (mass[n + 1] - mass[n - 1]) / (2.0 * dt);
            rate - lin * traj.states[n].v().integral()
        })
        .collect())
}
