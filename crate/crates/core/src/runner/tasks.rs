use serde::Serialize;
use serde_json::{json, Value};

use super::config::{OutputFormat, RunConfig};
use super::output::{to_csv, to_json};
use crate::dynamics::{mass_balance_residual, nondimensionalize, total_mass, Trajectory};
use crate::error::{Error, Result};
use crate::lab::{
    alpha_case_coverage, verify_beta_lemma, verify_bilinear, verify_heat_lp_lq, verify_hls,
    verify_lem1_components, verify_linear_estimate, verify_riesz_smoothing, AlphaCase,
    BetaLemmaCase, EstimateReport,
};
use crate::oracles::{rk4_sir, splitting_solve};
use crate::picard::{
    contraction_probe, lipschitz_data_pairs, lipschitz_probe, picard_solve, smallness_check,
    PicardSettings, WellPosednessGate,
};
use crate::spaces::{lp_norm, sobolev_norm, LpExponent, SobolevIndex, SliceNorms};
use crate::spectral::RealField;

/// Names accepted in `experiment.checks`.
pub const CHECKS: [&str; 7] = [
    "heat_lp_lq",
    "riesz_smoothing",
    "hls",
    "linear_estimate",
    "bilinear_estimate",
    "lem1_components",
    "beta_lemma",
];

/// Files produced by one command, relative to its output directory, and
/// the conjunction of its pass flags.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub pass: bool,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn add_reports(&mut self, reports: &[EstimateReport]) -> Result<()> {
        self.add("reports.json", to_json(reports)?);
        Ok(())
    }
}

const TRAJECTORY_COLUMNS: [&str; 9] = [
    "time",
    "l2_u",
    "l2_v",
    "hs_u",
    "hs_v",
    "wl4_u",
    "wl4_v",
    "mass",
    "mass_residual",
];

fn trajectory_table(traj: &Trajectory) -> Result<Vec<Vec<Option<f64>>>> {
    let idx = traj.idx();
    let mass = total_mass(traj);
    let residual = mass_balance_residual(traj)?;
    let last = traj.times().len() - 1;
    Ok(traj
        .times()
        .iter()
        .zip(traj.states())
        .enumerate()
        .map(|(n, (&t, state))| {
            let u = SliceNorms::compute(t, state.u(), idx);
            let v = SliceNorms::compute(t, state.v(), idx);
            let res = if n == 0 || n == last {
                None
            } else {
                Some(residual[n - 1])
            };
            vec![
                Some(t),
                Some(lp_norm(state.u(), LpExponent::Two)),
                Some(lp_norm(state.v(), LpExponent::Two)),
                Some(u.sobolev),
                Some(v.sobolev),
                Some(u.weighted_l4(idx.alpha())),
                Some(v.weighted_l4(idx.alpha())),
                Some(mass[n]),
                res,
            ]
        })
        .collect())
}

fn write_trajectory(
    out: &mut Artifacts,
    traj: &Trajectory,
    format: OutputFormat,
    fields: bool,
) -> Result<()> {
    let rows = trajectory_table(traj)?;
    match format {
        OutputFormat::Csv => out.add("trajectory.csv", to_csv(&TRAJECTORY_COLUMNS, &rows)),
        OutputFormat::Json => {
            let objects: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let map = TRAJECTORY_COLUMNS
                        .iter()
                        .zip(row)
                        .map(|(k, v)| (k.to_string(), json!(v)))
                        .collect::<serde_json::Map<_, _>>();
                    Value::Object(map)
                })
                .collect();
            out.add("trajectory.json", to_json(&objects)?);
        }
    }
    if fields {
        let grid = *traj.grid();
        for (n, state) in traj.states().iter().enumerate() {
            let rows: Vec<Vec<Option<f64>>> = (0..grid.n_points())
                .map(|j| {
                    vec![
                        Some(grid.x(j)),
                        Some(state.u().samples()[j]),
                        Some(state.v().samples()[j]),
                    ]
                })
                .collect();
            out.add(
                format!("fields/slice_{n:05}.csv"),
                to_csv(&["x", "u", "v"], &rows),
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GateRecord {
    source: &'static str,
    #[serde(flatten)]
    gate: WellPosednessGate,
}

fn gate(config: &RunConfig) -> Result<GateRecord> {
    let mu = config.params()?.mu;
    if let Some(g) = &config.gate {
        return Ok(GateRecord {
            source: "configured",
            gate: WellPosednessGate::new(g.c_ell_hat, g.c_b_hat, mu)?,
        });
    }
    let grid = config.grid_spec()?;
    let idx = config.idx()?;
    let e = &config.experiment;
    let s = &config.solver;
    let c_ell = verify_linear_estimate(e.seed, e.n_samples, idx, s.horizon, s.n_t, grid)?;
    let c_b = verify_bilinear(e.seed, e.n_samples, idx, s.horizon, s.n_t, grid)?;
    Ok(GateRecord {
        source: "measured",
        gate: WellPosednessGate::new(c_ell.max_ratio, c_b.max_ratio, mu)?,
    })
}

fn settings(config: &RunConfig, gate: Option<WellPosednessGate>) -> PicardSettings {
    PicardSettings {
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        gate,
    }
}

/// Data and linear coefficient actually solved for. With dimensional rates
/// the configured fields are read as `(S_0, I_0)` and `mu` is relabeled.
fn problem(config: &RunConfig) -> Result<(RealField, RealField, crate::dynamics::KmParams, Value)> {
    let (phi, psi) = config.data()?;
    let params = config.params()?;
    if params.rates.is_none() {
        return Ok((phi, psi, params, Value::Null));
    }
    let nd = nondimensionalize(&phi, &psi, &params)?;
    let scales = json!({
        "mu_eff": nd.mu_eff,
        "x_scale_u": nd.x_scale_u,
        "x_scale_v": nd.x_scale_v,
        "t_scale": nd.t_scale,
    });
    let mut solved = params;
    solved.mu = nd.mu_eff;
    Ok((nd.phi, nd.psi, solved, scales))
}

pub fn solve(config: &RunConfig, fields: bool) -> Result<Artifacts> {
    let idx = config.idx()?;
    let (phi, psi, params, scales) = problem(config)?;
    let s = &config.solver;
    let gate = if s.gated { Some(gate(config)?) } else { None };
    let decision = gate
        .as_ref()
        .map(|g| smallness_check(&phi, &psi, idx, &g.gate, s.horizon));
    let (traj, diag) = picard_solve(
        &phi,
        &psi,
        params,
        idx,
        s.horizon,
        s.n_t,
        &settings(config, gate.as_ref().map(|g| g.gate)),
    )?;
    let mut out = Artifacts {
        pass: diag.converged,
        ..Artifacts::default()
    };
    write_trajectory(&mut out, &traj, config.experiment.output_format, fields)?;
    out.add(
        "picard.json",
        to_json(&json!({
            "diagnostics": diag,
            "gate": gate,
            "decision": decision,
            "scales": scales,
            "proof_safe": idx.proof_safe(),
        }))?,
    );
    Ok(out)
}

fn comparison_report(name: &str, config: &RunConfig, gap: f64, extra: Value) -> EstimateReport {
    let tol = config.experiment.tolerance;
    let mut parameters = serde_json::Map::new();
    parameters.insert("T".into(), json!(config.solver.horizon));
    parameters.insert("n_t".into(), json!(config.solver.n_t));
    parameters.insert("oracle_steps".into(), json!(config.experiment.oracle_steps));
    if let Value::Object(m) = extra {
        parameters.extend(m);
    }
    EstimateReport {
        name: name.into(),
        parameters,
        n_samples: 1,
        seed: config.experiment.seed,
        max_ratio: gap,
        bound_constant: Some(tol),
        pass: gap <= tol,
    }
}

pub fn oracle(config: &RunConfig, fields: bool) -> Result<Artifacts> {
    let idx = config.idx()?;
    let (phi, psi, params, _) = problem(config)?;
    let s = &config.solver;
    let steps = config.experiment.oracle_steps;
    let (traj, _) = picard_solve(&phi, &psi, params, idx, s.horizon, s.n_t, &settings(config, None))?;
    let split = splitting_solve(&phi, &psi, &params, idx, s.horizon, s.horizon / steps as f64)?;
    let gap = traj.sup_l2_distance(&split.subsampled(steps / s.n_t)?)?;
    let mut reports = vec![comparison_report("splitting_agreement", config, gap, json!({}))];

    let constant = |f: &RealField| f.without_mean().max_abs() == 0.0;
    if constant(&phi) && constant(&psi) {
        let ode = rk4_sir(
            phi.mean(),
            psi.mean(),
            params.mu,
            params.mu_sign,
            s.horizon,
            s.horizon / steps as f64,
        )?;
        let mut spread = 0.0_f64;
        let mut gap = 0.0_f64;
        for (t, state) in traj.times().iter().zip(traj.states()) {
            spread = spread
                .max(state.u().without_mean().max_abs())
                .max(state.v().without_mean().max_abs());
            let (u, v) = ode.sample(*t).ok_or_else(|| {
                Error::InvalidArgument(format!("time {t} outside the RK4 trajectory"))
            })?;
            gap = gap
                .max((state.u().mean() - u).abs())
                .max((state.v().mean() - v).abs());
        }
        reports.push(comparison_report(
            "rk4_agreement",
            config,
            gap,
            json!({ "spatial_spread": spread }),
        ));
    }
    let mut out = Artifacts {
        pass: reports.iter().all(|r| r.pass),
        ..Artifacts::default()
    };
    write_trajectory(&mut out, &traj, config.experiment.output_format, fields)?;
    out.add_reports(&reports)?;
    Ok(out)
}

pub fn verify(config: &RunConfig) -> Result<Artifacts> {
    let grid = config.grid_spec()?;
    let idx = config.idx()?;
    let e = &config.experiment;
    let s = &config.solver;
    let (seed, n) = (e.seed, e.n_samples);
    let wanted = |name: &str| e.checks.is_empty() || e.checks.iter().any(|c| c == name);
    let times = [0.01, 0.1, 1.0];
    let mut reports = Vec::new();
    if wanted("heat_lp_lq") {
        for (q, p) in [
            (LpExponent::Two, LpExponent::Two),
            (LpExponent::Two, LpExponent::Four),
            (LpExponent::One, LpExponent::Infinity),
        ] {
            reports.push(verify_heat_lp_lq(seed, n, q, p, &times, grid)?);
        }
    }
    if wanted("riesz_smoothing") {
        reports.extend(verify_riesz_smoothing(seed, n, &[0.0, 0.5, 1.0, 1.5], &times, grid)?);
    }
    if wanted("hls") {
        reports.push(verify_hls(seed, n, 0.25, LpExponent::Two, LpExponent::Four, grid)?);
    }
    if wanted("linear_estimate") {
        reports.push(verify_linear_estimate(seed, n, idx, s.horizon, s.n_t, grid)?);
    }
    if wanted("bilinear_estimate") {
        reports.push(verify_bilinear(seed, n, idx, s.horizon, s.n_t, grid)?);
    }
    let mut coverage = None;
    if wanted("lem1_components") {
        // one exponent from each branch of the bilinear argument
        let partner = match AlphaCase::of(idx) {
            AlphaCase::First => 0.0,
            AlphaCase::Second => 1.0,
        };
        let mut indices = vec![idx, SobolevIndex::new(partner)?];
        indices.sort_by(|a, b| a.s().total_cmp(&b.s()));
        for i in &indices {
            let (hs, l4) = verify_lem1_components(seed, n, *i, s.horizon, s.n_t, grid)?;
            reports.push(hs);
            reports.push(l4);
        }
        coverage = Some(alpha_case_coverage(&indices));
    }
    if wanted("beta_lemma") {
        reports.push(verify_beta_lemma(&BetaLemmaCase::standard_set(&[0.1, 1.0, 10.0])?)?);
    }
    let mut out = Artifacts {
        pass: reports.iter().all(|r| r.pass) && coverage.as_ref().is_none_or(|c| c.covers_both),
        ..Artifacts::default()
    };
    out.add_reports(&reports)?;
    if let Some(c) = coverage {
        out.add("coverage.json", to_json(&c)?);
    }
    Ok(out)
}

pub fn contraction(config: &RunConfig) -> Result<Artifacts> {
    let idx = config.idx()?;
    let (phi, psi, params, _) = problem(config)?;
    let s = &config.solver;
    let e = &config.experiment;
    let gate = gate(config)?;
    let decision = smallness_check(&phi, &psi, idx, &gate.gate, s.horizon);
    if !decision.admitted {
        return Err(Error::NotAdmitted(decision.explain()));
    }
    let probe = contraction_probe(
        &phi, &psi, params, idx, s.horizon, s.n_t, &gate.gate, e.seed, e.n_pairs,
    )?;
    let (_, diag) = picard_solve(&phi, &psi, params, idx, s.horizon, s.n_t, &settings(config, Some(gate.gate)))?;
    let mut parameters = serde_json::Map::new();
    parameters.insert("s".into(), json!(idx.s()));
    parameters.insert("T".into(), json!(s.horizon));
    parameters.insert("n_t".into(), json!(s.n_t));
    parameters.insert("mu".into(), json!(params.mu));
    parameters.insert("rho".into(), json!(gate.gate.rho));
    parameters.insert("picard_rate".into(), json!(diag.rate_estimate));
    parameters.insert("gate".into(), json!("empirical"));
    let report = EstimateReport {
        name: "contraction".into(),
        parameters,
        n_samples: probe.ratios.len(),
        seed: e.seed,
        max_ratio: probe.max_ratio,
        bound_constant: Some(probe.theoretical_factor),
        pass: probe.ratios.iter().all(|r| *r < 1.0) && probe.max_ratio <= probe.theoretical_factor,
    };
    let mut out = Artifacts {
        pass: report.pass,
        ..Artifacts::default()
    };
    out.add_reports(&[report])?;
    out.add(
        "contraction.json",
        to_json(&json!({
            "gate": gate,
            "decision": decision,
            "probe": probe,
            "picard": diag,
        }))?,
    );
    Ok(out)
}

pub fn lipschitz(config: &RunConfig) -> Result<Artifacts> {
    let idx = config.idx()?;
    let grid = config.grid_spec()?;
    let (phi, psi, params, _) = problem(config)?;
    let s = &config.solver;
    let e = &config.experiment;
    let gate = gate(config)?;
    let probe = contraction_probe(
        &phi, &psi, params, idx, s.horizon, s.n_t, &gate.gate, e.seed, e.n_pairs,
    )?;
    let pairs = lipschitz_data_pairs(e.seed, e.n_pairs, grid, idx, &gate.gate)?;
    let lip = lipschitz_probe(
        &pairs,
        params,
        idx,
        s.horizon,
        s.n_t,
        &gate.gate,
        probe.max_ratio,
        &settings(config, Some(gate.gate)),
    )?;
    let data_norms: Vec<f64> = pairs
        .iter()
        .map(|p| sobolev_norm(&p.first.0, idx) + sobolev_norm(&p.first.1, idx))
        .collect();
    let mut parameters = serde_json::Map::new();
    parameters.insert("s".into(), json!(idx.s()));
    parameters.insert("T".into(), json!(s.horizon));
    parameters.insert("n_t".into(), json!(s.n_t));
    parameters.insert("contraction_factor".into(), json!(probe.max_ratio));
    parameters.insert("c_ell_hat".into(), json!(gate.gate.c_ell_hat));
    parameters.insert("gate".into(), json!("empirical"));
    let report = EstimateReport {
        name: "lipschitz".into(),
        parameters,
        n_samples: lip.ratios.len(),
        seed: e.seed,
        max_ratio: lip.max_ratio,
        bound_constant: Some(lip.bound),
        pass: !lip.ratios.is_empty() && lip.ratios.iter().all(|r| *r <= lip.bound),
    };
    let mut out = Artifacts {
        pass: report.pass,
        ..Artifacts::default()
    };
    out.add_reports(&[report])?;
    out.add(
        "lipschitz.json",
        to_json(&json!({
            "gate": gate,
            "probe": lip,
            "data_norms": data_norms,
        }))?,
    );
    Ok(out)
}
