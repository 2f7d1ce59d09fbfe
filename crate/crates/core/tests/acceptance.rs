//! Acceptance suite. Prints one PASS/FAIL line per criterion. Exits nonzero
//! when the failing set differs from `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use km_spectral::dynamics::{mass_balance_residual, KmParams, MuSign, Trajectory};
use km_spectral::lab::{
    verify_beta_lemma, verify_bilinear, verify_heat_lp_lq, verify_linear_estimate,
    verify_riesz_smoothing, BetaLemmaCase,
};
use km_spectral::oracles::{rk4_sir, splitting_solve};
use km_spectral::picard::{
    contraction_probe, lipschitz_data_pairs, lipschitz_probe, picard_solve, smallness_check,
    PicardSettings, WellPosednessGate,
};
use km_spectral::spaces::{sobolev_norm, LpExponent, SobolevIndex};
use km_spectral::spectral::{
    forward_transform, gaussian_bump, heat_semigroup, inverse_transform,
    random_band_limited_field, riesz_derivative, GridSpec, RealField, SpectralField,
};
use num_complex::Complex64;

const SEED: u64 = 20240611;

/// Criteria that fail for reasons recorded in the project notes.
const KNOWN_FAILURES: [usize; 2] = [9, 11];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> km_spectral::Result<Outcome>;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n, 32.0 * PI).unwrap()
}

fn idx(s: f64) -> SobolevIndex {
    SobolevIndex::new(s).unwrap()
}

fn single_mode(g: GridSpec, k: i64) -> SpectralField {
    let mut m = SpectralField::zeros(g);
    m.set_coefficient(k, Complex64::new(0.5, 0.0));
    m.set_coefficient(-k, Complex64::new(0.5, 0.0));
    m
}

fn spectral_exactness() -> km_spectral::Result<Outcome> {
    let g = GridSpec::default();
    let mut worst = 0.0_f64;
    for k in [1_i64, 7, 64, 300, 511] {
        let xi = g.frequency(k);
        let mode = single_mode(g, k);
        let field = inverse_transform(&mode)?;
        for t in [0.0, 0.01, 1.0, 3.0] {
            let out = inverse_transform(&heat_semigroup(&mode, t))?;
            let factor = (-t * xi * xi).exp();
            for (a, b) in out.samples().iter().zip(field.samples()) {
                worst = worst.max((a - factor * b).abs() / factor);
            }
        }
        for r in [-0.25, 0.5, 1.0, 1.9] {
            let out = riesz_derivative(&mode, r);
            let factor = xi.abs().powf(r);
            let c = out.coefficient(k);
            worst = worst.max((c - Complex64::new(0.5 * factor, 0.0)).norm() / (0.5 * factor));
        }
    }
    let f = random_band_limited_field(SEED, 400, 1.0, g)?;
    let back = inverse_transform(&forward_transform(&f))?;
    let roundtrip = back.sub(&f)?.max_abs() / f.max_abs();
    Ok(outcome(
        worst <= 1e-12 && roundtrip <= 1e-12,
        format!("max multiplier error {worst:.2e}, roundtrip {roundtrip:.2e}"),
    ))
}

fn heat_lp_lq_suite() -> km_spectral::Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (q, p) in [
        (LpExponent::Two, LpExponent::Two),
        (LpExponent::Two, LpExponent::Four),
        (LpExponent::One, LpExponent::Infinity),
    ] {
        let r = verify_heat_lp_lq(SEED, 100, q, p, &[0.01, 0.1, 1.0], GridSpec::default())?;
        pass &= r.pass && r.max_ratio <= 1.0 + 1e-6;
        parts.push(format!("({},{}) {:.6}", q.label(), p.label(), r.max_ratio));
    }
    Ok(outcome(pass, parts.join(", ")))
}

fn riesz_suite() -> km_spectral::Result<Outcome> {
    let reports = verify_riesz_smoothing(
        SEED,
        100,
        &[0.0, 0.5, 1.0, 1.5],
        &[0.01, 0.1, 1.0],
        GridSpec::default(),
    )?;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &reports {
        let sharp = r.bound_constant.unwrap();
        let fraction = r.parameters["extremizer_fraction"].as_f64().unwrap();
        pass &= r.max_ratio <= sharp + 1e-9 && fraction >= 0.99;
        parts.push(format!(
            "s={} max {:.6}/{:.6} extremizer {:.4}",
            r.parameters["s"], r.max_ratio, sharp, fraction
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn beta_suite() -> km_spectral::Result<Outcome> {
    let report = verify_beta_lemma(&BetaLemmaCase::standard_set(&[0.1, 1.0, 10.0])?)?;
    let pi = BetaLemmaCase::new(0.5, 0.5, 1.0)?.integral()?;
    let gap = report.parameters["max_abs_deviation"].as_f64().unwrap();
    Ok(outcome(
        report.pass && (pi - PI).abs() <= 1e-8,
        format!(
            "{} cases, max deviation {gap:.2e}, pi case error {:.2e}",
            report.n_samples,
            (pi - PI).abs()
        ),
    ))
}

fn constants_stability() -> km_spectral::Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.0, 1.0, 1.9] {
        let i = idx(s);
        let run = |n, n_t| -> km_spectral::Result<(f64, f64)> {
            Ok((
                verify_linear_estimate(SEED, 100, i, 0.1, n_t, grid(n))?.max_ratio,
                verify_bilinear(SEED, 100, i, 0.1, n_t, grid(n))?.max_ratio,
            ))
        };
        let base = run(512, 100)?;
        let time = run(512, 200)?;
        let space = run(1024, 100)?;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        let dt = rel(base.0, time.0).max(rel(base.1, time.1));
        let dx = rel(base.0, space.0).max(rel(base.1, space.1));
        let finite = [base, time, space]
            .iter()
            .all(|(a, b)| a.is_finite() && b.is_finite());
        pass &= finite && dt < 0.02 && dx < 0.05;
        parts.push(format!(
            "s={s}: C_l {:.4} C_b {:.4} (n_t change {:.2e}, n change {:.2e})",
            base.0, base.1, dt, dx
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn sir_reduction() -> km_spectral::Result<Outcome> {
    let g = GridSpec::default();
    let params = KmParams::new(0.5, MuSign::Epidemiological)?;
    let phi = RealField::constant(g, 0.02);
    let psi = RealField::constant(g, 0.01);
    let (traj, diag) = picard_solve(
        &phi,
        &psi,
        params,
        idx(1.0),
        0.2,
        200,
        &PicardSettings::default(),
    )?;
    let ode = rk4_sir(0.02, 0.01, 0.5, MuSign::Epidemiological, 0.2, 1e-4)?;
    let mut spread = 0.0_f64;
    let mut gap = 0.0_f64;
    for (t, state) in traj.times().iter().zip(traj.states()) {
        for f in [state.u(), state.v()] {
            spread = spread.max(f.without_mean().max_abs());
        }
        let (u, v) = ode.sample(*t).expect("inside the horizon");
        gap = gap.max((state.u().mean() - u).abs()).max((state.v().mean() - v).abs());
    }
    Ok(outcome(
        spread <= 1e-10 && gap <= 1e-6,
        format!(
            "spatial spread {spread:.2e}, RK4 gap {gap:.2e}, {} iterations",
            diag.iterations
        ),
    ))
}

/// Gate from empirical constants measured on the given configuration.
fn measured_gate(s: f64, horizon: f64, n_t: usize, g: GridSpec, mu: f64) -> km_spectral::Result<WellPosednessGate> {
    let c_ell = verify_linear_estimate(SEED, 100, idx(s), horizon, n_t, g)?.max_ratio;
    let c_b = verify_bilinear(SEED, 100, idx(s), horizon, n_t, g)?.max_ratio;
    WellPosednessGate::new(c_ell, c_b, mu)
}

/// Band-limited data scaled to `fraction` of the gate's threshold.
fn admitted_data(
    g: GridSpec,
    s: f64,
    gate: &WellPosednessGate,
    fraction: f64,
) -> km_spectral::Result<(RealField, RealField)> {
    let phi = random_band_limited_field(SEED, 16, 1.0, g)?;
    let psi = random_band_limited_field(SEED + 1, 16, 1.0, g)?;
    let norm = sobolev_norm(&phi, idx(s)) + sobolev_norm(&psi, idx(s));
    let c = fraction * gate.data_threshold / norm;
    Ok((phi.scaled(c), psi.scaled(c)))
}

fn cross_solver() -> km_spectral::Result<Outcome> {
    let g = grid(512);
    let (horizon, n_t) = (0.05, 50);
    let params = KmParams::new(1.0, MuSign::Paper)?;
    let gate = measured_gate(1.0, horizon, n_t, g, params.mu)?;
    let (phi, psi) = admitted_data(g, 1.0, &gate, 0.5)?;
    let decision = smallness_check(&phi, &psi, idx(1.0), &gate, horizon);
    let settings = PicardSettings {
        gate: Some(gate),
        ..PicardSettings::default()
    };
    let (picard, _) = picard_solve(&phi, &psi, params, idx(1.0), horizon, n_t, &settings)?;
    let split = splitting_solve(&phi, &psi, &params, idx(1.0), horizon, horizon / 2000.0)?;
    let gap = picard.sup_l2_distance(&split.subsampled(2000 / n_t)?)?;
    Ok(outcome(
        decision.admitted && gap <= 1e-5,
        format!(
            "admitted {} (data {:.3e} / threshold {:.3e}), sup-L2 gap {gap:.2e}",
            decision.admitted, decision.data_norm, decision.data_threshold
        ),
    ))
}

fn heat_reduction() -> km_spectral::Result<Outcome> {
    let g = GridSpec::default();
    let phi = random_band_limited_field(SEED, 32, 0.1, g)?;
    let psi = RealField::zeros(g);
    let params = KmParams::new(1.0, MuSign::Paper)?;
    let (traj, _) = picard_solve(&phi, &psi, params, idx(1.0), 0.1, 50, &PicardSettings::default())?;
    let phi_hat = forward_transform(&phi);
    let mut v_max = 0.0_f64;
    let mut u_gap = 0.0_f64;
    for (t, state) in traj.times().iter().zip(traj.states()) {
        v_max = v_max.max(state.v().max_abs());
        let exact = inverse_transform(&phi_hat.heat(*t))?;
        u_gap = u_gap.max(state.u().sub(&exact)?.max_abs());
    }
    Ok(outcome(
        v_max <= 1e-12 && u_gap <= 1e-10,
        format!("max |v| {v_max:.2e}, max |u - S(t)phi| {u_gap:.2e}"),
    ))
}

fn contraction() -> km_spectral::Result<Outcome> {
    let g = GridSpec::default();
    let mu = 1.0;
    let horizon = 1.0 / (12.0 * mu);
    let n_t = 50;
    let s = 1.0;
    let params = KmParams::new(mu, MuSign::Paper)?;
    let gate = measured_gate(s, horizon, n_t, g, mu)?;
    let (phi, psi) = admitted_data(g, s, &gate, 0.5)?;
    let probe = contraction_probe(&phi, &psi, params, idx(s), horizon, n_t, &gate, SEED, 50)?;
    let settings = PicardSettings {
        gate: Some(gate),
        ..PicardSettings::default()
    };
    let (_, diag) = picard_solve(&phi, &psi, params, idx(s), horizon, n_t, &settings)?;
    let decreasing = diag.successive_diffs.windows(2).all(|w| w[1] < w[0]);
    let rate = diag.rate_estimate;
    let within = rate <= 2.0 * probe.max_ratio && rate >= 0.5 * probe.max_ratio;
    let all_below = probe.ratios.iter().all(|r| *r < 1.0);
    Ok(outcome(
        all_below && probe.max_ratio <= 0.9 && decreasing && within,
        format!(
            "max ratio {:.4} (theory {:.4}), Picard rate {:.4} over {} iterations, diffs decreasing {}; \
             one-sided rate <= 2 x max ratio {}",
            probe.max_ratio,
            probe.theoretical_factor,
            rate,
            diag.iterations,
            decreasing,
            rate <= 2.0 * probe.max_ratio
        ),
    ))
}

fn lipschitz() -> km_spectral::Result<Outcome> {
    let g = grid(512);
    let mu = 1.0;
    let horizon = 1.0 / (12.0 * mu);
    let n_t = 50;
    let params = KmParams::new(mu, MuSign::Paper)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.0, 1.0] {
        let gate = measured_gate(s, horizon, n_t, g, mu)?;
        let (phi, psi) = admitted_data(g, s, &gate, 0.5)?;
        let contraction =
            contraction_probe(&phi, &psi, params, idx(s), horizon, n_t, &gate, SEED, 50)?;
        let pairs = lipschitz_data_pairs(SEED, 20, g, idx(s), &gate)?;
        let settings = PicardSettings {
            gate: Some(gate),
            ..PicardSettings::default()
        };
        let probe = lipschitz_probe(
            &pairs,
            params,
            idx(s),
            horizon,
            n_t,
            &gate,
            contraction.max_ratio,
            &settings,
        )?;
        pass &= probe.ratios.len() == 20 && probe.ratios.iter().all(|r| *r <= probe.bound);
        parts.push(format!(
            "s={s}: max ratio {:.4} <= bound {:.4}",
            probe.max_ratio, probe.bound
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn generic_solve(n_t: usize) -> km_spectral::Result<Trajectory> {
    let g = grid(512);
    let phi = gaussian_bump(g, -3.0, 4.0, 0.05)?.add(&random_band_limited_field(SEED, 8, 0.05, g)?)?;
    let psi = gaussian_bump(g, 5.0, 3.0, 0.04)?;
    let params = KmParams::new(1.0, MuSign::Paper)?;
    let settings = PicardSettings {
        tol: 1e-13,
        ..PicardSettings::default()
    };
    Ok(picard_solve(&phi, &psi, params, idx(0.0), 0.2, n_t, &settings)?.0)
}

fn mass_balance() -> km_spectral::Result<Outcome> {
    let coarse = max_abs(&mass_balance_residual(&generic_solve(100)?)?);
    let fine = max_abs(&mass_balance_residual(&generic_solve(200)?)?);
    let order = coarse / fine;

    let g = GridSpec::default();
    let params = KmParams::new(0.5, MuSign::Epidemiological)?;
    let (traj, _) = picard_solve(
        &RealField::constant(g, 0.02),
        &RealField::constant(g, 0.01),
        params,
        idx(1.0),
        0.2,
        400,
        &PicardSettings::default(),
    )?;
    let sir = max_abs(&mass_balance_residual(&traj)?);
    Ok(outcome(
        (3.5..=4.5).contains(&order) && sir <= 1e-8,
        format!("refinement ratio {order:.3}, SIR scenario residual {sir:.3e} at n_t = 400"),
    ))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

const DETERMINISM_CONFIG: &str = "\
[solver]
n_t = 20
[experiment]
n_samples = 20
n_pairs = 8
oracle_steps = 400
[sweep]
command = \"solve\"
s = [0.0, 1.0]
T = [0.02, 0.05]
workers = 3
";

fn determinism() -> km_spectral::Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("config.toml");
    fs::write(&config, DETERMINISM_CONFIG)?;
    let runs: [&[&str]; 7] = [
        &["solve", "--fields"],
        &["solve", "--format", "json"],
        &["oracle"],
        &["verify"],
        &["contraction"],
        &["lipschitz"],
        &["sweep"],
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut listings = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("run{i}_{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_kmsir"))
                .args(*args)
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .args(["--seed", "7"])
                .stderr(std::process::Stdio::null())
                .status()?;
            if status.code() != Some(0) {
                return Ok(outcome(false, format!("`kmsir {}` exited with {status}", args.join(" "))));
            }
            listings.push((out.clone(), files_under(&out)));
        }
        let (a, b) = (&listings[0], &listings[1]);
        if a.1 != b.1 {
            mismatches.push(format!("{}: file sets differ", args[0]));
            continue;
        }
        for rel in &a.1 {
            compared += 1;
            if fs::read(a.0.join(rel))? != fs::read(b.0.join(rel))? {
                mismatches.push(format!("{}: {}", args[0], rel.display()));
            }
        }
    }
    Ok(outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} commands, {compared} files byte-identical across reruns", runs.len())
        } else {
            format!("differences in {}", mismatches.join(", "))
        },
    ))
}

fn main() {
    let criteria: [(&str, Check, Option<u64>); 12] = [
        ("spectral exactness", spectral_exactness, Some(1)),
        ("heat Lp-Lq suite", heat_lp_lq_suite, Some(30)),
        ("Riesz smoothing suite", riesz_suite, Some(30)),
        ("Beta integral suite", beta_suite, Some(10)),
        ("linear/bilinear constants", constants_stability, Some(300)),
        ("SIR reduction", sir_reduction, Some(60)),
        ("cross-solver agreement", cross_solver, Some(120)),
        ("heat reduction", heat_reduction, None),
        ("contraction", contraction, Some(300)),
        ("Lipschitz dependence", lipschitz, Some(300)),
        ("mass balance", mass_balance, None),
        ("determinism", determinism, None),
    ];
    let mut failures = Vec::new();
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < Duration::from_secs(l));
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = limit.map_or(String::new(), |l| format!(" / {l} s"));
        println!(
            "criterion {:2} {:<26} {}  {} [{:.2} s{budget}]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failures.push(i + 1);
        }
    }
    if failures.is_empty() {
        println!("all criteria pass");
    } else {
        println!("failed criteria: {failures:?} (known: {KNOWN_FAILURES:?})");
    }
    if failures != KNOWN_FAILURES {
        std::process::exit(1);
    }
}
