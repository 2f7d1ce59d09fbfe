//! Run configuration: a TOML file with sections `grid`, `model`, `space`,
//! `solver`, `experiment`, `data`, `gate` and `sweep`. Every key has a
//! default, unknown keys are rejected, and `--set section.key=value`
//! overrides are applied to the parsed table before validation.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DimensionalRates, KmParams, MuSign};
use crate::error::{Error, Result};
use crate::spaces::SobolevIndex;
use crate::spectral::{gaussian_bump, random_band_limited_field, GridSpec, RealField};

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_points: usize,
    pub half_length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_points: 1024,
            half_length: 32.0 * PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub mu: f64,
    pub mu_sign: MuSign,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_i: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            mu: 1.0,
            mu_sign: MuSign::Paper,
            beta: None,
            d_s: None,
            d_i: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceSection {
    pub s: f64,
}

impl Default for SpaceSection {
    fn default() -> Self {
        Self { s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_t: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Gate the Picard iteration (relative tolerance, divergence check).
    pub gated: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            horizon: 0.05,
            n_t: 50,
            tol: 1e-10,
            max_iter: 50,
            gated: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// When set, the subcommand this file was written for.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub seed: u64,
    pub n_samples: usize,
    pub output_format: OutputFormat,
    /// Estimate checks run by `verify`; empty means all.
    pub checks: Vec<String>,
    pub n_pairs: usize,
    /// Splitting steps per horizon for `oracle`.
    pub oracle_steps: usize,
    /// Agreement tolerance for `oracle`.
    pub tolerance: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 1,
            n_samples: 100,
            output_format: OutputFormat::Csv,
            checks: Vec::new(),
            n_pairs: 50,
            oracle_steps: 2000,
            tolerance: 1e-5,
        }
    }
}

/// Built-in initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    GaussianBump { center: f64, width: f64, height: f64 },
    BandLimited { seed: u64, cutoff: usize, amplitude: f64 },
    Constant { value: f64 },
}

impl DataSpec {
    pub fn build(&self, grid: GridSpec) -> Result<RealField> {
        match *self {
            DataSpec::GaussianBump {
                center,
                width,
                height,
            } => gaussian_bump(grid, center, width, height),
            DataSpec::BandLimited {
                seed,
                cutoff,
                amplitude,
            } => random_band_limited_field(seed, cutoff, amplitude, grid),
            DataSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "constant must be finite, got {value}"
                    )));
                }
                Ok(RealField::constant(grid, value))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub phi: DataSpec,
    pub psi: DataSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            phi: DataSpec::GaussianBump {
                center: -4.0,
                width: 4.0,
                height: 0.01,
            },
            psi: DataSpec::GaussianBump {
                center: 4.0,
                width: 3.0,
                height: 0.005,
            },
        }
    }
}

/// Fixed gate constants; measured from the estimate ensembles when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    pub c_ell_hat: f64,
    pub c_b_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub command: String,
    pub s: Vec<f64>,
    #[serde(rename = "T")]
    pub horizons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            command: "solve".into(),
            s: Vec::new(),
            horizons: Vec::new(),
            seeds: Vec::new(),
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub space: SpaceSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
    pub data: DataSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSection>,
    pub sweep: SweepSection,
}

/// Parses `KEY=VALUE`. The value is read as a TOML value when possible
/// and as a bare string otherwise.
pub fn parse_override(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| config_error(text, "override must have the form KEY=VALUE"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(config_error(key, "malformed key"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("nonempty key");
    let mut node = table;
    for (i, part) in path.iter().enumerate() {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_error(&parts[..=i].join("."), "not a section"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies overrides, and validates.
    pub fn from_toml(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| config_error("<file>", e.to_string().trim()))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value.clone())?;
        }
        let config: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| {
                let path = e.path().to_string();
                config_error(&path, e.into_inner().to_string())
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_error("<file>", format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.params()?;
        self.idx()?;
        let s = &self.solver;
        if !(s.horizon.is_finite() && s.horizon > 0.0) {
            return Err(config_error("solver.T", "must be positive"));
        }
        if s.n_t < 2 {
            return Err(config_error("solver.n_t", "must be at least 2"));
        }
        if !(s.tol > 0.0) {
            return Err(config_error("solver.tol", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(config_error("solver.max_iter", "must be at least 1"));
        }
        let e = &self.experiment;
        if e.n_samples == 0 {
            return Err(config_error("experiment.n_samples", "must be at least 1"));
        }
        if e.n_pairs == 0 {
            return Err(config_error("experiment.n_pairs", "must be at least 1"));
        }
        if e.oracle_steps < 10 || !e.oracle_steps.is_multiple_of(s.n_t) {
            return Err(config_error(
                "experiment.oracle_steps",
                format!("must be at least 10 and a multiple of solver.n_t = {}", s.n_t),
            ));
        }
        if !(e.tolerance > 0.0) {
            return Err(config_error("experiment.tolerance", "must be positive"));
        }
        for check in &e.checks {
            if !super::tasks::CHECKS.contains(&check.as_str()) {
                return Err(config_error(
                    "experiment.checks",
                    format!(
                        "unknown check `{check}` (expected one of {})",
                        super::tasks::CHECKS.join(", ")
                    ),
                ));
            }
        }
        if let Some(kind) = &e.kind {
            if super::Command::from_name(kind).is_none() {
                return Err(config_error("experiment.kind", format!("unknown command `{kind}`")));
            }
        }
        let grid = self.grid_spec()?;
        self.data.phi.build(grid).map_err(|e| config_error("data.phi", e.to_string()))?;
        self.data.psi.build(grid).map_err(|e| config_error("data.psi", e.to_string()))?;
        if let Some(g) = &self.gate {
            for (key, v) in [("gate.c_ell_hat", g.c_ell_hat), ("gate.c_b_hat", g.c_b_hat)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(config_error(key, "must be positive"));
                }
            }
        }
        let w = &self.sweep;
        match super::Command::from_name(&w.command) {
            None | Some(super::Command::Sweep) => {
                return Err(config_error(
                    "sweep.command",
                    format!("`{}` cannot be swept", w.command),
                ))
            }
            Some(_) => {}
        }
        if w.workers == 0 {
            return Err(config_error("sweep.workers", "must be at least 1"));
        }
        for &s in &w.s {
            SobolevIndex::new(s).map_err(|e| config_error("sweep.s", e.to_string()))?;
        }
        if w.horizons.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(config_error("sweep.T", "entries must be positive"));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n_points, self.grid.half_length)
            .map_err(|e| config_error("grid", e.to_string()))
    }

    pub fn idx(&self) -> Result<SobolevIndex> {
        SobolevIndex::new(self.space.s).map_err(|e| config_error("space.s", e.to_string()))
    }

    pub fn params(&self) -> Result<KmParams> {
        let m = &self.model;
        let params =
            KmParams::new(m.mu, m.mu_sign).map_err(|e| config_error("model.mu", e.to_string()))?;
        match (m.beta, m.d_s, m.d_i) {
            (None, None, None) => Ok(params),
            (Some(beta), Some(d_s), Some(d_i)) => params
                .with_rates(DimensionalRates { beta, d_s, d_i })
                .map_err(|e| config_error("model.beta", e.to_string())),
            _ => Err(config_error(
                "model",
                "beta, d_s and d_i must be given together",
            )),
        }
    }

    pub fn data(&self) -> Result<(RealField, RealField)> {
        let grid = self.grid_spec()?;
        Ok((self.data.phi.build(grid)?, self.data.psi.build(grid)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid.n_points, 1024);
    }

    #[test]
    fn sections_parse() {
        let text = r#"
[grid]
n_points = 256
half_length = 50.0

[model]
mu = 0.5
mu_sign = "epidemiological"

[solver]
T = 0.2
n_t = 40

[data]
phi = { kind = "constant", value = 0.02 }
psi = { kind = "band_limited", seed = 3, cutoff = 8, amplitude = 0.01 }
"#;
        let c = RunConfig::from_toml(text, &[]).unwrap();
        assert_eq!(c.model.mu_sign, MuSign::Epidemiological);
        assert_eq!(c.solver.horizon, 0.2);
        assert_eq!(c.data.phi, DataSpec::Constant { value: 0.02 });
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[solver]\ntolerance = 1e-3\n", &[]).unwrap_err();
        match err {
            Error::Config { key, message } => {
                assert_eq!(key, "solver.tolerance");
                assert!(message.contains("tolerance"));
            }
            other => panic!("unexpected {other}"),
        }
        let err = RunConfig::from_toml("[solvr]\n", &[]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "solvr"));
    }

    #[test]
    fn invalid_values_are_named() {
        let cases = [
            ("[grid]\nn_points = 100\n", "grid"),
            ("[space]\ns = 2.5\n", "space.s"),
            ("[solver]\nT = -1.0\n", "solver.T"),
            ("[experiment]\nchecks = [\"nope\"]\n", "experiment.checks"),
            ("[model]\nbeta = 2.0\n", "model"),
            ("[data]\nphi = { kind = \"band_limited\", seed = 1, cutoff = 0, amplitude = 1.0 }\n", "data.phi"),
        ];
        for (text, expected) in cases {
            match RunConfig::from_toml(text, &[]).unwrap_err() {
                Error::Config { key, .. } => assert_eq!(key, expected, "{text}"),
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn overrides_apply_before_validation() {
        let o = vec![
            parse_override("solver.T=0.1").unwrap(),
            parse_override("model.mu_sign=epidemiological").unwrap(),
            parse_override("sweep.s=[0.0, 1.0]").unwrap(),
        ];
        let c = RunConfig::from_toml("", &o).unwrap();
        assert_eq!(c.solver.horizon, 0.1);
        assert_eq!(c.model.mu_sign, MuSign::Epidemiological);
        assert_eq!(c.sweep.s, vec![0.0, 1.0]);
        assert!(parse_override("novalue").is_err());
        let bad = vec![parse_override("solver.n_t=1").unwrap()];
        assert!(matches!(
            RunConfig::from_toml("", &bad).unwrap_err(),
            Error::Config { ref key, .. } if key == "solver.n_t"
        ));
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_toml("[space]\ns = 0.3\n", &[]).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text, &[]).unwrap(), c);
    }
}
