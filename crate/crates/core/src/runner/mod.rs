//! Configuration-driven experiment runner behind the `kmsir` binary.

pub mod config;
pub mod output;
pub mod tasks;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{parse_override, OutputFormat, RunConfig};
use output::{to_json, write_atomic};
use tasks::Artifacts;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Oracle,
    Verify,
    Contraction,
    Lipschitz,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Oracle,
        Command::Verify,
        Command::Contraction,
        Command::Lipschitz,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Oracle => "oracle",
            Command::Verify => "verify",
            Command::Contraction => "contraction",
            Command::Lipschitz => "lipschitz",
            Command::Sweep => "sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    /// Also write per-slice field samples for trajectory commands.
    pub fields: bool,
    /// `KEY=VALUE` pairs already parsed by [`parse_override`].
    pub overrides: Vec<(String, toml::Value)>,
}

/// Summary written to `run.json` next to the command outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: &'static str,
    pub input_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SweepEntry {
    directory: String,
    s: f64,
    #[serde(rename = "T")]
    horizon: f64,
    seed: u64,
    pass: Option<bool>,
    error: Option<String>,
}

/// `sha256("blob <len>\0<canonical json>")`, the same framing git uses for
/// blobs, so the hash changes with any effective configuration value.
pub fn input_hash(config: &RunConfig) -> Result<String> {
    let canonical = serde_json::to_vec(config)?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", canonical.len()).as_bytes());
    h.update(&canonical);
    Ok(hex::encode(h.finalize()))
}

fn all_overrides(opts: &RunOptions) -> Vec<(String, toml::Value)> {
    let mut out = opts.overrides.clone();
    if let Some(seed) = opts.seed {
        out.push(("experiment.seed".into(), toml::Value::Integer(seed as i64)));
    }
    if let Some(format) = opts.format {
        let name = match format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        };
        out.push(("experiment.output_format".into(), toml::Value::String(name.into())));
    }
    out
}

/// Loads the configuration, runs `command` and writes its outputs plus
/// `run.json` into `opts.out_dir`.
pub fn run(command: Command, config_path: Option<&Path>, opts: &RunOptions) -> Result<RunRecord> {
    let config = RunConfig::load(config_path, &all_overrides(opts))?;
    if let Some(kind) = &config.experiment.kind {
        if kind != command.name() {
            return Err(Error::Config {
                key: "experiment.kind".into(),
                message: format!(
                    "config is for `{kind}` but the `{}` command was requested",
                    command.name()
                ),
            });
        }
    }
    run_config(command, &config, &opts.out_dir, opts.fields)
}

pub fn run_config(command: Command, config: &RunConfig, out_dir: &Path, fields: bool) -> Result<RunRecord> {
    if command == Command::Sweep {
        return sweep(config, out_dir, fields);
    }
    let artifacts = execute(command, config, fields)?;
    finish(command, config, out_dir, artifacts)
}

fn execute(command: Command, config: &RunConfig, fields: bool) -> Result<Artifacts> {
    match command {
        Command::Solve => tasks::solve(config, fields),
        Command::Oracle => tasks::oracle(config, fields),
        Command::Verify => tasks::verify(config),
        Command::Contraction => tasks::contraction(config),
        Command::Lipschitz => tasks::lipschitz(config),
        Command::Sweep => unreachable!("sweeps are dispatched separately"),
    }
}

fn finish(command: Command, config: &RunConfig, out_dir: &Path, artifacts: Artifacts) -> Result<RunRecord> {
    let mut outputs = Vec::with_capacity(artifacts.files.len());
    for (name, bytes) in &artifacts.files {
        write_atomic(&out_dir.join(name), bytes)?;
        outputs.push(name.clone());
    }
    let record = RunRecord {
        command: command.name(),
        input_hash: input_hash(config)?,
        config: serde_json::to_value(config)?,
        outputs,
        pass: artifacts.pass,
    };
    write_atomic(&out_dir.join("run.json"), &to_json(&record)?)?;
    Ok(record)
}

fn sweep(config: &RunConfig, out_dir: &Path, fields: bool) -> Result<RunRecord> {
    let w = &config.sweep;
    let command = Command::from_name(&w.command)
        .filter(|c| *c != Command::Sweep)
        .ok_or_else(|| Error::Config {
            key: "sweep.command".into(),
            message: format!("`{}` cannot be swept", w.command),
        })?;
    let or_base = |v: &[f64], base: f64| if v.is_empty() { vec![base] } else { v.to_vec() };
    let s_values = or_base(&w.s, config.space.s);
    let horizons = or_base(&w.horizons, config.solver.horizon);
    let seeds = if w.seeds.is_empty() {
        vec![config.experiment.seed]
    } else {
        w.seeds.clone()
    };
    let mut jobs = Vec::new();
    for &s in &s_values {
        for &horizon in &horizons {
            for &seed in &seeds {
                let mut c = config.clone();
                c.space.s = s;
                c.solver.horizon = horizon;
                c.experiment.seed = seed;
                c.experiment.kind = None;
                jobs.push(c);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(w.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start sweep workers: {e}")))?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, c)| {
                let directory = format!("entry_{i:04}");
                let outcome = c
                    .validate()
                    .and_then(|_| run_config(command, c, &out_dir.join(&directory), fields));
                let (pass, error) = match outcome {
                    Ok(r) => (Some(r.pass), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SweepEntry {
                    directory,
                    s: c.space.s,
                    horizon: c.solver.horizon,
                    seed: c.experiment.seed,
                    pass,
                    error,
                }
            })
            .collect()
    });
    let keyed: BTreeMap<&str, &SweepEntry> =
        entries.iter().map(|e| (e.directory.as_str(), e)).collect();
    let mut artifacts = Artifacts {
        pass: entries.iter().all(|e| e.pass == Some(true)),
        ..Artifacts::default()
    };
    artifacts.files.push(("sweep.json".into(), to_json(&keyed)?));
    finish(Command::Sweep, config, out_dir, artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(Command::from_name(c.name()), Some(c));
        }
        assert_eq!(Command::from_name("solver"), None);
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::from_toml("", &[]).unwrap();
        let b = RunConfig::from_toml("[experiment]\nseed = 2\n", &[]).unwrap();
        assert_eq!(input_hash(&a).unwrap(), input_hash(&a.clone()).unwrap());
        assert_ne!(input_hash(&a).unwrap(), input_hash(&b).unwrap());
        assert_eq!(input_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn kind_mismatch_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[experiment]\nkind = \"verify\"\n").unwrap();
        let opts = RunOptions {
            out_dir: dir.path().join("out"),
            ..RunOptions::default()
        };
        match run(Command::Solve, Some(&path), &opts) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "experiment.kind"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn zero_data_solve_writes_zero_rows() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[grid]\nn_points = 64\n[solver]\nn_t = 4\n\
                    [data.phi]\nkind = \"constant\"\nvalue = 0.0\n\
                    [data.psi]\nkind = \"constant\"\nvalue = 0.0\n";
        let config = RunConfig::from_toml(text, &[]).unwrap();
        let record = run_config(Command::Solve, &config, dir.path(), true).unwrap();
        assert!(record.pass);
        let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 6);
        for row in &rows[1..] {
            for cell in row.split(',').skip(1).filter(|c| !c.is_empty()) {
                assert_eq!(cell.parse::<f64>().unwrap(), 0.0);
            }
        }
        assert!(dir.path().join("fields/slice_00004.csv").exists());
        assert!(dir.path().join("run.json").exists());
    }

    #[test]
    fn sweep_runs_every_entry() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[grid]\nn_points = 64\n[solver]\nn_t = 4\n\
                    [sweep]\ncommand = \"solve\"\ns = [0.0, 1.0]\nT = [0.01, 0.02]\nworkers = 2\n";
        let config = RunConfig::from_toml(text, &[]).unwrap();
        let record = run_config(Command::Sweep, &config, dir.path(), false).unwrap();
        assert!(record.pass);
        let sweep: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
        assert_eq!(sweep.as_object().unwrap().len(), 4);
        assert!(dir.path().join("entry_0003/trajectory.csv").exists());
    }
}
