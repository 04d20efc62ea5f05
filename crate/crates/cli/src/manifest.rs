//! Run manifests: a sectioned key-value file merged with command-line flags.
//!
//! ```toml
//! [model]
//! potential = "u1"
//! a = 0.59
//! r = 1.0
//! omega = 1.12
//!
//! [run]
//! tmax = 500.0
//! dt = 0.02
//! sample = 0.5
//! pipeline = "volterra"
//!
//! [grid]
//! dx = 0.0125
//!
//! [sweep]
//! parameter = "omega"
//! values = [0.8, 1.12, 1.2, 1.25]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use floquet_decay::oracle::GridSpec;
use floquet_decay::{ModelConfig, Pipeline, Potential};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    U1,
    U2,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineChoice {
    Laplace,
    Volterra,
    Oracle,
    All,
}

impl PipelineChoice {
    pub fn pipelines(self) -> Vec<Pipeline> {
        match self {
            PipelineChoice::Laplace => vec![Pipeline::Laplace],
            PipelineChoice::Volterra => vec![Pipeline::Volterra],
            PipelineChoice::Oracle => vec![Pipeline::Oracle],
            PipelineChoice::All => vec![Pipeline::Laplace, Pipeline::Volterra, Pipeline::Oracle],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    A,
    R,
    Omega,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    grid: GridSection,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    potential: Option<PotentialKind>,
    a: Option<f64>,
    r: Option<f64>,
    omega: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    tmax: Option<f64>,
    dt: Option<f64>,
    sample: Option<f64>,
    pipeline: Option<PipelineChoice>,
    tol: Option<f64>,
    out: Option<PathBuf>,
}

/// Oracle grid overrides; unset fields come from the acceptance grid.
#[derive(Debug, Default, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// The flags every physics command accepts; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Sectioned key-value config file ([model], [run], [grid], [sweep]).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub potential: Option<PotentialKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Volterra step; also the default output spacing unit.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output sample spacing (default tmax / 1000).
    #[arg(long)]
    pub sample: Option<f64>,
    #[arg(long, value_enum)]
    pub pipeline: Option<PipelineChoice>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Agreement tolerance reported in multi-pipeline summaries.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Per-command fallbacks for anything neither the file nor the flags set.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub potential: PotentialKind,
    pub a: f64,
    /// `None`: the command supplies `r` itself (free-trap uses `r_s`).
    pub r: Option<f64>,
    pub omega: f64,
    pub tmax: f64,
    pub dt: f64,
}

impl Defaults {
    pub const BOUND: Defaults = Defaults { potential: PotentialKind::U1, a: 0.59, r: Some(1.0), omega: 1.12, tmax: 50.0, dt: 0.01 };
    pub const FREE: Defaults = Defaults { potential: PotentialKind::Free, a: 4.0, r: None, omega: 1.5, tmax: 1000.0, dt: 0.01 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: ModelConfig,
    /// Whether `r` came from the flags, the file or the defaults.
    pub r_given: bool,
    pub pipeline: PipelineChoice,
    pub tmax: f64,
    pub dt: f64,
    pub sample: f64,
    pub tol: f64,
    pub grid: GridSection,
    pub sweep: Option<SweepSection>,
    pub out: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Manifest(msg.into())
}

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub fn potential(kind: PotentialKind, a: f64) -> Potential {
    match kind {
        PotentialKind::U1 => Potential::U1 { a },
        PotentialKind::U2 => Potential::U2 { a },
        PotentialKind::Free => Potential::FreeTrap { a },
    }
}

impl RunManifest {
    pub fn resolve(command: &'static str, args: &ModelArgs, defaults: Defaults) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => read_config(p)?,
            None => ConfigFile::default(),
        };
        let kind = args.potential.or(file.model.potential).unwrap_or(defaults.potential);
        let a = args.a.or(file.model.a).unwrap_or(defaults.a);
        let r = args.r.or(file.model.r).or(defaults.r);
        let omega = args.omega.or(file.model.omega).unwrap_or(defaults.omega);
        let tmax = args.tmax.or(file.run.tmax).unwrap_or(defaults.tmax);
        let dt = args.dt.or(file.run.dt).unwrap_or(defaults.dt);
        let sample = args.sample.or(file.run.sample).unwrap_or(tmax / 1000.0);
        if !(tmax > 0.0 && dt > 0.0 && sample > 0.0) || ![tmax, dt, sample].iter().all(|v| v.is_finite()) {
            return Err(invalid(format!("need finite tmax, dt, sample > 0 (got {tmax}, {dt}, {sample})")));
        }
        let config = ModelConfig::new(potential(kind, a), kind != PotentialKind::Free, r.unwrap_or(0.0), omega).map_err(|e| invalid(e.to_string()))?;
        Ok(RunManifest {
            command,
            config,
            r_given: r.is_some(),
            pipeline: args.pipeline.or(file.run.pipeline).unwrap_or(PipelineChoice::Laplace),
            tmax,
            dt,
            sample,
            tol: args.tol.or(file.run.tol).unwrap_or(1e-3),
            grid: file.grid,
            sweep: file.sweep,
            out: args.out.clone().or(file.run.out).unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    /// The physics and numerics that determine the CSV bytes, one `key = value`
    /// per line. Floats print in shortest round-trip form.
    pub fn canonical(&self) -> String {
        let c = &self.config;
        let opt = |v: Option<f64>| v.map_or("default".to_string(), |x| format!("{x:?}"));
        let mut s = format!(
            "command = {}\npotential = {}\na = {:?}\nr = {}\nomega = {:?}\npipeline = {}\ntmax = {:?}\ndt = {:?}\nsample = {:?}\ntol = {:?}\ngrid.dx = {}\ngrid.dt = {}\ngrid.half_width = {}\n",
            self.command,
            c.potential.label(),
            c.a(),
            if self.r_given { format!("{:?}", c.r) } else { "stabilization".into() },
            c.omega,
            format!("{:?}", self.pipeline).to_lowercase(),
            self.tmax,
            self.dt,
            self.sample,
            self.tol,
            opt(self.grid.dx),
            opt(self.grid.dt),
            opt(self.grid.half_width),
        );
        if let Some(sw) = &self.sweep {
            s += &format!("sweep.parameter = {:?}\nsweep.values = {:?}\n", sw.parameter, sw.values);
        }
        s
    }

    /// Tool version plus a hash of the canonical parameters.
    pub fn stamp(&self) -> String {
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(self.canonical().as_bytes());
        format!("{}-{}", env!("CARGO_PKG_VERSION"), &hex::encode(h.finalize())[..16])
    }

    pub fn manifest_text(&self) -> String {
        format!("{}stamp = {}\n", self.canonical(), self.stamp())
    }

    /// The oracle grid: the acceptance grid for this run with overrides applied.
    pub fn oracle_grid(&self) -> Result<GridSpec, CliError> {
        let base = GridSpec::for_config(&self.config, self.tmax)?;
        Ok(GridSpec {
            dx: self.grid.dx.unwrap_or(base.dx),
            dt: self.grid.dt.unwrap_or(base.dt),
            half_width: self.grid.half_width.unwrap_or(base.half_width),
            ..base
        })
    }

    /// Uniform output times `0, tmax/n, ..., tmax` with spacing close to `sample`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.tmax / self.sample).round().max(1.0) as usize;
        (0..=n).map(|i| self.tmax * i as f64 / n as f64).collect()
    }

    pub fn with_parameter(&self, p: SweepParameter, v: f64) -> Result<Self, CliError> {
        let c = self.config;
        let config = match p {
            SweepParameter::A => {
                let pot = match c.potential {
                    Potential::U1 { .. } => Potential::U1 { a: v },
                    Potential::U2 { .. } => Potential::U2 { a: v },
                    Potential::FreeTrap { .. } => Potential::FreeTrap { a: v },
                };
                ModelConfig::new(pot, c.binding, c.r, c.omega)
            }
            SweepParameter::R => ModelConfig::new(c.potential, c.binding, v, c.omega),
            SweepParameter::Omega => ModelConfig::new(c.potential, c.binding, c.r, v),
        }
        .map_err(|e| invalid(e.to_string()))?;
        Ok(RunManifest { config, sweep: None, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("run.toml");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "[model]\npotential = \"u2\"\na = 0.8\nomega = 1.3\n[run]\ntmax = 20.0\n");
        let args = ModelArgs { config: Some(p), omega: Some(1.4), ..Default::default() };
        let m = RunManifest::resolve("survival", &args, Defaults::BOUND).unwrap();
        assert_eq!(m.config.potential, Potential::U2 { a: 0.8 });
        assert_eq!((m.config.omega, m.config.r, m.tmax), (1.4, 1.0, 20.0));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "[model]\nomgea = 1.3\n");
        let err = RunManifest::resolve("survival", &ModelArgs { config: Some(p), ..Default::default() }, Defaults::BOUND).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = RunManifest::resolve("survival", &ModelArgs { omega: Some(-1.0), ..Default::default() }, Defaults::BOUND).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn stamp_tracks_parameters_only() {
        let args = ModelArgs { out: Some("x".into()), ..Default::default() };
        let a = RunManifest::resolve("survival", &args, Defaults::BOUND).unwrap();
        let b = RunManifest::resolve("survival", &ModelArgs { out: Some("y".into()), ..Default::default() }, Defaults::BOUND).unwrap();
        assert_eq!(a.stamp(), b.stamp());
        let c = RunManifest::resolve("survival", &ModelArgs { r: Some(0.5), ..Default::default() }, Defaults::BOUND).unwrap();
        assert_ne!(a.stamp(), c.stamp());
    }

    #[test]
    fn sample_times_cover_the_run() {
        let m = RunManifest::resolve("survival", &ModelArgs { tmax: Some(10.0), sample: Some(0.3), ..Default::default() }, Defaults::BOUND).unwrap();
        let t = m.sample_times();
        assert_eq!((t[0], *t.last().unwrap(), t.len()), (0.0, 10.0, 34));
    }
}
