//! Experiment configuration: a TOML file with named sections, plus
//! `key=value` overrides addressed by dotted path (`grid.M=64`).

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const OUTPUT_DIR_ENV: &str = "GDNLS_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GaugeCheck,
    Conserve,
    LpCheck,
    NormalformCheck,
    LemmaScaling,
    DuhamelCheck,
    DispersiveDecay,
    Waveop,
    ScalingCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GaugeCheck => "gauge-check",
            Experiment::Conserve => "conserve",
            Experiment::LpCheck => "lp-check",
            Experiment::NormalformCheck => "normalform-check",
            Experiment::LemmaScaling => "lemma-scaling",
            Experiment::DuhamelCheck => "duhamel-check",
            Experiment::DispersiveDecay => "dispersive-decay",
            Experiment::Waveop => "waveop",
            Experiment::ScalingCheck => "scaling-check",
        }
    }

    /// Final time used when `solver.t_end` is not given.
    pub fn default_t_end(self) -> f64 {
        match self {
            Experiment::Conserve => 10.0,
            Experiment::NormalformCheck => 0.05,
            Experiment::ScalingCheck => 0.1,
            _ => 0.5,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    One,
    /// `x_min`, `x_max` are multiples of π.
    Pi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Gaussian,
    ModulatedGaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub unit: LengthUnit,
}

impl GridSection {
    pub fn bounds(&self) -> (f64, f64) {
        match self.unit {
            LengthUnit::One => (self.x_min, self.x_max),
            LengthUnit::Pi => (self.x_min * PI, self.x_max * PI),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            x_min: -32.0,
            x_max: 32.0,
            m: 512,
            unit: LengthUnit::Pi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub k: u32,
    pub amplitude: f64,
    pub profile: Profile,
    pub width: f64,
    /// Carrier wavenumber of `modulated_gaussian`.
    pub wavenumber: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            k: 3,
            amplitude: 0.1,
            profile: Profile::Gaussian,
            width: 1.0,
            wavenumber: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt: f64,
    pub store_every: usize,
    pub t_end: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: 1e-3,
            store_every: 10,
            t_end: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalFormSection {
    #[serde(rename = "N0")]
    pub n0: f64,
    pub m_star: Option<u32>,
    pub grid_cap: usize,
}

impl Default for NormalFormSection {
    fn default() -> Self {
        NormalFormSection {
            n0: 2.0,
            m_star: None,
            grid_cap: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveopSection {
    pub delta_target: f64,
    pub tol_cauchy: f64,
    pub schedule_step: f64,
    pub n_max: usize,
    pub min_iterates: usize,
}

impl Default for WaveopSection {
    fn default() -> Self {
        WaveopSection {
            delta_target: 0.07,
            tol_cauchy: 1e-6,
            schedule_step: 5.0,
            n_max: 6,
            min_iterates: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub normal_form: NormalFormSection,
    #[serde(default)]
    pub waveop: WaveopSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
        if overrides.is_empty() {
            // Direct parse keeps toml's line/column diagnostics.
            return Ok(toml::from_str(text)?);
        }
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .context("config invalid after applying overrides")
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = ExperimentConfig::parse(&text, overrides).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            bail!("solver.dt must be positive, got {}", s.dt);
        }
        if s.store_every == 0 {
            bail!("solver.store_every must be at least 1");
        }
        if let Some(t) = s.t_end {
            if !(t.is_finite() && t > 0.0) {
                bail!("solver.t_end must be positive, got {t}");
            }
        }
        let p = &self.physics;
        if !(p.amplitude.is_finite() && p.width.is_finite() && p.width > 0.0) {
            bail!("physics.amplitude must be finite and physics.width positive");
        }
        let w = &self.waveop;
        if w.n_max < 2 || w.min_iterates < 2 {
            bail!("waveop.n_max and waveop.min_iterates must be at least 2");
        }
        if !(w.schedule_step > 0.0 && w.tol_cauchy > 0.0 && w.delta_target > 0.0) {
            bail!("waveop.schedule_step, tol_cauchy and delta_target must be positive");
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.solver.t_end.unwrap_or_else(|| self.experiment.default_t_end())
    }

    /// SHA-256 of the canonical serialization, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = toml::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// CLI flag, then the config file, then the environment, then
    /// `gdnls-out/<experiment>`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output_dir {
            return p.clone();
        }
        let base = std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("gdnls-out"));
        base.join(self.experiment.name())
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .with_context(|| format!("override `{spec}` is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    // Anything that is not a TOML literal is taken as a bare string.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` is malformed");
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .with_context(|| format!("override `{key}`: `{p}` is not a section"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
