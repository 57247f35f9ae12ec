//! On-disk run artifacts: `timeseries.csv`, `cauchy.csv`, `summary.jsonl` and
//! the resolved `config.toml`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const TIMESERIES_SCHEMA: &str = "gdnls-timeseries/1";
pub const CAUCHY_SCHEMA: &str = "gdnls-cauchy/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// `null` in the file when the measurement is not finite.
    pub measured: Option<f64>,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Assertion {
        Assertion {
            name: name.into(),
            measured: measured.is_finite().then_some(measured),
            threshold,
            relation: Relation::AtMost,
            pass: measured <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Assertion {
        Assertion {
            name: name.into(),
            measured: measured.is_finite().then_some(measured),
            threshold,
            relation: Relation::AtLeast,
            pass: measured >= threshold,
        }
    }

    /// A yes/no property, recorded as measured 1 or 0 against threshold 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Assertion {
        Assertion::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CauchyRow {
    pub n: usize,
    pub t_n: f64,
    pub x_distance: f64,
    pub y_distance: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub timeseries: Vec<(f64, String, f64)>,
    pub cauchy: Vec<CauchyRow>,
    pub assertions: Vec<Assertion>,
}

impl Artifacts {
    pub fn series(&mut self, t: f64, quantity: impl Into<String>, value: f64) {
        self.timeseries.push((t, quantity.into(), value));
    }

    pub fn check(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// Seventeen significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write(dir: &Path, cfg: &ExperimentConfig, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let hash = cfg.hash();
    let exp = cfg.experiment.name();

    let mut ts = format!("# schema={TIMESERIES_SCHEMA} config_sha256={hash}\nexperiment,t,quantity,value\n");
    for (t, q, v) in &art.timeseries {
        writeln!(ts, "{exp},{},{q},{}", num(*t), num(*v)).unwrap();
    }
    let mut cc = format!("# schema={CAUCHY_SCHEMA} config_sha256={hash}\nn,t_n,x_distance,y_distance\n");
    for r in &art.cauchy {
        writeln!(cc, "{},{},{},{}", r.n, num(r.t_n), num(r.x_distance), num(r.y_distance)).unwrap();
    }
    let mut summary = String::new();
    for a in &art.assertions {
        summary.push_str(&serde_json::to_string(a)?);
        summary.push('\n');
    }
    let mut stored = cfg.clone();
    stored.output_dir = None;

    for (name, body) in [
        ("timeseries.csv", ts),
        ("cauchy.csv", cc),
        ("summary.jsonl", summary),
        ("config.toml", toml::to_string(&stored)?),
    ] {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Vec<Assertion>> {
    let p = dir.join("summary.jsonl");
    let text = fs::read_to_string(&p).with_context(|| format!("no run artifacts in {}", dir.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        out.push(
            serde_json::from_str(line).with_context(|| format!("{}:{}: corrupt record", p.display(), i + 1))?,
        );
    }
    if out.is_empty() {
        bail!("{} holds no assertions", p.display());
    }
    Ok(out)
}

pub fn read_config(dir: &Path) -> Result<ExperimentConfig> {
    let p = dir.join("config.toml");
    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

/// Data rows of a CSV artifact after checking its schema comment.
fn csv_rows(path: &Path, schema: &str, columns: usize) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    if !head.starts_with('#') || !head.contains(&format!("schema={schema}")) {
        bail!("{}: missing or wrong schema header", path.display());
    }
    lines.next();
    lines
        .enumerate()
        .map(|(i, l)| {
            let cells: Vec<String> = l.split(',').map(str::to_string).collect();
            if cells.len() != columns {
                bail!("{}:{}: expected {columns} columns", path.display(), i + 3);
            }
            Ok(cells)
        })
        .collect()
}

fn float(cell: &str, path: &Path) -> Result<f64> {
    cell.parse().with_context(|| format!("{}: bad number `{cell}`", path.display()))
}

pub fn read_cauchy(dir: &Path) -> Result<Vec<CauchyRow>> {
    let p = dir.join("cauchy.csv");
    csv_rows(&p, CAUCHY_SCHEMA, 4)?
        .iter()
        .map(|c| {
            Ok(CauchyRow {
                n: c[0].parse().with_context(|| format!("{}: bad index", p.display()))?,
                t_n: float(&c[1], &p)?,
                x_distance: float(&c[2], &p)?,
                y_distance: float(&c[3], &p)?,
            })
        })
        .collect()
}

/// `(t, quantity, value)` rows of `timeseries.csv`.
pub fn read_timeseries(dir: &Path) -> Result<Vec<(f64, String, f64)>> {
    let p = dir.join("timeseries.csv");
    csv_rows(&p, TIMESERIES_SCHEMA, 4)?
        .into_iter()
        .map(|c| Ok((float(&c[1], &p)?, c[2].clone(), float(&c[3], &p)?)))
        .collect()
}
