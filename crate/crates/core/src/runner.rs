//! TOML scenario files, suite runs and report emission.
//!
//! A config file holds one or more `[[scenario]]` tables, each a
//! [`ScenarioConfig`]. Lengths are in coordinate units and times in heat-time
//! units. The resolved config, with every default written out, is saved next
//! to the reports and fingerprinted in the summary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certify::{run_suite, CHatTable, CertReport, Scenario, ScenarioConfig, Verdict};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Vec<ScenarioConfig>,
}

impl ConfigFile {
    /// Parse TOML text; errors carry `origin:line:column`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            Error::Config(format!("{origin}:{line}:{col}: {}", e.message()))
        })?;
        if cfg.scenario.is_empty() {
            return Err(Error::Config(format!("{origin}: no [[scenario]] tables")));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "both" => Ok(Format::Both),
            _ => Err(format!("unknown format {s}; expected json, csv or both")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub config: PathBuf,
    /// Overrides the per-scenario suite when set.
    pub suite: Option<Vec<String>>,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub degenerate: usize,
    pub total: usize,
}

impl Counts {
    pub fn of(reports: &[CertReport]) -> Self {
        let mut c = Counts::default();
        for r in reports {
            match r.verdict {
                Verdict::Pass => c.pass += 1,
                Verdict::Fail => c.fail += 1,
                Verdict::Degenerate => c.degenerate += 1,
            }
        }
        c.total = reports.len();
        c
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub counts: Counts,
    pub wall_seconds: f64,
    /// Seconds per certifier, per scenario.
    pub timings: BTreeMap<String, BTreeMap<String, f64>>,
    /// SHA-256 of the resolved config text.
    pub config_sha256: String,
    pub scenarios: Vec<String>,
}

impl RunSummary {
    /// Exit code: 0 without failures, 2 with at least one.
    pub fn exit_code(&self) -> i32 {
        if self.counts.fail > 0 {
            2
        } else {
            0
        }
    }
}

/// Reports of every scenario in file order, plus the `c_hat` tables.
pub struct RunOutput {
    pub reports: Vec<CertReport>,
    pub c_hat: Vec<CHatTable>,
    pub summary: RunSummary,
    pub resolved: String,
}

/// Run every scenario of a parsed config in a pool of `jobs` threads.
pub fn execute(cfg: &ConfigFile, suite: Option<&[String]>, seed: Option<u64>, jobs: Option<usize>) -> Result<RunOutput> {
    let clock = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.scenario.iter_mut().for_each(|c| c.seed = s);
    }
    let resolved = cfg.to_toml()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut reports = Vec::new();
    let mut c_hat = Vec::new();
    let mut timings = BTreeMap::new();
    for sc_cfg in &cfg.scenario {
        let names = suite.map(|s| s.to_vec()).unwrap_or_else(|| sc_cfg.suite.clone());
        let out = pool.install(|| -> Result<_> {
            let mut sc = Scenario::build(sc_cfg.clone())?;
            run_suite(&mut sc, &names)
        })?;
        reports.extend(out.reports);
        c_hat.extend(out.c_hat);
        timings.insert(sc_cfg.name.clone(), out.timings);
    }
    let summary = RunSummary {
        counts: Counts::of(&reports),
        wall_seconds: clock.elapsed().as_secs_f64(),
        timings,
        config_sha256: hex::encode(Sha256::digest(resolved.as_bytes())),
        scenarios: cfg.scenario.iter().map(|s| s.name.clone()).collect(),
    };
    Ok(RunOutput {
        reports,
        c_hat,
        summary,
        resolved,
    })
}

pub fn write_reports_json(reports: &[CertReport], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, reports)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat CSV: name, anchor, case, lhs, rhs, slack, tol, verdict, window, t,
/// s, h, extra (the metadata as JSON).
pub fn write_reports_csv(reports: &[CertReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "anchor", "case", "lhs", "rhs", "slack", "tol", "verdict", "window", "t", "s", "h", "extra"])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.anchor.clone(),
            r.case.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.slack.to_string(),
            r.tolerance.to_string(),
            r.verdict.as_str().to_string(),
            r.window.clone(),
            opt(r.t),
            opt(r.s),
            opt(r.h),
            serde_json::to_string(&r.metadata)?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_c_hat_csv(tables: &[CHatTable], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "t", "c_hat", "witness", "envelope_m", "envelope_k"])?;
    for tab in tables {
        for r in &tab.rows {
            w.write_record([tab.scenario.clone(), r.t.to_string(), r.c_hat.to_string(), r.witness.clone(), tab.m.to_string(), tab.k.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write every artefact of a run into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir)?;
    if format != Format::Csv {
        write_reports_json(&out.reports, &dir.join("reports.json"))?;
    }
    if format != Format::Json {
        write_reports_csv(&out.reports, &dir.join("reports.csv"))?;
    }
    write_c_hat_csv(&out.c_hat, &dir.join("c_hat.csv"))?;
    fs::write(dir.join("config.resolved.toml"), &out.resolved)?;
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &out.summary)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn run(rc: &RunConfig) -> Result<RunSummary> {
    let cfg = ConfigFile::load(&rc.config)?;
    let out = execute(&cfg, rc.suite.as_deref(), rc.seed, rc.jobs)?;
    write_outputs(&out, &rc.out, rc.format)?;
    Ok(out.summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// Cells per axis, applied to every axis.
    Cells,
    /// A single-point time grid.
    Time,
    /// Convolution radius of the cloud curve.
    Radius,
    /// A single log-Harnack `eps`.
    Eps,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cells" => Ok(SweepParam::Cells),
            "time" => Ok(SweepParam::Time),
            "radius" => Ok(SweepParam::Radius),
            "eps" => Ok(SweepParam::Eps),
            _ => Err(format!("unknown sweep parameter {s}; expected cells, time, radius or eps")),
        }
    }
}

impl SweepParam {
    fn label(self) -> &'static str {
        match self {
            SweepParam::Cells => "cells",
            SweepParam::Time => "time",
            SweepParam::Radius => "radius",
            SweepParam::Eps => "eps",
        }
    }

    pub fn apply(self, cfg: &mut ScenarioConfig, v: f64) -> Result<()> {
        match self {
            SweepParam::Cells => {
                if !(v >= 1.0) || v.fract() != 0.0 {
                    return Err(Error::Config(format!("cells must be a positive integer, got {v}")));
                }
                let n = cfg.chart.cells.len();
                cfg.chart.cells = vec![v as usize; n];
            }
            SweepParam::Time => cfg.time_grid = vec![v],
            SweepParam::Radius => match cfg.settings.velocity.cloud_curve.as_mut() {
                Some(c) => c.radius = v,
                None => return Err(Error::Config(format!("{}: radius sweep needs a cloud curve", cfg.name))),
            },
            SweepParam::Eps => cfg.settings.log_harnack.eps = vec![v],
        }
        Ok(())
    }
}

/// One run per value under `out/<param>=<value>/`, plus `sweep.csv` with the
/// slack of every report against the parameter value and `sweep_c_hat.csv`.
pub fn sweep(rc: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Counts> {
    let base = ConfigFile::load(&rc.config)?;
    fs::create_dir_all(&rc.out)?;
    let mut table = csv::Writer::from_path(rc.out.join("sweep.csv"))?;
    table.write_record(["param", "value", "name", "case", "lhs", "rhs", "slack", "verdict"])?;
    let mut c_hat = Vec::new();
    let mut total = Counts::default();
    for &v in values {
        let mut cfg = base.clone();
        for s in cfg.scenario.iter_mut() {
            param.apply(s, v)?;
        }
        let out = execute(&cfg, rc.suite.as_deref(), rc.seed, rc.jobs)?;
        write_outputs(&out, &rc.out.join(format!("{}={v}", param.label())), rc.format)?;
        for r in &out.reports {
            table.write_record([
                param.label().to_string(),
                v.to_string(),
                r.name.clone(),
                r.case.clone(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.slack.to_string(),
                r.verdict.as_str().to_string(),
            ])?;
        }
        for tab in out.c_hat {
            c_hat.push((v, tab));
        }
        let c = out.summary.counts;
        total.pass += c.pass;
        total.fail += c.fail;
        total.degenerate += c.degenerate;
        total.total += c.total;
    }
    table.flush()?;
    let mut w = csv::Writer::from_path(rc.out.join("sweep_c_hat.csv"))?;
    w.write_record(["param", "value", "scenario", "t", "c_hat"])?;
    for (v, tab) in &c_hat {
        for r in &tab.rows {
            w.write_record([param.label().to_string(), v.to_string(), tab.scenario.clone(), r.t.to_string(), r.c_hat.to_string()])?;
        }
    }
    w.flush()?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_are_line_anchored() {
        let text = "[[scenario]]\nname = \"x\"\nmodel = { family = \"heisenberg\" }\nbogus = 3\n";
        let err = ConfigFile::parse(text, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("cfg.toml:"), "{err}");
        assert!(err.contains("bogus") || err.contains("missing"), "{err}");
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
