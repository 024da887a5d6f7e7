//! Panel ingestion, covariate construction, window preprocessing and
//! the run configuration file.

use crate::calibration::CalibrationKind;
use crate::copula::{Family, PairCopula, Rotation};
use crate::dpm::{CenteringMeasure, CovariatePrior, DpConfig};
use crate::error::{Error, Result};
use crate::margins::MarginMode;
use crate::vine::{VineKind, VineSpec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// One row of the panel: a country-period observation with d responses
/// in [0,1] and a raw damage amount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub country: String,
    pub period: u32,
    pub responses: Vec<f64>,
    pub damage: f64,
}

/// Read a panel CSV with header `country,period,y1..yd,damage`. Every
/// malformed row is reported with its line number; an empty file is an
/// empty panel (with a warning on stderr).
pub fn load_panel(path: &Path) -> Result<Vec<PanelRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::Csv)?;
    let headers = reader.headers().map_err(Error::Csv)?.clone();
    if headers.is_empty() || reader.is_done() && headers.len() == 0 {
        eprintln!("warning: empty panel file {}", path.display());
        return Ok(Vec::new());
    }
    let d = headers.len().saturating_sub(3);
    if d == 0 {
        if headers.iter().all(|h| h.is_empty()) {
            eprintln!("warning: empty panel file {}", path.display());
            return Ok(Vec::new());
        }
        return Err(Error::Data(format!(
            "panel header needs country,period,y1..,damage; got {:?}",
            headers
        )));
    }
    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        if row.len() != d + 3 {
            problems.push(format!("line {line}: expected {} fields, got {}", d + 3, row.len()));
            continue;
        }
        let country = row[0].to_string();
        let period = match row[1].parse::<u32>() {
            Ok(p) if p > 0 => p,
            _ => {
                problems.push(format!(
                    "line {line}: period must be a positive integer, got '{}'",
                    &row[1]
                ));
                continue;
            }
        };
        let mut responses = Vec::with_capacity(d);
        let mut ok = true;
        for j in 0..d {
            match row[2 + j].parse::<f64>() {
                Ok(y) if (0.0..=1.0).contains(&y) => responses.push(y),
                Ok(y) => {
                    problems.push(format!(
                        "line {line}: response y{} = {y} outside [0,1]",
                        j + 1
                    ));
                    ok = false;
                }
                Err(_) => {
                    problems.push(format!(
                        "line {line}: non-numeric response '{}'",
                        &row[2 + j]
                    ));
                    ok = false;
                }
            }
        }
        let damage = match row[d + 2].parse::<f64>() {
            Ok(v) if v >= 0.0 => v,
            _ => {
                problems.push(format!(
                    "line {line}: damage must be a non-negative number, got '{}'",
                    &row[d + 2]
                ));
                ok = false;
                0.0
            }
        };
        if ok {
            records.push(PanelRecord {
                country,
                period,
                responses,
                damage,
            });
        }
    }
    if !problems.is_empty() {
        return Err(Error::Data(format!(
            "panel {} has invalid rows:\n{}",
            path.display(),
            problems.join("\n")
        )));
    }
    if records.is_empty() {
        eprintln!("warning: empty panel file {}", path.display());
    }
    Ok(records)
}

pub const DEFAULT_DAMAGE_THRESHOLD: f64 = 100_000_000.0;

/// Binary covariate: 1 iff damage is strictly over the threshold.
pub fn build_disaster_covariate(records: &[PanelRecord], threshold: f64) -> Vec<f64> {
    records
        .iter()
        .map(|r| (r.damage > threshold) as usize as f64)
        .collect()
}

/// One year of event-level input for window preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub country: String,
    pub year: i32,
    pub responses: Vec<f64>,
    pub damage: f64,
}

/// Read event-level CSV with header `country,year,y1..yd,damage`.
pub fn load_events(path: &Path) -> Result<Vec<EventRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::Csv)?;
    let headers = reader.headers().map_err(Error::Csv)?.clone();
    let d = headers.len().saturating_sub(3);
    let mut out = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(Error::Csv)?;
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("line {line}: non-numeric {what} '{s}'")))
        };
        let year = row[1]
            .parse::<i32>()
            .map_err(|_| Error::Data(format!("line {line}: bad year '{}'", &row[1])))?;
        let responses = (0..d)
            .map(|j| parse(&row[2 + j], "response"))
            .collect::<Result<Vec<f64>>>()?;
        out.push(EventRecord {
            country: row[0].to_string(),
            year,
            responses,
            damage: parse(&row[d + 2], "damage")?,
        });
    }
    Ok(out)
}

/// Build a panel from yearly event records: each disaster year opens a
/// window of `window` years; the window becomes one panel row with the
/// responses observed at its final year, and is discarded if a second
/// disaster falls inside the window or the final year is missing.
pub fn windows_to_panel(events: &[EventRecord], window: u32) -> Vec<PanelRecord> {
    use std::collections::BTreeMap;
    let mut by_country: BTreeMap<&str, Vec<&EventRecord>> = BTreeMap::new();
    for e in events {
        by_country.entry(&e.country).or_default().push(e);
    }
    let mut panel = Vec::new();
    for (country, mut rows) in by_country {
        rows.sort_by_key(|e| e.year);
        let mut period = 1u32;
        for (i, e) in rows.iter().enumerate() {
            if e.damage <= 0.0 {
                continue;
            }
            let end_year = e.year + window as i32 - 1;
            let second_disaster = rows[i + 1..]
                .iter()
                .any(|f| f.year <= end_year && f.damage > 0.0);
            if second_disaster {
                continue;
            }
            let Some(end) = rows.iter().find(|f| f.year == end_year) else {
                continue;
            };
            panel.push(PanelRecord {
                country: country.to_string(),
                period,
                responses: end.responses.clone(),
                damage: e.damage,
            });
            period += 1;
        }
    }
    panel
}

/// Declarative run configuration (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub vine: VineConfig,
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub g0: G0Config,
    #[serde(default)]
    pub dp: DpConfig,
    #[serde(default)]
    pub margins: MarginsConfig,
    #[serde(default)]
    pub covariate: CovariateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineConfig {
    pub kind: VineKind,
    pub dimension: usize,
    pub family: Family,
    #[serde(default)]
    pub rotation: Rotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub kind: CalibrationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G0Config {
    #[serde(default)]
    pub covariate_prior: CovariatePrior,
    /// Prior standard deviation of every calibration coefficient.
    #[serde(default = "default_coef_sd")]
    pub coef_prior_sd: f64,
}

fn default_coef_sd() -> f64 {
    4.0
}

impl Default for G0Config {
    fn default() -> Self {
        G0Config {
            covariate_prior: CovariatePrior::default(),
            coef_prior_sd: default_coef_sd(),
        }
    }
}

impl Default for CovariatePrior {
    fn default() -> Self {
        CovariatePrior::Normal {
            mu0: 0.0,
            sigma0_sq: 16.0,
            shape: 2.0,
            rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginsConfig {
    #[serde(default = "default_margin_mode")]
    pub mode: MarginMode,
}

fn default_margin_mode() -> MarginMode {
    MarginMode::BetaFit
}

impl Default for MarginsConfig {
    fn default() -> Self {
        MarginsConfig {
            mode: default_margin_mode(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateConfig {
    #[serde(default = "default_threshold")]
    pub damage_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_DAMAGE_THRESHOLD
}

impl Default for CovariateConfig {
    fn default() -> Self {
        CovariateConfig {
            damage_threshold: default_threshold(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.to_string_lossy(), e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vine.dimension < 2 {
            return Err(Error::Config("vine dimension must be at least 2".into()));
        }
        PairCopula::new(self.vine.family, self.vine.rotation)?;
        self.calibration.kind.coefficient_count(1)?;
        self.dp.validate()?;
        if self.g0.coef_prior_sd <= 0.0 {
            return Err(Error::Config("coefficient prior sd must be positive".into()));
        }
        Ok(())
    }

    pub fn vine_spec(&self) -> Result<VineSpec> {
        VineSpec::homogeneous(
            self.vine.dimension,
            self.vine.kind,
            PairCopula::new(self.vine.family, self.vine.rotation)?,
        )
    }

    pub fn centering_measure(&self) -> Result<CenteringMeasure> {
        let spec = self.vine_spec()?;
        let calib =
            crate::calibration::VineCalibration::for_spec(&spec, self.calibration.kind, 1)?;
        let q = calib.coefficient_count();
        CenteringMeasure::new(
            vec![self.g0.covariate_prior; 1],
            vec![0.0; q],
            DMatrix::identity(q, q) * self.g0.coef_prior_sd * self.g0.coef_prior_sd,
        )
    }
}

/// Where a run writes its outputs.
#[derive(Debug, Clone)]
pub struct OutPaths {
    pub dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutPaths { dir: dir.into() }
    }
    pub fn trace(&self) -> PathBuf {
        self.dir.join("trace.ndjson")
    }
    pub fn margin_summary(&self) -> PathBuf {
        self.dir.join("margin_summary.csv")
    }
    pub fn cluster_summary(&self) -> PathBuf {
        self.dir.join("cluster_summary.csv")
    }
    pub fn weight_summary(&self) -> PathBuf {
        self.dir.join("weight_summary.csv")
    }
    pub fn predictive(&self) -> PathBuf {
        self.dir.join("predictive.csv")
    }
    pub fn histogram(&self) -> PathBuf {
        self.dir.join("histogram.json")
    }
}
