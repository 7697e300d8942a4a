//! Report assembly: a TOML key-value tree plus one CSV series per verdict.
//!
//! Nothing time-dependent goes into the files, so identical configs give
//! byte-identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use discspec::criteria::{CriterionVerdict, EVIDENCE_NOTE};
use discspec::spectral::LocalizationScan;
use discspec::SeriesPoint;

use crate::config::{ScanConfig, SCHEMA_VERSION};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub sobolev_c: f64,
    pub k: f64,
    pub isocapacity: f64,
    pub transport_limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub id: String,
    pub criterion: String,
    pub radius: f64,
    pub trend: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub resolution: String,
    pub tolerance: f64,
    pub head_min: f64,
    pub head_max: f64,
    pub tail_min: f64,
    pub tail_max: f64,
    pub margin: f64,
    pub tail_slope: f64,
    pub failed_centers: usize,
    pub caveats: Vec<String>,
    pub series_file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub criterion: String,
    pub error: String,
}

/// Flat series: header plus one row per center.
#[derive(Debug, Clone)]
pub struct Series {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Series {
    pub fn from_points(file: String, dim: usize, points: &[SeriesPoint]) -> Self {
        let mut header = vec!["norm".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.push("value".into());
        header.push("status".into());
        let rows = points
            .iter()
            .map(|p| {
                let mut row = vec![p.distance().to_string()];
                row.extend(p.center.iter().map(|x| x.to_string()));
                row.push(p.value.to_string());
                row.push(match &p.error {
                    None => "ok".into(),
                    Some(e) => e.replace([',', '\n'], ";"),
                });
                row
            })
            .collect();
        Self { file, header, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub units: String,
    pub disclaimer: String,
    pub potential: String,
    pub centers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport_evidence: Option<String>,
    pub partial: bool,
    pub constants: Constants,
    pub config: ScanConfig,
    pub verdicts: Vec<VerdictRecord>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub series: Vec<Series>,
}

impl Report {
    pub fn new(config: &ScanConfig, potential: String, centers: usize, constants: Constants) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            units: "dimensionless".into(),
            disclaimer: EVIDENCE_NOTE.into(),
            potential,
            centers,
            center_note: None,
            transport_evidence: None,
            partial: false,
            constants,
            config: config.clone(),
            verdicts: Vec::new(),
            failures: Vec::new(),
            series: Vec::new(),
        }
    }

    fn series_name(&self, id: &str) -> String {
        format!("{}-{id}.csv", self.config.output.name)
    }

    pub fn push_verdict(&mut self, id: String, v: &CriterionVerdict) {
        let file = self.series_name(&id);
        let s = &v.summary;
        self.verdicts.push(VerdictRecord {
            id,
            criterion: v.name.clone(),
            radius: v.radius,
            trend: v.trend.as_str().into(),
            threshold: v.threshold,
            resolution: v.resolution.clone(),
            tolerance: v.tolerance,
            head_min: s.head_min,
            head_max: s.head_max,
            tail_min: s.tail_min,
            tail_max: s.tail_max,
            margin: s.margin,
            tail_slope: s.tail_slope,
            failed_centers: v.points.iter().filter(|p| p.error.is_some()).count(),
            caveats: v.caveats.clone(),
            series_file: file.clone(),
        });
        self.series.push(Series::from_points(file, self.config.dim, &v.points));
    }

    pub fn push_scan(&mut self, scan: &LocalizationScan) {
        let id = format!("eigen-r{}", scan.radius);
        let file = self.series_name(&id);
        let s = &scan.trend;
        let failed = scan.points.iter().filter(|p| p.error.is_some()).count();
        let mut caveats = vec![EVIDENCE_NOTE.to_string()];
        if failed > 0 {
            caveats.push(format!("{failed} of {} centers failed and were left out of the trend", scan.points.len()));
        }
        self.verdicts.push(VerdictRecord {
            id,
            criterion: "lambda0".into(),
            radius: scan.radius,
            trend: s.trend.as_str().into(),
            threshold: None,
            resolution: format!("shortley-weller h={}", scan.h),
            tolerance: scan.h * scan.h,
            head_min: s.head_min,
            head_max: s.head_max,
            tail_min: s.tail_min,
            tail_max: s.tail_max,
            margin: s.margin,
            tail_slope: s.tail_slope,
            failed_centers: failed,
            caveats,
            series_file: file.clone(),
        });
        self.series.push(Series::from_points(file, self.config.dim, &scan.points));
    }

    pub fn fail(&mut self, criterion: &str, error: impl ToString) {
        self.partial = true;
        self.failures.push(Failure { criterion: criterion.into(), error: error.to_string() });
    }

    pub fn verdict(&self, id: &str) -> Option<&VerdictRecord> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn series(&self, id: &str) -> Option<&Series> {
        let file = self.series_name(id);
        self.series.iter().find(|s| s.file == file)
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("report serializes");
        let mut out = String::new();
        let _ = writeln!(out, "# discspec report, schema {}", self.schema);
        out.push_str(&body);
        out
    }

    /// Writes the report and every series into `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
        let mut paths = Vec::with_capacity(self.series.len() + 1);
        let main = dir.join(format!("{}.toml", self.config.output.name));
        write_file(&main, &self.to_toml())?;
        paths.push(main);
        for s in &self.series {
            let p = dir.join(&s.file);
            write_file(&p, &s.to_csv())?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}
