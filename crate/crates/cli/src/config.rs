//! Scan configuration: TOML schema, canned examples and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use discspec::potential::{Example2Layout, Example2Lengths, Example3Params};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default = "three")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    pub potential: PotentialSpec,
    pub centers: CenterSpec,
    #[serde(default)]
    pub scan: ScanParams,
    pub criteria: Vec<CriterionKind>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Example1 {
        r0: f64,
    },
    Example2 {
        a: f64,
        /// `α_k = k^alpha_power`, `k = 1..=blocks + 1`.
        alpha_power: f64,
        blocks: usize,
        #[serde(default)]
        lengths: LengthRule,
    },
    Example3 {
        r0: f64,
        rho0: f64,
        /// Multiplies the standard amplitude by `|ℓ|^amplitude_power`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitude_power: Option<f64>,
    },
    Quadratic,
    SqrtNorm,
    Constant {
        value: f64,
    },
    Table {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthRule {
    #[default]
    Matched,
    AsPrinted,
}

impl From<LengthRule> for Example2Lengths {
    fn from(l: LengthRule) -> Self {
        match l {
            LengthRule::Matched => Example2Lengths::Matched,
            LengthRule::AsPrinted => Example2Lengths::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMode {
    /// Every lattice point with `|index|_∞ <= index_bound`; must be a covering.
    Full,
    /// `k · spacing · e_1` for `k = 0..=index_bound`.
    Axis,
    /// Well centers of the second example along `e_1`.
    Wells,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSpec {
    pub mode: CenterMode,
    #[serde(default = "one")]
    pub spacing: f64,
    pub r0: f64,
    pub index_bound: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    NegativePart,
    UniformTail,
    Rearrangement,
    ExpectationDeviation,
    TrimmedIntegral,
    Molchanov,
    Transport,
    Measure,
    Eigen,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 9] = [
        CriterionKind::NegativePart,
        CriterionKind::UniformTail,
        CriterionKind::Rearrangement,
        CriterionKind::ExpectationDeviation,
        CriterionKind::TrimmedIntegral,
        CriterionKind::Molchanov,
        CriterionKind::Transport,
        CriterionKind::Measure,
        CriterionKind::Eigen,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionKind::NegativePart => "negative-part",
            CriterionKind::UniformTail => "uniform-tail",
            CriterionKind::Rearrangement => "rearrangement",
            CriterionKind::ExpectationDeviation => "expectation-deviation",
            CriterionKind::TrimmedIntegral => "trimmed-integral",
            CriterionKind::Molchanov => "molchanov",
            CriterionKind::Transport => "transport",
            CriterionKind::Measure => "measure",
            CriterionKind::Eigen => "eigen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    #[default]
    Spherical,
    Lattice,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimSpec {
    #[default]
    PositivePart,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanParams {
    /// Radii for the measure-based criteria.
    pub r_list: Vec<f64>,
    /// Eigenvalue grid spacing.
    pub h: f64,
    /// Ball radius of the eigenvalue scan; `centers.r0` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_radius: Option<f64>,
    pub transport_h: f64,
    pub a_list: Vec<f64>,
    /// Resolution of the sublevel measures.
    pub m: usize,
    pub n_list: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub trim: TrimSpec,
    pub rule: RuleKind,
    pub shells: usize,
    pub lattice_h: f64,
    pub samples: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            r_list: vec![0.5],
            h: 1.0 / 16.0,
            eigen_radius: None,
            transport_h: 0.9 / 12.0,
            a_list: vec![0.0, 1.0],
            m: 100,
            n_list: vec![0.0, 1.0, 10.0, 100.0],
            gamma: None,
            trim: TrimSpec::PositivePart,
            rule: RuleKind::Spherical,
            shells: 32,
            lattice_h: 0.05,
            samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub name: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("discspec-out"), name: "report".into() }
    }
}

impl ScanConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eigen_radius(&self) -> f64 {
        self.scan.eigen_radius.unwrap_or(self.centers.r0)
    }

    pub fn wants(&self, c: CriterionKind) -> bool {
        self.criteria.contains(&c)
    }

    pub fn example3_params(&self) -> Option<Example3Params> {
        match self.potential {
            PotentialSpec::Example3 { r0, rho0, amplitude_power } => Some(Example3Params {
                r0,
                rho0,
                amplitude: match amplitude_power {
                    Some(power) => discspec::potential::Amplitude::Scaled { power },
                    None => discspec::potential::Amplitude::Standard,
                },
            }),
            _ => None,
        }
    }

    pub fn example2_layout(&self) -> Option<Result<Example2Layout, discspec::Error>> {
        match &self.potential {
            PotentialSpec::Example2 { a, alpha_power, blocks, lengths } => {
                Some(Example2Layout::new(*a, example2_alpha(*alpha_power, *blocks), (*lengths).into()))
            }
            _ => None,
        }
    }
}

/// `α_k = k^power` for `k = 1..=blocks + 1`.
pub fn example2_alpha(power: f64, blocks: usize) -> Vec<f64> {
    (1..=blocks + 1).map(|k| (k as f64).powf(power)).collect()
}

/// Every violation that would make `run_scan` refuse the config; empty
/// when the config is accepted.
pub fn validate(cfg: &ScanConfig) -> Vec<String> {
    let mut v = Vec::new();
    let d = cfg.dim;
    let mut need = |ok: bool, msg: String| {
        if !ok {
            v.push(msg);
        }
    };
    need(cfg.schema == SCHEMA_VERSION, format!("schema {} is not supported (expected {SCHEMA_VERSION})", cfg.schema));
    need(d >= 3, format!("dimension must be at least 3, got {d}"));
    need(!cfg.criteria.is_empty(), "no criteria selected".into());
    need(!cfg.scan.r_list.is_empty(), "r_list is empty".into());
    need(cfg.scan.r_list.iter().all(|r| *r > 0.0 && r.is_finite()), "r_list entries must be positive".into());

    let c = &cfg.centers;
    need(c.spacing > 0.0 && c.spacing.is_finite(), format!("centers.spacing must be positive, got {}", c.spacing));
    need(c.r0 > 0.0 && c.r0.is_finite(), format!("centers.r0 must be positive, got {}", c.r0));
    if c.mode == CenterMode::Full {
        let need_r = (d as f64).sqrt() / 2.0 * c.spacing;
        need(c.r0 > need_r, format!("covering: r0 = {} must exceed sqrt(d)/2 * spacing = {need_r}", c.r0));
    }
    if c.mode == CenterMode::Wells {
        need(
            matches!(cfg.potential, PotentialSpec::Example2 { .. }),
            "centers.mode = wells needs the example2 potential".into(),
        );
    }

    let s = &cfg.scan;
    if cfg.wants(CriterionKind::Eigen) {
        let r = cfg.eigen_radius();
        need(s.h > 0.0 && s.h <= r / 8.0, format!("eigen grid h = {} must lie in (0, radius/8 = {}]", s.h, r / 8.0));
    }
    if cfg.wants(CriterionKind::Transport) {
        need(
            s.transport_h > 0.0 && s.transport_h <= c.r0 / 4.0,
            format!("transport_h = {} must lie in (0, r0/4]", s.transport_h),
        );
    }
    if cfg.wants(CriterionKind::Measure) {
        need(!s.a_list.is_empty(), "a_list is empty".into());
        need(s.m >= 2, format!("m must be at least 2, got {}", s.m));
    }
    if cfg.wants(CriterionKind::UniformTail) {
        need(
            !s.n_list.is_empty() && s.n_list.windows(2).all(|w| w[1] > w[0]),
            "n_list must be nonempty and strictly increasing".into(),
        );
    }
    if let Some(g) = s.gamma {
        need(g > 0.0 && g < 1.0, format!("gamma must lie in (0, 1), got {g}"));
    }
    match s.rule {
        RuleKind::Spherical => {
            need(d <= 3, "the spherical rule supports d <= 3; use lattice or monte-carlo".into());
            need(s.shells >= 1, "shells must be at least 1".into());
        }
        RuleKind::Lattice => need(s.lattice_h > 0.0, format!("lattice_h must be positive, got {}", s.lattice_h)),
        RuleKind::MonteCarlo => need(s.samples >= 100, format!("samples must be at least 100, got {}", s.samples)),
    }

    match &cfg.potential {
        PotentialSpec::Example1 { r0 } => {
            need(*r0 > 0.0 && *r0 < 0.5, format!("example1: r0 must lie in (0, 1/2), got {r0}"));
        }
        PotentialSpec::Example2 { blocks, .. } => {
            need(*blocks >= 1, "example2: need at least one block".into());
            if let Some(Err(e)) = cfg.example2_layout() {
                v.push(format!("example2: {e}"));
            }
        }
        PotentialSpec::Example3 { .. } => {
            if d != 3 {
                v.push("example3 is defined for d = 3".into());
            }
            if let Some(Err(e)) = cfg.example3_params().map(|p| p.validate()) {
                v.push(format!("example3: {e}"));
            }
        }
        PotentialSpec::Table { path } => {
            if !path.is_file() {
                v.push(format!("table file {} does not exist", path.display()));
            }
        }
        PotentialSpec::Constant { value } => {
            if !value.is_finite() {
                v.push("constant value must be finite".into());
            }
        }
        PotentialSpec::Quadratic | PotentialSpec::SqrtNorm => {}
    }
    v
}

/// Built-in configs for the three worked examples.
pub fn canned(name: &str) -> Option<ScanConfig> {
    let text = match name {
        "example1" => include_str!("../configs/example1.toml"),
        "example2" => include_str!("../configs/example2.toml"),
        "example3" => include_str!("../configs/example3.toml"),
        _ => return None,
    };
    Some(ScanConfig::from_toml(text).expect("canned config parses"))
}

pub const CANNED: [&str; 3] = ["example1", "example2", "example3"];
