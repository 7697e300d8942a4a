use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use discspec::riccati_lab::{blowup_comparator, en_sweep, test_family};
use discspec_cli::config::{CriterionKind, ScanConfig, CANNED};
use discspec_cli::{canned, run_scan, validate, with_workers, CliError};

#[derive(Debug, Parser)]
#[command(name = "discspec")]
#[command(about = "numerical criteria for the spectrum of -Δ + V, scanned ball by ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Config file (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    index_bound: Option<usize>,
    /// Eigenvalue grid spacing.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    transport_h: Option<f64>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',')]
    r_list: Option<Vec<f64>>,
    /// Comma-separated sublevel thresholds.
    #[arg(long, value_delimiter = ',')]
    a_list: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every criterion selected in the config.
    Scan(Overrides),
    /// Run a subset of the criteria.
    Criteria {
        #[command(flatten)]
        o: Overrides,
        /// Comma-separated criterion names.
        #[arg(long, value_delimiter = ',', required = true)]
        only: Vec<String>,
    },
    /// Eigenvalue scan only.
    Eigen(Overrides),
    /// Transport bound only.
    Transport(Overrides),
    /// Inequality-set measures for the built-in test family.
    RiccatiLab {
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000,10000")]
        lambda: Vec<f64>,
    },
    /// Run a canned example config (example1, example2, example3).
    Example {
        name: String,
        #[command(flatten)]
        o: Overrides,
    },
    /// Check a config without running it.
    Validate(Overrides),
}

fn load(o: &Overrides, base: Option<ScanConfig>) -> Result<ScanConfig, CliError> {
    let mut cfg = match (base, &o.config) {
        (Some(c), _) => c,
        (None, Some(p)) => ScanConfig::load(p)?,
        (None, None) => return Err(CliError::Config("--config is required".into())),
    };
    if let Some(d) = &o.out {
        cfg.output.dir = d.clone();
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(b) = o.index_bound {
        cfg.centers.index_bound = b;
    }
    if let Some(h) = o.h {
        cfg.scan.h = h;
    }
    if let Some(h) = o.transport_h {
        cfg.scan.transport_h = h;
    }
    if let Some(r) = &o.r_list {
        cfg.scan.r_list = r.clone();
    }
    if let Some(a) = &o.a_list {
        cfg.scan.a_list = a.clone();
    }
    if o.gamma.is_some() {
        cfg.scan.gamma = o.gamma;
    }
    Ok(cfg)
}

fn run_and_write(cfg: ScanConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let report = with_workers(|| run_scan(&cfg))??;
    let paths = report.write(&cfg.output.dir)?;
    for v in &report.verdicts {
        println!("{:<32} {:<12} tail [{:.6}, {:.6}]", v.id, v.trend, v.tail_min, v.tail_max);
    }
    if let Some(e) = &report.transport_evidence {
        println!("transport evidence: {e}");
    }
    for f in &report.failures {
        println!("FAILED {}: {}", f.criterion, f.error);
    }
    eprintln!("wrote {} files to {} in {:.1?}", paths.len(), cfg.output.dir.display(), start.elapsed());
    Ok(())
}

fn only(mut cfg: ScanConfig, kinds: &[CriterionKind]) -> ScanConfig {
    cfg.criteria = kinds.to_vec();
    cfg
}

fn riccati_lab(r: f64, m: usize, lambdas: &[f64]) -> Result<(), CliError> {
    let core = |e: discspec::Error| CliError::Core(e.to_string());
    println!("member,{}", lambdas.iter().map(|l| format!("lambda={l}")).collect::<Vec<_>>().join(","));
    for (name, u) in test_family() {
        let row = en_sweep(&*u, lambdas, r, m).map_err(core)?;
        println!("{name},{}", row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
    }
    for &l in lambdas.iter().filter(|l| **l > 0.0) {
        let c = blowup_comparator(l).map_err(core)?;
        println!("comparator lambda={l} z_blowup={} residual={:e}", c.z_blowup, c.residual(100));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scan(o) => load(&o, None).and_then(run_and_write),
        Command::Criteria { o, only: names } => {
            let kinds: Result<Vec<CriterionKind>, CliError> = names
                .iter()
                .map(|n| CriterionKind::parse(n).ok_or_else(|| CliError::Config(format!("unknown criterion {n}"))))
                .collect();
            kinds.and_then(|k| load(&o, None).map(|c| only(c, &k))).and_then(run_and_write)
        }
        Command::Eigen(o) => load(&o, None).map(|c| only(c, &[CriterionKind::Eigen])).and_then(run_and_write),
        Command::Transport(o) => load(&o, None).map(|c| only(c, &[CriterionKind::Transport])).and_then(run_and_write),
        Command::RiccatiLab { r, m, lambda } => riccati_lab(r, m, &lambda),
        Command::Example { name, o } => match canned(&name) {
            Some(c) => load(&o, Some(c)).and_then(run_and_write),
            None => Err(CliError::Config(format!("unknown example {name}; choose one of {}", CANNED.join(", ")))),
        },
        Command::Validate(o) => load(&o, None).and_then(|cfg| {
            let v = validate(&cfg);
            if v.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(CliError::Invalid(v))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
