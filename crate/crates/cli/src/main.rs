use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use calabi_core::config::RunConfig;
use calabi_core::output::{self, num};
use calabi_core::pipeline::{self, RunOutcome, VerdictRecord};
use calabi_core::soliton;
use calabi_core::{BundleConfig, Error};

/// Overrides `outputs.directory` of every run (and `--out` of `soliton`).
const OUTPUT_ENV: &str = "CALABI_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "calabi",
    version,
    about = "Kähler–Ricci flow on Calabi-symmetric projective bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config: flow, diagnostics, classification.
    Run { config: PathBuf },
    /// Compute the shrinking soliton on the total space of L^(m+1).
    Soliton {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 1000.0)]
        x_max: f64,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        #[arg(long, default_value = "soliton")]
        out: PathBuf,
    },
    /// Run every `*.toml` in a directory and summarize into `sweep.csv`.
    Sweep {
        dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Exit statuses.
const CONFIG_ERROR: u8 = 2;
const NUMERICAL_FAILURE: u8 = 3;

fn env_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn load(path: &Path) -> std::result::Result<RunConfig, String> {
    let mut cfg = RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(dir) = env_dir() {
        cfg.outputs.directory = dir;
    }
    Ok(cfg)
}

fn cmd_run(path: &Path) -> Result<ExitCode> {
    let cfg = match load(path) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return Ok(ExitCode::from(CONFIG_ERROR));
        }
    };
    let dir = cfg.outputs.directory.clone();
    match pipeline::execute(&cfg) {
        Ok(outcome) => {
            output::write_outcome(&outcome, &dir)
                .with_context(|| format!("writing {}", dir.display()))?;
            println!("{}: {}", dir.display(), verdict_label(&outcome.verdict));
            for audit in outcome.audits.iter().filter(|a| !a.passed) {
                eprintln!(
                    "warning: audit {} failed ({} vs {})",
                    audit.name, audit.value, audit.threshold
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(failed) => {
            output::write_failure(&cfg, &failed, &dir)
                .with_context(|| format!("writing {}", dir.display()))?;
            eprintln!(
                "error: numerical failure at s = {}: {}",
                failed.s, failed.error
            );
            Ok(ExitCode::from(NUMERICAL_FAILURE))
        }
    }
}

fn verdict_label(v: &VerdictRecord) -> String {
    match v {
        VerdictRecord::Classified(v) => v.case.to_string(),
        VerdictRecord::Inconclusive { .. } => "Inconclusive".into(),
    }
}

fn cmd_soliton(
    m: u32,
    n: u32,
    a: f64,
    x_max: f64,
    samples: usize,
    out: PathBuf,
) -> Result<ExitCode> {
    let invalid = |e: Error| {
        eprintln!("error: {e}");
        ExitCode::from(CONFIG_ERROR)
    };
    // λ only enters through a = λ − m − 1
    let config = match BundleConfig::new(n, m, a + f64::from(m) + 1.0) {
        Ok(c) => c,
        Err(e) => return Ok(invalid(e)),
    };
    if !(a > 0.0 && a.is_finite()) {
        return Ok(invalid(Error::InvalidInput {
            field: "a".into(),
            reason: "must be positive".into(),
        }));
    }
    let numerical = |e: Error| {
        eprintln!("error: {e}");
        ExitCode::from(NUMERICAL_FAILURE)
    };
    let bracket = match soliton::bracket_c_star(&config, a) {
        Ok(b) => b,
        Err(e) => return Ok(numerical(e)),
    };
    let c = match soliton::solve_c_star(&config, a) {
        Ok(c) => c,
        Err(e) => return Ok(numerical(e)),
    };
    let sol = match soliton::soliton_profile(&config, a, c, x_max, samples) {
        Ok(s) => s,
        Err(e @ Error::InvalidInput { .. }) => return Ok(invalid(e)),
        Err(e) => return Ok(numerical(e)),
    };
    let dir = env_dir().unwrap_or(out);
    let worst = output::write_soliton(&sol, bracket, &dir)
        .with_context(|| format!("writing {}", dir.display()))?;
    println!("c_star = {c:.15}  max |residual| = {worst:.3e}");
    Ok(ExitCode::SUCCESS)
}

const SWEEP_HEADER: [&str; 13] = [
    "name",
    "status",
    "verdict",
    "s",
    "H_min",
    "H_max",
    "third_ratio_sup",
    "typeI",
    "liyau",
    "local_typeI",
    "harnack",
    "fibre_diam",
    "comparison_sup",
];

fn sweep_row(name: &str, outcome: &RunOutcome) -> Vec<String> {
    let r = outcome.final_report();
    let comparison = match &outcome.verdict {
        VerdictRecord::Classified(v) => v.evidence.comparison_sup,
        VerdictRecord::Inconclusive { .. } => f64::NAN,
    };
    let mut row = vec![
        name.to_string(),
        "ok".into(),
        verdict_label(&outcome.verdict),
    ];
    row.extend(
        [
            r.s,
            r.h_min,
            r.h_max,
            r.third_ratio_sup,
            r.type_i,
            r.liyau,
            r.local_type_i,
            r.harnack,
            r.fibre_diam,
            comparison,
        ]
        .iter()
        .map(|x| num(*x)),
    );
    row
}

enum SweepResult {
    Invalid,
    Done(Vec<String>),
    Failed(Vec<String>),
}

fn sweep_one(path: &Path, name: &str, base: Option<&Path>) -> SweepResult {
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return SweepResult::Invalid;
        }
    };
    if let Some(base) = base {
        cfg.outputs.directory = base.join(name);
    }
    let dir = cfg.outputs.directory.clone();
    match pipeline::execute(&cfg) {
        Ok(outcome) => match output::write_outcome(&outcome, &dir) {
            Ok(()) => SweepResult::Done(sweep_row(name, &outcome)),
            Err(e) => {
                eprintln!("error: {name}: writing {}: {e}", dir.display());
                SweepResult::Failed(failure_row(name, "io_error", f64::NAN))
            }
        },
        Err(failed) => {
            eprintln!(
                "error: {name}: numerical failure at s = {}: {}",
                failed.s, failed.error
            );
            if let Err(e) = output::write_failure(&cfg, &failed, &dir) {
                eprintln!("error: {name}: writing {}: {e}", dir.display());
            }
            SweepResult::Failed(failure_row(name, "numerical_failure", failed.s))
        }
    }
}

fn failure_row(name: &str, status: &str, s: f64) -> Vec<String> {
    let mut row = vec![name.to_string(), status.to_string(), String::new(), num(s)];
    row.resize(SWEEP_HEADER.len(), String::new());
    row
}

fn cmd_sweep(dir: &Path, jobs: Option<usize>) -> Result<ExitCode> {
    let mut configs: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", dir.display());
            return Ok(ExitCode::from(CONFIG_ERROR));
        }
    };
    if configs.is_empty() {
        eprintln!("error: no *.toml configs in {}", dir.display());
        return Ok(ExitCode::from(CONFIG_ERROR));
    }
    configs.sort();
    let base = env_dir();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?;
    let results: Vec<(String, SweepResult)> = pool.install(|| {
        use rayon::prelude::*;
        configs
            .par_iter()
            .map(|p| {
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let r = sweep_one(p, &name, base.as_deref());
                (name, r)
            })
            .collect()
    });
    let mut any_failed = false;
    let mut rows = Vec::new();
    for (name, r) in results {
        match r {
            SweepResult::Done(row) => {
                println!("{name}: {}", row[2]);
                rows.push(row);
            }
            SweepResult::Failed(row) => {
                any_failed = true;
                rows.push(row);
            }
            SweepResult::Invalid => any_failed = true,
        }
    }
    let out = base.unwrap_or_else(|| dir.to_path_buf()).join("sweep.csv");
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&out, output::csv(&SWEEP_HEADER, rows))
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(if any_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Soliton {
            m,
            n,
            a,
            x_max,
            samples,
            out,
        } => cmd_soliton(m, n, a, x_max, samples, out),
        Command::Sweep { dir, jobs } => cmd_sweep(&dir, jobs),
    }
}
