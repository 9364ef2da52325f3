//! Result files. CSVs use 15-significant-digit scientific notation, LF line
//! endings and a header row; JSON goes through serde with a fixed field order,
//! so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{Audit, EstimateReport, MonotonicityAudit, Weight};
use crate::flow::{ClassPath, FlowState, RunRecord, StepStats, Termination};
use crate::geometry;
use crate::pipeline::{FailedRun, RunOutcome};
use crate::soliton::{Bracket, SolitonProfile};

/// `{:.14e}`: 15 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

/// Header plus rows, comma-separated, LF-terminated.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub const DIAGNOSTICS_HEADER: [&str; 15] = [
    "s",
    "t",
    "H_min",
    "H_max",
    "third_ratio_sup",
    "typeI",
    "liyau",
    "local_typeI",
    "harnack",
    "vertex_rho",
    "a_inf",
    "phi_at_vertex",
    "dist_to_P0",
    "fibre_diam",
    "volume_total",
];

pub fn diagnostics_row(r: &EstimateReport) -> Vec<String> {
    [
        r.s,
        r.t,
        r.h_min,
        r.h_max,
        r.third_ratio_sup,
        r.type_i,
        r.liyau,
        r.local_type_i,
        r.harnack,
        r.vertex_rho,
        r.a_inf,
        r.phi_at_vertex,
        r.dist_to_p0,
        r.fibre_diam,
        r.volume_total,
    ]
    .iter()
    .map(|x| num(*x))
    .collect()
}

#[derive(Serialize)]
struct RunJson<'a> {
    config: &'a RunConfig,
    class_path: &'a ClassPath,
    original_t_sing: f64,
    schedule: &'a [f64],
    termination: &'a Termination,
    stats: &'a StepStats,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    weight: &'a Weight,
    monotonicity: &'a Option<MonotonicityAudit>,
    audits: &'a [Audit],
}

fn run_json<'a>(cfg: &'a RunConfig, record: &'a RunRecord) -> RunJson<'a> {
    RunJson {
        config: cfg,
        class_path: &record.path,
        original_t_sing: record.original_t_sing,
        schedule: &record.schedule,
        termination: &record.termination,
        stats: &record.stats,
    }
}

/// File name of a snapshot, e.g. `s_0.500.csv`.
pub fn snapshot_name(s: f64) -> String {
    format!("s_{s:.3}.csv")
}

/// Profile columns of a normalized snapshot.
pub fn snapshot_csv(state: &FlowState) -> String {
    let st = state.normalized();
    let p = &st.profile;
    let phi = p.phi();
    csv(
        &[
            "rho",
            "phi",
            "dphi",
            "b_minus_dphi",
            "d2phi",
            "d3phi",
            "d4phi",
        ],
        (0..p.len()).map(|i| {
            [
                p.grid.rho[i],
                phi[i],
                p.dphi[i],
                p.upper[i],
                p.d2phi[i],
                p.d3phi[i],
                p.d4phi[i],
            ]
            .iter()
            .map(|x| num(*x))
            .collect()
        }),
    )
}

/// Long-format plot data: one row per (checkpoint, node).
fn plots_csv(outcome: &RunOutcome) -> String {
    let cfg = &outcome.record.config;
    let mut rows = Vec::new();
    for (st, track) in outcome
        .record
        .snapshots
        .iter()
        .zip(&outcome.diagnostics.tracks)
    {
        let st = st.normalized();
        let p = &st.profile;
        let h = p.h_quantity();
        let r = geometry::scalar_curvature_checked(p, cfg, st.class_now.a, f64::INFINITY)
            .map(|c| c.r)
            .unwrap_or_else(|_| vec![f64::NAN; p.len()]);
        for i in 0..p.len() {
            rows.push(
                [
                    st.s,
                    p.grid.rho[i],
                    p.dphi[i],
                    p.d2phi[i],
                    h[i],
                    r[i],
                    track.v[i],
                ]
                .iter()
                .map(|x| num(*x))
                .collect(),
            );
        }
    }
    csv(&["s", "rho", "dphi", "d2phi", "H", "R", "v"], rows)
}

/// Write every output of a completed run into `dir`.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join("run.json"),
        &run_json(&outcome.config, &outcome.record),
    )?;
    fs::write(
        dir.join("diagnostics.csv"),
        csv(
            &DIAGNOSTICS_HEADER,
            outcome.diagnostics.reports.iter().map(diagnostics_row),
        ),
    )?;
    write_json(
        &dir.join("report.json"),
        &ReportJson {
            weight: &outcome.diagnostics.weight,
            monotonicity: &outcome.diagnostics.monotonicity,
            audits: &outcome.audits,
        },
    )?;
    write_json(&dir.join("verdict.json"), &outcome.verdict)?;
    if outcome.config.outputs.emit_profiles {
        let snaps = dir.join("snapshots");
        fs::create_dir_all(&snaps)?;
        for st in &outcome.record.snapshots {
            fs::write(snaps.join(snapshot_name(st.s)), snapshot_csv(st))?;
        }
    }
    if outcome.config.outputs.emit_plots_data {
        fs::write(dir.join("plots.csv"), plots_csv(outcome))?;
    }
    Ok(())
}

/// Write `run.json` (with the failure) for a run that stopped early.
pub fn write_failure(cfg: &RunConfig, failed: &FailedRun, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    match &failed.record {
        Some(record) => write_json(&dir.join("run.json"), &run_json(cfg, record)),
        None => {
            #[derive(Serialize)]
            struct Early<'a> {
                config: &'a RunConfig,
                failed_at_s: f64,
                error: &'a str,
            }
            write_json(
                &dir.join("run.json"),
                &Early {
                    config: cfg,
                    failed_at_s: failed.s,
                    error: &failed.error,
                },
            )
        }
    }
}

#[derive(Serialize)]
struct SolitonJson {
    m: u32,
    n: u32,
    a: f64,
    c_star: f64,
    #[serde(rename = "I_bracket")]
    i_bracket: [f64; 2],
    asymptotic_slope: f64,
    max_abs_residual: f64,
}

/// `soliton.csv` (x, w, residual) and `soliton.json`.
pub fn write_soliton(sol: &SolitonProfile, bracket: Bracket, dir: &Path) -> io::Result<f64> {
    fs::create_dir_all(dir)?;
    let mut body = String::from("x,w,residual\n");
    let mut worst: f64 = 0.0;
    for (x, w) in sol.x.iter().zip(&sol.w) {
        let r = sol.residual(*x);
        if *x >= 1e-3 {
            worst = worst.max(r.abs());
        }
        writeln!(body, "{},{},{}", num(*x), num(*w), num(r)).expect("writing to a String");
    }
    fs::write(dir.join("soliton.csv"), body)?;
    write_json(
        &dir.join("soliton.json"),
        &SolitonJson {
            m: sol.m,
            n: sol.n,
            a: sol.a,
            c_star: sol.c_star,
            i_bracket: [bracket.lo, bracket.hi],
            asymptotic_slope: sol.asymptotic_slope(),
            max_abs_residual: worst,
        },
    )?;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1.00000000000000e0");
        assert_eq!(num(-0.000123), "-1.23000000000000e-4");
        assert_eq!(
            csv(&["a", "b"], [vec!["1".into(), "2".into()]]),
            "a,b\n1,2\n"
        );
    }
}
