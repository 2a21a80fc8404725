//! Command-line front end.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

use crate::config::{ExperimentConfig, ExperimentKind, ReportFormat};
use crate::experiments::run_experiment;
use crate::report::emit_report;
use crate::snapshot;

/// Runs one verification experiment and writes its report.
#[derive(Parser, Debug)]
#[command(name = "nsmild", version)]
pub struct Args {
    pub kind: ExperimentKind,
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NSMILD_THREADS") {
        let n: usize = v.parse().with_context(|| format!("NSMILD_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Runs the experiment and writes all outputs; `Ok(true)` iff every check passed.
pub fn run(args: Args) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.kind = args.kind;
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(format) = args.format {
        cfg.format = format;
    }
    let run = run_experiment(&cfg)?;
    let path = emit_report(&run.report, cfg.format, &cfg.output_dir)?;
    if !run.snapshots.is_empty() {
        let dir = cfg.output_dir.join("snapshots");
        std::fs::create_dir_all(&dir)?;
        for (name, field) in &run.snapshots {
            snapshot::save(&dir.join(format!("{name}.nsmild")), field)?;
        }
    }
    let timings: String = run.timings.iter().map(|(id, s)| format!("{id},{s:.3}\n")).collect();
    std::fs::write(cfg.output_dir.join("timings.csv"), format!("check_id,seconds\n{timings}"))?;

    for c in &run.report.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        eprintln!("{status} {} value={:e} target={:e}", c.check_id, c.value, c.target);
        if let Some(e) = &c.error {
            eprintln!("     error: {e}");
        }
    }
    let s = &run.report.summary;
    eprintln!("{} of {} checks passed; report at {}", s.passed, s.total, path.display());
    Ok(run.report.all_passed())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &std::path::Path) -> PathBuf {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.points = 8;
        cfg.solver.step = 1.0 / 32.0;
        cfg.heat.step = 1.0 / 8.0;
        cfg.operators.samples = 3;
        let path = dir.join("tiny.toml");
        std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
        path
    }

    #[test]
    fn simulate_writes_report_series_and_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let args = Args {
            kind: ExperimentKind::Simulate,
            config: tiny(dir.path()),
            out: Some(out.clone()),
            seed: Some(11),
            format: Some(ReportFormat::Json),
        };
        run(args).unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["seed"], 11);
        assert_eq!(report["kind"], "simulate");
        let ids: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["check_id"].as_str().unwrap()).collect();
        assert_eq!(ids, ["C01_operator_algebra", "C02_heat_flow", "C03_mild_consistency"]);
        assert_eq!(report["checks"][1]["pass"], true);
        let u = snapshot::load(&out.join("snapshots/u_final.nsmild")).unwrap();
        assert_eq!(u.grid().points_per_axis(), 8);
        assert!(out.join("series/heat_decay.csv").exists());
        assert!(out.join("timings.csv").exists());
    }

    #[test]
    fn invalid_configuration_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[grid]\npoints = 9\n").unwrap();
        let args = Args {
            kind: ExperimentKind::Kernels,
            config: path,
            out: Some(dir.path().join("out")),
            seed: None,
            format: None,
        };
        assert!(run(args).is_err());
        assert!(!dir.path().join("out/report.csv").exists());
    }
}
