use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use osearch::control::{calibration, success_at, success_on_axis, RequestOutcomes, SuccessMode};
use osearch::cycles::{rank_pool, CycleRecord};
use serde_json::json;

use crate::config::default_eps_grid;
use crate::records::{file_digest, read_records, write_csv, write_jsonl, Meta};
use crate::RankArg;

pub const SUCCESS_COLUMNS: &[&str] = &["best_of", "mode", "eps", "rate"];
pub const AXIS_COLUMNS: &[&str] = &["axis", "best_of", "eps", "rate"];
pub const CALIBRATION_COLUMNS: &[&str] = &["axis", "lo", "hi", "count", "mean_requested", "mean_realised"];

#[derive(clap::Args)]
pub struct Args {
    /// Request outcome logs written by `search`.
    #[arg(long, num_args = 1..)]
    outcomes: Vec<PathBuf>,
    /// Cycle record files written by `cycles`.
    #[arg(long, num_args = 1..)]
    cycle_records: Vec<PathBuf>,
    /// Tolerances (default 0.01 to 0.50 in steps of 0.01).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    best_of: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, value_enum, default_value = "t-repeat")]
    rank_by: RankArg,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn success_rows(groups: &[RequestOutcomes], eps: &[f64], best_of: &[usize]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &k in best_of {
        for (mode, name) in [(SuccessMode::PerAxis, "per_axis"), (SuccessMode::Joint, "joint")] {
            for &e in eps {
                rows.push(vec![k.to_string(), name.to_string(), e.to_string(), success_at(groups, e, mode, k).to_string()]);
            }
        }
    }
    rows
}

pub fn calibration_rows(groups: &[RequestOutcomes], d_z: usize, bins: usize) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for axis in 0..d_z {
        for b in calibration(groups, axis, bins) {
            rows.push(vec![
                axis.to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
                b.mean_requested.to_string(),
                b.mean_realised.to_string(),
            ]);
        }
    }
    rows
}

pub fn run(args: &Args) -> Result<()> {
    let eps = if args.eps.is_empty() { default_eps_grid() } else { args.eps.clone() };
    let mut inputs = BTreeMap::new();
    let mut groups: Vec<RequestOutcomes> = Vec::new();
    for p in &args.outcomes {
        inputs.insert(p.display().to_string(), file_digest(p)?);
        for v in read_records(p)? {
            groups.push(serde_json::from_value(v).with_context(|| format!("request outcome in {}", p.display()))?);
        }
    }
    let mut cycles: Vec<CycleRecord> = Vec::new();
    for p in &args.cycle_records {
        inputs.insert(p.display().to_string(), file_digest(p)?);
        for v in read_records(p)? {
            cycles.push(serde_json::from_value(v).with_context(|| format!("cycle record in {}", p.display()))?);
        }
    }
    let config = json!({ "eps": eps, "best_of": args.best_of, "bins": args.bins, "top": args.top });
    let meta = Meta::new("diag", &config, &inputs, Vec::new());
    let d_z = groups.iter().map(|g| g.z_star.len()).max().unwrap_or(0);

    let success = if groups.is_empty() { Vec::new() } else { success_rows(&groups, &eps, &args.best_of) };
    let mut axes = Vec::new();
    for axis in 0..d_z {
        for &k in &args.best_of {
            for &e in &eps {
                axes.push(vec![axis.to_string(), k.to_string(), e.to_string(), success_on_axis(&groups, axis, e, k).to_string()]);
            }
        }
    }
    write_csv(&args.out.join("success.csv"), &meta, SUCCESS_COLUMNS, &success)?;
    write_csv(&args.out.join("axes.csv"), &meta, AXIS_COLUMNS, &axes)?;
    write_csv(&args.out.join("calibration.csv"), &meta, CALIBRATION_COLUMNS, &calibration_rows(&groups, d_z, args.bins))?;

    let invalid: usize = groups.iter().map(|g| g.samples.iter().filter(|s| !s.valid).count()).sum();
    let samples: usize = groups.iter().map(|g| g.samples.len()).sum();
    let ranking: Vec<_> = rank_pool(&cycles, args.rank_by.into(), args.top)
        .into_iter()
        .enumerate()
        .map(|(i, r)| json!({ "rank": i + 1, "seed_id": r.seed_id, "stats": r.stats }))
        .collect();
    let report = vec![json!({
        "requests": groups.len(),
        "samples": samples,
        "invalid": invalid,
        "cycle_records": cycles.len(),
        "ranking": ranking,
    })];
    write_jsonl(&args.out.join("report.jsonl"), &meta, &report)?;
    eprintln!("diag: {} requests, {} cycle records", groups.len(), cycles.len());
    Ok(())
}
