use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use osearch::control::{fit_scales, AxisScales, RequestOutcomes};
use osearch::encoder::BoardEncoder;
use osearch::exec::Exec;
use osearch::library::Library;
use osearch::search::env::{ActuatedEnv, SyntheticEnv};
use osearch::search::{
    bo_loop, random_search, grid_sweep, subsample_warm, trace_csv, warm_pool, BoConfig, Bounds, EiConfig, QueryEnv, SearchRun,
};
use osearch::space::BoardSpace;
use osearch::stats::mix_seed;
use osearch::zspace::ZModel;
use serde::Serialize;

use super::diag::{calibration_rows, success_rows, CALIBRATION_COLUMNS, SUCCESS_COLUMNS};
use crate::config::{ModeSpec, RunConfig};
use crate::records::{file_digest, write, write_csv, write_jsonl, Meta};

#[derive(Serialize)]
struct Summary {
    seed: u64,
    mode: &'static str,
    n_ok: usize,
    queries: usize,
    best_f: Option<f64>,
    grown: usize,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn run_one(cfg: &RunConfig, scales: &AxisScales, seed: u64, env: &mut dyn QueryEnv, exec: Exec) -> Result<SearchRun> {
    let k = cfg.search.k;
    let bounds = Bounds::from_scales(&scales.s, cfg.search.bounds_multiplier)?;
    let run = match &cfg.search.mode {
        ModeSpec::Grid { levels } => {
            if levels.len() != scales.d_z() {
                bail!("grid has {} axes but the space has {}", levels.len(), scales.d_z());
            }
            let scaled: Vec<Vec<f64>> = levels
                .iter()
                .zip(&scales.s)
                .map(|(l, s)| l.iter().map(|v| v * s).collect())
                .collect();
            grid_sweep(&scaled, k, seed, env)?
        }
        ModeSpec::Random { n_requests } => random_search(&bounds, *n_requests, k, seed, env)?,
        ModeSpec::Bo {
            budget,
            update,
            grow_library,
            warm_pool: pool_size,
            warm_size,
            max_queries,
            ei_starts,
            ei_evals,
        } => {
            let warm = if *warm_size > 0 {
                let pool_run = random_search(&bounds, *pool_size, k, mix_seed(seed, 1), env)?;
                subsample_warm(&warm_pool(&pool_run), *warm_size, mix_seed(seed, 2))
            } else {
                Vec::new()
            };
            let bo = BoConfig {
                grow_library: *grow_library,
                max_queries: *max_queries,
                ei: EiConfig {
                    starts: *ei_starts,
                    evals_per_start: *ei_evals,
                    ..EiConfig::default()
                },
                ..BoConfig::new(*budget, k, *update, seed)
            };
            bo_loop(&bounds, &warm, &bo, env, exec)?
        }
    };
    Ok(run)
}

pub fn run(config_path: &Path, out: &Path, exec: Exec) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut inputs = BTreeMap::new();
    inputs.insert("config".to_string(), file_digest(config_path)?);
    let mode = cfg.search.mode.name();

    let actuated = match &cfg.synthetic {
        Some(_) => None,
        None => {
            let model_path = resolve(base, cfg.model.as_deref().expect("validated"));
            let lib_path = resolve(base, cfg.library.as_deref().expect("validated"));
            inputs.insert("model".to_string(), file_digest(&model_path)?);
            inputs.insert("library".to_string(), file_digest(&lib_path)?);
            let model = ZModel::load(&model_path)?;
            let library = Library::load(&lib_path)?;
            if library.d_z() != model.d_z() {
                bail!("library has d_z = {} but the model has {}", library.d_z(), model.d_z());
            }
            let zs: Vec<Vec<f64>> = library.entries().iter().map(|e| e.z.clone()).collect();
            let scales = fit_scales(&zs).context("fitting axis scales from the library")?;
            Some((BoardSpace::new(BoardEncoder::default(), model), library, scales))
        }
    };
    let meta = Meta::new("search", &cfg, &inputs, cfg.seeds.clone());

    let mut summaries = Vec::new();
    let mut success = Vec::new();
    let mut calib = Vec::new();
    for &seed in &cfg.seeds {
        let (run, scales, grown) = match (&cfg.synthetic, &actuated) {
            (Some(syn), _) => {
                let scales = AxisScales::unit(syn.center.len());
                let mut env = SyntheticEnv {
                    d_z: syn.center.len(),
                    objective: syn.objective(),
                    noise_sigma: syn.noise_sigma,
                    invalid_rate: syn.invalid_rate,
                };
                (run_one(&cfg, &scales, seed, &mut env, exec)?, scales, 0)
            }
            (None, Some((space, library, scales))) => {
                let mut env = ActuatedEnv::new(space, library.clone(), cfg.actuator, scales.clone(), exec);
                env.alpha = cfg.alpha;
                env.reward = cfg.reward;
                let run = run_one(&cfg, scales, seed, &mut env, exec)?;
                (run, scales.clone(), env.grown())
            }
            (None, None) => unreachable!("validated config"),
        };
        let m = meta.with_seed(seed);
        write_jsonl(&out.join(format!("run-{mode}-seed{seed}.jsonl")), &m, &run.records)?;
        write(
            &out.join(format!("trace-{mode}-seed{seed}.csv")),
            &format!("# {}\n{}", m.header(), trace_csv(&run, mode)),
        )?;
        let outcomes: Vec<RequestOutcomes> = run.outcomes();
        write_jsonl(&out.join(format!("outcomes-{mode}-seed{seed}.jsonl")), &m, &outcomes)?;
        for row in success_rows(&outcomes, &cfg.metrics.eps, &cfg.metrics.best_of) {
            success.push([vec![seed.to_string()], row].concat());
        }
        for row in calibration_rows(&outcomes, scales.d_z(), cfg.metrics.calibration_bins) {
            calib.push([vec![seed.to_string()], row].concat());
        }
        eprintln!(
            "seed {seed}: {} requests, n_ok {}, best f {}",
            run.records.len(),
            run.n_ok,
            run.best_so_far().map_or_else(|| "none".to_string(), |f| format!("{f:.6}"))
        );
        summaries.push(Summary {
            seed,
            mode,
            n_ok: run.n_ok,
            queries: run.queries(),
            best_f: run.best_so_far(),
            grown,
        });
    }
    let seed_col = |cols: &[&'static str]| [&["seed"][..], cols].concat();
    write_csv(&out.join(format!("success-{mode}.csv")), &meta, &seed_col(SUCCESS_COLUMNS), &success)?;
    write_csv(&out.join(format!("calibration-{mode}.csv")), &meta, &seed_col(CALIBRATION_COLUMNS), &calib)?;
    write_jsonl(&out.join(format!("summary-{mode}.jsonl")), &meta, &summaries)?;
    Ok(())
}
