//! Surrogate-update and library-growth ablation over a seeded board library.
//!
//! `cargo run --release --example bo_ablation -- [budget] [seeds]`

use std::time::Instant;

use osearch::actuator::{ActuatorConfig, ActuatorKind};
use osearch::control::fit_scales;
use osearch::corpus::{generate_seed_library, DEFAULT_LIBRARY_SIZE};
use osearch::encoder::{BoardEncoder, EmbeddingCorpus};
use osearch::exec::Exec;
use osearch::library::Library;
use osearch::search::env::ActuatedEnv;
use osearch::search::{bo_loop, random_search, subsample_warm, warm_pool, BoConfig, Bounds, UpdateMode};
use osearch::space::BoardSpace;
use osearch::stats::mix_seed;
use osearch::zspace::{fit, FitConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let budget: usize = args.next().map_or(Ok(200), |a| a.parse())?;
    let n_seeds: u64 = args.next().map_or(Ok(1), |a| a.parse())?;
    let exec = Exec::Parallel;
    let t = Instant::now();

    let items = generate_seed_library(DEFAULT_LIBRARY_SIZE, 0);
    let encoder = BoardEncoder::default();
    let corpus = EmbeddingCorpus::from_boards(&encoder, &items, exec)?;
    let space = BoardSpace::new(encoder, fit(&corpus, &FitConfig::new(16, 3), None)?);
    let library = Library::build(&items, &space, None, exec)?;
    let zs: Vec<Vec<f64>> = library.entries().iter().map(|e| e.z.clone()).collect();
    let scales = fit_scales(&zs)?;
    let bounds = Bounds::from_scales(&scales.s, 2.5)?;
    let actuator = ActuatorConfig {
        kind: ActuatorKind::MutationHillclimb,
        hillclimb_steps: 2,
        invalid_rate: 0.05,
        ..ActuatorConfig::default()
    };
    println!("setup {:.1?}, scales {:?}", t.elapsed(), scales.s);

    for seed in 0..n_seeds {
        let mut env = ActuatedEnv::new(&space, library.clone(), actuator, scales.clone(), exec);
        let pool = random_search(&bounds, 128, 5, mix_seed(seed, 1), &mut env)?;
        let warm = subsample_warm(&warm_pool(&pool), 64, mix_seed(seed, 2));
        for (update, grow) in [(UpdateMode::Realised, false), (UpdateMode::Requested, false), (UpdateMode::Realised, true)] {
            let t = Instant::now();
            let mut env = ActuatedEnv::new(&space, library.clone(), actuator, scales.clone(), exec);
            let cfg = BoConfig {
                grow_library: grow,
                ..BoConfig::new(budget, 5, update, seed)
            };
            let run = bo_loop(&bounds, &warm, &cfg, &mut env, exec)?;
            println!(
                "seed {seed} update {update:?} grow {grow}: best {:.6} after {} queries ({} grown) in {:.1?}",
                run.best_so_far().unwrap_or(f64::NAN),
                run.queries(),
                env.grown(),
                t.elapsed()
            );
        }
    }
    Ok(())
}
