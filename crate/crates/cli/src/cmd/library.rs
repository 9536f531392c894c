use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use osearch::encoder::BoardEncoder;
use osearch::exec::Exec;
use osearch::library::{BandFilter, Library};
use osearch::space::BoardSpace;
use osearch::zspace::ZModel;
use serde_json::json;

use crate::inputs::{expand, load_seeds_strict};
use crate::records::{file_digest, write, Meta};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    seeds: Vec<PathBuf>,
    /// Keep only seeds in the outer band `|z_i| >= Q_q(|z_i|)` of some axis.
    #[arg(long)]
    band_quantile: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: &Args, exec: Exec) -> Result<()> {
    let mut inputs = BTreeMap::new();
    inputs.insert(args.model.display().to_string(), file_digest(&args.model)?);
    for p in expand(&args.seeds)? {
        inputs.insert(p.display().to_string(), file_digest(&p)?);
    }
    let model = ZModel::load(&args.model)?;
    let items = load_seeds_strict(&args.seeds)?;
    let space = BoardSpace::new(BoardEncoder::default(), model);
    let filter = args.band_quantile.map(|quantile| BandFilter { quantile });
    let lib = Library::build(&items, &space, filter, exec)?;
    let meta = Meta::new("build-lib", &json!({ "band_quantile": args.band_quantile }), &inputs, Vec::new());
    write(&args.out, &format!("{}\n{}", meta.header(), lib.to_jsonl()))?;
    eprintln!("library: {} of {} seeds kept", lib.len(), items.len());
    Ok(())
}
