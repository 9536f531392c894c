use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use osearch::encoder::{import_embeddings, BoardEncoder, EmbeddingCorpus};
use osearch::exec::Exec;
use osearch::zspace::{model_select, FitConfig, GridConfig, SelectionConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::inputs::{expand, load_seeds_strict};
use crate::records::{file_digest, write, write_jsonl, Meta};

#[derive(clap::Args)]
pub struct Args {
    /// Seed files or directories, encoded with the built-in board encoder.
    #[arg(long, num_args = 1.., conflicts_with = "embeddings")]
    seeds: Vec<PathBuf>,
    /// External embeddings, one `{"id", "vector"}` object per line.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// JSON file with `grid` and/or `selection` objects.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fit a single configuration instead of a grid.
    #[arg(long, requires = "d_z")]
    d_inter: Option<usize>,
    #[arg(long, requires = "d_inter")]
    d_z: Option<usize>,
    #[arg(long)]
    whiten: bool,
    /// Comma-separated corpus ids whose mean anchors axis 1.
    #[arg(long, value_delimiter = ',')]
    anchor: Vec<String>,
    /// Model file for the top-ranked configuration.
    #[arg(long)]
    out: PathBuf,
    /// Ranked-configuration report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitFile {
    #[serde(default)]
    grid: Option<GridConfig>,
    #[serde(default)]
    selection: Option<SelectionConfig>,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    rank: usize,
    config: &'a FitConfig,
    diagnostics: &'a osearch::zspace::ZDiagnostics,
}

pub fn run(args: &Args, exec: Exec) -> Result<()> {
    let mut inputs = BTreeMap::new();
    let corpus = match &args.embeddings {
        Some(p) => {
            inputs.insert(p.display().to_string(), file_digest(p)?);
            import_embeddings(p)?
        }
        None => {
            if args.seeds.is_empty() {
                bail!("pass --seeds or --embeddings");
            }
            for p in expand(&args.seeds)? {
                inputs.insert(p.display().to_string(), file_digest(&p)?);
            }
            let items = load_seeds_strict(&args.seeds)?;
            EmbeddingCorpus::from_boards(&BoardEncoder::default(), &items, exec)?
        }
    };
    let file: FitFile = match &args.config {
        Some(p) => {
            inputs.insert(p.display().to_string(), file_digest(p)?);
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => FitFile::default(),
    };
    let anchored = !args.anchor.is_empty();
    let grid = match (args.d_inter, args.d_z) {
        (Some(d_inter), Some(d_z)) => GridConfig::single(&FitConfig {
            whiten: args.whiten,
            anchored,
            ..FitConfig::new(d_inter, d_z)
        }),
        _ => {
            let mut g = file.grid.clone().unwrap_or_default();
            if anchored {
                g.anchored = vec![true];
            }
            g
        }
    };
    let selection = file.selection.clone().unwrap_or_default();
    let anchor_mean = if anchored {
        let rows: Vec<usize> = args
            .anchor
            .iter()
            .map(|id| {
                corpus
                    .ids
                    .iter()
                    .position(|c| c == id)
                    .with_context(|| format!("anchor id `{id}` not in corpus"))
            })
            .collect::<Result<_>>()?;
        let mut mean = vec![0.0; corpus.dim()];
        for &r in &rows {
            for (m, v) in mean.iter_mut().zip(corpus.row(r)) {
                *m += v / rows.len() as f64;
            }
        }
        Some(mean)
    } else {
        None
    };

    let ranked = model_select(&corpus, &grid, &selection, anchor_mean.as_deref(), exec)?;
    let Some(top) = ranked.first() else {
        bail!("no configuration could be fitted");
    };
    let config = json!({
        "grid": grid,
        "selection": selection,
        "anchor": args.anchor,
        "source": corpus.source,
    });
    let meta = Meta::new("fit-z", &config, &inputs, Vec::new());
    let model = top.model.clone().expect("ranked configs carry their model").with_provenance(meta.header());
    write(&args.out, &(model.to_json() + "\n"))?;
    if let Some(report) = &args.report {
        let lines: Vec<ReportLine> = ranked
            .iter()
            .enumerate()
            .map(|(i, r)| ReportLine {
                rank: i + 1,
                config: &r.config,
                diagnostics: &r.diagnostics,
            })
            .collect();
        write_jsonl(report, &meta, &lines)?;
    }
    let d = &top.diagnostics;
    eprintln!(
        "selected d_inter={} d_z={} whiten={} anchored={} (preference {:.4}, recon_r2 {:.6}) from {} configs",
        top.config.d_inter,
        top.config.d_z,
        top.config.whiten,
        top.config.anchored,
        d.preference,
        d.recon_r2,
        ranked.len()
    );
    Ok(())
}
