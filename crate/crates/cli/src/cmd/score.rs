use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use osearch::ca::Rule;
use osearch::corpus::generate_seed_library;
use osearch::cycles::{decompose_pool, rank_pool, CycleRecord, CycleStats, RankKey};
use osearch::exec::Exec;
use osearch::score::{score_batch, CaPlusPlusScore};
use serde::Serialize;
use serde_json::json;

use crate::inputs::{expand, load_seeds, load_seeds_strict};
use crate::records::{file_digest, write, write_jsonl, Meta};

pub fn gen_seeds(count: usize, seed: u64, out: &Path) -> Result<()> {
    for (id, b) in generate_seed_library(count, seed) {
        write(&out.join(format!("{id}.txt")), &b.to_text())?;
    }
    eprintln!("wrote {count} seeds to {}", out.display());
    Ok(())
}

fn digests(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for p in expand(paths)? {
        if let Ok(d) = file_digest(&p) {
            m.insert(p.display().to_string(), d);
        }
    }
    Ok(m)
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    id: &'a str,
    #[serde(flatten)]
    score: &'a CaPlusPlusScore,
    #[serde(skip_serializing_if = "Option::is_none")]
    cycles: Option<BTreeMap<&'static str, CycleStats>>,
}

pub fn run(paths: &[PathBuf], with_cycles: bool, max_steps: usize, out: Option<&Path>, exec: Exec) -> Result<()> {
    let (seeds, rejected) = load_seeds(paths)?;
    for r in &rejected {
        eprintln!("invalid seed `{}`: {}", r.id, r.reason);
    }
    if seeds.is_empty() {
        bail!("no valid seeds to score");
    }
    let boards: Vec<_> = seeds.iter().map(|(_, b)| b.clone()).collect();
    let scores = score_batch(&boards, exec);
    let cycles: Vec<BTreeMap<&'static str, CycleStats>> = if with_cycles {
        let per_rule: Vec<Vec<CycleStats>> = Rule::BENCHMARK
            .iter()
            .map(|rule| decompose_pool(&boards, rule, max_steps, exec))
            .collect();
        (0..boards.len())
            .map(|i| Rule::BENCHMARK.iter().zip(&per_rule).map(|(r, s)| (r.name, s[i])).collect())
            .collect()
    } else {
        Vec::new()
    };
    let records: Vec<ScoreRecord> = seeds
        .iter()
        .zip(&scores)
        .enumerate()
        .map(|(i, ((id, _), score))| ScoreRecord {
            id,
            score,
            cycles: cycles.get(i).cloned(),
        })
        .collect();
    let config = json!({ "cycles": with_cycles, "max_steps": max_steps, "rejected": rejected.len() });
    let meta = Meta::new("score", &config, &digests(paths)?, Vec::new());
    match out {
        Some(p) => write_jsonl(p, &meta, &records)?,
        None => print!("{}", crate::records::jsonl(&meta, &records)?),
    }
    eprintln!("scored {} seeds, {} invalid", records.len(), rejected.len());
    Ok(())
}

pub fn cycles(paths: &[PathBuf], rule: &str, max_steps: usize, key: RankKey, top: usize, out: &Path, exec: Exec) -> Result<()> {
    let rule = Rule::by_name(rule).ok_or_else(|| anyhow!("unknown rule `{rule}` (Life, HighLife or Seeds)"))?;
    let seeds = load_seeds_strict(paths)?;
    let boards: Vec<_> = seeds.iter().map(|(_, b)| b.clone()).collect();
    let stats = decompose_pool(&boards, &rule, max_steps, exec);
    let records: Vec<CycleRecord> = seeds
        .iter()
        .zip(stats)
        .map(|((id, _), stats)| CycleRecord {
            seed_id: id.clone(),
            stats,
        })
        .collect();
    let config = json!({ "rule": rule.notation(), "max_steps": max_steps });
    let meta = Meta::new("cycles", &config, &digests(paths)?, Vec::new());
    write_jsonl(out, &meta, &records)?;
    for (i, r) in rank_pool(&records, key, top).iter().enumerate() {
        let show = |v: Option<usize>| v.map_or_else(|| "capped".to_string(), |t| t.to_string());
        println!(
            "{:>3} {:<24} mu={:<6} lambda={:<6} t_repeat={}",
            i + 1,
            r.seed_id,
            show(r.stats.mu),
            show(r.stats.lambda),
            show(r.stats.t_repeat)
        );
    }
    Ok(())
}
