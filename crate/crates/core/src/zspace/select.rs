use serde::{Deserialize, Serialize};

use super::diagnostics::{diagnostics, Neighborhoods, PreferenceWeights, ZDiagnostics};
use super::pca::RankPolicy;
use super::{fit, ZModel};
use crate::encoder::EmbeddingCorpus;
use crate::error::Result;
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub d_inter: usize,
    pub d_z: usize,
    pub whiten: bool,
    pub anchored: bool,
    #[serde(default = "default_true")]
    pub rotate: bool,
    /// Whitening regulariser relative to the largest eigenvalue.
    #[serde(default = "default_eps")]
    pub eps_rel: f64,
    #[serde(default)]
    pub rank_policy: RankPolicy,
}

fn default_true() -> bool {
    true
}

fn default_eps() -> f64 {
    1e-8
}

impl FitConfig {
    pub fn new(d_inter: usize, d_z: usize) -> Self {
        FitConfig {
            d_inter,
            d_z,
            whiten: false,
            anchored: false,
            rotate: true,
            eps_rel: default_eps(),
            rank_policy: RankPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub d_inter: Vec<usize>,
    pub d_z: Vec<usize>,
    pub whiten: Vec<bool>,
    pub anchored: Vec<bool>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            d_inter: vec![8, 10, 12, 14, 16, 18, 20, 24, 28, 32, 36, 40, 48],
            d_z: vec![3, 4, 5, 6, 7, 8],
            whiten: vec![false, true],
            anchored: vec![false],
        }
    }
}

impl GridConfig {
    pub fn single(cfg: &FitConfig) -> Self {
        GridConfig {
            d_inter: vec![cfg.d_inter],
            d_z: vec![cfg.d_z],
            whiten: vec![cfg.whiten],
            anchored: vec![cfg.anchored],
        }
    }

    /// Configurations in nested order (d_inter, d_z, whiten, anchored),
    /// skipping `d_z > d_inter` and `d_inter >= n`.
    pub fn expand(&self, n: usize) -> Vec<FitConfig> {
        let mut out = Vec::new();
        for &d_inter in &self.d_inter {
            for &d_z in &self.d_z {
                for &whiten in &self.whiten {
                    for &anchored in &self.anchored {
                        if d_z <= d_inter && d_inter < n {
                            out.push(FitConfig {
                                whiten,
                                anchored,
                                ..FitConfig::new(d_inter, d_z)
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub weights: PreferenceWeights,
    pub k_list: Vec<usize>,
    pub anchor_capture_min: f64,
    pub anchor_on_z1_min: f64,
    pub eps_rel: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            weights: PreferenceWeights::default(),
            k_list: vec![10, 20],
            anchor_capture_min: 0.5,
            anchor_on_z1_min: 0.5,
            eps_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedConfig {
    pub config: FitConfig,
    pub diagnostics: ZDiagnostics,
    #[serde(skip)]
    pub model: Option<ZModel>,
}

/// Fit and diagnose every grid configuration, drop anchored fits below the
/// capture thresholds and configurations that fail to fit, and sort by
/// preference (descending, ties in grid order).
pub fn model_select(
    corpus: &EmbeddingCorpus,
    grid: &GridConfig,
    sel: &SelectionConfig,
    anchor_mean: Option<&[f64]>,
    exec: Exec,
) -> Result<Vec<RankedConfig>> {
    let original = Neighborhoods::new(corpus, exec);
    let configs: Vec<FitConfig> = grid
        .expand(corpus.len())
        .into_iter()
        .filter(|c| !c.anchored || anchor_mean.is_some())
        .map(|c| FitConfig { eps_rel: sel.eps_rel, ..c })
        .collect();
    let evaluated: Vec<Option<RankedConfig>> = exec.map(&configs, |cfg| {
        let model = fit(corpus, cfg, anchor_mean).ok()?;
        let anchor = if cfg.anchored { anchor_mean } else { None };
        let diag = diagnostics(
            &model,
            corpus,
            &sel.k_list,
            anchor,
            &sel.weights,
            Some(&original),
            Exec::Sequential,
        );
        if cfg.anchored {
            let capture = diag.anchor_capture.unwrap_or(0.0);
            let on_z1 = diag.anchor_on_z1.unwrap_or(0.0);
            if capture < sel.anchor_capture_min || on_z1 < sel.anchor_on_z1_min {
                return None;
            }
        }
        Some(RankedConfig {
            config: cfg.clone(),
            diagnostics: diag,
            model: Some(model),
        })
    });
    let mut ranked: Vec<RankedConfig> = evaluated.into_iter().flatten().collect();
    // stable sort keeps grid order among equal preferences
    ranked.sort_by(|a, b| b.diagnostics.preference.total_cmp(&a.diagnostics.preference));
    Ok(ranked)
}
