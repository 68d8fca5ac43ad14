use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{run_pipeline, PipelineChoice, PipelineInput, PipelineSettings};
use crate::error::Result;
use crate::model::Hierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalLevel {
    Indicator,
    Subdomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankShift {
    pub removed: String,
    pub level: RemovalLevel,
    pub mean_abs_shift: f64,
    pub max_abs_shift: usize,
}

/// Rebuilds the index without each indicator (or subdomain) in turn and
/// reports the mean absolute change in rank against the full index.
///
/// Parents left empty are removed with their only child. When that drops a
/// domain, explicit domain targets no longer apply and equal targets are used.
pub fn rank_shift_removal(
    input: &PipelineInput,
    choice: &PipelineChoice,
    settings: &PipelineSettings,
    level: RemovalLevel,
) -> Result<Vec<RankShift>> {
    let reference = run_pipeline(input, choice, settings)?.ranks;
    let h = &input.hierarchy;
    let names: Vec<String> = match level {
        RemovalLevel::Indicator => h.indicator_ids(),
        RemovalLevel::Subdomain => h.subdomains().iter().map(|s| s.name.clone()).collect(),
    };
    names
        .par_iter()
        .map(|name| {
            let pruned: Hierarchy = match level {
                RemovalLevel::Indicator => h.without_indicator(name)?,
                RemovalLevel::Subdomain => h.without_subdomain(name)?,
            };
            let mut s = settings.clone();
            if pruned.domains().len() != h.domains().len() {
                s.targets = None;
            }
            let ranks = run_pipeline(&input.with_hierarchy(pruned)?, choice, &s)?.ranks;
            let shifts: Vec<usize> = ranks.iter().zip(&reference).map(|(a, b)| a.abs_diff(*b)).collect();
            Ok(RankShift {
                removed: name.clone(),
                level,
                mean_abs_shift: shifts.iter().sum::<usize>() as f64 / shifts.len() as f64,
                max_abs_shift: shifts.iter().copied().max().unwrap_or(0),
            })
        })
        .collect()
}
