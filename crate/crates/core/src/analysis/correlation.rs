use log::warn;
use serde::{Deserialize, Serialize};

use crate::aggregation::{HierarchyScores, Level, LevelScores};
use crate::error::{Error, Result};
use crate::model::{Hierarchy, Year};
use crate::stats;

pub const REDUNDANT: f64 = 0.9;
pub const NEGATIVE: f64 = -0.4;
pub const WEAK_LO: f64 = 0.3;
pub const WEAK_HI: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagKind {
    /// ρ ≥ 0.9.
    Redundant,
    /// ρ ≤ −0.4.
    Negative,
    /// 0.3 < ρ ≤ 0.4.
    Weak,
    /// An indicator correlates more with a foreign subdomain than with its own.
    ForeignStronger,
}

impl FlagKind {
    pub fn classify(rho: f64) -> Option<Self> {
        if rho >= REDUNDANT {
            Some(FlagKind::Redundant)
        } else if rho <= NEGATIVE {
            Some(FlagKind::Negative)
        } else if rho > WEAK_LO && rho <= WEAK_HI {
            Some(FlagKind::Weak)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFlag {
    pub a: String,
    pub b: String,
    pub rho: f64,
    pub kind: FlagKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationScreen {
    pub level: Level,
    /// Single-year screen, or all unit-year observations pooled.
    pub year: Option<Year>,
    pub names: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub flags: Vec<CorrelationFlag>,
    /// Zero-variance series left out of the matrix.
    pub excluded: Vec<String>,
}

fn series(level: &LevelScores, node: usize, year: Option<usize>) -> Vec<f64> {
    match year {
        Some(t) => level.column(node, t),
        None => (0..level.rows.len())
            .flat_map(|r| (0..level.years.len()).map(move |t| (r, t)))
            .map(|(r, t)| level.get(r, node, t))
            .collect(),
    }
}

fn year_slot(level: &LevelScores, year: Option<Year>) -> Result<Option<usize>> {
    year.map(|y| {
        level
            .year_index(y)
            .ok_or_else(|| Error::Config(format!("year {y} is not in the data")))
    })
    .transpose()
}

/// Pearson correlations between the nodes of one level, with the
/// redundancy, negative and weak bands flagged.
pub fn correlation_screen(scores: &HierarchyScores, level: Level, year: Option<Year>) -> Result<CorrelationScreen> {
    if level == Level::Overall {
        return Err(Error::Config("the overall level has a single series".into()));
    }
    let ls = scores.level(level);
    let t = year_slot(ls, year)?;
    let mut names = Vec::new();
    let mut cols = Vec::new();
    let mut excluded = Vec::new();
    for (n, name) in ls.nodes.iter().enumerate() {
        let s = series(ls, n, t);
        if stats::variance(&s) > 0.0 {
            names.push(name.clone());
            cols.push(s);
        } else {
            warn!("`{name}` has zero variance and is left out of the correlation screen");
            excluded.push(name.clone());
        }
    }
    let matrix = stats::correlation_matrix(&cols).expect("zero-variance series were excluded");
    let mut flags = Vec::new();
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            if let Some(kind) = FlagKind::classify(matrix[a][b]) {
                flags.push(CorrelationFlag {
                    a: names[a].clone(),
                    b: names[b].clone(),
                    rho: matrix[a][b],
                    kind,
                });
            }
        }
    }
    Ok(CorrelationScreen {
        level,
        year,
        names,
        matrix,
        flags,
        excluded,
    })
}

/// Correlations of each indicator with every subdomain it does not
/// belong to. Band flags apply as in [`correlation_screen`]; in addition,
/// a foreign subdomain that correlates more strongly than the indicator's
/// own subdomain is flagged.
pub fn cross_level_screen(scores: &HierarchyScores, h: &Hierarchy, year: Option<Year>) -> Result<Vec<CorrelationFlag>> {
    let ind = &scores.indicator;
    let sub = &scores.subdomain;
    let t = year_slot(ind, year)?;
    let subs: Vec<Vec<f64>> = (0..sub.nodes.len()).map(|s| series(sub, s, t)).collect();
    let mut flags = Vec::new();
    for (i, node) in h.indicators().iter().enumerate() {
        let x = series(ind, i, t);
        let Some(own) = stats::pearson(&x, &subs[node.subdomain]) else {
            continue;
        };
        for (s, col) in subs.iter().enumerate() {
            if s == node.subdomain {
                continue;
            }
            let Some(rho) = stats::pearson(&x, col) else { continue };
            let mut push = |kind| {
                flags.push(CorrelationFlag {
                    a: node.id.clone(),
                    b: sub.nodes[s].clone(),
                    rho,
                    kind,
                })
            };
            if let Some(kind) = FlagKind::classify(rho) {
                push(kind);
            }
            if rho > own {
                push(FlagKind::ForeignStronger);
            }
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands() {
        assert_eq!(FlagKind::classify(1.0), Some(FlagKind::Redundant));
        assert_eq!(FlagKind::classify(0.9), Some(FlagKind::Redundant));
        assert_eq!(FlagKind::classify(-1.0), Some(FlagKind::Negative));
        assert_eq!(FlagKind::classify(-0.4), Some(FlagKind::Negative));
        assert_eq!(FlagKind::classify(0.35), Some(FlagKind::Weak));
        assert_eq!(FlagKind::classify(0.3), None);
        assert_eq!(FlagKind::classify(0.6), None);
    }
}
