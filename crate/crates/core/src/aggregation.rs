//! Linear aggregation up the indicator hierarchy and across geography.
//!
//! Both directions are weighted sums, so running them in either order gives
//! the same regional and national scores up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hierarchy, PanelTensor, PopulationWeights, Stage, Year};
use crate::normalization::to_index_scale;
use crate::weighting::WeightSystem;

/// Scores on a rows × nodes × years grid. Rows are units, regions or the
/// nation; nodes are indicators, subdomains, domains or the overall index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScores {
    pub rows: Vec<String>,
    pub nodes: Vec<String>,
    pub years: Vec<Year>,
    values: Vec<f64>,
}

impl LevelScores {
    pub fn new(rows: Vec<String>, nodes: Vec<String>, years: Vec<Year>) -> Self {
        let n = rows.len() * nodes.len() * years.len();
        Self {
            rows,
            nodes,
            years,
            values: vec![0.0; n],
        }
    }

    fn at(&self, r: usize, n: usize, t: usize) -> usize {
        (r * self.nodes.len() + n) * self.years.len() + t
    }

    pub fn get(&self, row: usize, node: usize, year: usize) -> f64 {
        self.values[self.at(row, node, year)]
    }

    pub fn set(&mut self, row: usize, node: usize, year: usize, v: f64) {
        let k = self.at(row, node, year);
        self.values[k] = v;
    }

    pub fn row_index(&self, row: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == row)
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn year_index(&self, year: Year) -> Option<usize> {
        self.years.iter().position(|y| *y == year)
    }

    /// All rows of one node and year.
    pub fn column(&self, node: usize, year: usize) -> Vec<f64> {
        (0..self.rows.len()).map(|r| self.get(r, node, year)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.rows != other.rows || self.nodes != other.nodes || self.years != other.years {
            return Err(Error::Precondition("score grids have different axes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Indicator-level scores in hierarchy order.
    pub fn from_tensor(z: &PanelTensor, h: &Hierarchy) -> Result<Self> {
        if !z.is_complete() {
            return Err(Error::Precondition("aggregation needs a complete tensor".into()));
        }
        let cols: Vec<usize> = h
            .indicators()
            .iter()
            .map(|i| {
                z.indicator_index(&i.id)
                    .ok_or_else(|| Error::UnknownIndicator(i.id.clone()))
            })
            .collect::<Result<_>>()?;
        let mut out = Self::new(z.units().to_vec(), h.indicator_ids(), z.years());
        for c in 0..z.n_units() {
            for (n, &k) in cols.iter().enumerate() {
                for t in 0..z.n_years() {
                    out.set(c, n, t, z.value(c, k, t));
                }
            }
        }
        Ok(out)
    }
}

/// Scores at every level of the hierarchy for the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyScores {
    pub indicator: LevelScores,
    pub subdomain: LevelScores,
    pub domain: LevelScores,
    pub overall: LevelScores,
}

impl HierarchyScores {
    pub fn levels(&self) -> [(Level, &LevelScores); 4] {
        [
            (Level::Indicator, &self.indicator),
            (Level::Subdomain, &self.subdomain),
            (Level::Domain, &self.domain),
            (Level::Overall, &self.overall),
        ]
    }

    pub fn level(&self, level: Level) -> &LevelScores {
        match level {
            Level::Indicator => &self.indicator,
            Level::Subdomain => &self.subdomain,
            Level::Domain => &self.domain,
            Level::Overall => &self.overall,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let mut m = 0.0_f64;
        for ((_, a), (_, b)) in self.levels().iter().zip(other.levels().iter()) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Indicator,
    Subdomain,
    Domain,
    Overall,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Indicator, Level::Subdomain, Level::Domain, Level::Overall];

    pub fn name(self) -> &'static str {
        match self {
            Level::Indicator => "indicator",
            Level::Subdomain => "subdomain",
            Level::Domain => "domain",
            Level::Overall => "overall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }
}

/// Name of the single node of the overall level and the single national row.
pub const OVERALL: &str = "overall";
pub const NATION: &str = "nation";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    /// `α Σ w x`.
    Linear,
    /// `exp(α Σ w ln x)`; inputs must be positive.
    Geometric,
}

fn combine_level(
    child: &LevelScores,
    names: Vec<String>,
    groups: &[Vec<(usize, f64)>],
    how: Combine,
) -> Result<LevelScores> {
    let mut out = LevelScores::new(child.rows.clone(), names, child.years.clone());
    for r in 0..child.rows.len() {
        for (g, members) in groups.iter().enumerate() {
            let alpha = 1.0 / members.iter().map(|(_, w)| w).sum::<f64>();
            for t in 0..child.years.len() {
                let v = match how {
                    Combine::Linear => alpha * members.iter().map(|&(k, w)| w * child.get(r, k, t)).sum::<f64>(),
                    Combine::Geometric => {
                        let mut acc = 0.0;
                        for &(k, w) in members {
                            let x = child.get(r, k, t);
                            if !(x > 0.0) {
                                return Err(Error::Precondition(format!(
                                    "geometric aggregation needs positive scores, got {x} for `{}`",
                                    child.nodes[k]
                                )));
                            }
                            acc += w * x.ln();
                        }
                        (alpha * acc).exp()
                    }
                };
                out.set(r, g, t, v);
            }
        }
    }
    Ok(out)
}

/// Aggregates indicator scores of any set of rows up the hierarchy.
pub fn aggregate_scores(
    indicator: LevelScores,
    h: &Hierarchy,
    w: &WeightSystem,
    how: Combine,
) -> Result<HierarchyScores> {
    w.validate(h)?;
    if indicator.nodes != h.indicator_ids() {
        return Err(Error::Precondition(
            "indicator scores are not in hierarchy order".into(),
        ));
    }
    let sub_groups: Vec<Vec<(usize, f64)>> = h
        .subdomains()
        .iter()
        .map(|s| s.indicators.iter().map(|&i| (i, w.indicator[i])).collect())
        .collect();
    let subdomain = combine_level(
        &indicator,
        h.subdomains().iter().map(|s| s.name.clone()).collect(),
        &sub_groups,
        how,
    )?;
    let dom_groups: Vec<Vec<(usize, f64)>> = h
        .domains()
        .iter()
        .map(|d| d.subdomains.iter().map(|&s| (s, w.subdomain[s])).collect())
        .collect();
    let domain = combine_level(
        &subdomain,
        h.domains().iter().map(|d| d.name.clone()).collect(),
        &dom_groups,
        how,
    )?;
    let top = vec![w.domain.iter().copied().enumerate().collect::<Vec<_>>()];
    let overall = combine_level(&domain, vec![OVERALL.to_string()], &top, how)?;
    Ok(HierarchyScores {
        indicator,
        subdomain,
        domain,
        overall,
    })
}

/// `z_cs = α_s Σ w_i z_i`, `z_cd = α_d Σ w_s z_cs`, `z_c = α Σ w_d z_cd`.
pub fn aggregate_hierarchy(z: &PanelTensor, h: &Hierarchy, w: &WeightSystem) -> Result<HierarchyScores> {
    if z.stage() != Stage::Normalized {
        return Err(Error::Precondition(format!(
            "aggregation expects a normalized tensor, got {:?}",
            z.stage()
        )));
    }
    aggregate_scores(LevelScores::from_tensor(z, h)?, h, w, Combine::Linear)
}

/// Weighted geometric mean of the `100 + 10z` scores at every level.
/// Not part of the audited pipeline.
pub fn aggregate_hierarchy_geometric(z: &PanelTensor, h: &Hierarchy, w: &WeightSystem) -> Result<HierarchyScores> {
    if z.stage() != Stage::Normalized {
        return Err(Error::Precondition(format!(
            "aggregation expects a normalized tensor, got {:?}",
            z.stage()
        )));
    }
    let hs = LevelScores::from_tensor(z, h)?.map(to_index_scale);
    aggregate_scores(hs, h, w, Combine::Geometric)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeographyScores {
    pub regional: LevelScores,
    pub national: LevelScores,
}

/// Region and nation scores from unit scores.
///
/// Regional values are `Σ_{c∈r} w_ct z_ct` with the national population
/// shares as given. With `renormalize` each region divides by
/// `Σ_{c∈r} w_ct`, which gives population-weighted regional means.
pub fn aggregate_geography(
    scores: &LevelScores,
    population: &PopulationWeights,
    h: &Hierarchy,
    renormalize: bool,
) -> Result<GeographyScores> {
    let w = population.aligned(&scores.rows, &scores.years)?;
    let region_of: Vec<usize> = scores
        .rows
        .iter()
        .map(|u| {
            h.region_of(u)
                .ok_or_else(|| Error::Hierarchy(format!("unit `{u}` has no region")))
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = h.regions().iter().map(|r| r.name.clone()).collect();
    let (nn, ny) = (scores.nodes.len(), scores.years.len());
    let mut regional = LevelScores::new(names.clone(), scores.nodes.clone(), scores.years.clone());
    let mut national = LevelScores::new(vec![NATION.to_string()], scores.nodes.clone(), scores.years.clone());
    let mut share = vec![vec![0.0; ny]; names.len()];
    for (c, &r) in region_of.iter().enumerate() {
        for t in 0..ny {
            share[r][t] += w[c][t];
            for n in 0..nn {
                let v = w[c][t] * scores.get(c, n, t);
                regional.set(r, n, t, regional.get(r, n, t) + v);
                national.set(0, n, t, national.get(0, n, t) + v);
            }
        }
    }
    if renormalize {
        for (r, s) in share.iter().enumerate() {
            for t in 0..ny {
                if s[t] > 0.0 {
                    for n in 0..nn {
                        regional.set(r, n, t, regional.get(r, n, t) / s[t]);
                    }
                }
            }
        }
    }
    Ok(GeographyScores { regional, national })
}

/// Largest absolute difference, over every level, region, nation and year,
/// between aggregating the hierarchy first and aggregating geography first.
pub fn verify_commutativity(
    z: &PanelTensor,
    h: &Hierarchy,
    w: &WeightSystem,
    population: &PopulationWeights,
) -> Result<f64> {
    let by_unit = aggregate_hierarchy(z, h, w)?;
    let geo_first = aggregate_geography(&by_unit.indicator, population, h, false)?;
    let regional_first = aggregate_scores(geo_first.regional, h, w, Combine::Linear)?;
    let national_first = aggregate_scores(geo_first.national, h, w, Combine::Linear)?;

    let mut worst = 0.0_f64;
    for level in [Level::Subdomain, Level::Domain, Level::Overall] {
        let g = aggregate_geography(by_unit.level(level), population, h, false)?;
        worst = worst.max(g.regional.max_abs_diff(regional_first.level(level))?);
        worst = worst.max(g.national.max_abs_diff(national_first.level(level))?);
    }
    Ok(worst)
}
