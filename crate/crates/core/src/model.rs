//! Shared data model: the unit × indicator × year panel, the indicator
//! hierarchy with its geographic partition, and population weights.
//!
//! Identifiers are opaque case-sensitive strings. Every ordered collection
//! is kept in lexicographic order so that downstream output is
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Year = i32;

/// Tolerance on the per-year population sum.
pub const POPULATION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Imputed,
    Treated,
    Normalized,
}

/// Observed values on a dense unit × indicator × year grid.
///
/// Storage is row-major in (unit, indicator, year). Missing cells are
/// `None` and only allowed at [`Stage::Raw`].
#[derive(Debug, Clone, PartialEq)]
pub struct PanelTensor {
    units: Vec<String>,
    indicators: Vec<String>,
    first_year: Year,
    n_years: usize,
    values: Vec<Option<f64>>,
    stage: Stage,
}

fn sorted_unique(mut v: Vec<String>, what: &str) -> Result<Vec<String>> {
    v.sort();
    let before = v.len();
    v.dedup();
    if v.len() != before {
        return Err(Error::Data(format!("duplicate {what} identifier")));
    }
    if v.is_empty() {
        return Err(Error::Data(format!("no {what}s")));
    }
    Ok(v)
}

/// Checks that `years` (in any order, no duplicates) form a contiguous range.
pub fn contiguous_range(years: &BTreeSet<Year>) -> Result<(Year, usize)> {
    let first = *years.iter().next().ok_or_else(|| Error::Data("no years".into()))?;
    let last = *years.iter().next_back().unwrap();
    let span = (last - first) as usize + 1;
    if span != years.len() {
        return Err(Error::NonContiguousYears(years.iter().copied().collect()));
    }
    Ok((first, span))
}

impl PanelTensor {
    /// An all-missing raw tensor over the given axes.
    pub fn empty(units: Vec<String>, indicators: Vec<String>, years: &[Year]) -> Result<Self> {
        let units = sorted_unique(units, "unit")?;
        let indicators = sorted_unique(indicators, "indicator")?;
        let set: BTreeSet<Year> = years.iter().copied().collect();
        if set.len() != years.len() {
            return Err(Error::Data("duplicate year".into()));
        }
        let (first_year, n_years) = contiguous_range(&set)?;
        let len = units.len() * indicators.len() * n_years;
        Ok(Self {
            units,
            indicators,
            first_year,
            n_years,
            values: vec![None; len],
            stage: Stage::Raw,
        })
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn indicators(&self) -> &[String] {
        &self.indicators
    }

    pub fn years(&self) -> Vec<Year> {
        (0..self.n_years).map(|t| self.first_year + t as Year).collect()
    }

    pub fn first_year(&self) -> Year {
        self.first_year
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.indicators.len()
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn unit_index(&self, unit: &str) -> Option<usize> {
        self.units.binary_search_by(|u| u.as_str().cmp(unit)).ok()
    }

    pub fn indicator_index(&self, indicator: &str) -> Option<usize> {
        self.indicators.binary_search_by(|i| i.as_str().cmp(indicator)).ok()
    }

    pub fn year_index(&self, year: Year) -> Option<usize> {
        let t = year.checked_sub(self.first_year)?;
        (t >= 0 && (t as usize) < self.n_years).then_some(t as usize)
    }

    #[inline]
    fn offset(&self, unit: usize, indicator: usize, year: usize) -> usize {
        debug_assert!(unit < self.units.len());
        debug_assert!(indicator < self.indicators.len());
        debug_assert!(year < self.n_years);
        (unit * self.indicators.len() + indicator) * self.n_years + year
    }

    #[inline]
    pub fn get(&self, unit: usize, indicator: usize, year: usize) -> Option<f64> {
        self.values[self.offset(unit, indicator, year)]
    }

    /// Value of a cell that must be present.
    ///
    /// Panics on a missing cell; only call on tensors past the raw stage.
    #[inline]
    pub fn value(&self, unit: usize, indicator: usize, year: usize) -> f64 {
        self.get(unit, indicator, year)
            .expect("missing cell in a complete tensor")
    }

    pub fn set(&mut self, unit: usize, indicator: usize, year: usize, value: Option<f64>) {
        let o = self.offset(unit, indicator, year);
        self.values[o] = value;
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Relabels the tensor. Any stage past raw requires a complete grid.
    pub fn with_stage(mut self, stage: Stage) -> Result<Self> {
        if stage != Stage::Raw && !self.is_complete() {
            return Err(Error::Precondition(format!(
                "{} missing cells in a tensor tagged {stage:?}",
                self.missing_count()
            )));
        }
        self.stage = stage;
        Ok(self)
    }

    /// Values of one indicator across units for one year.
    pub fn cross_section(&self, indicator: usize, year: usize) -> Vec<f64> {
        (0..self.n_units()).map(|c| self.value(c, indicator, year)).collect()
    }

    /// All values of one indicator, unit-major then year.
    pub fn flattened(&self, indicator: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_units() * self.n_years);
        for c in 0..self.n_units() {
            for t in 0..self.n_years {
                out.push(self.value(c, indicator, t));
            }
        }
        out
    }

    /// Present values of one indicator across all units and years.
    pub fn present_values(&self, indicator: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for c in 0..self.n_units() {
            for t in 0..self.n_years {
                if let Some(v) = self.get(c, indicator, t) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Restricts the tensor to the named indicators (kept in sorted order).
    pub fn select_indicators(&self, keep: &[String]) -> Result<Self> {
        let keep = sorted_unique(keep.to_vec(), "indicator")?;
        let idx: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.indicator_index(k)
                    .ok_or_else(|| Error::UnknownIndicator(k.clone()))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_units() * idx.len() * self.n_years);
        for c in 0..self.n_units() {
            for &i in &idx {
                for t in 0..self.n_years {
                    values.push(self.get(c, i, t));
                }
            }
        }
        Ok(Self {
            units: self.units.clone(),
            indicators: keep,
            first_year: self.first_year,
            n_years: self.n_years,
            values,
            stage: self.stage,
        })
    }

    /// Applies `f` to every present cell of one indicator.
    pub fn map_indicator(&mut self, indicator: usize, mut f: impl FnMut(usize, usize, f64) -> f64) {
        for c in 0..self.n_units() {
            for t in 0..self.n_years {
                let o = self.offset(c, indicator, t);
                if let Some(v) = self.values[o] {
                    self.values[o] = Some(f(c, t, v));
                }
            }
        }
    }
}

/// δ_i: whether larger raw values mean worse health.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Polarity {
    /// δ = 0: larger is healthier.
    Positive,
    /// δ = 1: larger is less healthy, sign is reversed.
    Reversed,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Reversed => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Reversed,
            Polarity::Reversed => Polarity::Positive,
        }
    }
}

impl TryFrom<u8> for Polarity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Polarity::Positive),
            1 => Ok(Polarity::Reversed),
            other => Err(format!("polarity must be 0 or 1, got {other}")),
        }
    }
}

impl From<Polarity> for u8 {
    fn from(p: Polarity) -> u8 {
        match p {
            Polarity::Positive => 0,
            Polarity::Reversed => 1,
        }
    }
}

/// JSON form of the hierarchy document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub domains: BTreeMap<String, DomainConfig>,
    pub regions: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub subdomains: BTreeMap<String, SubdomainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdomainConfig {
    pub indicators: Vec<IndicatorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorConfig {
    pub id: String,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorNode {
    pub id: String,
    pub subdomain: usize,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainNode {
    pub name: String,
    pub domain: usize,
    /// Indices into [`Hierarchy::indicators`], ascending.
    pub indicators: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainNode {
    pub name: String,
    pub subdomains: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub units: Vec<String>,
}

/// Indicator → subdomain → domain tree plus the unit → region partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    indicators: Vec<IndicatorNode>,
    subdomains: Vec<SubdomainNode>,
    domains: Vec<DomainNode>,
    regions: Vec<Region>,
    unit_region: BTreeMap<String, usize>,
}

impl Hierarchy {
    pub fn from_config(cfg: &HierarchyConfig) -> Result<Self> {
        if cfg.domains.is_empty() {
            return Err(Error::Hierarchy("no domains".into()));
        }
        let mut sub_owner: BTreeMap<&str, &str> = BTreeMap::new();
        let mut ind_owner: BTreeMap<&str, (&str, Polarity)> = BTreeMap::new();
        for (dname, d) in &cfg.domains {
            if d.subdomains.is_empty() {
                return Err(Error::Hierarchy(format!("domain `{dname}` is empty")));
            }
            for (sname, s) in &d.subdomains {
                if sub_owner.insert(sname, dname).is_some() {
                    return Err(Error::Hierarchy(format!(
                        "subdomain `{sname}` appears in more than one domain"
                    )));
                }
                if s.indicators.is_empty() {
                    return Err(Error::Hierarchy(format!("subdomain `{sname}` is empty")));
                }
                for ind in &s.indicators {
                    if ind_owner.insert(&ind.id, (sname, ind.polarity)).is_some() {
                        return Err(Error::Hierarchy(format!(
                            "indicator `{}` appears in more than one subdomain",
                            ind.id
                        )));
                    }
                }
            }
        }

        let domain_names: Vec<&str> = cfg.domains.keys().map(String::as_str).collect();
        let sub_names: Vec<&str> = sub_owner.keys().copied().collect();
        let mut domains: Vec<DomainNode> = domain_names
            .iter()
            .map(|n| DomainNode {
                name: n.to_string(),
                subdomains: Vec::new(),
            })
            .collect();
        let mut subdomains: Vec<SubdomainNode> = sub_names
            .iter()
            .enumerate()
            .map(|(s, n)| {
                let d = domain_names.binary_search(&sub_owner[n]).unwrap();
                domains[d].subdomains.push(s);
                SubdomainNode {
                    name: n.to_string(),
                    domain: d,
                    indicators: Vec::new(),
                }
            })
            .collect();
        let indicators: Vec<IndicatorNode> = ind_owner
            .iter()
            .enumerate()
            .map(|(i, (id, (sname, polarity)))| {
                let s = sub_names.binary_search(sname).unwrap();
                subdomains[s].indicators.push(i);
                IndicatorNode {
                    id: id.to_string(),
                    subdomain: s,
                    polarity: *polarity,
                }
            })
            .collect();

        if cfg.regions.is_empty() {
            return Err(Error::Hierarchy("no regions".into()));
        }
        let mut unit_region = BTreeMap::new();
        let mut regions = Vec::with_capacity(cfg.regions.len());
        for (r, (rname, units)) in cfg.regions.iter().enumerate() {
            if units.is_empty() {
                return Err(Error::Hierarchy(format!("region `{rname}` is empty")));
            }
            let mut sorted = units.clone();
            sorted.sort();
            for u in &sorted {
                if unit_region.insert(u.clone(), r).is_some() {
                    return Err(Error::Hierarchy(format!("unit `{u}` belongs to more than one region")));
                }
            }
            regions.push(Region {
                name: rname.clone(),
                units: sorted,
            });
        }

        let h = Self {
            indicators,
            subdomains,
            domains,
            regions,
            unit_region,
        };
        debug_assert!(h.partition_sizes_consistent());
        Ok(h)
    }

    pub fn to_config(&self) -> HierarchyConfig {
        let mut domains = BTreeMap::new();
        for d in &self.domains {
            let mut subdomains = BTreeMap::new();
            for &s in &d.subdomains {
                let sub = &self.subdomains[s];
                subdomains.insert(
                    sub.name.clone(),
                    SubdomainConfig {
                        indicators: sub
                            .indicators
                            .iter()
                            .map(|&i| IndicatorConfig {
                                id: self.indicators[i].id.clone(),
                                polarity: self.indicators[i].polarity,
                            })
                            .collect(),
                    },
                );
            }
            domains.insert(d.name.clone(), DomainConfig { subdomains });
        }
        let regions = self.regions.iter().map(|r| (r.name.clone(), r.units.clone())).collect();
        HierarchyConfig { domains, regions }
    }

    /// Σ_s |s| = |I| and Σ_r |r| = |C|.
    pub fn partition_sizes_consistent(&self) -> bool {
        let by_sub: usize = self.subdomains.iter().map(|s| s.indicators.len()).sum();
        let by_dom: usize = self.domains.iter().map(|d| d.subdomains.len()).sum();
        let by_reg: usize = self.regions.iter().map(|r| r.units.len()).sum();
        by_sub == self.indicators.len() && by_dom == self.subdomains.len() && by_reg == self.unit_region.len()
    }

    pub fn indicators(&self) -> &[IndicatorNode] {
        &self.indicators
    }

    pub fn subdomains(&self) -> &[SubdomainNode] {
        &self.subdomains
    }

    pub fn domains(&self) -> &[DomainNode] {
        &self.domains
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn indicator_ids(&self) -> Vec<String> {
        self.indicators.iter().map(|i| i.id.clone()).collect()
    }

    pub fn indicator_index(&self, id: &str) -> Option<usize> {
        self.indicators.binary_search_by(|i| i.id.as_str().cmp(id)).ok()
    }

    pub fn subdomain_index(&self, name: &str) -> Option<usize> {
        self.subdomains.binary_search_by(|s| s.name.as_str().cmp(name)).ok()
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.binary_search_by(|d| d.name.as_str().cmp(name)).ok()
    }

    pub fn region_of(&self, unit: &str) -> Option<usize> {
        self.unit_region.get(unit).copied()
    }

    pub fn units(&self) -> impl Iterator<Item = &String> {
        self.unit_region.keys()
    }

    /// The tensor must carry exactly this hierarchy's indicators and
    /// regions must cover exactly its units.
    pub fn check_tensor(&self, tensor: &PanelTensor) -> Result<()> {
        for id in tensor.indicators() {
            if self.indicator_index(id).is_none() {
                return Err(Error::UnknownIndicator(id.clone()));
            }
        }
        if tensor.n_indicators() != self.indicators.len() {
            let missing: Vec<&str> = self
                .indicators
                .iter()
                .filter(|i| tensor.indicator_index(&i.id).is_none())
                .map(|i| i.id.as_str())
                .collect();
            return Err(Error::Data(format!(
                "hierarchy indicators absent from the data: {missing:?}"
            )));
        }
        for u in tensor.units() {
            if self.region_of(u).is_none() {
                return Err(Error::Hierarchy(format!("unit `{u}` has no region")));
            }
        }
        if self.unit_region.len() != tensor.n_units() {
            let extra: Vec<&String> = self
                .unit_region
                .keys()
                .filter(|u| tensor.unit_index(u).is_none())
                .collect();
            return Err(Error::Data(format!("region units absent from the data: {extra:?}")));
        }
        Ok(())
    }

    /// The hierarchy with one indicator removed. A subdomain left empty is
    /// removed too, and likewise a domain.
    pub fn without_indicator(&self, id: &str) -> Result<Self> {
        let i = self
            .indicator_index(id)
            .ok_or_else(|| Error::UnknownIndicator(id.to_string()))?;
        let mut cfg = self.to_config();
        let sub = &self.subdomains[self.indicators[i].subdomain];
        let dom = &self.domains[sub.domain].name;
        let d = cfg.domains.get_mut(dom).unwrap();
        let s = d.subdomains.get_mut(&sub.name).unwrap();
        s.indicators.retain(|ind| ind.id != id);
        if s.indicators.is_empty() {
            d.subdomains.remove(&sub.name);
            if d.subdomains.is_empty() {
                cfg.domains.remove(dom);
            }
        }
        if cfg.domains.is_empty() {
            return Err(Error::Precondition(format!("removing `{id}` empties the whole index")));
        }
        Self::from_config(&cfg)
    }

    /// The hierarchy with one subdomain (and its indicators) removed.
    pub fn without_subdomain(&self, name: &str) -> Result<Self> {
        let s = self
            .subdomain_index(name)
            .ok_or_else(|| Error::Hierarchy(format!("unknown subdomain `{name}`")))?;
        let mut cfg = self.to_config();
        let dom = &self.domains[self.subdomains[s].domain].name;
        let d = cfg.domains.get_mut(dom).unwrap();
        d.subdomains.remove(name);
        if d.subdomains.is_empty() {
            cfg.domains.remove(dom);
        }
        if cfg.domains.is_empty() {
            return Err(Error::Precondition(format!(
                "removing `{name}` empties the whole index"
            )));
        }
        Self::from_config(&cfg)
    }

    /// Same tree with one indicator's polarity flipped.
    pub fn with_flipped_polarity(&self, id: &str) -> Result<Self> {
        let i = self
            .indicator_index(id)
            .ok_or_else(|| Error::UnknownIndicator(id.to_string()))?;
        let mut h = self.clone();
        h.indicators[i].polarity = h.indicators[i].polarity.flipped();
        Ok(h)
    }
}

/// Population shares w_ct with Σ_c w_ct = 1 each year.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationWeights {
    units: Vec<String>,
    first_year: Year,
    n_years: usize,
    /// [unit][year]
    weights: Vec<f64>,
}

impl PopulationWeights {
    /// Builds and validates from (unit, year, weight) triples.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Year, f64)>,
    {
        let mut map: BTreeMap<(String, Year), f64> = BTreeMap::new();
        for (u, y, w) in entries {
            if map.insert((u.clone(), y), w).is_some() {
                return Err(Error::Population(format!("duplicate row for ({u}, {y})")));
            }
        }
        let units: BTreeSet<String> = map.keys().map(|(u, _)| u.clone()).collect();
        let years: BTreeSet<Year> = map.keys().map(|(_, y)| *y).collect();
        let (first_year, n_years) = contiguous_range(&years)?;
        let units: Vec<String> = units.into_iter().collect();
        let mut weights = Vec::with_capacity(units.len() * n_years);
        for u in &units {
            for t in 0..n_years {
                let y = first_year + t as Year;
                let w = *map
                    .get(&(u.clone(), y))
                    .ok_or_else(|| Error::Population(format!("no weight for unit `{u}` in {y}")))?;
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::Population(format!("weight {w} for ({u}, {y}) outside (0, 1]")));
                }
                weights.push(w);
            }
        }
        let pw = Self {
            units,
            first_year,
            n_years,
            weights,
        };
        for t in 0..n_years {
            let sum: f64 = (0..pw.units.len()).map(|c| pw.weights[c * n_years + t]).sum();
            if (sum - 1.0).abs() > POPULATION_SUM_TOL {
                return Err(Error::PopulationSum {
                    year: first_year + t as Year,
                    sum,
                });
            }
        }
        Ok(pw)
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn years(&self) -> Vec<Year> {
        (0..self.n_years).map(|t| self.first_year + t as Year).collect()
    }

    pub fn get(&self, unit: &str, year: Year) -> Option<f64> {
        let c = self.units.binary_search_by(|u| u.as_str().cmp(unit)).ok()?;
        let t = year.checked_sub(self.first_year)?;
        if t < 0 || t as usize >= self.n_years {
            return None;
        }
        Some(self.weights[c * self.n_years + t as usize])
    }

    /// Weights aligned to the tensor's unit and year axes: `[unit][year]`.
    pub fn aligned(&self, tensor_units: &[String], years: &[Year]) -> Result<Vec<Vec<f64>>> {
        tensor_units
            .iter()
            .map(|u| {
                years
                    .iter()
                    .map(|&y| {
                        self.get(u, y)
                            .ok_or_else(|| Error::Population(format!("no weight for unit `{u}` in {y}")))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Year, f64)> + '_ {
        self.units.iter().enumerate().flat_map(move |(c, u)| {
            (0..self.n_years).map(move |t| {
                (
                    u.as_str(),
                    self.first_year + t as Year,
                    self.weights[c * self.n_years + t],
                )
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suppression {
    Numerator,
    Denominator,
}

/// Cells flagged as suppressed in the source, keyed by tensor indices
/// (unit, indicator, year).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Suppressions {
    cells: BTreeMap<(usize, usize, usize), Suppression>,
}

impl Suppressions {
    pub fn insert(&mut self, unit: usize, indicator: usize, year: usize, kind: Suppression) {
        self.cells.insert((unit, indicator, year), kind);
    }

    pub fn get(&self, unit: usize, indicator: usize, year: usize) -> Option<Suppression> {
        self.cells.get(&(unit, indicator, year)).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), Suppression)> + '_ {
        self.cells.iter().map(|(k, v)| (*k, *v))
    }

    /// Re-keys onto a tensor restricted to `keep` indicators.
    pub fn select_indicators(&self, from: &PanelTensor, to: &PanelTensor) -> Self {
        let mut out = Suppressions::default();
        for (&(c, i, t), &kind) in &self.cells {
            if let Some(j) = to.indicator_index(&from.indicators()[i]) {
                out.insert(c, j, t, kind);
            }
        }
        out
    }
}

/// Output of [`crate::io::load_panel`].
#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub tensor: PanelTensor,
    pub suppressions: Suppressions,
    pub hierarchy: Hierarchy,
    pub population: PopulationWeights,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_hierarchy() -> HierarchyConfig {
        serde_json::from_str(
            r#"{"domains": {"d1": {"subdomains": {
                    "s1": {"indicators": [{"id": "a", "polarity": 0}, {"id": "b", "polarity": 1}]},
                    "s2": {"indicators": [{"id": "c", "polarity": 0}]}}},
                "d2": {"subdomains": {"s3": {"indicators": [{"id": "d", "polarity": 0}]}}}},
               "regions": {"north": ["u1", "u2"], "south": ["u3"]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn hierarchy_indices_are_consistent() {
        let h = Hierarchy::from_config(&tiny_hierarchy()).unwrap();
        assert_eq!(h.indicators().len(), 4);
        assert_eq!(h.subdomains().len(), 3);
        assert_eq!(h.domains().len(), 2);
        assert!(h.partition_sizes_consistent());
        let b = h.indicator_index("b").unwrap();
        assert_eq!(h.indicators()[b].polarity, Polarity::Reversed);
        assert_eq!(h.subdomains()[h.indicators()[b].subdomain].name, "s1");
        assert_eq!(h.region_of("u3"), Some(1));
        assert_eq!(Hierarchy::from_config(&h.to_config()).unwrap(), h);
    }

    #[test]
    fn hierarchy_rejects_duplicates_and_empties() {
        let mut cfg = tiny_hierarchy();
        cfg.domains
            .get_mut("d2")
            .unwrap()
            .subdomains
            .get_mut("s3")
            .unwrap()
            .indicators
            .push(IndicatorConfig {
                id: "a".into(),
                polarity: Polarity::Positive,
            });
        assert!(matches!(Hierarchy::from_config(&cfg), Err(Error::Hierarchy(_))));

        let mut cfg = tiny_hierarchy();
        cfg.regions.get_mut("south").unwrap().push("u1".into());
        assert!(matches!(Hierarchy::from_config(&cfg), Err(Error::Hierarchy(_))));

        let mut cfg = tiny_hierarchy();
        cfg.regions.insert("empty".into(), vec![]);
        assert!(matches!(Hierarchy::from_config(&cfg), Err(Error::Hierarchy(_))));

        let bad = r#"{"domains": {}, "regions": {"r": ["u"]}}"#;
        let cfg: HierarchyConfig = serde_json::from_str(bad).unwrap();
        assert!(Hierarchy::from_config(&cfg).is_err());
    }

    #[test]
    fn polarity_must_be_binary() {
        let r: std::result::Result<IndicatorConfig, _> = serde_json::from_str(r#"{"id": "x", "polarity": 2}"#);
        assert!(r.is_err());
    }

    #[test]
    fn pruning_cascades_single_children() {
        let h = Hierarchy::from_config(&tiny_hierarchy()).unwrap();
        let p = h.without_indicator("a").unwrap();
        assert_eq!(p.indicators().len(), 3);
        assert_eq!(p.subdomains().len(), 3);
        let p = h.without_indicator("d").unwrap();
        assert_eq!(p.domains().len(), 1);
        assert_eq!(p.subdomains().len(), 2);
        let p = h.without_subdomain("s1").unwrap();
        assert_eq!(p.indicator_ids(), vec!["c", "d"]);
        let only = p.without_indicator("c").unwrap();
        assert!(only.without_indicator("d").is_err());
    }

    #[test]
    fn population_sum_violation_is_reported() {
        let err = PopulationWeights::from_entries(vec![("a".to_string(), 2015, 0.6), ("b".to_string(), 2015, 0.5)])
            .unwrap_err();
        assert_eq!(err.to_string(), "population weights sum 1.1 ≠ 1 for year 2015");
    }

    #[test]
    fn population_rejects_nonpositive() {
        let err = PopulationWeights::from_entries(vec![("a".to_string(), 2015, 1.0), ("b".to_string(), 2015, 0.0)])
            .unwrap_err();
        assert!(matches!(err, Error::Population(_)));
    }

    #[test]
    fn tensor_years_must_be_contiguous() {
        let e = PanelTensor::empty(vec!["u".into()], vec!["i".into()], &[2015, 2017]);
        assert!(matches!(e, Err(Error::NonContiguousYears(_))));
    }

    #[test]
    fn stage_tag_requires_completeness() {
        let mut t = PanelTensor::empty(vec!["u".into()], vec!["i".into()], &[2015, 2016]).unwrap();
        t.set(0, 0, 0, Some(1.0));
        assert!(t.clone().with_stage(Stage::Imputed).is_err());
        t.set(0, 0, 1, Some(2.0));
        assert_eq!(t.with_stage(Stage::Imputed).unwrap().stage(), Stage::Imputed);
    }

    #[test]
    fn select_indicators_keeps_values() {
        let mut t = PanelTensor::empty(
            vec!["u1".into(), "u2".into()],
            vec!["a".into(), "b".into(), "c".into()],
            &[2015],
        )
        .unwrap();
        for c in 0..2 {
            for i in 0..3 {
                t.set(c, i, 0, Some((10 * c + i) as f64));
            }
        }
        let s = t.select_indicators(&["c".into(), "a".into()]).unwrap();
        assert_eq!(s.indicators(), &["a".to_string(), "c".to_string()]);
        assert_eq!(s.get(1, 1, 0), Some(12.0));
    }
}
