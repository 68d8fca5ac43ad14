//! Distributional treatment: moment measurement, transform search and
//! winsorization.
//!
//! Skewness is the bias-adjusted Fisher–Pearson coefficient
//! `G1 = g1·√(n(n−1))/(n−2)`; kurtosis is the bias-adjusted excess kurtosis
//! `G2 = ((n+1)·g2 + 6)·(n−1)/((n−2)(n−3))`. The target region is
//! `|G1| ≤ 2` and `|G2| ≤ 3.5`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PanelTensor, Stage, Year};
use crate::stats;

pub const SKEW_LIMIT: f64 = 2.0;
pub const KURTOSIS_LIMIT: f64 = 3.5;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub median: f64,
    pub iqr: f64,
}

impl MomentSummary {
    pub fn within_limits(&self) -> bool {
        self.skewness.abs() <= SKEW_LIMIT && self.excess_kurtosis.abs() <= KURTOSIS_LIMIT
    }
}

/// Central moments m2, m3, m4 (divisor n), or `None` at zero variance.
fn central_moments(xs: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let m = stats::mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2.sqrt() <= 1e-12 * m.abs() || m2 <= 0.0 {
        return None;
    }
    Some((m2, m3, m4))
}

fn adjusted_skewness(n: f64, m2: f64, m3: f64) -> f64 {
    let g1 = m3 / m2.powf(1.5);
    g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
}

fn adjusted_kurtosis(n: f64, m2: f64, m4: f64) -> f64 {
    let g2 = m4 / (m2 * m2) - 3.0;
    ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0))
}

pub fn moments(series: &[f64]) -> Result<MomentSummary> {
    if series.len() < 4 {
        return Err(Error::Precondition(format!(
            "moments need at least 4 values, got {}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("non-finite value in series".into()));
    }
    let (m2, m3, m4) = central_moments(series).ok_or(Error::UndefinedMoments)?;
    let n = series.len() as f64;
    let s = stats::sorted(series);
    Ok(MomentSummary {
        skewness: adjusted_skewness(n, m2, m3),
        excess_kurtosis: adjusted_kurtosis(n, m2, m4),
        median: stats::quantile_sorted(&s, 0.5),
        iqr: stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25),
    })
}

fn abs_skewness(xs: &[f64]) -> f64 {
    match central_moments(xs) {
        Some((m2, m3, _)) => adjusted_skewness(xs.len() as f64, m2, m3).abs(),
        None => f64::INFINITY,
    }
}

/// Monotone increasing transform families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Log,
    Sqrt,
    Cbrt,
    Square,
    Cube,
    NegReciprocal,
}

impl Transform {
    pub const ALL: [Transform; 6] = [
        Transform::Log,
        Transform::Sqrt,
        Transform::Cbrt,
        Transform::Square,
        Transform::Cube,
        Transform::NegReciprocal,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Log => x.ln(),
            Transform::Sqrt => x.sqrt(),
            Transform::Cbrt => x.cbrt(),
            Transform::Square => x * x,
            Transform::Cube => x * x * x,
            Transform::NegReciprocal => -1.0 / x,
        }
    }

    /// Whether the transform is defined and increasing on `x`.
    pub fn admits(self, x: f64) -> bool {
        match self {
            Transform::Log | Transform::NegReciprocal => x > 0.0,
            // x² is only increasing on the non-negative half-line
            Transform::Sqrt | Transform::Square => x >= 0.0,
            Transform::Cbrt | Transform::Cube => true,
        }
    }

    pub fn admits_all(self, xs: &[f64]) -> bool {
        xs.iter().all(|&x| self.admits(x))
    }
}

/// `None` stands for the identity.
pub type Candidate = Option<Transform>;

pub fn default_candidates() -> Vec<Candidate> {
    std::iter::once(None)
        .chain(Transform::ALL.into_iter().map(Some))
        .collect()
}

/// Lexicographic objective: clamped feasibility first, then |skew| + |kurt|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub feasibility: f64,
    pub magnitude: f64,
}

impl Score {
    pub fn of(m: &MomentSummary) -> Self {
        let s = m.skewness.abs();
        let k = m.excess_kurtosis.abs();
        Self {
            feasibility: (s / SKEW_LIMIT).max(k / KURTOSIS_LIMIT).max(1.0),
            magnitude: s + k,
        }
    }

    /// Strictly better, beyond rounding noise.
    pub fn better_than(&self, other: &Score) -> bool {
        if self.feasibility < other.feasibility - TIE_EPS {
            return true;
        }
        (self.feasibility - other.feasibility).abs() <= TIE_EPS && self.magnitude < other.magnitude - TIE_EPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    Identity,
    Transform {
        transform: Transform,
    },
    Winsorize {
        upper: usize,
        lower: usize,
    },
    WinsorizeTransform {
        upper: usize,
        lower: usize,
        transform: Transform,
    },
}

impl Action {
    pub fn transform(&self) -> Option<Transform> {
        match *self {
            Action::Transform { transform } | Action::WinsorizeTransform { transform, .. } => Some(transform),
            _ => None,
        }
    }

    pub fn winsorized(&self) -> usize {
        match *self {
            Action::Winsorize { upper, lower } | Action::WinsorizeTransform { upper, lower, .. } => upper + lower,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEntry {
    pub action: Action,
    pub before: MomentSummary,
    pub after: MomentSummary,
    pub within_limits: bool,
    /// Limits were not reachable within the search space.
    pub best_effort: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Treated {
    pub entry: TreatmentEntry,
    pub values: Vec<f64>,
}

/// Picks the candidate with the best [`Score`]; earlier candidates win ties,
/// so the identity wins when listed first. Candidates undefined on the
/// series, or yielding undefined moments, are skipped.
pub fn select_transform_ons(series: &[f64], candidates: &[Candidate]) -> Result<Treated> {
    let before = moments(series)?;
    let mut best: Option<(Candidate, Score, MomentSummary, Vec<f64>)> = None;
    for &cand in candidates {
        let values: Vec<f64> = match cand {
            None => series.to_vec(),
            Some(f) if f.admits_all(series) => series.iter().map(|&x| f.apply(x)).collect(),
            Some(_) => continue,
        };
        if values.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let Ok(m) = moments(&values) else { continue };
        let score = Score::of(&m);
        if best.as_ref().is_none_or(|(_, b, _, _)| score.better_than(b)) {
            best = Some((cand, score, m, values));
        }
    }
    let (cand, _, after, values) = best.ok_or(Error::NoFeasibleTransform)?;
    let within = after.within_limits();
    Ok(Treated {
        entry: TreatmentEntry {
            action: match cand {
                None => Action::Identity,
                Some(transform) => Action::Transform { transform },
            },
            before,
            after,
            within_limits: within,
            best_effort: !within,
        },
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
    /// Greedy: each step snaps whichever tail lowers |skewness| more,
    /// preferring the upper tail on ties.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Winsorized {
    pub values: Vec<f64>,
    pub upper: usize,
    pub lower: usize,
}

/// Positions sorted by (value, position).
fn order_of(series: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series[a].total_cmp(&series[b]).then(a.cmp(&b)));
    order
}

fn snap(series: &[f64], order: &[usize], lower: usize, upper: usize) -> Vec<f64> {
    let n = series.len();
    let mut out = series.to_vec();
    let hi = series[order[n - 1 - upper]];
    let lo = series[order[lower]];
    for &p in &order[n - upper..] {
        out[p] = hi;
    }
    for &p in &order[..lower] {
        out[p] = lo;
    }
    out
}

/// Replaces `k` extreme values with the nearest retained order statistic.
pub fn winsorize(series: &[f64], k: usize, tail: Tail) -> Result<Winsorized> {
    if k >= series.len() {
        return Err(Error::Precondition(format!(
            "cannot winsorize {k} of {} values",
            series.len()
        )));
    }
    let order = order_of(series);
    let (lower, upper) = match tail {
        Tail::Upper => (0, k),
        Tail::Lower => (k, 0),
        Tail::Auto => {
            let (mut lo, mut up) = (0, 0);
            for _ in 0..k {
                let su = abs_skewness(&snap(series, &order, lo, up + 1));
                let sl = abs_skewness(&snap(series, &order, lo + 1, up));
                if su <= sl {
                    up += 1;
                } else {
                    lo += 1;
                }
            }
            (lo, up)
        }
    };
    Ok(Winsorized {
        values: snap(series, &order, lower, upper),
        upper,
        lower,
    })
}

/// Default winsorization budget: max(2, ⌈2% of n⌉).
pub fn default_k_max(n: usize) -> usize {
    2usize.max((0.02 * n as f64).ceil() as usize)
}

/// Winsorize first, one point at a time up to `k_max`; transform only if
/// the limits are still violated.
pub fn treat_modified(series: &[f64], k_max: usize) -> Result<Treated> {
    let before = moments(series)?;
    let n = series.len();
    let k_max = k_max.min(n - 1);
    let order = order_of(series);
    let (mut lower, mut upper) = (0usize, 0usize);
    let mut values = series.to_vec();
    for k in 0..=k_max {
        if k > 0 {
            let su = abs_skewness(&snap(series, &order, lower, upper + 1));
            let sl = abs_skewness(&snap(series, &order, lower + 1, upper));
            if su <= sl {
                upper += 1;
            } else {
                lower += 1;
            }
            values = snap(series, &order, lower, upper);
        }
        match moments(&values) {
            Ok(m) if m.within_limits() => {
                let action = if k == 0 {
                    Action::Identity
                } else {
                    Action::Winsorize { upper, lower }
                };
                return Ok(Treated {
                    entry: TreatmentEntry {
                        action,
                        before,
                        after: m,
                        within_limits: true,
                        best_effort: false,
                    },
                    values,
                });
            }
            Ok(_) => {}
            Err(Error::UndefinedMoments) => break,
            Err(e) => return Err(e),
        }
    }
    let searched = select_transform_ons(&values, &default_candidates())?;
    let action = match (searched.entry.action.transform(), upper + lower) {
        (None, 0) => Action::Identity,
        (None, _) => Action::Winsorize { upper, lower },
        (Some(transform), 0) => Action::Transform { transform },
        (Some(transform), _) => Action::WinsorizeTransform {
            upper,
            lower,
            transform,
        },
    };
    let after = searched.entry.after;
    Ok(Treated {
        entry: TreatmentEntry {
            action,
            before,
            after,
            within_limits: after.within_limits(),
            best_effort: !after.within_limits(),
        },
        values: searched.values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TreatmentMode {
    /// Transform search on each indicator's all-years series.
    Ons,
    /// Winsorize-first treatment of each indicator-year cross-section.
    /// `k_max = None` uses [`default_k_max`].
    Modified { k_max: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorPlan {
    AllYears(TreatmentEntry),
    ByYear(BTreeMap<Year, TreatmentEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentPlan {
    pub mode: TreatmentMode,
    pub indicators: BTreeMap<String, IndicatorPlan>,
}

impl TreatmentPlan {
    pub fn entries(&self) -> impl Iterator<Item = (&str, Option<Year>, &TreatmentEntry)> {
        self.indicators.iter().flat_map(|(id, plan)| {
            let v: Vec<(&str, Option<Year>, &TreatmentEntry)> = match plan {
                IndicatorPlan::AllYears(e) => vec![(id.as_str(), None, e)],
                IndicatorPlan::ByYear(m) => m.iter().map(|(y, e)| (id.as_str(), Some(*y), e)).collect(),
            };
            v
        })
    }

    /// Number of indicators whose action includes a transform, per year.
    /// In all-years mode a transformed indicator counts for every year.
    pub fn transforms_per_year(&self, years: &[Year]) -> BTreeMap<Year, usize> {
        let mut out: BTreeMap<Year, usize> = years.iter().map(|&y| (y, 0)).collect();
        for plan in self.indicators.values() {
            match plan {
                IndicatorPlan::AllYears(e) => {
                    if e.action.transform().is_some() {
                        for y in years {
                            *out.get_mut(y).unwrap() += 1;
                        }
                    }
                }
                IndicatorPlan::ByYear(m) => {
                    for (y, e) in m {
                        if e.action.transform().is_some() {
                            *out.entry(*y).or_default() += 1;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Changed cells as (unit, year slot, new value).
type CellUpdates = Vec<(usize, usize, f64)>;

fn treat_indicator(tensor: &PanelTensor, i: usize, mode: TreatmentMode) -> Result<(IndicatorPlan, CellUpdates)> {
    let years = tensor.years();
    let id = &tensor.indicators()[i];
    let name_err = |e: Error| match e {
        Error::UndefinedMoments => Error::Degenerate(id.clone()),
        other => other,
    };
    match mode {
        TreatmentMode::Ons => {
            let series = tensor.flattened(i);
            let treated = select_transform_ons(&series, &default_candidates()).map_err(name_err)?;
            let nt = tensor.n_years();
            let cells = treated
                .values
                .iter()
                .enumerate()
                .map(|(k, &v)| (k / nt, k % nt, v))
                .collect();
            Ok((IndicatorPlan::AllYears(treated.entry), cells))
        }
        TreatmentMode::Modified { k_max } => {
            let mut per_year = BTreeMap::new();
            let mut cells = Vec::with_capacity(tensor.n_units() * tensor.n_years());
            for (t, &year) in years.iter().enumerate() {
                let series = tensor.cross_section(i, t);
                let k = k_max.unwrap_or_else(|| default_k_max(series.len()));
                let treated = treat_modified(&series, k).map_err(name_err)?;
                cells.extend(treated.values.iter().enumerate().map(|(c, &v)| (c, t, v)));
                per_year.insert(year, treated.entry);
            }
            Ok((IndicatorPlan::ByYear(per_year), cells))
        }
    }
}

/// Treats every indicator of an imputed tensor.
pub fn treat(tensor: &PanelTensor, mode: TreatmentMode) -> Result<(PanelTensor, TreatmentPlan)> {
    if !tensor.is_complete() {
        return Err(Error::Precondition("treatment needs a complete tensor".into()));
    }
    let results: Vec<_> = (0..tensor.n_indicators())
        .into_par_iter()
        .map(|i| treat_indicator(tensor, i, mode))
        .collect::<Result<_>>()?;
    let mut out = tensor.clone();
    let mut plan = TreatmentPlan {
        mode,
        indicators: BTreeMap::new(),
    };
    for (i, (ind_plan, cells)) in results.into_iter().enumerate() {
        for (c, t, v) in cells {
            out.set(c, i, t, Some(v));
        }
        plan.indicators.insert(tensor.indicators()[i].clone(), ind_plan);
    }
    Ok((out.with_stage(Stage::Treated)?, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, LogNormal, Normal};

    #[test]
    fn symmetric_series_has_zero_skew() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(m.skewness.abs() < 1e-12);
        assert_eq!(m.median, 3.0);
        assert_eq!(m.iqr, 2.0);
    }

    #[test]
    fn constant_series_is_undefined() {
        assert!(matches!(moments(&[3.0; 4]), Err(Error::UndefinedMoments)));
        assert!(matches!(moments(&[1.0, 2.0, 3.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn known_adjusted_moments() {
        // Reference values from scipy.stats.skew/kurtosis with bias=False.
        let m = moments(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert!((m.skewness - 1.697_056_274_847_714_3).abs() < 1e-12, "{}", m.skewness);
        assert!(
            (m.excess_kurtosis - 3.152_000_000_000_001).abs() < 1e-12,
            "{}",
            m.excess_kurtosis
        );
    }

    #[test]
    fn standard_normal_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
            .collect();
        let m = moments(&xs).unwrap();
        assert!(m.skewness.abs() < 0.1);
        assert!(m.excess_kurtosis.abs() < 0.2);
    }

    #[test]
    fn winsorize_examples() {
        let w = winsorize(&[1.0, 2.0, 3.0, 100.0, 200.0], 2, Tail::Upper).unwrap();
        assert_eq!(w.values, vec![1.0, 2.0, 3.0, 3.0, 3.0]);
        let w = winsorize(&[-50.0, 1.0, 2.0, 3.0], 1, Tail::Lower).unwrap();
        assert_eq!(w.values, vec![1.0, 1.0, 2.0, 3.0]);
        let s = [4.0, -1.0, 9.0, 2.0];
        assert_eq!(winsorize(&s, 0, Tail::Auto).unwrap().values, s.to_vec());
        assert!(winsorize(&s, 4, Tail::Auto).is_err());
    }

    #[test]
    fn auto_tail_picks_the_skewed_side() {
        let w = winsorize(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 100.0], 1, Tail::Auto).unwrap();
        assert_eq!((w.upper, w.lower), (1, 0));
        let w = winsorize(&[-100.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1, Tail::Auto).unwrap();
        assert_eq!((w.upper, w.lower), (0, 1));
    }

    #[test]
    fn zero_excludes_log_and_reciprocal() {
        let s = [0.0, 1.0, 2.0, 3.0, 5.0];
        assert!(!Transform::Log.admits_all(&s));
        assert!(!Transform::NegReciprocal.admits_all(&s));
        assert!(Transform::Sqrt.admits_all(&s));
        let t = select_transform_ons(&s, &default_candidates()).unwrap();
        assert!(!matches!(
            t.entry.action,
            Action::Transform {
                transform: Transform::Log | Transform::NegReciprocal
            }
        ));
    }

    #[test]
    fn lognormal_sample_is_logged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = LogNormal::new(1.0, 0.9).unwrap();
        let xs: Vec<f64> = (0..596).map(|_| d.sample(&mut rng)).collect();
        let t = select_transform_ons(&xs, &default_candidates()).unwrap();
        assert_eq!(
            t.entry.action,
            Action::Transform {
                transform: Transform::Log
            }
        );
        assert!(t.entry.after.skewness.abs() < t.entry.before.skewness.abs());
    }

    #[test]
    fn in_limits_series_is_identity_in_modified_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..149)
            .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
            .collect();
        let t = treat_modified(&xs, 3).unwrap();
        assert_eq!(t.entry.action, Action::Identity);
        assert_eq!(t.values, xs);
    }

    #[test]
    fn empty_candidate_set_fails() {
        let s = [-1.0, 0.0, 1.0, 4.0];
        assert!(matches!(
            select_transform_ons(&s, &[Some(Transform::Log)]),
            Err(Error::NoFeasibleTransform)
        ));
    }
}
