//! First-order and total Sobol indices over a discrete factor space.
//!
//! Exact mode enumerates the full factorial and computes the ANOVA
//! components `f_u` of the output, so `V = Σ_u V_u` holds by construction
//! and `S_i = V_{i}/V ≤ S_Ti = Σ_{u∋i} V_u / V` in floating point.
//! Monte Carlo mode draws independent uniform levels into paired A/B
//! matrices and uses the Saltelli (2010) first-order and Jansen total
//! estimators, with percentile bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const BOOTSTRAP_RESAMPLES: usize = 1_000;
/// Separates the bootstrap random streams from the sampling streams.
const BOOTSTRAP_SALT: u64 = 0x5eed_b007_0000_0001;

/// Mixed-radix indexing of a full factorial; the last factor varies fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpace {
    pub names: Vec<String>,
    pub levels: Vec<usize>,
}

impl FactorSpace {
    pub fn new(names: Vec<String>, levels: Vec<usize>) -> Self {
        assert_eq!(names.len(), levels.len());
        assert!(levels.iter().all(|l| *l > 0), "every factor needs a level");
        Self { names, levels }
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn size(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn encode(&self, levels: &[usize]) -> usize {
        levels.iter().zip(&self.levels).fold(0, |acc, (l, n)| acc * n + l)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.k()];
        for f in (0..self.k()).rev() {
            out[f] = index % self.levels[f];
            index /= self.levels[f];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SobolMode {
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolEstimate {
    pub factor: String,
    /// `None` when every unit's output is constant.
    pub s_first: Option<f64>,
    pub s_total: Option<f64>,
    pub ci_first: Option<[f64; 2]>,
    pub ci_total: Option<[f64; 2]>,
    pub n_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSobol {
    pub unit: String,
    pub variance: f64,
    /// `None` when the unit's output does not vary.
    pub first: Option<Vec<f64>>,
    pub total: Option<Vec<f64>>,
    /// Exact mode only: `Σ_{u≠∅} V_u`, equal to `variance` up to rounding.
    pub contribution_sum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolReport {
    pub mode: SobolMode,
    pub factors: Vec<SobolEstimate>,
    pub per_unit: Vec<UnitSobol>,
    pub undefined_units: usize,
}

fn constant(v: f64, mean: f64) -> bool {
    v <= 1e-20 * mean.mul_add(mean, 1.0)
}

struct ExactUnit {
    variance: f64,
    first: Vec<f64>,
    total: Vec<f64>,
    contribution_sum: f64,
}

fn exact_unit(fs: &FactorSpace, f: &[f64]) -> Option<ExactUnit> {
    let n = fs.size();
    let k = fs.k();
    let mean = stats::mean(f);
    let variance = stats::variance(f);
    if constant(variance, mean) {
        return None;
    }
    let cells: Vec<Vec<usize>> = (0..n).map(|x| fs.decode(x)).collect();
    let subsets = 1usize << k;
    // components[u][x]: ANOVA component f_u at grid point x.
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(subsets);
    let mut contribution = vec![0.0; subsets];
    components.push(vec![mean; n]);
    for u in 1..subsets {
        let members: Vec<usize> = (0..k).filter(|f| u >> f & 1 == 1).collect();
        let key = |x: usize| members.iter().fold(0, |acc, &f| acc * fs.levels[f] + cells[x][f]);
        let groups: usize = members.iter().map(|&f| fs.levels[f]).product();
        let mut sum = vec![0.0; groups];
        let mut count = vec![0usize; groups];
        for x in 0..n {
            sum[key(x)] += f[x];
            count[key(x)] += 1;
        }
        let mut fu: Vec<f64> = (0..n).map(|x| sum[key(x)] / count[key(x)] as f64).collect();
        for v in 0..u {
            if v & u == v {
                for x in 0..n {
                    fu[x] -= components[v][x];
                }
            }
        }
        contribution[u] = fu.iter().map(|v| v * v).sum::<f64>() / n as f64;
        components.push(fu);
    }
    let first = (0..k).map(|i| contribution[1 << i] / variance).collect();
    let total = (0..k)
        .map(|i| {
            let mut acc = contribution[1 << i];
            for (u, c) in contribution.iter().enumerate() {
                if u != 1 << i && u >> i & 1 == 1 {
                    acc += c;
                }
            }
            acc / variance
        })
        .collect();
    Some(ExactUnit {
        variance,
        first,
        total,
        contribution_sum: contribution[1..].iter().sum(),
    })
}

fn average(rows: &[&Vec<f64>], k: usize) -> Vec<Option<f64>> {
    if rows.is_empty() {
        return vec![None; k];
    }
    (0..k)
        .map(|i| Some(rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64))
        .collect()
}

fn check_outputs(fs: &FactorSpace, outputs: &[Vec<f64>], units: &[String]) -> Result<()> {
    if outputs.len() != units.len() {
        return Err(Error::Precondition("one output vector per unit is required".into()));
    }
    if let Some(o) = outputs.iter().find(|o| o.len() != fs.size()) {
        return Err(Error::Precondition(format!(
            "output table has {} entries, factor space has {}",
            o.len(),
            fs.size()
        )));
    }
    Ok(())
}

/// Exact indices from the full-factorial output table `outputs[unit][point]`.
pub fn sobol_exact(fs: &FactorSpace, outputs: &[Vec<f64>], units: &[String]) -> Result<SobolReport> {
    check_outputs(fs, outputs, units)?;
    let per: Vec<Option<ExactUnit>> = outputs.par_iter().map(|f| exact_unit(fs, f)).collect();
    let per_unit: Vec<UnitSobol> = per
        .iter()
        .zip(outputs)
        .zip(units)
        .map(|((e, f), u)| match e {
            Some(e) => UnitSobol {
                unit: u.clone(),
                variance: e.variance,
                first: Some(e.first.clone()),
                total: Some(e.total.clone()),
                contribution_sum: Some(e.contribution_sum),
            },
            None => UnitSobol {
                unit: u.clone(),
                variance: stats::variance(f),
                first: None,
                total: None,
                contribution_sum: None,
            },
        })
        .collect();
    let firsts: Vec<&Vec<f64>> = per_unit.iter().filter_map(|u| u.first.as_ref()).collect();
    let totals: Vec<&Vec<f64>> = per_unit.iter().filter_map(|u| u.total.as_ref()).collect();
    let (sf, st) = (average(&firsts, fs.k()), average(&totals, fs.k()));
    Ok(SobolReport {
        mode: SobolMode::Exact,
        factors: (0..fs.k())
            .map(|i| SobolEstimate {
                factor: fs.names[i].clone(),
                s_first: sf[i],
                s_total: st[i],
                ci_first: None,
                ci_total: None,
                n_evaluations: fs.size(),
            })
            .collect(),
        undefined_units: per_unit.len() - firsts.len(),
        per_unit,
    })
}

/// Per-unit sums for one distinct (A row, B row) pair.
struct PairTerms {
    sum: f64,
    sum_sq: f64,
    first: Vec<f64>,
    total: Vec<f64>,
}

/// First-order and total estimates of one unit, with its output variance.
type UnitEstimate = (Vec<f64>, Vec<f64>, f64);
/// Unit-averaged first-order and total indices.
type Averaged = (Vec<Option<f64>>, Vec<Option<f64>>);

fn unit_estimates(terms: &[PairTerms], counts: &[usize], n: usize, k: usize) -> Option<UnitEstimate> {
    let (mut s, mut s2) = (0.0, 0.0);
    let mut first = vec![0.0; k];
    let mut total = vec![0.0; k];
    for (t, &c) in terms.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        let c = c as f64;
        s += c * t.sum;
        s2 += c * t.sum_sq;
        for i in 0..k {
            first[i] += c * t.first[i];
            total[i] += c * t.total[i];
        }
    }
    let two_n = 2.0 * n as f64;
    let mean = s / two_n;
    let v = s2 / two_n - mean * mean;
    if constant(v, mean) {
        return None;
    }
    for i in 0..k {
        first[i] /= n as f64 * v;
        total[i] /= two_n * v;
    }
    Some((first, total, v))
}

fn averaged(per_unit: &[Option<UnitEstimate>], k: usize) -> Averaged {
    let f: Vec<&Vec<f64>> = per_unit.iter().flatten().map(|e| &e.0).collect();
    let t: Vec<&Vec<f64>> = per_unit.iter().flatten().map(|e| &e.1).collect();
    (average(&f, k), average(&t, k))
}

/// Monte Carlo estimates with `n` base samples (`n·(k+2)` evaluations).
/// Row `j` of the A and B matrices is drawn from the stream `(seed, j)`.
pub fn sobol_mc(
    fs: &FactorSpace,
    outputs: &[Vec<f64>],
    units: &[String],
    n: usize,
    seed: u64,
    resamples: usize,
) -> Result<SobolReport> {
    check_outputs(fs, outputs, units)?;
    if n < 2 {
        return Err(Error::Config("Monte Carlo Sobol needs at least 2 samples".into()));
    }
    let k = fs.k();
    let size = fs.size();
    let rows: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let a: Vec<usize> = fs.levels.iter().map(|&l| rng.random_range(0..l)).collect();
            let b: Vec<usize> = fs.levels.iter().map(|&l| rng.random_range(0..l)).collect();
            fs.encode(&a) * size + fs.encode(&b)
        })
        .collect();
    // Compress rows to the distinct (A, B) pairs they use.
    let mut slot = vec![usize::MAX; size * size];
    let mut pairs = Vec::new();
    let row_slot: Vec<usize> = rows
        .iter()
        .map(|&p| {
            if slot[p] == usize::MAX {
                slot[p] = pairs.len();
                pairs.push(p);
            }
            slot[p]
        })
        .collect();
    let mut counts = vec![0usize; pairs.len()];
    for &s in &row_slot {
        counts[s] += 1;
    }
    let ab: Vec<(usize, usize, Vec<usize>)> = pairs
        .iter()
        .map(|&p| {
            let (a, b) = (p / size, p % size);
            let (la, lb) = (fs.decode(a), fs.decode(b));
            let mixed = (0..k)
                .map(|i| {
                    let mut l = la.clone();
                    l[i] = lb[i];
                    fs.encode(&l)
                })
                .collect();
            (a, b, mixed)
        })
        .collect();
    let terms: Vec<Vec<PairTerms>> = outputs
        .par_iter()
        .map(|f| {
            ab.iter()
                .map(|(a, b, mixed)| {
                    let (fa, fb) = (f[*a], f[*b]);
                    PairTerms {
                        sum: fa + fb,
                        sum_sq: fa * fa + fb * fb,
                        first: mixed.iter().map(|&m| fb * (f[m] - fa)).collect(),
                        total: mixed.iter().map(|&m| (fa - f[m]) * (fa - f[m])).collect(),
                    }
                })
                .collect()
        })
        .collect();

    let point: Vec<Option<UnitEstimate>> = terms.par_iter().map(|t| unit_estimates(t, &counts, n, k)).collect();
    let (sf, st) = averaged(&point, k);

    let boot: Vec<Averaged> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BOOTSTRAP_SALT);
            rng.set_stream(b as u64);
            let mut c = vec![0usize; pairs.len()];
            for _ in 0..n {
                c[row_slot[rng.random_range(0..n)]] += 1;
            }
            let per: Vec<_> = terms.iter().map(|t| unit_estimates(t, &c, n, k)).collect();
            averaged(&per, k)
        })
        .collect();
    let interval = |pick: &dyn Fn(&Averaged) -> Option<f64>| -> Option<[f64; 2]> {
        let v: Vec<f64> = boot.iter().filter_map(pick).collect();
        if v.is_empty() {
            return None;
        }
        let s = stats::sorted(&v);
        Some([stats::quantile_sorted(&s, 0.025), stats::quantile_sorted(&s, 0.975)])
    };

    let per_unit = point
        .iter()
        .zip(outputs)
        .zip(units)
        .map(|((e, f), u)| UnitSobol {
            unit: u.clone(),
            variance: e.as_ref().map_or_else(|| stats::variance(f), |e| e.2),
            first: e.as_ref().map(|e| e.0.clone()),
            total: e.as_ref().map(|e| e.1.clone()),
            contribution_sum: None,
        })
        .collect::<Vec<_>>();
    Ok(SobolReport {
        mode: SobolMode::MonteCarlo,
        factors: (0..k)
            .map(|i| SobolEstimate {
                factor: fs.names[i].clone(),
                s_first: sf[i],
                s_total: st[i],
                ci_first: interval(&|r| r.0[i]),
                ci_total: interval(&|r| r.1[i]),
                n_evaluations: n * (k + 2),
            })
            .collect(),
        undefined_units: point.iter().filter(|p| p.is_none()).count(),
        per_unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_factor() -> FactorSpace {
        FactorSpace::new(vec!["q1".into(), "q2".into()], vec![2, 2])
    }

    #[test]
    fn mixed_radix_round_trip() {
        let fs = FactorSpace::new(vec!["a".into(), "b".into(), "c".into()], vec![3, 2, 4]);
        for x in 0..fs.size() {
            assert_eq!(fs.encode(&fs.decode(x)), x);
        }
        assert_eq!(fs.decode(1), vec![0, 0, 1]);
    }

    #[test]
    fn single_active_factor() {
        let fs = FactorSpace::new(vec!["a".into(), "b".into()], vec![3, 2]);
        let f: Vec<f64> = (0..6).map(|x| [1.0, 4.0, -2.0][fs.decode(x)[0]]).collect();
        let r = sobol_exact(&fs, &[f], &["u".into()]).unwrap();
        assert!((r.factors[0].s_first.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.factors[0].s_total.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.factors[1].s_first.unwrap().abs() < 1e-12);
        assert!(r.factors[1].s_total.unwrap().abs() < 1e-12);
    }

    #[test]
    fn pure_interaction_has_no_first_order() {
        let fs = two_factor();
        // XOR-like: m = q1·q2 with q ∈ {−1, 1}
        let f: Vec<f64> = (0..4)
            .map(|x| {
                let l = fs.decode(x);
                (2.0 * l[0] as f64 - 1.0) * (2.0 * l[1] as f64 - 1.0)
            })
            .collect();
        let r = sobol_exact(&fs, &[f], &["u".into()]).unwrap();
        for e in &r.factors {
            assert!(e.s_first.unwrap().abs() < 1e-15);
            assert!((e.s_total.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_output_is_undefined() {
        let r = sobol_exact(&two_factor(), &[vec![3.0; 4]], &["u".into()]).unwrap();
        assert_eq!(r.undefined_units, 1);
        assert!(r.factors.iter().all(|e| e.s_first.is_none() && e.s_total.is_none()));
        let r = sobol_mc(&two_factor(), &[vec![3.0; 4]], &["u".into()], 100, 1, 20).unwrap();
        assert!(r.factors.iter().all(|e| e.s_first.is_none() && e.ci_first.is_none()));
    }
}
