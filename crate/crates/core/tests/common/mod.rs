//! Oracles and builders shared by the integration tests. Nothing here
//! calls into the library's numerics; values are recomputed from scratch.

#![allow(dead_code)]

use compindex::model::{Hierarchy, HierarchyConfig, PanelTensor, PopulationWeights, Year};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// Bias-adjusted skewness and excess kurtosis through k-statistics.
pub fn k_stat_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m = |r: i32| xs.iter().map(|x| (x - mean).powi(r)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    let k2 = n * m2 / (n - 1.0);
    let k3 = n * n * m3 / ((n - 1.0) * (n - 2.0));
    let k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    (k3 / k2.powf(1.5), k4 / (k2 * k2))
}

pub fn within_limits(xs: &[f64]) -> bool {
    let (s, k) = k_stat_moments(xs);
    s.abs() <= 2.0 && k.abs() <= 3.5
}

pub fn weighted_mean(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Ranks with 1 for the smallest value; ties go to the smaller id.
pub fn brute_ranks(values: &[f64], ids: &[String]) -> Vec<usize> {
    (0..values.len())
        .map(|c| {
            1 + (0..values.len())
                .filter(|&o| values[o] < values[c] || (values[o] == values[c] && ids[o] < ids[c]))
                .count()
        })
        .collect()
}

/// Hierarchy with `sizes[d][s]` indicators named `i{d}_{s}_{k}`, and units
/// `u00..` split round-robin over `regions` regions.
pub fn hierarchy(sizes: &[&[usize]], units: usize, regions: usize) -> Hierarchy {
    let mut domains = serde_json::Map::new();
    for (d, subs) in sizes.iter().enumerate() {
        let mut sm = serde_json::Map::new();
        for (s, &k) in subs.iter().enumerate() {
            let inds: Vec<_> = (0..k)
                .map(|i| serde_json::json!({"id": format!("i{d}_{s}_{i}"), "polarity": 0}))
                .collect();
            sm.insert(format!("s{d}_{s}"), serde_json::json!({ "indicators": inds }));
        }
        domains.insert(format!("d{d}"), serde_json::json!({ "subdomains": sm }));
    }
    let mut reg = serde_json::Map::new();
    for r in 0..regions {
        let members: Vec<String> = (0..units).filter(|c| c % regions == r).map(unit_name).collect();
        reg.insert(format!("r{r}"), serde_json::json!(members));
    }
    let cfg: HierarchyConfig = serde_json::from_value(serde_json::json!({"domains": domains, "regions": reg})).unwrap();
    Hierarchy::from_config(&cfg).unwrap()
}

pub fn unit_name(c: usize) -> String {
    format!("u{c:03}")
}

/// Complete tensor in hierarchy indicator order filled by `f(unit, indicator, year)`.
pub fn tensor(
    h: &Hierarchy,
    units: usize,
    years: &[Year],
    mut f: impl FnMut(usize, usize, usize) -> f64,
) -> PanelTensor {
    let mut t = PanelTensor::empty((0..units).map(unit_name).collect(), h.indicator_ids(), years).unwrap();
    for c in 0..units {
        for i in 0..h.indicators().len() {
            for y in 0..years.len() {
                t.set(c, i, y, Some(f(c, i, y)));
            }
        }
    }
    t
}

/// Random positive population shares summing to one in every year.
pub fn population(units: usize, years: &[Year], seed: u64) -> PopulationWeights {
    let mut r = rng(seed);
    let mut entries = Vec::new();
    for &y in years {
        let raw: Vec<f64> = (0..units).map(|_| r.random_range(0.2..2.0)).collect();
        let total: f64 = raw.iter().sum();
        entries.extend(raw.iter().enumerate().map(|(c, w)| (unit_name(c), y, w / total)));
    }
    PopulationWeights::from_entries(entries).unwrap()
}

/// Equal population shares.
pub fn uniform_population(units: usize, years: &[Year]) -> PopulationWeights {
    PopulationWeights::from_entries(
        years
            .iter()
            .flat_map(|&y| (0..units).map(move |c| (unit_name(c), y, 1.0 / units as f64))),
    )
    .unwrap()
}

/// The default synthetic fixture, imputed and ready for the pipeline.
pub fn fixture_input() -> compindex::analysis::PipelineInput {
    let f = compindex::fixture::synthetic_fixture(&compindex::fixture::FixtureOptions::default()).unwrap();
    let gaps = compindex::missing::classify_missing(&f.raw, &f.suppressions).unwrap();
    let imputed = compindex::imputation::impute(&f.raw, &f.hierarchy, &gaps).unwrap();
    compindex::analysis::PipelineInput::new(imputed, f.hierarchy, f.population).unwrap()
}

/// Writes the default fixture and a run config beside it; returns the config path.
pub fn write_fixture_run(
    dir: &std::path::Path,
    edit: impl FnOnce(&mut compindex::report::RunConfig),
) -> std::path::PathBuf {
    let f = compindex::fixture::synthetic_fixture(&compindex::fixture::FixtureOptions::default()).unwrap();
    compindex::fixture::write_fixture(&f, dir).unwrap();
    let mut cfg = compindex::report::RunConfig::new(
        "data.csv".into(),
        "hierarchy.json".into(),
        "population.csv".into(),
        compindex::analysis::PipelineSettings::new(2015),
    );
    edit(&mut cfg);
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Index rebuilt from the treated tensor with a hand-written weighted
/// z-score and equal-weight means, optionally without some indicators.
pub fn rebuild_ranks(
    treated: &PanelTensor,
    h: &Hierarchy,
    pop: &PopulationWeights,
    baseline: i32,
    drop: &[usize],
) -> Vec<usize> {
    let units = treated.units().to_vec();
    let n = units.len();
    let b = treated.year_index(baseline).unwrap();
    let t = treated.years().len() - 1;
    let w: Vec<f64> = units.iter().map(|u| pop.get(u, baseline).unwrap()).collect();
    let z = |c: usize, i: usize| -> f64 {
        let col = treated.cross_section(i, b);
        let mu: f64 = w.iter().zip(&col).map(|(a, x)| a * x).sum();
        let var = n as f64 / (n as f64 - 1.0) * w.iter().zip(&col).map(|(a, x)| a * (x - mu).powi(2)).sum::<f64>();
        let sign = h.indicators()[i].polarity.sign();
        sign * (treated.value(c, i, t) - mu) / var.sqrt()
    };
    let index: Vec<f64> = (0..n)
        .map(|c| {
            let domains: Vec<f64> = h
                .domains()
                .iter()
                .filter_map(|d| {
                    let subs: Vec<f64> = d
                        .subdomains
                        .iter()
                        .filter_map(|&s| {
                            let kept: Vec<f64> = h.subdomains()[s]
                                .indicators
                                .iter()
                                .filter(|i| !drop.contains(i))
                                .map(|&i| z(c, i))
                                .collect();
                            (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
                        })
                        .collect();
                    (!subs.is_empty()).then(|| subs.iter().sum::<f64>() / subs.len() as f64)
                })
                .collect();
            domains.iter().sum::<f64>() / domains.len() as f64
        })
        .collect();
    brute_ranks(&index, &units)
}
