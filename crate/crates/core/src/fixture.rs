//! Seeded synthetic panel with the shape of a national health index:
//! 3 domains, 17 subdomains, 58 indicators and 9 regions.
//!
//! Every indicator loads on a latent unit health factor through its domain
//! and subdomain, so units at the extremes keep their rank under most
//! methodological choices. A few indicators are lognormal, a few carry
//! injected outliers, and the raw panel has missing and suppressed cells
//! exercising every imputation rule.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::io;
use crate::model::{
    DomainConfig, Hierarchy, HierarchyConfig, IndicatorConfig, PanelTensor, Polarity, PopulationWeights,
    SubdomainConfig, Suppression, Suppressions, Year,
};

/// Indicators per subdomain, by domain.
const LAYOUT: [(&str, &[usize]); 3] = [
    ("lives", &[4, 3, 3, 4, 3, 4]),
    ("people", &[3, 4, 3, 4, 3]),
    ("places", &[3, 4, 3, 4, 1, 5]),
];
const DOMAIN_LOADING: [f64; 3] = [0.8, 0.7, 0.6];
const REGIONS: usize = 9;
/// Global indicator positions drawn from a lognormal.
const HEAVY: [usize; 6] = [3, 12, 21, 30, 39, 48];
/// Global indicator positions with injected outliers.
const OUTLIER: [usize; 8] = [6, 9, 15, 24, 33, 42, 51, 55];
const MISSING_RATE: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureOptions {
    pub seed: u64,
    pub units: usize,
    pub first_year: Year,
    pub years: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            seed: 20_151_026,
            units: 149,
            first_year: 2015,
            years: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub raw: PanelTensor,
    pub suppressions: Suppressions,
    pub hierarchy: Hierarchy,
    pub population: PopulationWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Normal,
    Heavy,
    Outliers,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_id(c: usize) -> String {
    format!("U{:03}", c + 1)
}

pub fn synthetic_fixture(opts: &FixtureOptions) -> Result<Fixture> {
    assert!(
        opts.units >= 2 * REGIONS,
        "fixture needs at least {} units",
        2 * REGIONS
    );
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let units: Vec<String> = (0..opts.units).map(unit_id).collect();
    let years: Vec<Year> = (0..opts.years as Year).map(|t| opts.first_year + t).collect();
    let (nc, nt) = (opts.units, opts.years);

    // Hierarchy: ids sort in layout order, so global position k is stable.
    let mut domains = BTreeMap::new();
    let mut specs = Vec::new(); // (id, domain, subdomain index within all, polarity, shape)
    let mut sub_counter = 0;
    for (d, (dname, sizes)) in LAYOUT.iter().enumerate() {
        let mut subs = BTreeMap::new();
        for (s, &size) in sizes.iter().enumerate() {
            let sname = format!("{dname}_{}", s + 1);
            let mut inds = Vec::new();
            for k in 0..size {
                let g = specs.len();
                let id = format!("{sname}_{}", k + 1);
                let polarity = if g % 3 == 1 {
                    Polarity::Reversed
                } else {
                    Polarity::Positive
                };
                let shape = if HEAVY.contains(&g) {
                    Shape::Heavy
                } else if OUTLIER.contains(&g) {
                    Shape::Outliers
                } else {
                    Shape::Normal
                };
                inds.push(IndicatorConfig {
                    id: id.clone(),
                    polarity,
                });
                specs.push((id, d, sub_counter, polarity, shape));
            }
            subs.insert(sname, SubdomainConfig { indicators: inds });
            sub_counter += 1;
        }
        domains.insert(dname.to_string(), DomainConfig { subdomains: subs });
    }
    let regions: BTreeMap<String, Vec<String>> = (0..REGIONS)
        .map(|r| {
            let members = (0..nc).filter(|c| c % REGIONS == r).map(unit_id).collect();
            (format!("R{}", r + 1), members)
        })
        .collect();
    let hierarchy = Hierarchy::from_config(&HierarchyConfig { domains, regions })?;

    // Latent structure.
    let level: Vec<f64> = (0..nc).map(|_| normal(&mut rng)).collect();
    let health: Vec<Vec<f64>> = (0..nc)
        .map(|c| {
            (0..nt)
                .map(|t| level[c] + 0.05 * t as f64 + 0.15 * normal(&mut rng))
                .collect()
        })
        .collect();
    let domain_own: Vec<Vec<f64>> = (0..nc).map(|_| (0..3).map(|_| normal(&mut rng)).collect()).collect();
    let sub_own: Vec<Vec<f64>> = (0..nc)
        .map(|_| (0..sub_counter).map(|_| normal(&mut rng)).collect())
        .collect();

    let ids: Vec<String> = specs.iter().map(|s| s.0.clone()).collect();
    let mut raw = PanelTensor::empty(units.clone(), ids, &years)?;
    for (id, d, s, polarity, shape) in &specs {
        let i = raw.indicator_index(id).expect("indicator in tensor");
        let lambda = rng.random_range(0.65..0.9);
        let scale = rng.random_range(0.5..2.0);
        let mut centre: f64 = rng.random_range(20.0..80.0);
        let rho = DOMAIN_LOADING[*d];
        let mut z = vec![vec![0.0; nt]; nc];
        for c in 0..nc {
            for t in 0..nt {
                let dom = rho * health[c][t] + (1.0 - rho * rho).sqrt() * domain_own[c][*d];
                let sub = 0.85 * dom + (1.0 - 0.85_f64 * 0.85).sqrt() * sub_own[c][*s];
                z[c][t] = lambda * sub + (1.0 - lambda * lambda).sqrt() * normal(&mut rng);
            }
        }
        let sign = polarity.sign();
        if *shape == Shape::Outliers {
            // Spikes sit on the high raw side of a strictly positive series,
            // as for a rate with a few extreme areas.
            centre = centre.max(10.0 * scale * 4.5);
            for t in 0..nt {
                for _ in 0..rng.random_range(1..=2) {
                    let c = rng.random_range(0..nc);
                    z[c][t] = sign * rng.random_range(5.5..7.5);
                }
            }
        }
        for c in 0..nc {
            for t in 0..nt {
                let v = match shape {
                    Shape::Heavy => (3.0 + 0.8 * sign * z[c][t]).exp(),
                    _ => centre + 10.0 * scale * sign * z[c][t],
                };
                raw.set(c, i, t, Some(v));
            }
        }
    }

    // Gaps: scattered cells, two fully missing unit series, suppressions.
    let ni = raw.n_indicators();
    for c in 0..nc {
        for i in 0..ni {
            for t in 0..nt {
                if rng.random_bool(MISSING_RATE) {
                    raw.set(c, i, t, None);
                }
            }
        }
    }
    for (c, i) in [(6, 10), (40, 27)] {
        for t in 0..nt {
            raw.set(c % nc, i, t, None);
        }
    }
    let mut suppressions = Suppressions::default();
    for k in 0..10 {
        let (c, i, t) = (
            rng.random_range(0..nc),
            rng.random_range(0..ni),
            rng.random_range(0..nt),
        );
        raw.set(c, i, t, None);
        let kind = if k < 6 {
            Suppression::Numerator
        } else {
            Suppression::Denominator
        };
        suppressions.insert(c, i, t, kind);
    }

    // Population shares with mild differential growth.
    let size: Vec<f64> = (0..nc).map(|_| (0.6 * normal(&mut rng)).exp()).collect();
    let growth: Vec<f64> = (0..nc).map(|_| rng.random_range(-0.01..0.02)).collect();
    let mut entries = Vec::with_capacity(nc * nt);
    for t in 0..nt {
        let raw_w: Vec<f64> = (0..nc).map(|c| size[c] * (1.0 + growth[c]).powi(t as i32)).collect();
        let total: f64 = raw_w.iter().sum();
        entries.extend((0..nc).map(|c| (units[c].clone(), years[t], raw_w[c] / total)));
    }
    let population = PopulationWeights::from_entries(entries)?;

    Ok(Fixture {
        raw,
        suppressions,
        hierarchy,
        population,
    })
}

/// Paths written by [`write_fixture`].
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub data: PathBuf,
    pub hierarchy: PathBuf,
    pub population: PathBuf,
}

/// Writes `data.csv`, `hierarchy.json` and `population.csv` into `dir`.
pub fn write_fixture(fixture: &Fixture, dir: &Path) -> Result<FixtureFiles> {
    let files = FixtureFiles {
        data: dir.join("data.csv"),
        hierarchy: dir.join("hierarchy.json"),
        population: dir.join("population.csv"),
    };
    io::write_panel_file(&files.data, &fixture.raw, Some(&fixture.suppressions))?;
    io::write_json(&files.hierarchy, &fixture.hierarchy.to_config())?;
    io::write_population_file(&files.population, &fixture.population)?;
    Ok(files)
}
