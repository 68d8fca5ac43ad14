use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sobol::FactorSpace;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBand {
    pub unit: String,
    pub reference: usize,
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
}

/// Rank distribution of each unit over `n` configuration points drawn
/// uniformly and independently per factor. Sample `j` uses the random
/// stream `(seed, j)`.
///
/// `ranks[point][unit]` must cover every point of `space`.
pub fn uncertainty_bands(
    space: &FactorSpace,
    ranks: &[Vec<usize>],
    units: &[String],
    reference: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<RankBand>> {
    if ranks.len() != space.size() {
        return Err(Error::Precondition(format!(
            "rank table has {} points, space has {}",
            ranks.len(),
            space.size()
        )));
    }
    if reference.len() != units.len() || ranks.iter().any(|r| r.len() != units.len()) {
        return Err(Error::Precondition("rank vectors must cover every unit".into()));
    }
    if n == 0 {
        return Err(Error::Config("uncertainty analysis needs at least one sample".into()));
    }
    let draws: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let levels: Vec<usize> = space.levels.iter().map(|&l| rng.random_range(0..l)).collect();
            space.encode(&levels)
        })
        .collect();
    Ok((0..units.len())
        .into_par_iter()
        .map(|c| {
            let sample: Vec<f64> = draws.iter().map(|&p| ranks[p][c] as f64).collect();
            let s = stats::sorted(&sample);
            RankBand {
                unit: units[c].clone(),
                reference: reference[c],
                median: stats::quantile_sorted(&s, 0.5),
                p5: stats::quantile_sorted(&s, 0.05),
                p95: stats::quantile_sorted(&s, 0.95),
            }
        })
        .collect())
}
