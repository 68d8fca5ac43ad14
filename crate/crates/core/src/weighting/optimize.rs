//! Domain weights chosen so that each domain's share of the index variance
//! matches a target importance.
//!
//! Weights live on the simplex through a softmax with the last log-weight
//! pinned at 0, so the unconstrained search is over D−1 coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::sensitivity::{cv_bandwidth, estimate_s, nadaraya_watson_fit, s_with_bandwidth, Estimator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Standard deviation of the log-weight jitter applied to restarts after the first.
    pub jitter: f64,
    /// Starting weights; equal weights when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            seed: 0,
            tolerance: 1e-6,
            max_iterations: 2_000,
            jitter: 0.5,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedWeights {
    /// Domain weights summing to 1.
    pub weights: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    /// Normalized ratios S̃_d at the returned weights.
    pub achieved: Vec<f64>,
    /// False when nothing beat the starting weights, which are then returned.
    pub improved: bool,
    pub estimator: Estimator,
}

fn combine(domains: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = domains[0].len();
    (0..n)
        .map(|r| domains.iter().zip(w).map(|(x, wd)| wd * x[r]).sum())
        .collect()
}

/// `S̃_d = S_d / Σ_k S_k` for the index `Σ_d w_d x_d`. With
/// `bandwidths` the nonparametric smoother uses those bandwidths instead
/// of cross-validating each time.
pub fn normalized_ratios(
    domains: &[Vec<f64>],
    weights: &[f64],
    estimator: Estimator,
    bandwidths: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let y = combine(domains, weights);
    let s: Vec<f64> = domains
        .iter()
        .enumerate()
        .map(|(d, x)| match (estimator, bandwidths) {
            (Estimator::Nonparametric, Some(h)) => s_with_bandwidth(&y, x, h[d]),
            _ => estimate_s(&y, x, estimator),
        })
        .collect::<Result<_>>()?;
    let total: f64 = s.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numeric("no domain explains any index variance".into()));
    }
    Ok(s.iter().map(|v| v / total).collect())
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

fn quadratic(m: &[Vec<f64>], w: &[f64]) -> f64 {
    m.iter()
        .zip(w)
        .map(|(row, wa)| wa * row.iter().zip(w).map(|(v, wb)| v * wb).sum::<f64>())
        .sum()
}

/// Kernel ratios at fixed bandwidths as quadratic forms in the weights.
///
/// The kernel fit is linear in the response, so for `y = Σ_k w_k x_k` the
/// fit on domain `d` is `Σ_k w_k f_dk` with `f_dk` the fit of `x_k` on
/// `x_d`. Then `S_d = wᵀG_d w / wᵀCw`, where `C` is the covariance of the
/// domain columns and `G_d` that of the `f_dk`.
struct KernelForms {
    c: Vec<Vec<f64>>,
    g: Vec<Vec<Vec<f64>>>,
}

impl KernelForms {
    fn new(domains: &[Vec<f64>], bandwidths: &[f64]) -> Self {
        let gram = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
            cols.iter()
                .map(|a| cols.iter().map(|b| covariance(a, b)).collect())
                .collect()
        };
        let g = domains
            .iter()
            .zip(bandwidths)
            .map(|(xd, &h)| {
                let fitted: Vec<Vec<f64>> = domains.iter().map(|xk| nadaraya_watson_fit(xd, xk, h)).collect();
                gram(&fitted)
            })
            .collect();
        Self { c: gram(domains), g }
    }

    fn normalized_ratios(&self, w: &[f64]) -> Option<Vec<f64>> {
        let vy = quadratic(&self.c, w);
        if !(vy > 0.0) {
            return None;
        }
        let s: Vec<f64> = self.g.iter().map(|g| quadratic(g, w) / vy).collect();
        let total: f64 = s.iter().sum();
        (total > 0.0).then(|| s.iter().map(|v| v / total).collect())
    }
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let mut full: Vec<f64> = theta.to_vec();
    full.push(0.0);
    let m = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = full.iter().map(|t| (t - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

fn squared_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimizes `Σ_d (target_d − S̃_d(w))²` over positive weights summing to 1.
///
/// In nonparametric mode each domain's bandwidth is cross-validated once,
/// at the starting weights, and held fixed during the search so the
/// objective is a smooth function of `w`; the search then evaluates it
/// through precomputed quadratic forms.
pub fn optimize_weights(
    domains: &[Vec<f64>],
    targets: &[f64],
    estimator: Estimator,
    opts: &OptimizeOptions,
) -> Result<OptimizedWeights> {
    let d = domains.len();
    if d < 2 {
        return Err(Error::Precondition(
            "weight optimization needs at least two domains".into(),
        ));
    }
    if targets.len() != d || targets.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition(format!("need {d} positive target importances")));
    }
    if (targets.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition("target importances must sum to 1".into()));
    }
    let initial = match &opts.initial {
        Some(w) if w.len() == d && w.iter().all(|v| *v > 0.0) => {
            let s: f64 = w.iter().sum();
            w.iter().map(|v| v / s).collect::<Vec<_>>()
        }
        Some(_) => return Err(Error::Precondition(format!("need {d} positive initial weights"))),
        None => vec![1.0 / d as f64; d],
    };

    let bandwidths: Option<Vec<f64>> = (estimator == Estimator::Nonparametric).then(|| {
        let y0 = combine(domains, &initial);
        domains.iter().map(|x| cv_bandwidth(x, &y0)).collect()
    });
    let objective = |w: &[f64]| -> Result<(f64, Vec<f64>)> {
        let s = normalized_ratios(domains, w, estimator, bandwidths.as_deref())?;
        Ok((squared_gap(targets, &s), s))
    };

    let forms = bandwidths.as_deref().map(|h| KernelForms::new(domains, h));
    let search_objective = |w: &[f64]| -> f64 {
        match &forms {
            Some(f) => f
                .normalized_ratios(w)
                .map_or(f64::INFINITY, |s| squared_gap(targets, &s)),
            None => objective(w).map_or(f64::INFINITY, |(v, _)| v),
        }
    };

    let (initial_objective, initial_achieved) = objective(&initial)?;
    let unchanged = |improved: bool| OptimizedWeights {
        weights: initial.clone(),
        objective: initial_objective,
        initial_objective,
        achieved: initial_achieved.clone(),
        improved,
        estimator,
    };
    if initial_objective <= 1e-14 {
        return Ok(unchanged(false));
    }

    let theta0: Vec<f64> = initial[..d - 1].iter().map(|w| (w / initial[d - 1]).ln()).collect();
    let nm = NelderMeadOptions {
        f_tolerance: opts.tolerance,
        x_tolerance: opts.tolerance,
        max_iterations: opts.max_iterations,
        initial_step: 0.5,
    };
    let jitter =
        Normal::new(0.0, opts.jitter.max(0.0)).map_err(|e| Error::Precondition(format!("invalid jitter: {e}")))?;
    let runs: Vec<(f64, Vec<f64>)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut start = theta0.clone();
            if r > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                start.iter_mut().for_each(|t| *t += jitter.sample(&mut rng));
            }
            let res = nelder_mead(|theta| search_objective(&softmax(theta)), &start, &nm);
            (res.value, softmax(&res.x))
        })
        .collect();
    let (best_value, best_w) = runs
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one restart");

    if !(best_value < initial_objective) {
        return Ok(unchanged(false));
    }
    let (objective_value, achieved) = objective(&best_w)?;
    Ok(OptimizedWeights {
        weights: best_w,
        objective: objective_value,
        initial_objective,
        achieved,
        improved: true,
        estimator,
    })
}
