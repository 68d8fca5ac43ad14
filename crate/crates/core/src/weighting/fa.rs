//! One-factor maximum-likelihood factor analysis.
//!
//! The model is `R = λλᵀ + Ψ` on a correlation matrix `R`. The EM updates
//! only need `Σ⁻¹λ`, which Sherman–Morrison reduces to
//! `Ψ⁻¹λ / (1 + λᵀΨ⁻¹λ)`, so no matrix is ever inverted.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{equal_weights, Provenance, WeightSystem};
use crate::error::{Error, Result};
use crate::model::{Hierarchy, PanelTensor, Stage};
use crate::stats;

pub const FA_TOLERANCE: f64 = 1e-8;
pub const FA_MAX_ITERATIONS: usize = 500;
/// Smallest uniqueness allowed, i.e. communalities are capped at `1 − 1e-6`.
pub const HEYWOOD_UNIQUENESS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OneFactorFit {
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Variables whose uniqueness hit the clamp.
    pub heywood: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaDiagnostics {
    pub loadings: BTreeMap<String, f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heywood: Vec<String>,
}

fn log_likelihood(r: &[Vec<f64>], lambda: &[f64], psi: &[f64]) -> f64 {
    let p = lambda.len();
    let d: Vec<f64> = (0..p).map(|i| lambda[i] / psi[i]).collect();
    let q: f64 = (0..p).map(|i| lambda[i] * d[i]).sum();
    let log_det = psi.iter().map(|v| v.ln()).sum::<f64>() + (1.0 + q).ln();
    let mut quad = 0.0;
    for a in 0..p {
        for b in 0..p {
            quad += d[a] * r[a][b] * d[b];
        }
    }
    let trace = (0..p).map(|i| r[i][i] / psi[i]).sum::<f64>() - quad / (1.0 + q);
    -0.5 * (log_det + trace)
}

fn initial_loadings(r: &[Vec<f64>]) -> Vec<f64> {
    let p = r.len();
    let m = DMatrix::from_fn(p, p, |a, b| r[a][b]);
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.imax();
    let scale = eig.eigenvalues[top].max(0.0).sqrt();
    (0..p)
        .map(|i| (scale * eig.eigenvectors[(i, top)].abs()).min(0.995))
        .collect()
}

/// Fits `R = λλᵀ + Ψ` by EM, starting from first-principal-component loadings.
pub fn fit_one_factor(r: &[Vec<f64>]) -> Result<OneFactorFit> {
    let p = r.len();
    if p < 2 {
        return Err(Error::Precondition(
            "one-factor model needs at least 2 variables".into(),
        ));
    }
    let mut lambda = initial_loadings(r);
    let mut psi: Vec<f64> = lambda.iter().map(|l| (1.0 - l * l).max(0.005)).collect();
    let mut ll = log_likelihood(r, &lambda, &psi);

    for iter in 1..=FA_MAX_ITERATIONS {
        // β = λᵀΣ⁻¹ and the conditional second moment of the factor.
        let d: Vec<f64> = (0..p).map(|i| lambda[i] / psi[i]).collect();
        let q: f64 = (0..p).map(|i| lambda[i] * d[i]).sum();
        let beta: Vec<f64> = d.iter().map(|v| v / (1.0 + q)).collect();
        let r_beta: Vec<f64> = (0..p).map(|a| (0..p).map(|b| r[a][b] * beta[b]).sum()).collect();
        let beta_lambda: f64 = (0..p).map(|i| beta[i] * lambda[i]).sum();
        let beta_r_beta: f64 = (0..p).map(|i| beta[i] * r_beta[i]).sum();
        let ezz = 1.0 - beta_lambda + beta_r_beta;

        lambda = r_beta.iter().map(|v| v / ezz).collect();
        psi = (0..p)
            .map(|i| (r[i][i] - lambda[i] * r_beta[i]).max(HEYWOOD_UNIQUENESS))
            .collect();

        let next = log_likelihood(r, &lambda, &psi);
        if !next.is_finite() {
            return Err(Error::Numeric("factor-analysis log-likelihood is not finite".into()));
        }
        let delta = (next - ll).abs();
        ll = next;
        if delta < FA_TOLERANCE {
            let cap = (1.0 - HEYWOOD_UNIQUENESS).sqrt();
            let heywood: Vec<bool> = psi.iter().map(|v| *v <= HEYWOOD_UNIQUENESS).collect();
            for l in lambda.iter_mut() {
                *l = l.clamp(-cap, cap);
            }
            return Ok(OneFactorFit {
                loadings: lambda,
                uniquenesses: psi,
                log_likelihood: ll,
                iterations: iter,
                heywood,
            });
        }
    }
    Err(Error::FaConvergence(String::new()))
}

fn check_normalized(z: &PanelTensor) -> Result<()> {
    if z.stage() != Stage::Normalized {
        return Err(Error::Precondition(format!(
            "weights need a normalized tensor, got {:?}",
            z.stage()
        )));
    }
    Ok(())
}

pub(crate) fn subdomain_columns(
    z: &PanelTensor,
    h: &Hierarchy,
    s: usize,
    year: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    h.subdomains()[s]
        .indicators
        .iter()
        .map(|&i| {
            let id = &h.indicators()[i].id;
            let k = z
                .indicator_index(id)
                .ok_or_else(|| Error::UnknownIndicator(id.clone()))?;
            Ok(match year {
                Some(t) => z.cross_section(k, t),
                None => z.flattened(k),
            })
        })
        .collect()
}

pub(crate) fn correlation_or_degenerate(cols: &[Vec<f64>], subdomain: &str) -> Result<Vec<Vec<f64>>> {
    stats::correlation_matrix(cols)
        .ok_or_else(|| Error::Degenerate(format!("subdomain `{subdomain}` has a zero-variance indicator")))
}

/// Indicator weights from the absolute first-factor loadings of each
/// subdomain, fitted on all years stacked. Subdomain and domain weights
/// stay at 1.
pub fn fa_weights(z: &PanelTensor, h: &Hierarchy) -> Result<(WeightSystem, BTreeMap<String, FaDiagnostics>)> {
    check_normalized(z)?;
    let mut w = equal_weights(h);
    w.provenance = Provenance::Fa;
    let mut diagnostics = BTreeMap::new();
    for (s, node) in h.subdomains().iter().enumerate() {
        if node.indicators.len() < 2 {
            continue;
        }
        let cols = subdomain_columns(z, h, s, None)?;
        let r = correlation_or_degenerate(&cols, &node.name)?;
        let fit = fit_one_factor(&r).map_err(|e| match e {
            Error::FaConvergence(_) => Error::FaConvergence(node.name.clone()),
            other => other,
        })?;
        let mut heywood = Vec::new();
        for (k, &i) in node.indicators.iter().enumerate() {
            w.indicator[i] = fit.loadings[k].abs();
            if fit.heywood[k] {
                heywood.push(h.indicators()[i].id.clone());
            }
        }
        if !heywood.is_empty() {
            warn!(
                "Heywood case in subdomain `{}` for {:?}; communality clamped",
                node.name, heywood
            );
        }
        if let Some(&i) = node.indicators.iter().find(|&&i| w.indicator[i] <= 0.0) {
            return Err(Error::Degenerate(format!(
                "indicator `{}` has a zero loading in subdomain `{}`",
                h.indicators()[i].id,
                node.name
            )));
        }
        diagnostics.insert(
            node.name.clone(),
            FaDiagnostics {
                loadings: node
                    .indicators
                    .iter()
                    .zip(&fit.loadings)
                    .map(|(&i, l)| (h.indicators()[i].id.clone(), *l))
                    .collect(),
                iterations: fit.iterations,
                log_likelihood: fit.log_likelihood,
                heywood,
            },
        );
    }
    Ok((w, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_three(r12: f64, r13: f64, r23: f64) -> [f64; 3] {
        // With three variables the one-factor model is just identified:
        // λ₁² = r12·r13/r23 and so on.
        [
            (r12 * r13 / r23).sqrt(),
            (r12 * r23 / r13).sqrt(),
            (r13 * r23 / r12).sqrt(),
        ]
    }

    #[test]
    fn three_variable_closed_form() {
        let (r12, r13, r23) = (0.56, 0.48, 0.42);
        let r = vec![vec![1.0, r12, r13], vec![r12, 1.0, r23], vec![r13, r23, 1.0]];
        let fit = fit_one_factor(&r).unwrap();
        let want = oracle_three(r12, r13, r23);
        for k in 0..3 {
            assert!(
                (fit.loadings[k].abs() - want[k]).abs() < 1e-3,
                "{:?} vs {want:?}",
                fit.loadings
            );
            assert!((fit.uniquenesses[k] - (1.0 - want[k] * want[k])).abs() < 1e-3);
        }
    }

    #[test]
    fn perfectly_correlated_pair_is_symmetric() {
        let r = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let fit = fit_one_factor(&r).unwrap();
        assert!((fit.loadings[0].abs() - fit.loadings[1].abs()).abs() < 1e-12);
        assert!(fit.heywood.iter().all(|h| *h));
    }

    #[test]
    fn log_likelihood_is_maximal_at_fit() {
        let r = vec![
            vec![1.0, 0.6, 0.5, 0.4],
            vec![0.6, 1.0, 0.45, 0.35],
            vec![0.5, 0.45, 1.0, 0.3],
            vec![0.4, 0.35, 0.3, 1.0],
        ];
        let fit = fit_one_factor(&r).unwrap();
        for k in 0..4 {
            for eps in [-0.01, 0.01] {
                let mut l = fit.loadings.clone();
                l[k] += eps;
                assert!(log_likelihood(&r, &l, &fit.uniquenesses) <= fit.log_likelihood + 1e-9);
            }
        }
    }
}
