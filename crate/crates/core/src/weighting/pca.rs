use std::collections::BTreeMap;

use log::info;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::fa::{correlation_or_degenerate, subdomain_columns};
use super::{equal_weights, Provenance, WeightSystem};
use crate::error::{Error, Result};
use crate::model::{Hierarchy, PanelTensor, Stage, Year};

/// Subdomains whose first component explains less than this are flagged.
pub const PCA_VARIANCE_THRESHOLD: f64 = 0.70;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceExplained {
    pub fraction: f64,
    pub below_threshold: bool,
}

/// First eigenpair of a correlation matrix: (|eigenvector|, λ₁/p).
fn first_component(r: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let p = r.len();
    let eig = SymmetricEigen::new(DMatrix::from_fn(p, p, |a, b| r[a][b]));
    let top = eig.eigenvalues.imax();
    let v: Vec<f64> = (0..p).map(|i| eig.eigenvectors[(i, top)].abs()).collect();
    let trace: f64 = eig.eigenvalues.iter().sum();
    (v, eig.eigenvalues[top] / trace)
}

/// Indicator weights from the first principal component of each
/// subdomain's correlation matrix in `year`.
pub fn pca_weights(
    z: &PanelTensor,
    h: &Hierarchy,
    year: Year,
) -> Result<(WeightSystem, BTreeMap<String, VarianceExplained>)> {
    if z.stage() != Stage::Normalized {
        return Err(Error::Precondition(format!(
            "weights need a normalized tensor, got {:?}",
            z.stage()
        )));
    }
    let t = z
        .year_index(year)
        .ok_or_else(|| Error::Precondition(format!("year {year} is not in the panel")))?;
    let mut w = equal_weights(h);
    w.provenance = Provenance::Pca;
    let mut explained = BTreeMap::new();
    for (s, node) in h.subdomains().iter().enumerate() {
        let cols = subdomain_columns(z, h, s, Some(t))?;
        let r = correlation_or_degenerate(&cols, &node.name)?;
        let (v, fraction) = if r.len() == 1 {
            (vec![1.0], 1.0)
        } else {
            first_component(&r)
        };
        for (k, &i) in node.indicators.iter().enumerate() {
            if v[k] <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "indicator `{}` has a zero first-component loading",
                    h.indicators()[i].id
                )));
            }
            w.indicator[i] = v[k];
        }
        let below = fraction < PCA_VARIANCE_THRESHOLD;
        if below {
            info!(
                "first component explains {:.1}% of subdomain `{}` in {year}",
                100.0 * fraction,
                node.name
            );
        }
        explained.insert(
            node.name.clone(),
            VarianceExplained {
                fraction,
                below_threshold: below,
            },
        );
    }
    Ok((w, explained))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_components() {
        for rho in [0.1, 0.5, 0.99, 1.0] {
            let (v, f) = first_component(&[vec![1.0, rho], vec![rho, 1.0]]);
            assert!((v[0] / (v[0] + v[1]) - 0.5).abs() < 1e-12);
            assert!((f - (1.0 + rho) / 2.0).abs() < 1e-12);
        }
        let (_, f) = first_component(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((f - 0.5).abs() < 1e-12);
    }
}
