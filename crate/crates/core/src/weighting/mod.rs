//! Weight systems for the three aggregation levels.
//!
//! Raw weights are stored per node. The normalisation constants
//! `α_s = 1/Σ_{i∈s} w_i`, `α_d = 1/Σ_{s∈d} w_s` and `α = 1/Σ_d w_d` turn
//! every aggregation into a weighted average.

mod fa;
mod nelder_mead;
mod optimize;
mod pca;
mod sensitivity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Hierarchy;

pub use fa::{
    fa_weights, fit_one_factor, FaDiagnostics, OneFactorFit, FA_MAX_ITERATIONS, FA_TOLERANCE, HEYWOOD_UNIQUENESS,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use optimize::{normalized_ratios, optimize_weights, OptimizeOptions, OptimizedWeights};
pub use pca::{pca_weights, VarianceExplained, PCA_VARIANCE_THRESHOLD};
pub use sensitivity::{
    cv_bandwidth, decompose_s, estimate_s, nadaraya_watson_fit, Estimator, SensitivityRatio, MIN_SAMPLE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Equal,
    Fa,
    Pca,
    Optimized,
    User,
}

/// Raw weights aligned with the hierarchy's indicator, subdomain and
/// domain indices.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    pub indicator: Vec<f64>,
    pub subdomain: Vec<f64>,
    pub domain: Vec<f64>,
    pub provenance: Provenance,
}

impl WeightSystem {
    pub fn validate(&self, h: &Hierarchy) -> Result<()> {
        let check = |what: &str, w: &[f64], n: usize| -> Result<()> {
            if w.len() != n {
                return Err(Error::Precondition(format!(
                    "{what} weights cover {} nodes, hierarchy has {n}",
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::Precondition(format!("{what} weight {bad} is not positive")));
            }
            Ok(())
        };
        check("indicator", &self.indicator, h.indicators().len())?;
        check("subdomain", &self.subdomain, h.subdomains().len())?;
        check("domain", &self.domain, h.domains().len())
    }

    pub fn alpha_subdomain(&self, h: &Hierarchy, s: usize) -> f64 {
        1.0 / h.subdomains()[s]
            .indicators
            .iter()
            .map(|&i| self.indicator[i])
            .sum::<f64>()
    }

    pub fn alpha_domain(&self, h: &Hierarchy, d: usize) -> f64 {
        1.0 / h.domains()[d]
            .subdomains
            .iter()
            .map(|&s| self.subdomain[s])
            .sum::<f64>()
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.domain.iter().sum::<f64>()
    }

    /// α_s·w_i for each indicator.
    pub fn effective_indicator(&self, h: &Hierarchy) -> Vec<f64> {
        h.indicators()
            .iter()
            .enumerate()
            .map(|(i, node)| self.indicator[i] * self.alpha_subdomain(h, node.subdomain))
            .collect()
    }

    pub fn effective_subdomain(&self, h: &Hierarchy) -> Vec<f64> {
        h.subdomains()
            .iter()
            .enumerate()
            .map(|(s, node)| self.subdomain[s] * self.alpha_domain(h, node.domain))
            .collect()
    }

    pub fn effective_domain(&self) -> Vec<f64> {
        let a = self.alpha();
        self.domain.iter().map(|w| w * a).collect()
    }

    /// Replaces the domain weights, keeping the lower levels.
    pub fn with_domain_weights(mut self, domain: Vec<f64>, provenance: Provenance) -> Self {
        self.domain = domain;
        self.provenance = provenance;
        self
    }
}

/// `w_i = w_s = w_d = 1`.
pub fn equal_weights(h: &Hierarchy) -> WeightSystem {
    WeightSystem {
        indicator: vec![1.0; h.indicators().len()],
        subdomain: vec![1.0; h.subdomains().len()],
        domain: vec![1.0; h.domains().len()],
        provenance: Provenance::Equal,
    }
}

/// α-normalized weights of one subdomain from raw loadings.
pub fn normalize_loadings(loadings: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = loadings.iter().map(|l| l.abs()).collect();
    let total: f64 = abs.iter().sum();
    abs.iter().map(|l| l / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeWeight {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub estimator: Estimator,
    pub targets: Vec<f64>,
    pub achieved: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub improved: bool,
}

/// The `weights.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsDocument {
    pub provenance: Provenance,
    pub indicators: Vec<NodeWeight>,
    pub subdomains: Vec<NodeWeight>,
    pub domains: Vec<NodeWeight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_explained: Option<BTreeMap<String, VarianceExplained>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_analysis: Option<BTreeMap<String, FaDiagnostics>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationSummary>,
}

impl WeightsDocument {
    pub fn new(w: &WeightSystem, h: &Hierarchy) -> Self {
        let ei = w.effective_indicator(h);
        let es = w.effective_subdomain(h);
        let ed = w.effective_domain();
        Self {
            provenance: w.provenance,
            indicators: h
                .indicators()
                .iter()
                .enumerate()
                .map(|(i, n)| NodeWeight {
                    name: n.id.clone(),
                    parent: Some(h.subdomains()[n.subdomain].name.clone()),
                    raw: w.indicator[i],
                    normalized: ei[i],
                })
                .collect(),
            subdomains: h
                .subdomains()
                .iter()
                .enumerate()
                .map(|(s, n)| NodeWeight {
                    name: n.name.clone(),
                    parent: Some(h.domains()[n.domain].name.clone()),
                    raw: w.subdomain[s],
                    normalized: es[s],
                })
                .collect(),
            domains: h
                .domains()
                .iter()
                .enumerate()
                .map(|(d, n)| NodeWeight {
                    name: n.name.clone(),
                    parent: None,
                    raw: w.domain[d],
                    normalized: ed[d],
                })
                .collect(),
            variance_explained: None,
            factor_analysis: None,
            optimization: None,
        }
    }

    /// Rebuilds the raw weight system, matching nodes by name.
    pub fn to_weight_system(&self, h: &Hierarchy) -> Result<WeightSystem> {
        fn lookup(nodes: &[NodeWeight], names: Vec<&str>, what: &str) -> Result<Vec<f64>> {
            let map: BTreeMap<&str, f64> = nodes.iter().map(|n| (n.name.as_str(), n.raw)).collect();
            names
                .into_iter()
                .map(|n| {
                    map.get(n)
                        .copied()
                        .ok_or_else(|| Error::Precondition(format!("missing weight for {what} `{n}`")))
                })
                .collect()
        }
        let w = WeightSystem {
            indicator: lookup(
                &self.indicators,
                h.indicators().iter().map(|i| i.id.as_str()).collect(),
                "indicator",
            )?,
            subdomain: lookup(
                &self.subdomains,
                h.subdomains().iter().map(|s| s.name.as_str()).collect(),
                "subdomain",
            )?,
            domain: lookup(
                &self.domains,
                h.domains().iter().map(|d| d.name.as_str()).collect(),
                "domain",
            )?,
            provenance: self.provenance,
        };
        w.validate(h)?;
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HierarchyConfig;

    pub(crate) fn three_domains() -> Hierarchy {
        let cfg: HierarchyConfig = serde_json::from_value(serde_json::json!({
            "domains": {
                "lives": {"subdomains": {
                    "l1": {"indicators": [{"id": "a", "polarity": 0}, {"id": "b", "polarity": 0}]},
                    "l2": {"indicators": [{"id": "c", "polarity": 1}]}}},
                "people": {"subdomains": {"p1": {"indicators": [{"id": "d", "polarity": 0}]}}},
                "places": {"subdomains": {"q1": {"indicators": [{"id": "e", "polarity": 0}, {"id": "f", "polarity": 0}, {"id": "g", "polarity": 0}]}}}
            },
            "regions": {"r": ["u"]},
        }))
        .unwrap();
        Hierarchy::from_config(&cfg).unwrap()
    }

    #[test]
    fn equal_weight_constants() {
        let h = three_domains();
        let w = equal_weights(&h);
        assert!((w.alpha() - 1.0 / 3.0).abs() < 1e-15);
        let l = h.domain_index("lives").unwrap();
        assert_eq!(w.alpha_domain(&h, l), 0.5);
        let ei = w.effective_indicator(&h);
        assert_eq!(ei[h.indicator_index("a").unwrap()], 0.5);
        assert_eq!(ei[h.indicator_index("c").unwrap()], 1.0);
    }

    #[test]
    fn effective_weights_sum_to_one_per_level() {
        let h = three_domains();
        let w = WeightSystem {
            indicator: vec![0.3, 1.7, 2.0, 0.1, 0.4, 0.4, 9.0],
            subdomain: vec![1.0, 3.0, 0.5, 2.0],
            domain: vec![0.2, 0.7, 1.1],
            provenance: Provenance::User,
        };
        w.validate(&h).unwrap();
        let ei = w.effective_indicator(&h);
        for s in h.subdomains() {
            let sum: f64 = s.indicators.iter().map(|&i| ei[i]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let es = w.effective_subdomain(&h);
        for d in h.domains() {
            let sum: f64 = d.subdomains.iter().map(|&s| es[s]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert!((w.effective_domain().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loadings_example() {
        assert_eq!(normalize_loadings(&[0.5, 0.75]), vec![0.4, 0.6]);
        assert_eq!(normalize_loadings(&[-0.5, 0.75]), vec![0.4, 0.6]);
    }

    #[test]
    fn document_round_trip() {
        let h = three_domains();
        let mut w = equal_weights(&h);
        w.indicator[0] = 0.25;
        let doc = WeightsDocument::new(&w, &h);
        let json = serde_json::to_string(&doc).unwrap();
        let back: WeightsDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_weight_system(&h).unwrap(), w);
    }

    #[test]
    fn invalid_weights_rejected() {
        let h = three_domains();
        let mut w = equal_weights(&h);
        w.domain[1] = 0.0;
        assert!(w.validate(&h).is_err());
        let mut w = equal_weights(&h);
        w.subdomain.pop();
        assert!(w.validate(&h).is_err());
    }
}
