//! Classification of missing cells by the imputation rule that will fill them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PanelTensor, Stage, Suppression, Suppressions, Year};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapClass {
    /// Present values on both sides in time: linear interpolation.
    InteriorGap,
    /// Present values on one side only: nearest value carried.
    EdgeGap,
    /// No present value in any year: regional mean of peers.
    AllYearsMissing,
    /// Suppressed for a small numerator: indicator minimum.
    SuppressedNumerator,
    /// Suppressed for a small denominator: indicator median.
    SuppressedDenominator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub unit: String,
    pub year: Year,
    pub class: GapClass,
}

/// Missing cells per indicator, in (unit, year) order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingnessReport {
    pub indicators: BTreeMap<String, Vec<Gap>>,
}

impl MissingnessReport {
    pub fn total(&self) -> usize {
        self.indicators.values().map(Vec::len).sum()
    }

    pub fn count(&self, class: GapClass) -> usize {
        self.indicators.values().flatten().filter(|g| g.class == class).count()
    }
}

/// Assigns each missing cell of a raw tensor to exactly one class.
///
/// Suppression flags take precedence over the temporal position of the gap.
/// Only cells that are present (not suppressed) count as temporal anchors.
pub fn classify_missing(tensor: &PanelTensor, suppressions: &Suppressions) -> Result<MissingnessReport> {
    if tensor.stage() != Stage::Raw {
        return Err(Error::Precondition(format!(
            "classify_missing expects a raw tensor, got {:?}",
            tensor.stage()
        )));
    }
    let years = tensor.years();
    let mut report = MissingnessReport::default();
    for (i, ind) in tensor.indicators().iter().enumerate() {
        let mut gaps = Vec::new();
        for (c, unit) in tensor.units().iter().enumerate() {
            let present: Vec<bool> = (0..tensor.n_years()).map(|t| tensor.get(c, i, t).is_some()).collect();
            for t in 0..tensor.n_years() {
                if present[t] {
                    continue;
                }
                let class = match suppressions.get(c, i, t) {
                    Some(Suppression::Numerator) => GapClass::SuppressedNumerator,
                    Some(Suppression::Denominator) => GapClass::SuppressedDenominator,
                    None => {
                        let before = present[..t].iter().any(|&p| p);
                        let after = present[t + 1..].iter().any(|&p| p);
                        match (before, after) {
                            (true, true) => GapClass::InteriorGap,
                            (true, false) | (false, true) => GapClass::EdgeGap,
                            (false, false) => GapClass::AllYearsMissing,
                        }
                    }
                };
                gaps.push(Gap {
                    unit: unit.clone(),
                    year: years[t],
                    class,
                });
            }
        }
        if !gaps.is_empty() {
            report.indicators.insert(ind.clone(), gaps);
        }
    }
    debug_assert_eq!(report.total(), tensor.missing_count());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[Option<f64>]) -> PanelTensor {
        let years: Vec<Year> = (0..values.len() as Year).map(|t| 2015 + t).collect();
        let mut t = PanelTensor::empty(vec!["A".into()], vec!["x".into()], &years).unwrap();
        for (k, v) in values.iter().enumerate() {
            t.set(0, 0, k, *v);
        }
        t
    }

    fn classes(t: &PanelTensor, s: &Suppressions) -> Vec<GapClass> {
        classify_missing(t, s).unwrap().indicators["x"]
            .iter()
            .map(|g| g.class)
            .collect()
    }

    #[test]
    fn interior_gap() {
        let t = series(&[Some(1.0), None, Some(3.0), Some(4.0)]);
        assert_eq!(classes(&t, &Suppressions::default()), vec![GapClass::InteriorGap]);
    }

    #[test]
    fn edge_gap() {
        let t = series(&[None, Some(2.0), Some(3.0), Some(4.0)]);
        assert_eq!(classes(&t, &Suppressions::default()), vec![GapClass::EdgeGap]);
    }

    #[test]
    fn all_years_missing() {
        let t = series(&[None; 4]);
        assert_eq!(
            classes(&t, &Suppressions::default()),
            vec![GapClass::AllYearsMissing; 4]
        );
    }

    #[test]
    fn suppression_wins_over_position() {
        let t = series(&[Some(1.0), None, None, Some(4.0)]);
        let mut s = Suppressions::default();
        s.insert(0, 0, 1, Suppression::Numerator);
        s.insert(0, 0, 2, Suppression::Denominator);
        assert_eq!(
            classes(&t, &s),
            vec![GapClass::SuppressedNumerator, GapClass::SuppressedDenominator]
        );
    }

    #[test]
    fn suppressed_cells_are_not_anchors() {
        let t = series(&[None, None, Some(3.0), None]);
        let mut s = Suppressions::default();
        s.insert(0, 0, 0, Suppression::Numerator);
        assert_eq!(
            classes(&t, &s),
            vec![GapClass::SuppressedNumerator, GapClass::EdgeGap, GapClass::EdgeGap]
        );
    }

    #[test]
    fn rejects_non_raw() {
        let t = series(&[Some(1.0)]).with_stage(Stage::Imputed).unwrap();
        assert!(classify_missing(&t, &Suppressions::default()).is_err());
    }
}
