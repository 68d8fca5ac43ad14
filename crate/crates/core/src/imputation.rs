//! Fills the missing cells of a raw panel.
//!
//! Every rule reads only originally present values, so the order in which
//! gaps are filled never changes the result:
//!
//! 1. interior gap → linear interpolation in the year coordinate between
//!    the nearest present neighbours;
//! 2. edge gap → nearest present value in the unit's series;
//! 3. all years missing → per-year mean over the other units of the region;
//! 4. suppressed numerator → lowest present value of the indicator;
//! 5. suppressed denominator → median present value of the indicator.

use crate::error::{Error, Result};
use crate::missing::{GapClass, MissingnessReport};
use crate::model::{Hierarchy, PanelTensor, Stage};
use crate::stats;

fn interpolate(series: &[Option<f64>], t: usize) -> Option<f64> {
    let lo = (0..t).rev().find(|&k| series[k].is_some())?;
    let hi = (t + 1..series.len()).find(|&k| series[k].is_some())?;
    let (a, b) = (series[lo].unwrap(), series[hi].unwrap());
    let w = (t - lo) as f64 / (hi - lo) as f64;
    Some(a + (b - a) * w)
}

fn nearest(series: &[Option<f64>], t: usize) -> Option<f64> {
    let before = (0..t).rev().find(|&k| series[k].is_some());
    let after = (t + 1..series.len()).find(|&k| series[k].is_some());
    let k = match (before, after) {
        (Some(b), Some(a)) => {
            if t - b <= a - t {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => return None,
    };
    series[k]
}

/// Applies the five imputation rules to a raw tensor.
pub fn impute(tensor: &PanelTensor, hierarchy: &Hierarchy, report: &MissingnessReport) -> Result<PanelTensor> {
    if tensor.stage() != Stage::Raw {
        return Err(Error::Precondition(format!(
            "impute expects a raw tensor, got {:?}",
            tensor.stage()
        )));
    }
    if report.total() != tensor.missing_count() {
        return Err(Error::Precondition(format!(
            "report lists {} gaps but the tensor has {} missing cells",
            report.total(),
            tensor.missing_count()
        )));
    }

    let mut out = tensor.clone();
    for (ind, gaps) in &report.indicators {
        let i = tensor
            .indicator_index(ind)
            .ok_or_else(|| Error::UnknownIndicator(ind.clone()))?;
        let present = tensor.present_values(i);
        let lowest = present.iter().copied().reduce(f64::min);
        let median = (!present.is_empty()).then(|| stats::median(&present));

        for gap in gaps {
            let c = tensor
                .unit_index(&gap.unit)
                .ok_or_else(|| Error::Precondition(format!("unknown unit `{}` in report", gap.unit)))?;
            let t = tensor
                .year_index(gap.year)
                .ok_or_else(|| Error::Precondition(format!("unknown year {} in report", gap.year)))?;
            if tensor.get(c, i, t).is_some() {
                return Err(Error::Precondition(format!(
                    "report gap ({}, {ind}, {}) is present in the tensor",
                    gap.unit, gap.year
                )));
            }
            let series: Vec<Option<f64>> = (0..tensor.n_years()).map(|k| tensor.get(c, i, k)).collect();
            let value = match gap.class {
                GapClass::InteriorGap => interpolate(&series, t),
                GapClass::EdgeGap => nearest(&series, t),
                GapClass::AllYearsMissing => {
                    let r = hierarchy
                        .region_of(&gap.unit)
                        .ok_or_else(|| Error::Hierarchy(format!("unit `{}` has no region", gap.unit)))?;
                    let region = &hierarchy.regions()[r];
                    let donors: Vec<f64> = region
                        .units
                        .iter()
                        .filter(|u| **u != gap.unit)
                        .filter_map(|u| tensor.unit_index(u))
                        .filter_map(|d| tensor.get(d, i, t))
                        .collect();
                    if donors.is_empty() {
                        return Err(Error::UnrecoverableGap {
                            indicator: ind.clone(),
                            region: region.name.clone(),
                        });
                    }
                    Some(donors.iter().sum::<f64>() / donors.len() as f64)
                }
                GapClass::SuppressedNumerator => lowest,
                GapClass::SuppressedDenominator => median,
            };
            let value = value.ok_or_else(|| {
                Error::Precondition(format!(
                    "gap ({}, {ind}, {}) classified {:?} has no anchor values",
                    gap.unit, gap.year, gap.class
                ))
            })?;
            out.set(c, i, t, Some(value));
        }
    }
    out.with_stage(Stage::Imputed)
}

/// Copies the only observed year of an indicator to every year.
pub fn propagate_single_year(tensor: &PanelTensor, indicator: &str) -> Result<PanelTensor> {
    let i = tensor
        .indicator_index(indicator)
        .ok_or_else(|| Error::UnknownIndicator(indicator.to_string()))?;
    let full: Vec<usize> = (0..tensor.n_years())
        .filter(|&t| (0..tensor.n_units()).all(|c| tensor.get(c, i, t).is_some()))
        .collect();
    let empty = (0..tensor.n_years())
        .filter(|&t| (0..tensor.n_units()).all(|c| tensor.get(c, i, t).is_none()))
        .count();
    if full.len() != 1 || full.len() + empty != tensor.n_years() {
        return Err(Error::Precondition(format!(
            "`{indicator}` must have exactly one fully present year and no other data \
             ({} full years); use impute instead",
            full.len()
        )));
    }
    let src = full[0];
    let mut out = tensor.clone();
    for c in 0..tensor.n_units() {
        let v = tensor.get(c, i, src);
        for t in 0..tensor.n_years() {
            out.set(c, i, t, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::missing::classify_missing;
    use crate::model::{HierarchyConfig, Suppression, Suppressions};

    fn hierarchy(units: &[&str]) -> Hierarchy {
        let cfg: HierarchyConfig = serde_json::from_value(serde_json::json!({
            "domains": {"d": {"subdomains": {"s": {"indicators": [{"id": "x", "polarity": 0}]}}}},
            "regions": {"r": units},
        }))
        .unwrap();
        Hierarchy::from_config(&cfg).unwrap()
    }

    fn tensor(units: &[&str], rows: &[&[Option<f64>]]) -> PanelTensor {
        let years: Vec<i32> = (0..rows[0].len() as i32).map(|t| 2015 + t).collect();
        let mut t =
            PanelTensor::empty(units.iter().map(|s| s.to_string()).collect(), vec!["x".into()], &years).unwrap();
        for (c, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                t.set(c, 0, k, *v);
            }
        }
        t
    }

    fn run(t: &PanelTensor, h: &Hierarchy, s: &Suppressions) -> Result<PanelTensor> {
        impute(t, h, &classify_missing(t, s)?)
    }

    #[test]
    fn interpolation_then_edge_carry() {
        let t = tensor(&["A"], &[&[Some(10.0), None, Some(14.0), None]]);
        let out = run(&t, &hierarchy(&["A"]), &Suppressions::default()).unwrap();
        let got: Vec<f64> = (0..4).map(|k| out.value(0, 0, k)).collect();
        assert_eq!(got, vec![10.0, 12.0, 14.0, 14.0]);
    }

    #[test]
    fn interpolation_across_wide_gap() {
        let t = tensor(&["A"], &[&[Some(0.0), None, None, Some(3.0)]]);
        let out = run(&t, &hierarchy(&["A"]), &Suppressions::default()).unwrap();
        assert_eq!(out.value(0, 0, 1), 1.0);
        assert_eq!(out.value(0, 0, 2), 2.0);
    }

    #[test]
    fn regional_mean_for_all_years_missing() {
        let t = tensor(
            &["A", "B", "C"],
            &[&[None, None], &[Some(2.0), Some(2.0)], &[Some(4.0), Some(4.0)]],
        );
        let out = run(&t, &hierarchy(&["A", "B", "C"]), &Suppressions::default()).unwrap();
        assert_eq!(out.value(0, 0, 0), 3.0);
        assert_eq!(out.value(0, 0, 1), 3.0);
    }

    #[test]
    fn region_without_donors_is_unrecoverable() {
        let t = tensor(&["A", "B"], &[&[None, None], &[None, None]]);
        let err = run(&t, &hierarchy(&["A", "B"]), &Suppressions::default()).unwrap_err();
        assert!(matches!(err, Error::UnrecoverableGap { ref indicator, ref region }
            if indicator == "x" && region == "r"));
    }

    #[test]
    fn suppressed_numerator_takes_lowest() {
        let t = tensor(
            &["A", "B", "C", "D"],
            &[&[Some(5.0)], &[Some(7.0)], &[Some(9.0)], &[None]],
        );
        let mut s = Suppressions::default();
        s.insert(3, 0, 0, Suppression::Numerator);
        let out = run(&t, &hierarchy(&["A", "B", "C", "D"]), &s).unwrap();
        assert_eq!(out.value(3, 0, 0), 5.0);
    }

    #[test]
    fn suppressed_denominator_takes_median() {
        let t = tensor(
            &["A", "B", "C", "D"],
            &[&[Some(5.0)], &[Some(7.0)], &[Some(100.0)], &[None]],
        );
        let mut s = Suppressions::default();
        s.insert(3, 0, 0, Suppression::Denominator);
        let out = run(&t, &hierarchy(&["A", "B", "C", "D"]), &s).unwrap();
        assert_eq!(out.value(3, 0, 0), 7.0);
    }

    #[test]
    fn single_year_propagation() {
        let t = tensor(
            &["A", "B"],
            &[&[None, None, None, Some(1.0)], &[None, None, None, Some(2.0)]],
        );
        let out = propagate_single_year(&t, "x").unwrap();
        for k in 0..4 {
            assert_eq!(out.get(0, 0, k), Some(1.0));
            assert_eq!(out.get(1, 0, k), Some(2.0));
        }
        let t = tensor(
            &["A", "B"],
            &[&[None, Some(3.0), None, None], &[None, Some(4.0), None, None]],
        );
        let out = propagate_single_year(&t, "x").unwrap();
        assert_eq!(out.get(1, 0, 3), Some(4.0));
    }

    #[test]
    fn single_year_propagation_rejects_two_years() {
        let t = tensor(&["A"], &[&[None, Some(1.0), None, Some(2.0)]]);
        assert!(matches!(propagate_single_year(&t, "x"), Err(Error::Precondition(_))));
    }

    #[test]
    fn present_cells_untouched_and_idempotent() {
        let t = tensor(
            &["A", "B", "C"],
            &[
                &[Some(1.5), None, Some(2.5), None],
                &[None, None, None, None],
                &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
            ],
        );
        let h = hierarchy(&["A", "B", "C"]);
        let once = run(&t, &h, &Suppressions::default()).unwrap();
        for c in 0..3 {
            for k in 0..4 {
                if let Some(v) = t.get(c, 0, k) {
                    assert_eq!(once.value(c, 0, k).to_bits(), v.to_bits());
                }
            }
        }
        let raw_again = once.clone().with_stage(Stage::Raw).unwrap();
        let twice = run(&raw_again, &h, &Suppressions::default()).unwrap();
        assert_eq!(twice, once);
    }
}
