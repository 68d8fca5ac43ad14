//! Health-directed normalization anchored at a baseline year.
//!
//! The z-score variant uses population-weighted baseline moments
//! `μ_i = Σ_c w_c y_ci` and `σ_i² = C/(C−1) · Σ_c w_c (y_ci − μ_i)²`, with
//! `z = (−1)^δ (y − μ)/σ`. The min–max variant maps the baseline range to
//! `[lower, upper]` and reflects reversed indicators within the bounds.
//! Both reuse the baseline parameters for every other year.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hierarchy, PanelTensor, Polarity, PopulationWeights, Stage, Year};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMethod {
    #[serde(rename = "zscore")]
    WeightedZScore,
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scale {
    #[serde(rename = "zscore")]
    ZScore {
        mean: f64,
        sd: f64,
    },
    MinMax {
        min: f64,
        max: f64,
        lower: f64,
        upper: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorParams {
    pub indicator: String,
    pub polarity: Polarity,
    pub scale: Scale,
}

impl IndicatorParams {
    pub fn apply(&self, y: f64) -> f64 {
        match self.scale {
            Scale::ZScore { mean, sd } => self.polarity.sign() * (y - mean) / sd,
            Scale::MinMax { min, max, lower, upper } => {
                let v = lower + (y - min) * (upper - lower) / (max - min);
                match self.polarity {
                    Polarity::Positive => v,
                    Polarity::Reversed => lower + upper - v,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub method: NormalizationMethod,
    pub baseline_year: Year,
    /// In tensor indicator order.
    pub indicators: Vec<IndicatorParams>,
}

fn baseline_index(tensor: &PanelTensor, baseline: Year) -> Result<usize> {
    tensor
        .year_index(baseline)
        .ok_or_else(|| Error::Config(format!("baseline year {baseline} is not in the data")))
}

fn polarity_of(hierarchy: &Hierarchy, id: &str) -> Result<Polarity> {
    let i = hierarchy
        .indicator_index(id)
        .ok_or_else(|| Error::UnknownIndicator(id.to_string()))?;
    Ok(hierarchy.indicators()[i].polarity)
}

fn check_complete(tensor: &PanelTensor) -> Result<()> {
    if tensor.is_complete() {
        Ok(())
    } else {
        Err(Error::Precondition("normalization needs a complete tensor".into()))
    }
}

/// Fits population-weighted z-score parameters on the baseline year.
pub fn fit_normalization(
    tensor: &PanelTensor,
    weights: &PopulationWeights,
    hierarchy: &Hierarchy,
    baseline: Year,
) -> Result<NormalizationParams> {
    check_complete(tensor)?;
    let t = baseline_index(tensor, baseline)?;
    let w: Vec<f64> = weights
        .aligned(tensor.units(), &[baseline])?
        .into_iter()
        .map(|row| row[0])
        .collect();
    let n = tensor.n_units() as f64;
    if tensor.n_units() < 2 {
        return Err(Error::Precondition("z-scores need at least two units".into()));
    }
    let indicators = tensor
        .indicators()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let y = tensor.cross_section(i, t);
            let (lo, hi) = y
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if lo == hi {
                return Err(Error::Degenerate(id.clone()));
            }
            let mean: f64 = w.iter().zip(&y).map(|(w, y)| w * y).sum();
            let ss: f64 = w.iter().zip(&y).map(|(w, y)| w * (y - mean) * (y - mean)).sum();
            let sd = (n / (n - 1.0) * ss).sqrt();
            if sd <= 0.0 || !sd.is_finite() {
                return Err(Error::Degenerate(id.clone()));
            }
            Ok(IndicatorParams {
                indicator: id.clone(),
                polarity: polarity_of(hierarchy, id)?,
                scale: Scale::ZScore { mean, sd },
            })
        })
        .collect::<Result<_>>()?;
    Ok(NormalizationParams {
        method: NormalizationMethod::WeightedZScore,
        baseline_year: baseline,
        indicators,
    })
}

/// Fits the affine min–max map on the baseline year.
pub fn fit_minmax(
    tensor: &PanelTensor,
    hierarchy: &Hierarchy,
    bounds: (f64, f64),
    baseline: Year,
) -> Result<NormalizationParams> {
    check_complete(tensor)?;
    let t = baseline_index(tensor, baseline)?;
    if !(bounds.0 < bounds.1) {
        return Err(Error::Config(format!("invalid min-max bounds {bounds:?}")));
    }
    let indicators = tensor
        .indicators()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let y = tensor.cross_section(i, t);
            let (min, max) = y
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if min == max {
                return Err(Error::Degenerate(id.clone()));
            }
            Ok(IndicatorParams {
                indicator: id.clone(),
                polarity: polarity_of(hierarchy, id)?,
                scale: Scale::MinMax {
                    min,
                    max,
                    lower: bounds.0,
                    upper: bounds.1,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(NormalizationParams {
        method: NormalizationMethod::MinMax,
        baseline_year: baseline,
        indicators,
    })
}

/// Applies fitted parameters to every year.
pub fn normalize(tensor: &PanelTensor, params: &NormalizationParams) -> Result<PanelTensor> {
    check_complete(tensor)?;
    if params.indicators.len() != tensor.n_indicators()
        || params
            .indicators
            .iter()
            .zip(tensor.indicators())
            .any(|(p, id)| &p.indicator != id)
    {
        return Err(Error::Precondition(
            "normalization parameters were fitted on a different indicator set".into(),
        ));
    }
    let mut out = tensor.clone();
    for (i, p) in params.indicators.iter().enumerate() {
        out.map_indicator(i, |_, _, y| p.apply(y));
    }
    out.with_stage(Stage::Normalized)
}

pub fn normalize_minmax(
    tensor: &PanelTensor,
    hierarchy: &Hierarchy,
    bounds: (f64, f64),
    baseline: Year,
) -> Result<(PanelTensor, NormalizationParams)> {
    let params = fit_minmax(tensor, hierarchy, bounds, baseline)?;
    Ok((normalize(tensor, &params)?, params))
}

/// Default min–max target range.
pub const MINMAX_BOUNDS: (f64, f64) = (1.0, 100.0);

/// Fits `method` on the baseline year (min–max uses [`MINMAX_BOUNDS`]).
pub fn fit_method(
    tensor: &PanelTensor,
    weights: &PopulationWeights,
    hierarchy: &Hierarchy,
    method: NormalizationMethod,
    baseline: Year,
) -> Result<NormalizationParams> {
    match method {
        NormalizationMethod::WeightedZScore => fit_normalization(tensor, weights, hierarchy, baseline),
        NormalizationMethod::MinMax => fit_minmax(tensor, hierarchy, MINMAX_BOUNDS, baseline),
    }
}

/// Presentation scale `h = 100 + 10z`.
pub fn to_index_scale(z: f64) -> f64 {
    100.0 + 10.0 * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HierarchyConfig;

    fn setup(values: &[f64], weights: &[f64], polarity: u8) -> (PanelTensor, PopulationWeights, Hierarchy) {
        let units: Vec<String> = (0..values.len()).map(|c| format!("u{c}")).collect();
        let mut t = PanelTensor::empty(units.clone(), vec!["x".into()], &[2015]).unwrap();
        for (c, v) in values.iter().enumerate() {
            t.set(c, 0, 0, Some(*v));
        }
        let pop =
            PopulationWeights::from_entries(units.iter().zip(weights).map(|(u, w)| (u.clone(), 2015, *w))).unwrap();
        let cfg: HierarchyConfig = serde_json::from_value(serde_json::json!({
            "domains": {"d": {"subdomains": {"s": {"indicators": [{"id": "x", "polarity": polarity}]}}}},
            "regions": {"r": units},
        }))
        .unwrap();
        (
            t.with_stage(Stage::Treated).unwrap(),
            pop,
            Hierarchy::from_config(&cfg).unwrap(),
        )
    }

    fn zparams(p: &NormalizationParams) -> (f64, f64) {
        match p.indicators[0].scale {
            Scale::ZScore { mean, sd } => (mean, sd),
            _ => unreachable!(),
        }
    }

    #[test]
    fn two_unit_hand_computation() {
        let (t, w, h) = setup(&[1.0, 3.0], &[0.5, 0.5], 0);
        let (mu, sd) = zparams(&fit_normalization(&t, &w, &h, 2015).unwrap());
        assert_eq!(mu, 2.0);
        assert!((sd * sd - 2.0).abs() < 1e-12);
    }

    #[test]
    fn three_unit_weighted_moments() {
        let (t, w, h) = setup(&[0.0, 10.0, 20.0], &[0.2, 0.3, 0.5], 0);
        let (mu, sd) = zparams(&fit_normalization(&t, &w, &h, 2015).unwrap());
        let want_var = 1.5 * (0.2 * 169.0 + 0.3 * 9.0 + 0.5 * 49.0);
        assert!((mu - 13.0).abs() < 1e-12);
        assert!((sd * sd - want_var).abs() < 1e-9);
        assert!((want_var - 91.5).abs() < 1e-12);
    }

    #[test]
    fn constant_baseline_is_degenerate() {
        let (t, w, h) = setup(&[4.0, 4.0, 4.0], &[0.2, 0.3, 0.5], 0);
        assert!(matches!(fit_normalization(&t, &w, &h, 2015), Err(Error::Degenerate(_))));
        assert!(matches!(
            fit_minmax(&t, &h, (1.0, 100.0), 2015),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn centering_and_polarity() {
        let p = IndicatorParams {
            indicator: "x".into(),
            polarity: Polarity::Reversed,
            scale: Scale::ZScore { mean: 5.0, sd: 2.0 },
        };
        assert_eq!(p.apply(5.0), 0.0);
        assert_eq!(p.apply(7.0), -1.0);
    }

    #[test]
    fn index_scale() {
        assert_eq!(to_index_scale(0.0), 100.0);
        assert_eq!(to_index_scale(1.0), 110.0);
        assert_eq!(to_index_scale(-2.5), 75.0);
    }

    #[test]
    fn minmax_endpoints_and_reflection() {
        let (t, _, h) = setup(&[0.0, 50.0, 100.0], &[0.2, 0.3, 0.5], 0);
        let (z, _) = normalize_minmax(&t, &h, (1.0, 100.0), 2015).unwrap();
        assert_eq!(z.cross_section(0, 0), vec![1.0, 50.5, 100.0]);
        let (t, _, h) = setup(&[0.0, 50.0, 100.0], &[0.2, 0.3, 0.5], 1);
        let (z, _) = normalize_minmax(&t, &h, (1.0, 100.0), 2015).unwrap();
        assert_eq!(z.cross_section(0, 0), vec![100.0, 50.5, 1.0]);
    }

    #[test]
    fn minmax_extrapolates_later_years() {
        let mut t = PanelTensor::empty(vec!["a".into(), "b".into()], vec!["x".into()], &[2015, 2016]).unwrap();
        t.set(0, 0, 0, Some(0.0));
        t.set(1, 0, 0, Some(10.0));
        t.set(0, 0, 1, Some(5.0));
        t.set(1, 0, 1, Some(12.0));
        let cfg: HierarchyConfig = serde_json::from_value(serde_json::json!({
            "domains": {"d": {"subdomains": {"s": {"indicators": [{"id": "x", "polarity": 0}]}}}},
            "regions": {"r": ["a", "b"]},
        }))
        .unwrap();
        let h = Hierarchy::from_config(&cfg).unwrap();
        let (z, _) = normalize_minmax(&t, &h, (1.0, 100.0), 2015).unwrap();
        assert!(z.value(1, 0, 1) > 100.0);
    }

    #[test]
    fn wrong_indicator_set_rejected() {
        let (t, w, h) = setup(&[1.0, 3.0], &[0.5, 0.5], 0);
        let mut p = fit_normalization(&t, &w, &h, 2015).unwrap();
        p.indicators[0].indicator = "other".into();
        assert!(normalize(&t, &p).is_err());
        assert!(fit_normalization(&t, &w, &h, 2020).is_err());
    }
}
