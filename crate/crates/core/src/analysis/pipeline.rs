use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank_values;
use super::sobol::FactorSpace;
use crate::aggregation::{aggregate_hierarchy, aggregate_scores, Combine, HierarchyScores, LevelScores, OVERALL};
use crate::error::{Error, Result, StageExt};
use crate::model::{Hierarchy, PanelTensor, PopulationWeights, Stage, Year};
use crate::normalization::{fit_method, normalize, NormalizationMethod, NormalizationParams};
use crate::treatment::{treat, TreatmentMode, TreatmentPlan};
use crate::weighting::{
    equal_weights, fa_weights, optimize_weights, pca_weights, Estimator, OptimizationSummary, OptimizeOptions,
    Provenance, WeightSystem, WeightsDocument,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorWeighting {
    Equal,
    Fa,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainWeighting {
    Equal,
    Optimized,
}

/// Which score is ranked: the overall index or one domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OutputSelector {
    #[default]
    Overall,
    Domain(String),
}

impl FromStr for OutputSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overall" => Ok(OutputSelector::Overall),
            _ => match s.strip_prefix("domain:") {
                Some(d) if !d.is_empty() => Ok(OutputSelector::Domain(d.to_string())),
                _ => Err(Error::Config(format!(
                    "output level `{s}` is neither `overall` nor `domain:<name>`"
                ))),
            },
        }
    }
}

impl TryFrom<String> for OutputSelector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<OutputSelector> for String {
    fn from(o: OutputSelector) -> String {
        o.to_string()
    }
}

impl fmt::Display for OutputSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputSelector::Overall => f.write_str("overall"),
            OutputSelector::Domain(d) => write!(f, "domain:{d}"),
        }
    }
}

impl OutputSelector {
    fn select(&self, scores: &HierarchyScores, year: usize) -> Result<Vec<f64>> {
        let (level, node) = match self {
            OutputSelector::Overall => (&scores.overall, OVERALL),
            OutputSelector::Domain(d) => (&scores.domain, d.as_str()),
        };
        let n = level
            .node_index(node)
            .ok_or_else(|| Error::Config(format!("unknown domain `{node}`")))?;
        Ok(level.column(n, year))
    }
}

/// One complete set of methodological choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineChoice {
    pub treatment: TreatmentMode,
    pub normalization: NormalizationMethod,
    pub indicator_weights: IndicatorWeighting,
    pub domain_weights: DomainWeighting,
}

impl Default for PipelineChoice {
    fn default() -> Self {
        Self {
            treatment: TreatmentMode::Modified { k_max: Some(2) },
            normalization: NormalizationMethod::WeightedZScore,
            indicator_weights: IndicatorWeighting::Equal,
            domain_weights: DomainWeighting::Equal,
        }
    }
}

/// Settings shared by every choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSettings {
    pub baseline_year: Year,
    /// Year whose PCA loadings are used; the baseline year when absent.
    #[serde(default)]
    pub weight_year: Option<Year>,
    /// Year whose scores are ranked; the last year when absent.
    #[serde(default)]
    pub rank_year: Option<Year>,
    #[serde(default)]
    pub output: OutputSelector,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    /// Domain importance targets; equal when absent.
    #[serde(default)]
    pub targets: Option<Vec<f64>>,
    #[serde(default)]
    pub optimizer: OptimizeOptions,
}

fn default_estimator() -> Estimator {
    Estimator::Linear
}

impl PipelineSettings {
    pub fn new(baseline_year: Year) -> Self {
        Self {
            baseline_year,
            weight_year: None,
            rank_year: None,
            output: OutputSelector::Overall,
            estimator: Estimator::Linear,
            targets: None,
            optimizer: OptimizeOptions::default(),
        }
    }

    /// Fills every optional field with its effective value.
    pub fn materialized(&self, years: &[Year], domains: usize) -> Self {
        let mut s = self.clone();
        s.weight_year = Some(self.weight_year.unwrap_or(self.baseline_year));
        s.rank_year = Some(self.rank_year.unwrap_or(*years.last().expect("non-empty years")));
        s.targets = Some(
            self.targets
                .clone()
                .unwrap_or_else(|| vec![1.0 / domains as f64; domains]),
        );
        s
    }
}

/// The imputed panel and its metadata.
#[derive(Debug, Clone)]
pub struct PipelineInput {
    pub imputed: PanelTensor,
    pub hierarchy: Hierarchy,
    pub population: PopulationWeights,
}

impl PipelineInput {
    pub fn new(imputed: PanelTensor, hierarchy: Hierarchy, population: PopulationWeights) -> Result<Self> {
        if imputed.stage() != Stage::Imputed {
            return Err(Error::Precondition(format!(
                "pipeline input must be imputed, got {:?}",
                imputed.stage()
            )));
        }
        hierarchy.check_tensor(&imputed)?;
        Ok(Self {
            imputed,
            hierarchy,
            population,
        })
    }

    /// The same panel with a smaller hierarchy; dropped indicators leave the tensor.
    pub fn with_hierarchy(&self, hierarchy: Hierarchy) -> Result<Self> {
        let imputed = self.imputed.select_indicators(&hierarchy.indicator_ids())?;
        Ok(Self {
            imputed,
            hierarchy,
            population: self.population.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub treated: PanelTensor,
    pub plan: TreatmentPlan,
    pub normalized: PanelTensor,
    pub params: NormalizationParams,
    pub weights: WeightSystem,
    pub weights_doc: WeightsDocument,
    pub scores: HierarchyScores,
    /// Ranked score per unit, in tensor unit order.
    pub index: Vec<f64>,
    pub ranks: Vec<usize>,
}

fn year_slot(years: &[Year], year: Year, what: &str) -> Result<usize> {
    years
        .iter()
        .position(|y| *y == year)
        .ok_or_else(|| Error::Config(format!("{what} year {year} is not in the data")))
}

fn indicator_stage(
    z: &PanelTensor,
    h: &Hierarchy,
    how: IndicatorWeighting,
    settings: &PipelineSettings,
) -> Result<(WeightSystem, WeightsDocument)> {
    Ok(match how {
        IndicatorWeighting::Equal => {
            let w = equal_weights(h);
            let doc = WeightsDocument::new(&w, h);
            (w, doc)
        }
        IndicatorWeighting::Fa => {
            let (w, diag) = fa_weights(z, h)?;
            let mut doc = WeightsDocument::new(&w, h);
            doc.factor_analysis = Some(diag);
            (w, doc)
        }
        IndicatorWeighting::Pca => {
            let year = settings.weight_year.unwrap_or(settings.baseline_year);
            let (w, ve) = pca_weights(z, h, year)?;
            let mut doc = WeightsDocument::new(&w, h);
            doc.variance_explained = Some(ve);
            (w, doc)
        }
    })
}

/// Domain scores stacked over units and years, one column per domain.
pub fn domain_columns(domain: &LevelScores) -> Vec<Vec<f64>> {
    (0..domain.nodes.len())
        .map(|d| {
            (0..domain.rows.len())
                .flat_map(|r| (0..domain.years.len()).map(move |t| (r, t)))
                .map(|(r, t)| domain.get(r, d, t))
                .collect()
        })
        .collect()
}

fn domain_stage(
    base: HierarchyScores,
    h: &Hierarchy,
    w: WeightSystem,
    mut doc: WeightsDocument,
    how: DomainWeighting,
    settings: &PipelineSettings,
) -> Result<(WeightSystem, WeightsDocument, HierarchyScores)> {
    match how {
        DomainWeighting::Equal => Ok((w, doc, base)),
        DomainWeighting::Optimized => {
            let d = h.domains().len();
            let targets = settings.targets.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]);
            let opt = optimize_weights(
                &domain_columns(&base.domain),
                &targets,
                settings.estimator,
                &settings.optimizer,
            )?;
            let extras = (doc.variance_explained.take(), doc.factor_analysis.take());
            let w = w.with_domain_weights(opt.weights.clone(), Provenance::Optimized);
            let scores = aggregate_scores(base.indicator, h, &w, Combine::Linear)?;
            let mut doc = WeightsDocument::new(&w, h);
            (doc.variance_explained, doc.factor_analysis) = extras;
            doc.optimization = Some(OptimizationSummary {
                estimator: opt.estimator,
                targets,
                achieved: opt.achieved,
                objective: opt.objective,
                initial_objective: opt.initial_objective,
                improved: opt.improved,
            });
            Ok((w, doc, scores))
        }
    }
}

fn weigh(
    z: &PanelTensor,
    h: &Hierarchy,
    iw: IndicatorWeighting,
    dws: &[DomainWeighting],
    settings: &PipelineSettings,
) -> Result<Vec<(WeightSystem, WeightsDocument, HierarchyScores)>> {
    let (w, doc) = indicator_stage(z, h, iw, settings).stage("weights")?;
    let base = aggregate_hierarchy(z, h, &w).stage("aggregate")?;
    dws.iter()
        .map(|&dw| domain_stage(base.clone(), h, w.clone(), doc.clone(), dw, settings).stage("weights"))
        .collect()
}

/// Runs treatment → normalization → weighting → aggregation → ranking.
pub fn run_pipeline(
    input: &PipelineInput,
    choice: &PipelineChoice,
    settings: &PipelineSettings,
) -> Result<PipelineRun> {
    let h = &input.hierarchy;
    let years = input.imputed.years();
    let rank_t = year_slot(&years, settings.rank_year.unwrap_or(*years.last().unwrap()), "rank")?;
    let (treated, plan) = treat(&input.imputed, choice.treatment).stage("treat")?;
    let params = fit_method(
        &treated,
        &input.population,
        h,
        choice.normalization,
        settings.baseline_year,
    )
    .stage("normalize")?;
    let normalized = normalize(&treated, &params).stage("normalize")?;
    let (weights, weights_doc, scores) = weigh(
        &normalized,
        h,
        choice.indicator_weights,
        &[choice.domain_weights],
        settings,
    )?
    .pop()
    .expect("one domain weighting");
    let index = settings.output.select(&scores, rank_t)?;
    let ranks = rank_values(&index, input.imputed.units());
    Ok(PipelineRun {
        treated,
        plan,
        normalized,
        params,
        weights,
        weights_doc,
        scores,
        index,
        ranks,
    })
}

/// A point of the method space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub winsorization: usize,
    pub normalization: NormalizationMethod,
    pub indicator_weights: IndicatorWeighting,
    pub domain_weights: DomainWeighting,
}

impl ConfigPoint {
    pub fn choice(&self) -> PipelineChoice {
        PipelineChoice {
            treatment: TreatmentMode::Modified {
                k_max: Some(self.winsorization),
            },
            normalization: self.normalization,
            indicator_weights: self.indicator_weights,
            domain_weights: self.domain_weights,
        }
    }
}

/// Levels of each uncertain methodological factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpace {
    pub winsorization: Vec<usize>,
    pub normalization: Vec<NormalizationMethod>,
    pub indicator_weights: Vec<IndicatorWeighting>,
    pub domain_weights: Vec<DomainWeighting>,
}

impl Default for MethodSpace {
    fn default() -> Self {
        Self {
            winsorization: vec![2, 5, 10],
            normalization: vec![NormalizationMethod::WeightedZScore, NormalizationMethod::MinMax],
            indicator_weights: vec![IndicatorWeighting::Equal, IndicatorWeighting::Pca],
            domain_weights: vec![DomainWeighting::Equal, DomainWeighting::Optimized],
        }
    }
}

impl MethodSpace {
    pub const FACTORS: [&'static str; 4] = ["winsorization", "normalization", "indicator_weights", "domain_weights"];

    pub fn factor_space(&self) -> FactorSpace {
        FactorSpace::new(
            Self::FACTORS.iter().map(|s| s.to_string()).collect(),
            vec![
                self.winsorization.len(),
                self.normalization.len(),
                self.indicator_weights.len(),
                self.domain_weights.len(),
            ],
        )
    }

    pub fn point(&self, levels: &[usize]) -> ConfigPoint {
        ConfigPoint {
            winsorization: self.winsorization[levels[0]],
            normalization: self.normalization[levels[1]],
            indicator_weights: self.indicator_weights[levels[2]],
            domain_weights: self.domain_weights[levels[3]],
        }
    }

    /// Every point, in [`FactorSpace`] index order.
    pub fn points(&self) -> Vec<ConfigPoint> {
        let fs = self.factor_space();
        (0..fs.size()).map(|k| self.point(&fs.decode(k))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.winsorization.is_empty()
            || self.normalization.is_empty()
            || self.indicator_weights.is_empty()
            || self.domain_weights.is_empty()
        {
            return Err(Error::Config(
                "every method-space factor needs at least one level".into(),
            ));
        }
        if self.winsorization.contains(&0) {
            return Err(Error::Config("winsorization levels must be positive".into()));
        }
        Ok(())
    }
}

/// Ranked scores and ranks at every point of a method space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceResults {
    pub space: MethodSpace,
    pub units: Vec<String>,
    pub points: Vec<ConfigPoint>,
    /// `[point][unit]`.
    pub index: Vec<Vec<f64>>,
    /// `[point][unit]`.
    pub ranks: Vec<Vec<usize>>,
}

impl SpaceResults {
    /// Ranks as model outputs, `[unit][point]`.
    pub fn rank_outputs(&self) -> Vec<Vec<f64>> {
        (0..self.units.len())
            .map(|c| self.ranks.iter().map(|r| r[c] as f64).collect())
            .collect()
    }

    pub fn point_index(&self, p: &ConfigPoint) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }
}

/// Evaluates every point of `space`, sharing treatment, normalization and
/// indicator weights between points that agree on them.
pub fn evaluate_space(input: &PipelineInput, space: &MethodSpace, settings: &PipelineSettings) -> Result<SpaceResults> {
    space.validate()?;
    let h = &input.hierarchy;
    let years = input.imputed.years();
    let rank_t = year_slot(&years, settings.rank_year.unwrap_or(*years.last().unwrap()), "rank")?;

    let treated: Vec<PanelTensor> = space
        .winsorization
        .par_iter()
        .map(|&k| treat(&input.imputed, TreatmentMode::Modified { k_max: Some(k) }).map(|(t, _)| t))
        .collect::<Result<_>>()
        .stage("treat")?;

    let (nw, nn, ni) = (
        space.winsorization.len(),
        space.normalization.len(),
        space.indicator_weights.len(),
    );
    let normalized: Vec<PanelTensor> = (0..nw * nn)
        .into_par_iter()
        .map(|k| {
            let t = &treated[k / nn];
            let params = fit_method(
                t,
                &input.population,
                h,
                space.normalization[k % nn],
                settings.baseline_year,
            )?;
            normalize(t, &params)
        })
        .collect::<Result<_>>()
        .stage("normalize")?;

    // [upstream][domain weighting] → ranked scores
    let upstream: Vec<Vec<Vec<f64>>> = (0..nw * nn * ni)
        .into_par_iter()
        .map(|k| {
            let z = &normalized[k / ni];
            let runs = weigh(z, h, space.indicator_weights[k % ni], &space.domain_weights, settings)?;
            runs.iter().map(|(_, _, s)| settings.output.select(s, rank_t)).collect()
        })
        .collect::<Result<_>>()?;

    let fs = space.factor_space();
    let mut index = Vec::with_capacity(fs.size());
    let mut points = Vec::with_capacity(fs.size());
    for k in 0..fs.size() {
        let l = fs.decode(k);
        index.push(upstream[(l[0] * nn + l[1]) * ni + l[2]][l[3]].clone());
        points.push(space.point(&l));
    }
    let units = input.imputed.units().to_vec();
    let ranks = index.iter().map(|v| rank_values(v, &units)).collect();
    Ok(SpaceResults {
        space: space.clone(),
        units,
        points,
        index,
        ranks,
    })
}
