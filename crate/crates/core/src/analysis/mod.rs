//! Audit of a built index: correlation screening, variance-based
//! sensitivity over methodological choices, rank-uncertainty bands and
//! leave-one-out rank shifts.

mod correlation;
mod pipeline;
mod rankshift;
mod sobol;
mod uncertainty;

pub use correlation::{correlation_screen, cross_level_screen, CorrelationFlag, CorrelationScreen, FlagKind};
pub use pipeline::{
    domain_columns, evaluate_space, run_pipeline, ConfigPoint, DomainWeighting, IndicatorWeighting, MethodSpace,
    OutputSelector, PipelineChoice, PipelineInput, PipelineRun, PipelineSettings, SpaceResults,
};
pub use rankshift::{rank_shift_removal, RankShift, RemovalLevel};
pub use sobol::{
    sobol_exact, sobol_mc, FactorSpace, SobolEstimate, SobolMode, SobolReport, UnitSobol, BOOTSTRAP_RESAMPLES,
};
pub use uncertainty::{uncertainty_bands, RankBand};

/// Ranks 1..n with rank 1 for the lowest value. Equal values are ordered
/// by id, the lexicographically smaller id taking the smaller rank.
pub fn rank_values(values: &[f64], ids: &[String]) -> Vec<usize> {
    assert_eq!(values.len(), ids.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then_with(|| ids[a].cmp(&ids[b])));
    let mut ranks = vec![0; values.len()];
    for (pos, &k) in order.iter().enumerate() {
        ranks[k] = pos + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_is_rank_one_and_ties_follow_ids() {
        let ids: Vec<String> = ["b", "a", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert_eq!(rank_values(&[5.0, 5.0, 1.0, 9.0], &ids), vec![3, 2, 1, 4]);
    }
}
