mod common;

use common::{k_stat_moments, normals, within_limits};
use compindex::treatment::{
    default_candidates, default_k_max, moments, select_transform_ons, treat_modified, winsorize, Action, Tail,
    Transform,
};
use proptest::prelude::*;

/// Brute-force argmin of the lexicographic objective, computed with the
/// k-statistic moments, identity first.
fn brute_force_choice(xs: &[f64]) -> Option<Transform> {
    let apply = |t: Transform, x: f64| -> Option<f64> {
        match t {
            Transform::Log if x > 0.0 => Some(x.ln()),
            Transform::Sqrt if x >= 0.0 => Some(x.sqrt()),
            Transform::Cbrt => Some(x.cbrt()),
            Transform::Square if x >= 0.0 => Some(x * x),
            Transform::Cube => Some(x.powi(3)),
            Transform::NegReciprocal if x > 0.0 => Some(-1.0 / x),
            _ => None,
        }
    };
    let score = |v: &[f64]| {
        let (s, k) = k_stat_moments(v);
        ((s.abs() / 2.0).max(k.abs() / 3.5).max(1.0), s.abs() + k.abs())
    };
    let mut best = (None, score(xs));
    for t in Transform::ALL {
        let Some(v) = xs.iter().map(|&x| apply(t, x)).collect::<Option<Vec<f64>>>() else {
            continue;
        };
        let sc = score(&v);
        if sc.0 < best.1 .0 - 1e-12 || ((sc.0 - best.1 .0).abs() <= 1e-12 && sc.1 < best.1 .1 - 1e-12) {
            best = (Some(t), sc);
        }
    }
    best.0
}

#[test]
fn moments_match_k_statistics() {
    let xs: Vec<f64> = normals(500, 4).iter().map(|z| (0.7 * z).exp()).collect();
    let m = moments(&xs).unwrap();
    let (s, k) = k_stat_moments(&xs);
    assert!((m.skewness - s).abs() < 1e-10);
    assert!((m.excess_kurtosis - k).abs() < 1e-10);
}

#[test]
fn lognormal_sample_takes_the_log() {
    let xs: Vec<f64> = normals(596, 17).iter().map(|z| (1.0 + 0.9 * z).exp()).collect();
    let out = select_transform_ons(&xs, &default_candidates()).unwrap();
    assert_eq!(
        out.entry.action,
        Action::Transform {
            transform: Transform::Log
        }
    );
    assert_eq!(brute_force_choice(&xs), Some(Transform::Log));
    assert!(out.entry.after.skewness.abs() < out.entry.before.skewness.abs());
}

#[test]
fn symmetric_normal_sample_keeps_the_identity() {
    // Antithetic pairs make the sample exactly symmetric about zero, so
    // only odd transforms are admissible and each moves the kurtosis away
    // from the normal value.
    let half = normals(300, 23);
    let xs: Vec<f64> = half.iter().flat_map(|z| [*z, -*z]).collect();
    let out = select_transform_ons(&xs, &default_candidates()).unwrap();
    assert_eq!(out.entry.action, Action::Identity);
    assert_eq!(brute_force_choice(&xs), None);
    assert_eq!(out.values, xs);
}

#[test]
fn selection_agrees_with_brute_force_on_assorted_series() {
    for seed in 0..40u64 {
        let z = normals(200, 100 + seed);
        let xs: Vec<f64> = match seed % 4 {
            0 => z.iter().map(|v| ((0.2 + seed as f64 / 40.0) * v).exp()).collect(),
            1 => z.iter().map(|v| 50.0 + 10.0 * v).collect(),
            2 => z.iter().map(|v| v.powi(3)).collect(),
            _ => z.iter().map(|v| (v * v) + 0.1).collect(),
        };
        let out = select_transform_ons(&xs, &default_candidates()).unwrap();
        assert_eq!(out.entry.action.transform(), brute_force_choice(&xs), "seed {seed}");
    }
}

#[test]
fn two_upper_outliers_are_winsorized_not_transformed() {
    let mut xs: Vec<f64> = normals(200, 31).iter().map(|z| 40.0 + 5.0 * z).collect();
    xs[17] = 140.0;
    xs[88] = 160.0;
    // The thresholds are crossed exactly at the second snap.
    let snapped = |k: usize| winsorize(&xs, k, Tail::Upper).unwrap().values;
    assert!(!within_limits(&snapped(0)));
    assert!(!within_limits(&snapped(1)));
    assert!(within_limits(&snapped(2)));

    let out = treat_modified(&xs, default_k_max(xs.len())).unwrap();
    assert_eq!(out.entry.action, Action::Winsorize { upper: 2, lower: 0 });
    assert!(out.entry.within_limits);
    assert_eq!(out.values, snapped(2));
}

#[test]
fn heavy_lognormal_needs_a_log_after_winsorizing() {
    let xs: Vec<f64> = normals(596, 41).iter().map(|z| (1.4 * z).exp()).collect();
    let k_max = default_k_max(xs.len());
    assert_eq!(k_max, 12);
    // No split of the budget between the tails is enough on its own.
    for lower in 0..=k_max {
        for upper in 0..=k_max - lower {
            let mut v = xs.clone();
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
            let n = v.len();
            let lo = xs[order[lower]];
            let hi = xs[order[n - 1 - upper]];
            for &p in &order[..lower] {
                v[p] = lo;
            }
            for &p in &order[n - upper..] {
                v[p] = hi;
            }
            assert!(!within_limits(&v), "lower {lower} upper {upper}");
        }
    }
    let out = treat_modified(&xs, k_max).unwrap();
    match out.entry.action {
        Action::WinsorizeTransform {
            upper,
            lower,
            transform,
        } => {
            assert_eq!(upper + lower, k_max);
            assert_eq!(transform, Transform::Log);
        }
        other => panic!("unexpected action {other:?}"),
    }
    assert!(out.entry.within_limits);
}

#[test]
fn lower_tail_example() {
    let w = winsorize(&[-50.0, 1.0, 2.0, 3.0], 1, Tail::Lower).unwrap();
    assert_eq!(w.values, vec![1.0, 1.0, 2.0, 3.0]);
    assert!(winsorize(&[1.0, 2.0], 2, Tail::Upper).is_err());
}

proptest! {
    #[test]
    fn winsorization_is_order_safe(xs in prop::collection::vec(-1e3f64..1e3, 5..60), k in 0usize..5, upper in any::<bool>()) {
        let k = k.min(xs.len() - 1);
        let tail = if upper { Tail::Upper } else { Tail::Lower };
        let w = winsorize(&xs, k, tail).unwrap();
        let changed = xs.iter().zip(&w.values).filter(|(a, b)| a != b).count();
        prop_assert!(changed <= k);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(max(&w.values) <= max(&xs));
        prop_assert!(min(&w.values) >= min(&xs));
        for a in 0..xs.len() {
            for b in 0..xs.len() {
                if xs[a] < xs[b] {
                    prop_assert!(w.values[a] <= w.values[b]);
                }
            }
        }
    }

    #[test]
    fn distinct_values_change_exactly_k(n in 6usize..60, k in 0usize..5, seed in 0u64..1000) {
        let xs: Vec<f64> = normals(n, seed);
        let w = winsorize(&xs, k, Tail::Upper).unwrap();
        let changed = xs.iter().zip(&w.values).filter(|(a, b)| a != b).count();
        prop_assert_eq!(changed, k);
    }
}
