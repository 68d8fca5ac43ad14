//! First-order correlation ratios `S = Var(E[y|x]) / Var(y)` and their split
//! into a part explained through the other inputs and a part unique to the
//! input itself.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Smallest sample accepted by [`estimate_s`].
pub const MIN_SAMPLE: usize = 30;
const BANDWIDTH_GRID: usize = 20;
const GRID_LO: f64 = 0.005;
const GRID_HI: f64 = 2.0;
/// Kernel weights beyond this many bandwidths are treated as zero.
const KERNEL_RADIUS: f64 = 6.0;
const BACKFIT_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Linear,
    Nonparametric,
}

impl Estimator {
    /// Smoother description written into run metadata.
    pub fn describe(self) -> &'static str {
        match self {
            Estimator::Linear => "ordinary least squares",
            Estimator::Nonparametric => {
                "Nadaraya-Watson, Gaussian kernel, leave-one-out CV bandwidth over 20 log-spaced values"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRatio {
    pub total: f64,
    pub uncorrelated: f64,
    pub correlated: f64,
    pub estimator: Estimator,
}

/// Sample sorted by x, remembering the original positions.
struct Sorted {
    x: Vec<f64>,
    y: Vec<f64>,
    pos: Vec<usize>,
}

impl Sorted {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let mut pos: Vec<usize> = (0..x.len()).collect();
        pos.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        Self {
            x: pos.iter().map(|&k| x[k]).collect(),
            y: pos.iter().map(|&k| y[k]).collect(),
            pos,
        }
    }

    /// Kernel estimate at the j-th sorted point, optionally leaving it out.
    fn at(&self, j: usize, h: f64, leave_out: bool) -> Option<f64> {
        let x0 = self.x[j];
        let lo = self.x.partition_point(|v| *v < x0 - KERNEL_RADIUS * h);
        let hi = self.x.partition_point(|v| *v <= x0 + KERNEL_RADIUS * h);
        let (mut num, mut den) = (0.0, 0.0);
        for k in lo..hi {
            if leave_out && k == j {
                continue;
            }
            let u = (self.x[k] - x0) / h;
            let w = (-0.5 * u * u).exp();
            num += w * self.y[k];
            den += w;
        }
        (den > 0.0).then(|| num / den)
    }
}

fn grid(sd: f64) -> impl Iterator<Item = f64> {
    let (a, b) = (GRID_LO.ln(), GRID_HI.ln());
    (0..BANDWIDTH_GRID).map(move |k| sd * (a + (b - a) * k as f64 / (BANDWIDTH_GRID - 1) as f64).exp())
}

fn cv_sorted(s: &Sorted, sd: f64, ybar: f64) -> f64 {
    let mut best = (f64::INFINITY, sd);
    for h in grid(sd) {
        let score: f64 = (0..s.x.len())
            .map(|j| {
                let e = s.y[j] - s.at(j, h, true).unwrap_or(ybar);
                e * e
            })
            .sum();
        if score < best.0 {
            best = (score, h);
        }
    }
    best.1
}

/// Leave-one-out cross-validated bandwidth for regressing `y` on `x`.
/// Returns 0 when `x` is constant.
pub fn cv_bandwidth(x: &[f64], y: &[f64]) -> f64 {
    let sd = stats::variance(x).sqrt();
    if sd == 0.0 {
        return 0.0;
    }
    cv_sorted(&Sorted::new(x, y), sd, stats::mean(y))
}

/// In-sample kernel fit `Ê[y|x]` at every sample point.
pub fn nadaraya_watson_fit(x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    if h <= 0.0 {
        return vec![stats::mean(y); y.len()];
    }
    let s = Sorted::new(x, y);
    let mut out = vec![0.0; x.len()];
    for j in 0..x.len() {
        out[s.pos[j]] = s.at(j, h, false).expect("a point always weights itself");
    }
    out
}

fn check_pair(y: &[f64], x: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Precondition(format!(
            "paired samples differ in length ({} vs {})",
            y.len(),
            x.len()
        )));
    }
    if y.len() < MIN_SAMPLE {
        return Err(Error::Precondition(format!(
            "correlation ratio needs at least {MIN_SAMPLE} samples, got {}",
            y.len()
        )));
    }
    let vy = stats::variance(y);
    if !(vy > 0.0) {
        return Err(Error::Numeric(
            "correlation ratio undefined for a constant output".into(),
        ));
    }
    Ok(vy)
}

/// Correlation ratio of `y` on `x` with a kernel of fixed bandwidth `h`.
pub(crate) fn s_with_bandwidth(y: &[f64], x: &[f64], h: f64) -> Result<f64> {
    let vy = check_pair(y, x)?;
    Ok(stats::variance(&nadaraya_watson_fit(x, y, h)) / vy)
}

/// First-order correlation ratio of output `y` on input `x`.
pub fn estimate_s(y: &[f64], x: &[f64], estimator: Estimator) -> Result<f64> {
    let vy = check_pair(y, x)?;
    match estimator {
        Estimator::Linear => Ok(stats::pearson(x, y).map_or(0.0, |r| r * r)),
        Estimator::Nonparametric => {
            let h = cv_bandwidth(x, y);
            Ok(stats::variance(&nadaraya_watson_fit(x, y, h)) / vy)
        }
    }
}

fn ols_residual(target: &[f64], others: &[&Vec<f64>]) -> Result<Vec<f64>> {
    let n = target.len();
    let k = others.len() + 1;
    let x = DMatrix::from_fn(n, k, |r, c| if c == 0 { 1.0 } else { others[c - 1][r] });
    let y = DVector::from_column_slice(target);
    let qr = x.clone().qr();
    let rdiag = qr.r().diagonal();
    let scale = rdiag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if rdiag.iter().any(|v| v.abs() <= 1e-10 * scale) {
        return Err(Error::Singular("the other domains are collinear".into()));
    }
    let qty = qr.q().transpose() * &y;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("least-squares system has no solution".into()))?;
    Ok((y - x * beta).iter().copied().collect())
}

/// Additive kernel regression by backfitting, one smoother per input.
fn additive_residual(target: &[f64], others: &[&Vec<f64>]) -> Vec<f64> {
    let n = target.len();
    let m = stats::mean(target);
    let centred: Vec<f64> = target.iter().map(|v| v - m).collect();
    let bandwidths: Vec<f64> = others.iter().map(|x| cv_bandwidth(x, &centred)).collect();
    let mut parts = vec![vec![0.0; n]; others.len()];
    for _ in 0..BACKFIT_ITERATIONS {
        let mut change = 0.0_f64;
        for j in 0..others.len() {
            let partial: Vec<f64> = (0..n)
                .map(|r| centred[r] - (0..others.len()).filter(|&k| k != j).map(|k| parts[k][r]).sum::<f64>())
                .collect();
            let mut f = nadaraya_watson_fit(others[j], &partial, bandwidths[j]);
            let fm = stats::mean(&f);
            f.iter_mut().for_each(|v| *v -= fm);
            change = change.max(f.iter().zip(&parts[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            parts[j] = f;
        }
        if change < 1e-10 {
            break;
        }
    }
    (0..n)
        .map(|r| centred[r] - parts.iter().map(|p| p[r]).sum::<f64>())
        .collect()
}

/// Returns `(total', c)` with `c = total − u` and `total' = c + u`, so the
/// identity holds bit-for-bit. `total'` differs from `total` by at most an
/// ulp of `u`.
fn exact_split(total: f64, u: f64) -> (f64, f64) {
    let c = total - u;
    (c + u, c)
}

/// Splits the correlation ratio of `index` on domain `target` into the
/// part not explained by the other domains and the remainder.
///
/// `domains` holds one column per domain.
pub fn decompose_s(
    domains: &[Vec<f64>],
    index: &[f64],
    target: usize,
    estimator: Estimator,
) -> Result<SensitivityRatio> {
    let xd = domains
        .get(target)
        .ok_or_else(|| Error::Precondition(format!("domain {target} out of range")))?;
    if domains.iter().any(|c| c.len() != index.len()) {
        return Err(Error::Precondition("domain columns and index differ in length".into()));
    }
    let total = estimate_s(index, xd, estimator)?;
    let others: Vec<&Vec<f64>> = domains
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != target)
        .map(|(_, c)| c)
        .collect();
    let residual = match estimator {
        _ if others.is_empty() => {
            let m = stats::mean(xd);
            xd.iter().map(|v| v - m).collect()
        }
        Estimator::Linear => ols_residual(xd, &others)?,
        Estimator::Nonparametric => additive_residual(xd, &others),
    };
    let uncorrelated = if stats::variance(&residual) <= 1e-12 * stats::variance(xd) {
        0.0
    } else {
        estimate_s(index, &residual, estimator)?
    };
    let (total, correlated) = exact_split(total, uncorrelated);
    Ok(SensitivityRatio {
        total,
        uncorrelated,
        correlated,
        estimator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_dependence() {
        let x: Vec<f64> = (0..50).map(|k| k as f64 * 0.37).collect();
        assert!((estimate_s(&x, &x, Estimator::Linear).unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_s(&x, &x, Estimator::Nonparametric).unwrap() > 0.99);
    }

    #[test]
    fn constant_output_is_undefined() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        assert!(matches!(
            estimate_s(&[2.0; 40], &x, Estimator::Linear),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            estimate_s(&x[..10], &x[..10], Estimator::Linear),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn kernel_fit_recovers_a_smooth_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v: &f64| v.sin() + 0.05 * rng.random_range(-1.0..1.0))
            .collect();
        let h = cv_bandwidth(&x, &y);
        let fit = nadaraya_watson_fit(&x, &y, h);
        let err = x.iter().zip(&fit).map(|(a, f)| (a.sin() - f).abs()).fold(0.0, f64::max);
        assert!(err < 0.1, "max error {err} at h = {h}");
    }

    #[test]
    fn identity_holds_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let index: Vec<f64> = (0..n)
            .map(|r| cols[0][r] + 0.5 * cols[1][r] + cols[2][r] * cols[0][r])
            .collect();
        for est in [Estimator::Linear, Estimator::Nonparametric] {
            for d in 0..3 {
                let s = decompose_s(&cols, &index, d, est).unwrap();
                assert_eq!(s.total, s.correlated + s.uncorrelated);
            }
        }
    }

    #[test]
    fn split_is_exact_in_floating_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let t: f64 = rng.random_range(0.0..1.0);
            let u: f64 = rng.random_range(0.0..1.2);
            let (t2, c) = exact_split(t, u);
            assert_eq!(c + u, t2);
            assert!((t2 - t).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn collinear_others_are_singular() {
        let x: Vec<f64> = (0..40).map(|k| (k as f64).sin()).collect();
        let y: Vec<f64> = (0..40).map(|k| (k as f64 * 0.7).cos()).collect();
        let idx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let cols = vec![idx.clone(), x.clone(), x.clone()];
        assert!(matches!(
            decompose_s(&cols, &idx, 0, Estimator::Linear),
            Err(Error::Singular(_))
        ));
    }
}
