//! Rank diagnostics, a Monte-Carlo check of the sparse-perturbation rank bound,
//! and the paired t-test used to compare methods across folds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{PmlError, Result};
use crate::numerics::{numerical_rank, DenseMatrix};
use crate::scalar::Scalar;
use crate::solver::{binarize, Model};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankReport {
    /// Rank of the raw score matrix XW.
    pub rank_prediction_scores: usize,
    /// Rank of the thresholded predictions.
    pub rank_prediction_binary: usize,
    /// Rank of the candidate label matrix Y.
    pub rank_observed: usize,
    /// Rank of the ground truth, when supplied.
    pub rank_truth: Option<usize>,
    pub max_rank: usize,
}

pub fn rank_report<T: Scalar>(model: &Model<T>, ds: &Dataset<T>) -> Result<RankReport> {
    let scores = model.predict_scores(&ds.features)?;
    let binary = binarize(&scores, model.params.threshold);
    Ok(RankReport {
        rank_prediction_scores: numerical_rank(&scores)?,
        rank_prediction_binary: numerical_rank(&binary)?,
        rank_observed: numerical_rank(&ds.candidates)?,
        rank_truth: ds.truth.as_ref().map(numerical_rank).transpose()?,
        max_rank: ds.n_samples().min(ds.n_labels()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TheoremCheckResult {
    pub n: usize,
    pub l: usize,
    pub epsilon: usize,
    pub trials: usize,
    /// Trials with `rank(Y − N) < min(n, l) − rank(N)`.
    pub violations: usize,
    /// Trials with `rank(Y − N) < min(n, l) − ε`.
    pub epsilon_bound_violations: usize,
    /// Minimum over trials of `rank(Y − N) − (min(n, l) − rank(N))`.
    pub min_observed_margin: i64,
    /// Smallest `rank(Y − N)` seen.
    pub min_rank_perturbed: usize,
    /// Largest `rank(N)` seen; never exceeds ε.
    pub max_rank_noise: usize,
    /// Trials where Y had fewer than ε ones and N used all of them instead.
    pub infeasible_trials: usize,
}

struct Trial {
    rank_perturbed: usize,
    rank_noise: usize,
    infeasible: bool,
}

/// Draw `trials` full-rank binary `Y` (entries fair coin flips, redrawn until
/// full rank) and binary `N ≤ Y` with `ε` ones at uniformly chosen positions
/// of Y's support, then tally how often `rank(Y − N) ≥ min(n, l) − rank(N)` fails.
///
/// Trial `t` uses ChaCha8 seeded with `seed` on stream `t`, so the result
/// does not depend on scheduling.
pub fn verify_rank_theorem(
    n: usize,
    l: usize,
    epsilon: usize,
    trials: usize,
    seed: u64,
) -> Result<TheoremCheckResult> {
    if trials == 0 {
        return Err(PmlError::contract(
            "verify_rank_theorem",
            "trials must be >= 1",
        ));
    }
    if n == 0 || l == 0 {
        return Err(PmlError::contract(
            "verify_rank_theorem",
            "n and l must be >= 1",
        ));
    }
    let full = n.min(l);
    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(n, l, epsilon, seed, t as u64))
        .collect::<Result<_>>()?;

    let mut out = TheoremCheckResult {
        n,
        l,
        epsilon,
        trials,
        violations: 0,
        epsilon_bound_violations: 0,
        min_observed_margin: i64::MAX,
        min_rank_perturbed: usize::MAX,
        max_rank_noise: 0,
        infeasible_trials: 0,
    };
    for r in &results {
        let margin = r.rank_perturbed as i64 - (full as i64 - r.rank_noise as i64);
        out.min_observed_margin = out.min_observed_margin.min(margin);
        if margin < 0 {
            out.violations += 1;
        }
        if (r.rank_perturbed as i64) < full as i64 - epsilon as i64 {
            out.epsilon_bound_violations += 1;
        }
        out.min_rank_perturbed = out.min_rank_perturbed.min(r.rank_perturbed);
        out.max_rank_noise = out.max_rank_noise.max(r.rank_noise);
        out.infeasible_trials += usize::from(r.infeasible);
    }
    Ok(out)
}

const MAX_REDRAWS: usize = 10_000;

fn run_trial(n: usize, l: usize, epsilon: usize, seed: u64, trial: u64) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let full = n.min(l);
    let mut y = None;
    for _ in 0..MAX_REDRAWS {
        let cand =
            DenseMatrix::<f64>::from_fn(n, l, |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 });
        if numerical_rank(&cand)? == full {
            y = Some(cand);
            break;
        }
    }
    let y = y.ok_or_else(|| {
        PmlError::numerical(
            "verify_rank_theorem",
            format!("no full-rank {n}x{l} binary matrix in {MAX_REDRAWS} draws"),
        )
    })?;

    let mut support: Vec<usize> = y
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 1.0)
        .map(|(p, _)| p)
        .collect();
    let k = epsilon.min(support.len());
    let mut noise = DenseMatrix::<f64>::zeros(n, l);
    for t in 0..k {
        let j = rng.random_range(t..support.len());
        support.swap(t, j);
        let p = support[t];
        noise[(p / l, p % l)] = 1.0;
    }
    let perturbed = y.sub(&noise)?;
    Ok(Trial {
        rank_perturbed: numerical_rank(&perturbed)?,
        rank_noise: numerical_rank(&noise)?,
        infeasible: k < epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Win,
    Tie,
    Loss,
}

impl Verdict {
    pub fn flipped(self) -> Self {
        match self {
            Verdict::Win => Verdict::Loss,
            Verdict::Loss => Verdict::Win,
            Verdict::Tie => Verdict::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub p_value: f64,
    pub mean_difference: f64,
    pub verdict: Verdict,
}

/// Two-sided paired Student t-test of `a − b`.
///
/// The verdict is `Win` (for `a`) or `Loss` by the sign of the mean difference
/// when `p < alpha_level`, otherwise `Tie`. Differences with zero variance
/// have `t = ±∞`, `p = 0` when their mean is non-zero, and `t = 0`, `p = 1`
/// when every difference is zero.
pub fn paired_ttest(a: &[f64], b: &[f64], alpha_level: f64) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(PmlError::dim(
            "paired_ttest",
            format!("{} vs {} observations", a.len(), b.len()),
        ));
    }
    if a.len() < 2 {
        return Err(PmlError::contract("paired_ttest", "need at least 2 pairs"));
    }
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(PmlError::contract(
            "paired_ttest",
            "alpha_level must lie in (0, 1)",
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(PmlError::NonFinite { op: "paired_ttest" });
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();

    let (t_stat, p_value) = if sd == 0.0 || sd <= 1e-15 * mean.abs() {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (sd / n.sqrt());
        (t, student_t_two_sided_p(t, n - 1.0))
    };
    let verdict = if p_value < alpha_level && mean != 0.0 {
        if mean > 0.0 {
            Verdict::Win
        } else {
            Verdict::Loss
        }
    } else {
        Verdict::Tie
    };
    Ok(TTestResult {
        t_stat,
        p_value,
        mean_difference: mean,
        verdict,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom,
/// `= I_{df/(df+t²)}(df/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// `I_x(a, b)` by the Lentz continued fraction, using the symmetry
/// `I_x(a, b) = 1 − I_{1−x}(b, a)` where the fraction converges faster.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_tie() {
        let a = [0.5, 0.6, 0.7, 0.8, 0.9];
        let r = paired_ttest(&a, &a, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Tie);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_shift_wins() {
        let b = [0.5, 0.6, 0.7, 0.8, 0.9];
        let a: Vec<f64> = b.iter().map(|v| v + 100.0).collect();
        let r = paired_ttest(&a, &b, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Win);
        assert_eq!(r.p_value, 0.0);
        assert_eq!(paired_ttest(&b, &a, 0.05).unwrap().verdict, Verdict::Loss);
    }

    #[test]
    fn ttest_errors() {
        assert!(paired_ttest(&[1.0], &[2.0], 0.05).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0], 0.05).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0, 1.0], 1.5).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_degree_of_freedom_is_cauchy() {
        // P(|T| >= t) = 1 - 2 atan(t)/pi for df = 1
        for t in [0.1, 1.0, 3.0, 12.0] {
            let exact = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!(
                (student_t_two_sided_p(t, 1.0) - exact).abs() < 1e-12,
                "t = {t}"
            );
        }
    }

    #[test]
    fn epsilon_zero_has_zero_margin() {
        let r = verify_rank_theorem(6, 6, 0, 20, 3).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.min_observed_margin, 0);
        assert_eq!(r.max_rank_noise, 0);
    }

    #[test]
    fn infeasible_epsilon_is_flagged() {
        let r = verify_rank_theorem(2, 2, 10, 5, 1).unwrap();
        assert_eq!(r.infeasible_trials, 5);
        assert_eq!(r.violations, 0);
    }
}
