//! Normality and paired-difference tests used to compare models across folds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Result, TrajkitError};

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Normal quantile, algorithm AS 241 (PPND7, about 7 significant digits);
/// the Shapiro-Wilk coefficient approximation is calibrated on it.
fn ppnd7(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((59.109_374_72 * r + 159.291_132_02) * r + 50.434_271_938) * r + 3.387_132_717_9)
            / (((67.187_563_6 * r + 78.757_757_664) * r + 17.895_169_469) * r + 1.0);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        (((0.170_238_211_03 * r + 1.306_728_481_6) * r + 2.756_815_39) * r + 1.423_437_277_7)
            / ((0.120_211_329_75 * r + 0.737_001_642_5) * r + 1.0)
    } else {
        let r = r - 5.0;
        (((0.017_337_203_997 * r + 0.428_682_943_37) * r + 3.081_226_386) * r + 6.657_905_115)
            / ((0.012_258_202_635 * r + 0.241_978_942_25) * r + 1.0)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroResult {
    pub w: f64,
    pub p: f64,
}

/// Shapiro-Wilk W and p-value (Royston's approximation, AS R94).
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroResult> {
    let n = sample.len();
    if n < 3 {
        return Err(TrajkitError::InvalidArgument(format!(
            "Shapiro-Wilk needs n >= 3, got {n}"
        )));
    }
    if n > 5000 {
        return Err(TrajkitError::InvalidArgument(format!(
            "Shapiro-Wilk supports n <= 5000, got {n}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(TrajkitError::InvalidArgument(
            "non-finite value in Shapiro-Wilk sample".into(),
        ));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range < 1e-19 {
        return Err(TrajkitError::Degenerate(
            "Shapiro-Wilk sample has zero variance".into(),
        ));
    }
    let an = n as f64;
    let nn2 = n / 2;
    let mut a = vec![0.0; nn2 + 1]; // 1-based
    if n == 3 {
        a[1] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an25 = an + 0.25;
        let mut m = vec![0.0; nn2 + 1];
        let mut summ2 = 0.0;
        for (i, mi) in m.iter_mut().enumerate().skip(1) {
            *mi = ppnd7((i as f64 - 0.375) / an25);
            summ2 += *mi * *mi;
        }
        summ2 *= 2.0;
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[1] / ssumm2;
        let (i1, fac) = if n > 5 {
            let a2 = -m[2] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[2] = a2;
            (3, fac)
        } else {
            (
                2,
                ((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1)).sqrt(),
            )
        };
        a[1] = a1;
        for i in i1..=nn2 {
            a[i] = -m[i] / fac;
        }
    }
    // coefficient of the i-th order statistic (1-based): antisymmetric
    let coef = |i: usize| {
        let j = n + 1 - i;
        if i < j {
            -a[i]
        } else if i > j {
            a[j]
        } else {
            0.0
        }
    };
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let sx = xs.iter().sum::<f64>() / an;
    let sa = (1..=n).map(coef).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for i in 1..=n {
        let asa = coef(i) - sa;
        let xsx = xs[i - 1] - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::PI / 3.0);
        return Ok(ShapiroResult { w, p: p.max(0.0) });
    }
    let y = w1.ln();
    let lxx = an.ln();
    let (y, m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return Ok(ShapiroResult { w, p: 1e-99 });
        }
        (-(gamma - y).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        (y, poly(&C5, lxx), poly(&C6, lxx).exp())
    };
    Ok(ShapiroResult {
        w,
        p: normal_sf((y - m) / s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    /// The differences were constant and non-zero: `t` is infinite and `p` 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(TrajkitError::InvalidArgument(format!(
            "paired t-test needs two samples of equal length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&v| v == 0.0) {
        return Err(TrajkitError::Degenerate(
            "identical results: all paired differences are zero".into(),
        ));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let df = d.len() - 1;
    if var == 0.0 {
        return Ok(TTestResult {
            t: if mean > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            p: 0.0,
            df,
            degenerate: true,
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| TrajkitError::InvalidArgument(e.to_string()))?;
    Ok(TTestResult {
        t,
        p: (2.0 * dist.sf(t.abs())).min(1.0),
        df,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p: f64,
    /// Non-zero differences used.
    pub m: usize,
    pub exact: bool,
}

pub const WILCOXON_EXACT_MAX: usize = 15;

/// Average ranks (1-based) of `v`.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Null distribution of the positive-rank sum as counts over doubled ranks.
fn signed_rank_counts(doubled: &[usize]) -> Vec<f64> {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Two-sided Wilcoxon signed-rank test on `a - b` with zero differences
/// dropped. Exact for at most 15 non-zero differences, otherwise the normal
/// approximation with tie correction.
pub fn wilcoxon(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    signed_rank(a, b, false)
}

/// [`wilcoxon`] forced onto the normal approximation regardless of size.
pub fn wilcoxon_approx(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    signed_rank(a, b, true)
}

fn signed_rank(a: &[f64], b: &[f64], force_approx: bool) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(TrajkitError::InvalidArgument(format!(
            "Wilcoxon needs samples of equal length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|&v| v != 0.0)
        .collect();
    let m = d.len();
    if m == 0 {
        return Err(TrajkitError::Degenerate(
            "identical results: all paired differences are zero".into(),
        ));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (m * (m + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    if m <= WILCOXON_EXACT_MAX && !force_approx {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let counts = signed_rank_counts(&doubled);
        let limit = (2.0 * statistic).round() as usize;
        let below: f64 = counts[..=limit].iter().sum();
        let p = (2.0 * below / 2f64.powi(m as i32)).min(1.0);
        return Ok(WilcoxonResult {
            statistic,
            p,
            m,
            exact: true,
        });
    }
    let mf = m as f64;
    let mean = mf * (mf + 1.0) / 4.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (statistic - mean) / var.sqrt();
    Ok(WilcoxonResult {
        statistic,
        p: (2.0 * normal_sf(z.abs())).min(1.0),
        m,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    PairedT,
    Wilcoxon,
}

/// Normal differences (normality p above `alpha`) go to the paired t-test,
/// everything else to Wilcoxon.
pub fn route(normality_p: f64, alpha: f64) -> TestKind {
    if normality_p > alpha {
        TestKind::PairedT
    } else {
        TestKind::Wilcoxon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub model_a: String,
    pub model_b: String,
    pub normality_w: f64,
    pub normality_p: f64,
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    /// True when the equal-performance null hypothesis is rejected.
    pub reject_null: bool,
    pub degenerate: bool,
}

pub fn compare_models(acc_a: &[f64], acc_b: &[f64], alpha: f64) -> Result<ComparisonResult> {
    if acc_a.len() != acc_b.len() {
        return Err(TrajkitError::InvalidArgument(format!(
            "fold accuracy lists differ in length ({} vs {})",
            acc_a.len(),
            acc_b.len()
        )));
    }
    let diffs: Vec<f64> = acc_a.iter().zip(acc_b).map(|(a, b)| a - b).collect();
    let normality =
        shapiro_wilk(&diffs).map_err(|e| e.context("normality test on paired differences"))?;
    let test = route(normality.p, alpha);
    let (statistic, p_value, degenerate) = match test {
        TestKind::PairedT => {
            let r = paired_ttest(acc_a, acc_b).map_err(|e| e.context("paired t-test"))?;
            (r.t, r.p, r.degenerate)
        }
        TestKind::Wilcoxon => {
            let r = wilcoxon(acc_a, acc_b).map_err(|e| e.context("Wilcoxon signed-rank test"))?;
            (r.statistic, r.p, false)
        }
    };
    Ok(ComparisonResult {
        model_a: String::new(),
        model_b: String::new(),
        normality_w: normality.w,
        normality_p: normality.p,
        test,
        statistic,
        p_value,
        alpha,
        reject_null: p_value < alpha,
        degenerate,
    })
}
