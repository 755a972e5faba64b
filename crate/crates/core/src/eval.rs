//! Metrics: strict/soft per-class F1, accuracy, confusion matrices, χ²
//! feature ranking, the paired t-test, and fold aggregation.
//!
//! The t distribution's CDF is evaluated through a hand-rolled regularized
//! incomplete beta (modified Lentz continued fraction, tolerance 1e−10);
//! its gamma factors reduce to exact half-integer log-gamma sums because
//! the beta arguments are always (ν/2, 1/2).

use crate::corpus::Stance;
use crate::features::FeatureVector;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Fraction of exactly matching positions.
pub fn accuracy<T: PartialEq>(gold: &[T], pred: &[T]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Ok(0.0);
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// One-vs-rest precision/recall/F1 for a single class. `absent` flags a
/// class that appears in neither gold nor predictions (its F1 is 0 by
/// convention, not by failure).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub absent: bool,
}

fn divide(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn per_class_scores(gold: &[Stance], pred: &[Stance]) -> BTreeMap<Stance, ClassScores> {
    let mut out = BTreeMap::new();
    for class in Stance::ALL {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g == class && p == class)
            .count() as f64;
        let fp = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g != class && p == class)
            .count() as f64;
        let fn_ = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g == class && p != class)
            .count() as f64;
        let precision = divide(tp, tp + fp);
        let recall = divide(tp, tp + fn_);
        let f1 = divide(2.0 * precision * recall, precision + recall);
        let support = gold.iter().filter(|&&g| g == class).count();
        out.insert(
            class,
            ClassScores {
                precision,
                recall,
                f1,
                support,
                absent: tp + fp + fn_ == 0.0,
            },
        );
    }
    out
}

/// Per-class one-vs-rest scores against the gold labels as-is.
pub fn strict_f1(gold: &[Stance], pred: &[Stance]) -> Result<BTreeMap<Stance, ClassScores>> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(per_class_scores(gold, pred))
}

/// Like [`strict_f1`], but a turn-derived agree/disagree gold unit
/// predicted neutral is forgiven: it counts as a neutral true positive
/// instead of an agree/disagree miss plus a neutral false positive.
pub fn soft_f1(
    gold: &[(Stance, bool)],
    pred: &[Stance],
) -> Result<BTreeMap<Stance, ClassScores>> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let adjusted: Vec<Stance> = gold
        .iter()
        .zip(pred)
        .map(|(&(g, turn_derived), &p)| {
            if turn_derived && g != Stance::Neutral && p == Stance::Neutral {
                Stance::Neutral
            } else {
                g
            }
        })
        .collect();
    Ok(per_class_scores(&adjusted, pred))
}

/// Full evaluation bundle for one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    /// Rows = gold, columns = predicted, both in [`Stance::ALL`] order.
    pub confusion: [[usize; 3]; 3],
    pub strict: BTreeMap<String, ClassScores>,
    pub soft: BTreeMap<String, ClassScores>,
}

fn stance_pos(s: Stance) -> usize {
    Stance::ALL.iter().position(|&c| c == s).expect("stance enumerated")
}

pub fn evaluate(gold: &[(Stance, bool)], pred: &[Stance]) -> Result<EvalReport> {
    let plain: Vec<Stance> = gold.iter().map(|&(g, _)| g).collect();
    let strict = strict_f1(&plain, pred)?;
    let soft = soft_f1(gold, pred)?;
    let mut confusion = [[0usize; 3]; 3];
    for (&(g, _), &p) in gold.iter().zip(pred) {
        confusion[stance_pos(g)][stance_pos(p)] += 1;
    }
    Ok(EvalReport {
        n: gold.len(),
        accuracy: accuracy(&plain, pred)?,
        confusion,
        strict: strict
            .into_iter()
            .map(|(k, v)| (k.as_str().to_string(), v))
            .collect(),
        soft: soft
            .into_iter()
            .map(|(k, v)| (k.as_str().to_string(), v))
            .collect(),
    })
}

// --- χ² feature ranking ---------------------------------------------------

/// 2×2 χ² from the contingency counts
/// `a` = present∧class, `b` = present∧¬class, `c` = absent∧class,
/// `d` = absent∧¬class; any degenerate margin yields 0.
pub fn chi2(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let n = a + b + c + d;
    let margins = (a + b) * (c + d) * (a + c) * (b + d);
    if margins == 0.0 {
        return 0.0;
    }
    let diff = a * d - b * c;
    n * diff * diff / margins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub chi2: f64,
    /// True when the feature leans toward the positive partition
    /// (ad ≥ bc).
    pub toward_class: bool,
}

/// Rank binary feature presence against a binary class partition;
/// descending χ², ties broken by name.
pub fn chi2_rank<'a, I>(items: I) -> Vec<RankedFeature>
where
    I: IntoIterator<Item = (&'a FeatureVector, bool)>,
{
    let mut in_class = 0usize;
    let mut total = 0usize;
    let mut present: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (fv, is_class) in items {
        total += 1;
        if is_class {
            in_class += 1;
        }
        for (name, value) in fv.iter() {
            if value != 0.0 {
                let slot = present.entry(name.to_string()).or_insert((0, 0));
                if is_class {
                    slot.0 += 1;
                } else {
                    slot.1 += 1;
                }
            }
        }
    }
    let out_class = total - in_class;
    let mut ranked: Vec<RankedFeature> = present
        .into_iter()
        .map(|(name, (a, b))| {
            let c = in_class - a;
            let d = out_class - b;
            RankedFeature {
                toward_class: (a * d) as f64 >= (b * c) as f64,
                chi2: chi2(a, b, c, d),
                name,
            }
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.chi2
            .partial_cmp(&x.chi2)
            .expect("chi2 values are finite")
            .then_with(|| x.name.cmp(&y.name))
    });
    ranked
}

/// TSV: feature TAB chi2 TAB class-direction.
pub fn chi2_tsv(ranked: &[RankedFeature], class_name: &str, other_name: &str) -> String {
    let mut out = String::new();
    for r in ranked {
        let direction = if r.toward_class { class_name } else { other_name };
        out.push_str(&format!("{}\t{:.6}\t{}\n", r.name, r.chi2, direction));
    }
    out
}

// --- Paired t-test ---------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    /// Zero-variance nonzero differences: t is infinite, p pinned to 0.
    pub degenerate: bool,
}

/// ln Γ(twice/2) for twice ≥ 1, by exact half-integer recursion:
/// Γ(1/2) = √π and Γ(z+1) = zΓ(z).
fn ln_gamma_half(twice: u64) -> f64 {
    assert!(twice >= 1);
    if twice.is_multiple_of(2) {
        // Γ(n) = (n−1)!
        let n = twice / 2;
        (1..n).map(|k| (k as f64).ln()).sum()
    } else {
        let m = (twice - 1) / 2;
        let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
        ln_sqrt_pi + (1..=m).map(|k| (k as f64 - 0.5).ln()).sum::<f64>()
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const TOL: f64 = 1e-10;
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
    for m in 1..=300 {
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
        if (del - 1.0).abs() < TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b) with half-integer arguments given
/// as doubled integers (`twice_a`/2, `twice_b`/2).
fn reg_inc_beta(x: f64, twice_a: u64, twice_b: u64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = twice_a as f64 / 2.0;
    let b = twice_b as f64 / 2.0;
    let ln_beta = ln_gamma_half(twice_a) + ln_gamma_half(twice_b) - ln_gamma_half(twice_a + twice_b);
    let bt = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_cf(x, a, b) / a
    } else {
        1.0 - bt * beta_cf(1.0 - x, b, a) / b
    }
}

/// Two-sided p for Student's t with `nu` degrees of freedom:
/// `p = I_{ν/(ν+t²)}(ν/2, 1/2)`.
pub fn t_two_sided_p(t: f64, nu: u64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let nu_f = nu as f64;
    let x = nu_f / (nu_f + t * t);
    reg_inc_beta(x, nu, 1).clamp(0.0, 1.0)
}

/// Two-sided paired t-test over aligned score vectors (paired by fold).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            gold: a.len(),
            pred: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewPairs(a.len()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTest {
            t: 0.0,
            p: 1.0,
            degenerate: false,
        });
    }
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        // Every difference identical and nonzero: infinite t.
        return Ok(TTest {
            t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            p: 0.0,
            degenerate: true,
        });
    }
    let t = mean / (var / n).sqrt();
    Ok(TTest {
        t,
        p: t_two_sided_p(t, a.len() as u64 - 1),
        degenerate: false,
    })
}

// --- Fold aggregation -------------------------------------------------------

/// Mean and sample standard deviation (n−1; 0 when n < 2).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate named per-fold metrics into mean ± sd, keyed by metric name.
pub fn summarize_folds(
    folds: &[BTreeMap<String, f64>],
) -> BTreeMap<String, (f64, f64)> {
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for fold in folds {
        for (name, &value) in fold {
            by_metric.entry(name.clone()).or_default().push(value);
        }
    }
    by_metric
        .into_iter()
        .map(|(name, values)| (name, mean_sd(&values)))
        .collect()
}
