//! Agreement metrics between predicted and human scores.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::{Corpus, Criterion};
use crate::stats::{self, StdConvention};

/// Significance level used to flag correlations.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: {0} input is constant")]
    ConstantInput(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("manuscript \"{0}\" has no scores for the criterion")]
    MissingReviews(String),
    #[error("human baseline needs at least 2 papers with 2+ reviews, found {0}")]
    InsufficientReviews(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    pub rho: f64,
    pub pvalue: f64,
    pub n: usize,
    pub significant: bool,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ConstantInput("first"));
    }
    if syy == 0.0 {
        return Err(MetricsError::ConstantInput("second"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a correlation from the t approximation with
/// `n - 2` degrees of freedom. With fewer than 3 points nothing can be
/// inferred and the p-value is 1.
pub fn t_approx_pvalue(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom < 1e-12 {
        return 0.0;
    }
    let t = rho.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrResult, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(MetricsError::TooFew { needed: 2, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))?;
    let pvalue = t_approx_pvalue(rho, n);
    Ok(CorrResult {
        rho,
        pvalue,
        n,
        significant: pvalue <= SIGNIFICANCE_LEVEL,
    })
}

/// Exact two-sided permutation p-value of Spearman's rho: the share of
/// permutations of `y` whose |rho| is at least the observed one.
/// Enumerates all `n!` orderings, so it is restricted to `n <= 10`.
pub fn exact_permutation_pvalue(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    let observed = spearman(x, y)?.rho.abs();
    let n = x.len();
    if n > 10 {
        return Err(MetricsError::TooFew { needed: n, got: 10 });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mut perm: Vec<usize> = (0..n).collect();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut permuted = vec![0.0; n];
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut visit = |perm: &[usize]| {
        for (slot, &p) in permuted.iter_mut().zip(perm) {
            *slot = ry[p];
        }
        let r = pearson(&rx, &permuted).expect("non-constant ranks");
        total += 1;
        if r.abs() >= observed - 1e-12 {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// The review closest to `prediction`; ties go to the smaller score.
pub fn closest_score(prediction: f64, reviews: &[f64]) -> Option<f64> {
    reviews.iter().copied().reduce(|best, s| {
        let (db, ds) = ((best - prediction).abs(), (s - prediction).abs());
        if ds < db || (ds == db && s < best) {
            s
        } else {
            best
        }
    })
}

/// Spearman between predictions and, per paper, the single human score
/// nearest the prediction.
pub fn closest_human_corr(
    predictions: &BTreeMap<String, f64>,
    corpus: &Corpus,
    criterion: &Criterion,
) -> Result<CorrResult, MetricsError> {
    let mut preds = Vec::with_capacity(predictions.len());
    let mut targets = Vec::with_capacity(predictions.len());
    for (id, &p) in predictions {
        let reviews = corpus
            .get(id)
            .and_then(|m| m.scores(criterion))
            .ok_or_else(|| MetricsError::MissingReviews(id.clone()))?;
        preds.push(p);
        targets.push(closest_score(p, reviews).expect("nonempty reviews"));
    }
    spearman(&preds, &targets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanBaseline {
    /// Mean rho over trials where it was defined.
    pub mean_rho: f64,
    pub std_rho: f64,
    pub trials: usize,
    pub defined_trials: usize,
    pub papers: usize,
}

/// Agreement of one randomly held-out review with the mean of the rest.
pub fn human_baseline(
    corpus: &Corpus,
    criterion: &Criterion,
    trials: usize,
    seed: u64,
) -> Result<HumanBaseline, MetricsError> {
    let lists: Vec<&[f64]> = corpus
        .eligible(criterion)
        .filter_map(|m| m.scores(criterion))
        .filter(|r| r.len() >= 2)
        .collect();
    if lists.len() < 2 {
        return Err(MetricsError::InsufficientReviews(lists.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = vec![0.0; lists.len()];
    let mut rest = vec![0.0; lists.len()];
    let mut rhos = Vec::with_capacity(trials);
    for _ in 0..trials {
        for (k, reviews) in lists.iter().enumerate() {
            let j = rng.random_range(0..reviews.len());
            picks[k] = reviews[j];
            let others: f64 = reviews.iter().sum::<f64>() - reviews[j];
            rest[k] = others / (reviews.len() - 1) as f64;
        }
        if let Ok(r) = spearman(&picks, &rest) {
            rhos.push(r.rho);
        }
    }
    let (mean_rho, std_rho) = if rhos.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (stats::mean(&rhos), stats::std_dev(&rhos, StdConvention::Population))
    };
    Ok(HumanBaseline {
        mean_rho,
        std_rho,
        trials,
        defined_trials: rhos.len(),
        papers: lists.len(),
    })
}

/// Absolute-error histogram over `[0,1) [1,2) [2,3) [3,∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBins {
    pub counts: [usize; 4],
    pub fractions: [f64; 4],
}

impl ErrorBins {
    pub const LABELS: [&'static str; 4] = ["[0,1)", "[1,2)", "[2,3)", "[3,inf)"];

    /// Share of predictions within `threshold` (a whole number of bins).
    pub fn fraction_below(&self, threshold: usize) -> f64 {
        self.fractions[..threshold.min(4)].iter().sum()
    }
}

pub fn abs_error_bins(predictions: &[f64], labels: &[f64]) -> Result<ErrorBins, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(MetricsError::TooFew { needed: 1, got: 0 });
    }
    let mut counts = [0usize; 4];
    for (p, l) in predictions.iter().zip(labels) {
        let err = (p - l).abs();
        let bin = if err.is_nan() { 3 } else { (err.floor() as usize).min(3) };
        counts[bin] += 1;
    }
    let n = predictions.len() as f64;
    Ok(ErrorBins {
        counts,
        fractions: counts.map(|c| c as f64 / n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
    pub total: usize,
}

impl Histogram {
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let lo = self.lo + k as f64 * self.bin_width;
        (lo, (lo + self.bin_width).min(self.hi))
    }

    /// Fractions for underflow, each bin, then overflow.
    pub fn fractions(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        std::iter::once(self.underflow)
            .chain(self.counts.iter().copied())
            .chain(std::iter::once(self.overflow))
            .map(|c| c as f64 / n)
            .collect()
    }
}

/// Fixed-range histogram. The top edge `hi` falls in the last bin.
pub fn score_histogram(values: &[f64], bin_width: f64, lo: f64, hi: f64) -> Histogram {
    assert!(bin_width > 0.0 && hi > lo, "histogram needs bin_width > 0 and hi > lo");
    let bins = ((hi - lo) / bin_width).ceil() as usize;
    let mut h = Histogram {
        lo,
        hi,
        bin_width,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
        total: values.len(),
    };
    for &v in values {
        if v < lo {
            h.underflow += 1;
        } else if v > hi || v.is_nan() {
            h.overflow += 1;
        } else {
            let k = (((v - lo) / bin_width).floor() as usize).min(bins - 1);
            h.counts[k] += 1;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    pub count: usize,
    pub human_mean: f64,
    pub human_std: f64,
    pub ours_mean: f64,
    pub ours_std: f64,
    pub human_min: f64,
    pub ours_min: f64,
    pub human_max: f64,
    pub ours_max: f64,
    /// `|human_mean - ours_mean| / human_mean`, in percent.
    pub diff_pct: f64,
}

pub const NO_DOMAIN: &str = "None";

/// Relative gap between mean scores, in percent of the human mean.
pub fn mean_diff_pct(human_mean: f64, ours_mean: f64) -> f64 {
    if human_mean > 0.0 {
        (human_mean - ours_mean).abs() / human_mean * 100.0
    } else {
        f64::NAN
    }
}

/// Per-domain summaries, sorted by domain name.
pub fn domain_stats(
    predictions: &[f64],
    labels: &[f64],
    domains: &[Option<String>],
) -> Result<Vec<DomainRow>, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.len() != domains.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), domains.len()));
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((p, l), d) in predictions.iter().zip(labels).zip(domains) {
        let entry = groups.entry(d.as_deref().unwrap_or(NO_DOMAIN)).or_default();
        entry.0.push(*l);
        entry.1.push(*p);
    }
    Ok(groups
        .into_iter()
        .map(|(domain, (human, ours))| {
            let (human_min, human_max) = stats::min_max(&human);
            let (ours_min, ours_max) = stats::min_max(&ours);
            let human_mean = stats::mean(&human);
            let ours_mean = stats::mean(&ours);
            DomainRow {
                domain: domain.to_string(),
                count: human.len(),
                human_mean,
                human_std: stats::std_dev(&human, StdConvention::Population),
                ours_mean,
                ours_std: stats::std_dev(&ours, StdConvention::Population),
                human_min,
                ours_min,
                human_max,
                ours_max,
                diff_pct: mean_diff_pct(human_mean, ours_mean),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_manifest;

    #[test]
    fn perfect_agreement() {
        let r = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-15);
        assert_eq!(r.n, 3);
    }

    #[test]
    fn rank_difference_example() {
        // d = [1, -1, 1, -1, 0], sum d^2 = 4, 1 - 6*4/120 = 0.8
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r.rho - 0.8).abs() < 1e-12);
    }

    #[test]
    fn tied_ranks_example() {
        // ranks [1, 2.5, 2.5, 4] vs [1, 2, 3, 4]: 4.5 / sqrt(4.5 * 5)
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r.rho - 4.5 / (22.5f64).sqrt()).abs() < 1e-12);
        assert!((r.rho - 0.9487).abs() < 1e-4);
    }

    #[test]
    fn spearman_errors() {
        assert_eq!(
            spearman(&[1.0, 2.0], &[1.0]).unwrap_err(),
            MetricsError::LengthMismatch(2, 1)
        );
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::ConstantInput("first"))
        ));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(MetricsError::TooFew { .. })));
    }

    #[test]
    fn pvalue_against_permutation_distribution() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0];
        let r = spearman(&x, &y).unwrap();
        let exact = exact_permutation_pvalue(&x, &y).unwrap();
        // the t approximation is coarse at n = 7; same side of 0.05 and close
        assert!(r.significant && exact <= 0.05, "t {} exact {exact}", r.pvalue);
        assert!((r.pvalue - exact).abs() < 0.02, "t {} exact {exact}", r.pvalue);
    }

    #[test]
    fn perfect_correlation_pvalue_is_zero() {
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.pvalue, 0.0);
        assert!(r.significant);
        let exact = exact_permutation_pvalue(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((exact - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn closest_score_rules() {
        assert_eq!(closest_score(5.2, &[3.0, 5.0, 8.0]), Some(5.0));
        assert_eq!(closest_score(6.0, &[5.0, 7.0]), Some(5.0));
        assert_eq!(closest_score(6.0, &[7.0, 5.0]), Some(5.0));
        assert_eq!(closest_score(6.0, &[]), None);
    }

    fn corpus(reviews: &[&[f64]]) -> Corpus {
        let lines: Vec<String> = reviews
            .iter()
            .enumerate()
            .map(|(i, r)| {
                serde_json::json!({"id": format!("p{i}"), "title": "t", "abstract": "a",
                    "reviews": {"overall_quality": r}})
                .to_string()
            })
            .collect();
        parse_manifest(&lines.join("\n")).unwrap()
    }

    #[test]
    fn closest_human_three_paper_fixture() {
        let c = corpus(&[&[1.0, 3.0], &[5.0, 5.0], &[7.0, 9.0]]);
        let preds = BTreeMap::from([
            ("p0".to_string(), 2.0),
            ("p1".to_string(), 5.0),
            ("p2".to_string(), 8.0),
        ]);
        let r = closest_human_corr(&preds, &c, &"overall_quality".into()).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closest_human_missing_paper() {
        let c = corpus(&[&[1.0, 3.0], &[5.0]]);
        let preds = BTreeMap::from([("p0".to_string(), 2.0), ("zz".to_string(), 5.0)]);
        assert!(matches!(
            closest_human_corr(&preds, &c, &"overall_quality".into()),
            Err(MetricsError::MissingReviews(id)) if id == "zz"
        ));
    }

    #[test]
    fn human_baseline_uniform_reviews() {
        let c = corpus(&[&[3.0, 3.0], &[5.0, 5.0, 5.0], &[8.0, 8.0]]);
        let hb = human_baseline(&c, &"overall_quality".into(), 20, 1).unwrap();
        assert!((hb.mean_rho - 1.0).abs() < 1e-12);
        assert_eq!(hb.defined_trials, 20);
        let again = human_baseline(&c, &"overall_quality".into(), 20, 1).unwrap();
        assert_eq!(hb, again);
    }

    #[test]
    fn human_baseline_needs_two_multi_review_papers() {
        let c = corpus(&[&[3.0, 4.0], &[5.0]]);
        assert_eq!(
            human_baseline(&c, &"overall_quality".into(), 5, 0).unwrap_err(),
            MetricsError::InsufficientReviews(1)
        );
    }

    #[test]
    fn error_bins_case_pairs() {
        let preds = [7.22, 1.61, 4.80, 5.21];
        let labels = [7.50, 1.50, 2.50, 7.33];
        let b = abs_error_bins(&preds, &labels).unwrap();
        assert_eq!(b.counts, [2, 0, 2, 0]);
        assert_eq!(b.fraction_below(2), 0.5);
    }

    #[test]
    fn error_bins_edges() {
        let b = abs_error_bins(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!(b.counts, [2, 0, 0, 0]);
        let b = abs_error_bins(&[10.0], &[1.0]).unwrap();
        assert_eq!(b.counts, [0, 0, 0, 1]);
        let b = abs_error_bins(&[2.0], &[1.0]).unwrap();
        assert_eq!(b.counts, [0, 1, 0, 0]);
        assert!(abs_error_bins(&[1.0], &[]).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = score_histogram(&[5.5; 4], 1.0, 1.0, 10.0);
        assert_eq!(h.counts.len(), 9);
        assert_eq!(h.counts[4], 4);
        assert_eq!(h.bin_edges(4), (5.0, 6.0));
        let h = score_histogram(&[0.2, 10.0, 10.5], 1.0, 1.0, 10.0);
        assert_eq!((h.underflow, h.counts[8], h.overflow), (1, 1, 1));
        let total: f64 = h.fractions().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_rows_match_reference_gaps() {
        assert!((mean_diff_pct(6.1155, 5.3296) - 12.85).abs() < 0.01);
        assert!((mean_diff_pct(3.5500, 3.6157) - 1.85).abs() < 0.01);
    }

    #[test]
    fn domain_grouping() {
        let rows = domain_stats(
            &[5.0, 6.0, 4.0],
            &[6.0, 6.0, 3.0],
            &[Some("Theory".into()), Some("Theory".into()), None],
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].domain, "None");
        assert_eq!((rows[0].human_std, rows[0].human_min, rows[0].human_max), (0.0, 3.0, 3.0));
        assert_eq!(rows[1].count, 2);
        assert!((rows[1].ours_mean - 5.5).abs() < 1e-12);
        assert!((rows[1].diff_pct - 0.5 / 6.0 * 100.0).abs() < 1e-12);
    }
}
