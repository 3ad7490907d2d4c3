//! Scoring and cost-effectiveness analytics.
//!
//! Two families live here. Quality metrics: concept error rate (CER) from
//! edit-distance alignment, and exact-tuple intent accuracy. Cost metrics:
//! kWh per metric point between two models (kWh/p), relative cost
//! reduction, relative performance deltas, and the kWh -> grams-of-CO2
//! conversion at a fixed grid coefficient.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Default grid carbon intensity, grams of CO2 per kWh.
pub const CO2_G_PER_KWH: f64 = 51.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty reference: corpus has zero gold concepts")]
    EmptyReference,
    #[error("no samples")]
    NoSamples,
    #[error("metric kinds differ: {0} vs {1}")]
    MetricKindMismatch(MetricKind, MetricKind),
    #[error("empty record group")]
    EmptyGroup,
    #[error("records in a group must share input features ({0} vs {1})")]
    MixedInputFeatures(String, String),
    #[error("reference kWh must be positive, got {0}")]
    NonPositiveKwh(f64),
    #[error("reference metric must be positive, got {0}")]
    NonPositiveMetric(f64),
    #[error("kWh must be nonnegative, got {0}")]
    NegativeKwh(f64),
    #[error("CO2 coefficient must be positive, got {0}")]
    NonPositiveCoefficient(f64),
    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// How a model's dev/test metric is read: lower-is-better error rate or
/// higher-is-better accuracy, both in percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ErrorRate,
    Accuracy,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::ErrorRate => write!(f, "error_rate"),
            MetricKind::Accuracy => write!(f, "accuracy"),
        }
    }
}

/// Counts from a minimum-cost alignment of gold and predicted label
/// sequences.
///
/// Among all minimum-cost alignments the one with the most hits is
/// reported, which makes the substitution/insertion/deletion split unique
/// and symmetric (swapping the sequences exchanges insertions and
/// deletions). Always: `hits + substitutions + deletions == gold_len`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentStats {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub hits: usize,
    pub gold_len: usize,
}

impl AlignmentStats {
    /// Total edit cost S + I + D (the Levenshtein distance).
    pub fn total_errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn merge(&mut self, other: &AlignmentStats) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.hits += other.hits;
        self.gold_len += other.gold_len;
    }
}

impl std::iter::Sum for AlignmentStats {
    fn sum<I: Iterator<Item = AlignmentStats>>(iter: I) -> Self {
        let mut acc = AlignmentStats::default();
        for s in iter {
            acc.merge(&s);
        }
        acc
    }
}

/// One trained model's ledger row, as persisted to the records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub strategy: String,
    pub input_features: String,
    pub param_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_param_count: Option<u64>,
    pub kwh: f64,
    pub grams_co2: u64,
    pub wall_time_s: f64,
    /// Dev metric in percent (CER or accuracy, per `metric_kind`).
    pub dev_metric: f64,
    /// Test metric in percent; this is the value cost comparisons use.
    pub test_metric: f64,
    pub metric_kind: MetricKind,
}

impl ExperimentRecord {
    /// Field-level sanity checks for records read from external files.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(MetricsError::InvalidRecord {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.kwh >= 0.0) {
            return fail("kwh must be nonnegative");
        }
        if !(self.wall_time_s >= 0.0) {
            return fail("wall_time_s must be nonnegative");
        }
        for (name, value) in [("dev_metric", self.dev_metric), ("test_metric", self.test_metric)] {
            match self.metric_kind {
                MetricKind::ErrorRate if !(value >= 0.0) => {
                    return fail(&format!("{name} must be a nonnegative error rate"));
                }
                MetricKind::Accuracy if !(0.0..=100.0).contains(&value) => {
                    return fail(&format!("{name} must be an accuracy in [0, 100]"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Cost of one point of metric improvement between two models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KwhPerPoint {
    /// Extra kWh per point gained; always >= 0.
    Finite(f64),
    /// More expensive without being better: no amount of extra energy
    /// bought improvement.
    Infinite,
    /// The row is the group's cheapest model, i.e. the comparison
    /// reference.
    IsReference,
    /// Not comparable (e.g. the only model with its input features).
    Undefined(String),
}

impl fmt::Display for KwhPerPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KwhPerPoint::Finite(v) => write!(f, "{v:.3}"),
            KwhPerPoint::Infinite => write!(f, "inf"),
            KwhPerPoint::IsReference => write!(f, "M2"),
            KwhPerPoint::Undefined(_) => write!(f, "-"),
        }
    }
}

/// Align gold and predicted label sequences with unit edit costs and
/// return the error counts.
///
/// Ties between minimum-cost alignments are broken toward the most hits,
/// which pins down a unique, direction-symmetric count split.
pub fn align_concepts<T: PartialEq>(gold: &[T], pred: &[T]) -> AlignmentStats {
    let n = gold.len();
    let m = pred.len();

    // DP over (cost, hits): minimize cost, then maximize hits. Both are
    // additive along an alignment path, so cell-wise lexicographic
    // selection is exact.
    #[derive(Clone, Copy)]
    struct Cell {
        cost: u32,
        hits: u32,
    }
    let better = |a: Cell, b: Cell| -> Cell {
        if a.cost < b.cost || (a.cost == b.cost && a.hits >= b.hits) {
            a
        } else {
            b
        }
    };

    let mut prev: Vec<Cell> = (0..=m as u32).map(|j| Cell { cost: j, hits: 0 }).collect();
    let mut curr = prev.clone();
    for i in 1..=n {
        curr[0] = Cell { cost: i as u32, hits: 0 };
        for j in 1..=m {
            let diag = if gold[i - 1] == pred[j - 1] {
                Cell { cost: prev[j - 1].cost, hits: prev[j - 1].hits + 1 }
            } else {
                Cell { cost: prev[j - 1].cost + 1, hits: prev[j - 1].hits }
            };
            let del = Cell { cost: prev[j].cost + 1, hits: prev[j].hits };
            let ins = Cell { cost: curr[j - 1].cost + 1, hits: curr[j - 1].hits };
            curr[j] = better(better(diag, del), ins);
        }
        std::mem::swap(&mut prev, &mut curr);
    }

    let cost = prev[m].cost as usize;
    let hits = prev[m].hits as usize;
    // With the hit count fixed, the remaining counts are determined by
    // hits + S + D = n, hits + S + I = m, S + I + D = cost.
    let substitutions = n + m - 2 * hits - cost;
    AlignmentStats {
        substitutions,
        insertions: m - hits - substitutions,
        deletions: n - hits - substitutions,
        hits,
        gold_len: n,
    }
}

/// Concept error rate (S + I + D) / gold length.
///
/// Pass a per-utterance [`AlignmentStats`] or a corpus aggregate (sum the
/// per-utterance stats first; counts are summed before dividing).
pub fn concept_error_rate(stats: &AlignmentStats) -> Result<f64> {
    if stats.gold_len == 0 {
        return Err(MetricsError::EmptyReference);
    }
    Ok(stats.total_errors() as f64 / stats.gold_len as f64)
}

/// Exact-match intent accuracy in percent.
///
/// An intent is a tuple of attributes; a prediction counts only if every
/// attribute matches.
pub fn intent_accuracy<T: PartialEq>(pairs: &[(T, T)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let correct = pairs.iter().filter(|(gold, pred)| gold == pred).count();
    Ok(100.0 * correct as f64 / pairs.len() as f64)
}

/// Extra kWh spent per point of test-metric improvement between two
/// models.
///
/// The arguments are oriented internally so the more expensive model
/// plays M1; callers may pass them in either order. When extra cost buys
/// no improvement the value is [`KwhPerPoint::Infinite`]; two models with
/// equal cost compare as `Finite(0)`.
pub fn kwh_per_point(m1: &ExperimentRecord, m2: &ExperimentRecord) -> Result<KwhPerPoint> {
    if m1.metric_kind != m2.metric_kind {
        return Err(MetricsError::MetricKindMismatch(m1.metric_kind, m2.metric_kind));
    }
    let (m1, m2) = if m1.kwh >= m2.kwh { (m1, m2) } else { (m2, m1) };
    let numerator = m1.kwh - m2.kwh;
    let denominator = match m1.metric_kind {
        MetricKind::ErrorRate => m2.test_metric - m1.test_metric,
        MetricKind::Accuracy => m1.test_metric - m2.test_metric,
    };
    if numerator == 0.0 {
        return Ok(KwhPerPoint::Finite(0.0));
    }
    if denominator <= 0.0 {
        return Ok(KwhPerPoint::Infinite);
    }
    Ok(KwhPerPoint::Finite(numerator / denominator))
}

/// Pick the comparison reference of a group: the cheapest model among
/// those sharing input features, ties broken by smallest id.
pub fn select_reference(group: &[ExperimentRecord]) -> Result<&ExperimentRecord> {
    let first = group.first().ok_or(MetricsError::EmptyGroup)?;
    for r in group {
        if r.input_features != first.input_features {
            return Err(MetricsError::MixedInputFeatures(
                first.input_features.clone(),
                r.input_features.clone(),
            ));
        }
    }
    Ok(group
        .iter()
        .min_by(|a, b| a.kwh.total_cmp(&b.kwh).then_with(|| a.id.cmp(&b.id)))
        .expect("group is nonempty"))
}

/// Percent of the expensive model's kWh saved by the cheap one.
pub fn relative_cost_reduction(expensive: &ExperimentRecord, cheap: &ExperimentRecord) -> Result<f64> {
    if !(expensive.kwh > 0.0) {
        return Err(MetricsError::NonPositiveKwh(expensive.kwh));
    }
    Ok(100.0 * (expensive.kwh - cheap.kwh) / expensive.kwh)
}

/// Signed performance delta of `other` relative to `reference`, in
/// percent of the reference's test metric. Positive is a loss, negative a
/// gain, for either metric kind.
pub fn relative_performance_delta(
    reference: &ExperimentRecord,
    other: &ExperimentRecord,
) -> Result<f64> {
    if reference.metric_kind != other.metric_kind {
        return Err(MetricsError::MetricKindMismatch(reference.metric_kind, other.metric_kind));
    }
    if !(reference.test_metric > 0.0) {
        return Err(MetricsError::NonPositiveMetric(reference.test_metric));
    }
    let delta = match reference.metric_kind {
        MetricKind::ErrorRate => other.test_metric - reference.test_metric,
        MetricKind::Accuracy => reference.test_metric - other.test_metric,
    };
    Ok(100.0 * delta / reference.test_metric)
}

/// Convert kWh to grams of CO2 at `coefficient` grams per kWh, rounded to
/// the nearest gram.
pub fn grams_co2(kwh: f64, coefficient: f64) -> Result<u64> {
    if !(kwh >= 0.0) {
        return Err(MetricsError::NegativeKwh(kwh));
    }
    if !(coefficient > 0.0) {
        return Err(MetricsError::NonPositiveCoefficient(coefficient));
    }
    Ok((kwh * coefficient).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Test-only oracle: enumerate every alignment of `gold` and `pred`
    /// (no memoization, no shared code with `align_concepts`) and keep
    /// the best by (min cost, max hits).
    pub(crate) fn oracle_align<T: PartialEq>(gold: &[T], pred: &[T]) -> AlignmentStats {
        fn walk<T: PartialEq>(
            gold: &[T],
            pred: &[T],
            i: usize,
            j: usize,
            acc: AlignmentStats,
            best: &mut Option<AlignmentStats>,
        ) {
            if i == gold.len() && j == pred.len() {
                let mut done = acc;
                done.gold_len = gold.len();
                let replace = match best {
                    None => true,
                    Some(b) => {
                        done.total_errors() < b.total_errors()
                            || (done.total_errors() == b.total_errors() && done.hits > b.hits)
                    }
                };
                if replace {
                    *best = Some(done);
                }
                return;
            }
            if i < gold.len() && j < pred.len() {
                let mut next = acc;
                if gold[i] == pred[j] {
                    next.hits += 1;
                } else {
                    next.substitutions += 1;
                }
                walk(gold, pred, i + 1, j + 1, next, best);
            }
            if i < gold.len() {
                let mut next = acc;
                next.deletions += 1;
                walk(gold, pred, i + 1, j, next, best);
            }
            if j < pred.len() {
                let mut next = acc;
                next.insertions += 1;
                walk(gold, pred, i, j + 1, next, best);
            }
        }
        let mut best = None;
        walk(gold, pred, 0, 0, AlignmentStats::default(), &mut best);
        best.expect("at least one alignment exists")
    }

    fn record(id: &str, kwh: f64, test_metric: f64, kind: MetricKind) -> ExperimentRecord {
        ExperimentRecord {
            id: id.to_string(),
            strategy: "1step".to_string(),
            input_features: "base".to_string(),
            param_count: 1000,
            external_param_count: None,
            kwh,
            grams_co2: 0,
            wall_time_s: 0.0,
            dev_metric: test_metric,
            test_metric,
            metric_kind: kind,
        }
    }

    fn cer_record(id: &str, kwh: f64, cer: f64) -> ExperimentRecord {
        record(id, kwh, cer, MetricKind::ErrorRate)
    }

    #[test]
    fn align_identity() {
        let s = align_concepts(&[1, 2, 3], &[1, 2, 3]);
        assert_eq!(
            s,
            AlignmentStats { substitutions: 0, insertions: 0, deletions: 0, hits: 3, gold_len: 3 }
        );
    }

    #[test]
    fn align_single_deletion() {
        // Frozen from the exhaustive-alignment oracle.
        let s = align_concepts(&['A', 'B', 'C'], &['A', 'C']);
        assert_eq!(s, oracle_align(&['A', 'B', 'C'], &['A', 'C']));
        assert_eq!(
            s,
            AlignmentStats { substitutions: 0, insertions: 0, deletions: 1, hits: 2, gold_len: 3 }
        );
    }

    #[test]
    fn align_mixed_cost_two() {
        let s = align_concepts(&['A', 'B'], &['B', 'B', 'C']);
        assert_eq!(s.total_errors(), 2);
        assert_eq!(s, oracle_align(&['A', 'B'], &['B', 'B', 'C']));
    }

    #[test]
    fn align_empty_sides() {
        let empty: [u8; 0] = [];
        let s = align_concepts(&empty, &[1u8, 2, 3]);
        assert_eq!(s.insertions, 3);
        assert_eq!(s.gold_len, 0);
        let s = align_concepts(&[1u8, 2, 3], &empty);
        assert_eq!(s.deletions, 3);
        assert_eq!(align_concepts(&empty, &empty).total_errors(), 0);
    }

    #[test]
    fn cer_examples() {
        let zero = AlignmentStats { hits: 3, gold_len: 3, ..Default::default() };
        assert_eq!(concept_error_rate(&zero).unwrap(), 0.0);

        let one_del = AlignmentStats { deletions: 1, hits: 2, gold_len: 3, ..Default::default() };
        let cer = concept_error_rate(&one_del).unwrap();
        assert!((cer - 1.0 / 3.0).abs() < 1e-12);

        // Corpus-level CER sums counts before dividing: (2+0)/(4+6).
        let a = AlignmentStats { substitutions: 2, hits: 2, gold_len: 4, ..Default::default() };
        let b = AlignmentStats { hits: 6, gold_len: 6, ..Default::default() };
        let total: AlignmentStats = [a, b].into_iter().sum();
        assert!((concept_error_rate(&total).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cer_empty_reference_is_an_error() {
        let stats = AlignmentStats { insertions: 2, ..Default::default() };
        assert!(matches!(concept_error_rate(&stats), Err(MetricsError::EmptyReference)));
    }

    #[test]
    fn intent_accuracy_examples() {
        type I = (&'static str, &'static str, &'static str);
        let same: Vec<(I, I)> = vec![
            (("inc", "heat", "kitchen"), ("inc", "heat", "kitchen")),
            (("dec", "light", "bedroom"), ("dec", "light", "bedroom")),
        ];
        assert_eq!(intent_accuracy(&same).unwrap(), 100.0);

        // One attribute off makes the whole tuple wrong.
        let mut pairs = same.clone();
        pairs.push((("inc", "heat", "kitchen"), ("inc", "heat", "bedroom")));
        pairs.push((("on", "tv", "hall"), ("on", "tv", "hall")));
        assert_eq!(intent_accuracy(&pairs).unwrap(), 75.0);

        let none: Vec<(I, I)> = vec![];
        assert!(matches!(intent_accuracy(&none), Err(MetricsError::NoSamples)));
    }

    #[test]
    fn kwh_per_point_published_values() {
        // (kwh1, metric1, kwh2, metric2, expected)
        let error_rate_cases = [
            (6.651, 28.95, 2.407, 44.50, 0.273),
            (3.983, 22.51, 1.815, 23.48, 2.235),
        ];
        for (k1, m1, k2, m2, want) in error_rate_cases {
            let got = kwh_per_point(&cer_record("a", k1, m1), &cer_record("b", k2, m2)).unwrap();
            match got {
                KwhPerPoint::Finite(v) => assert!((v - want).abs() < 5e-4, "{v} vs {want}"),
                other => panic!("expected finite, got {other:?}"),
            }
        }

        let inf = kwh_per_point(&cer_record("a", 2.989, 87.32), &cer_record("b", 1.708, 68.50));
        assert_eq!(inf.unwrap(), KwhPerPoint::Infinite);

        let acc = kwh_per_point(
            &record("a", 1.068, 99.66, MetricKind::Accuracy),
            &record("b", 0.668, 98.89, MetricKind::Accuracy),
        )
        .unwrap();
        match acc {
            KwhPerPoint::Finite(v) => assert!((v - 0.519).abs() < 5e-4),
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn kwh_per_point_degenerate_and_errors() {
        let a = cer_record("a", 1.5, 20.0);
        assert_eq!(kwh_per_point(&a, &a).unwrap(), KwhPerPoint::Finite(0.0));

        // Caller passed the cheap model first; roles swap internally.
        let m1 = cer_record("m1", 6.651, 28.95);
        let m2 = cer_record("m2", 2.407, 44.50);
        assert_eq!(kwh_per_point(&m2, &m1).unwrap(), kwh_per_point(&m1, &m2).unwrap());

        let acc = record("x", 1.0, 50.0, MetricKind::Accuracy);
        assert!(matches!(
            kwh_per_point(&a, &acc),
            Err(MetricsError::MetricKindMismatch(_, _))
        ));
    }

    #[test]
    fn select_reference_cases() {
        let group = vec![
            cer_record("3steps", 6.651, 28.95),
            cer_record("2steps", 4.417, 32.85),
            cer_record("1step", 2.407, 44.50),
        ];
        assert_eq!(select_reference(&group).unwrap().id, "1step");

        let single = vec![cer_record("only", 1.0, 10.0)];
        assert_eq!(select_reference(&single).unwrap().id, "only");

        let tied = vec![cer_record("b", 1.0, 10.0), cer_record("a", 1.0, 12.0)];
        assert_eq!(select_reference(&tied).unwrap().id, "a");

        assert!(matches!(select_reference(&[]), Err(MetricsError::EmptyGroup)));

        let mut mixed = group;
        mixed[1].input_features = "other".to_string();
        assert!(matches!(select_reference(&mixed), Err(MetricsError::MixedInputFeatures(_, _))));
    }

    #[test]
    fn cost_reduction_published_values() {
        let v = relative_cost_reduction(&cer_record("e", 3.983, 0.0), &cer_record("c", 1.815, 0.0));
        assert!((v.unwrap() - 54.43).abs() < 5e-3);
        let v = relative_cost_reduction(&cer_record("e", 3.597, 0.0), &cer_record("c", 2.150, 0.0));
        assert!((v.unwrap() - 40.23).abs() < 5e-3);
        let same = cer_record("x", 2.0, 0.0);
        assert_eq!(relative_cost_reduction(&same, &same).unwrap(), 0.0);
        let zero = cer_record("z", 0.0, 0.0);
        assert!(relative_cost_reduction(&zero, &same).is_err());
    }

    #[test]
    fn performance_delta_published_values() {
        let v = relative_performance_delta(&cer_record("r", 1.0, 22.51), &cer_record("o", 1.0, 23.48));
        assert!((v.unwrap() - 4.31).abs() < 5e-3);
        let v = relative_performance_delta(&cer_record("r", 1.0, 16.14), &cer_record("o", 1.0, 13.26));
        assert!((v.unwrap() + 17.84).abs() < 5e-3);
        let v = relative_performance_delta(
            &record("r", 1.0, 99.66, MetricKind::Accuracy),
            &record("o", 1.0, 98.89, MetricKind::Accuracy),
        );
        assert!((v.unwrap() - 0.77).abs() < 5e-3);
    }

    #[test]
    fn grams_co2_published_values() {
        assert_eq!(grams_co2(92.720, CO2_G_PER_KWH).unwrap(), 4729);
        assert_eq!(grams_co2(1.474, CO2_G_PER_KWH).unwrap(), 75);
        assert_eq!(grams_co2(0.0, CO2_G_PER_KWH).unwrap(), 0);
        assert!(grams_co2(-0.1, CO2_G_PER_KWH).is_err());
        assert!(grams_co2(1.0, 0.0).is_err());
    }

    #[test]
    fn record_validation() {
        let mut r = record("ok", 1.0, 50.0, MetricKind::Accuracy);
        r.validate().unwrap();
        r.test_metric = 101.0;
        assert!(r.validate().is_err());
        let mut r = cer_record("neg", -1.0, 10.0);
        assert!(r.validate().is_err());
        r.kwh = 1.0;
        r.validate().unwrap();
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn label_seq() -> impl Strategy<Value = Vec<u8>> {
            proptest::collection::vec(0u8..4, 0..=6)
        }

        proptest! {
            #[test]
            fn identity_alignment_is_clean(xs in proptest::collection::vec(0u8..10, 0..30)) {
                let s = align_concepts(&xs, &xs);
                prop_assert_eq!(s.total_errors(), 0);
                prop_assert_eq!(s.hits, xs.len());
            }

            #[test]
            fn alignment_matches_enumeration_oracle(gold in label_seq(), pred in label_seq()) {
                let got = align_concepts(&gold, &pred);
                let want = tests::oracle_align(&gold, &pred);
                prop_assert_eq!(got, want);
                prop_assert_eq!(got.hits + got.substitutions + got.deletions, gold.len());
            }

            #[test]
            fn alignment_is_symmetric(gold in label_seq(), pred in label_seq()) {
                let fwd = align_concepts(&gold, &pred);
                let rev = align_concepts(&pred, &gold);
                prop_assert_eq!(fwd.total_errors(), rev.total_errors());
                prop_assert_eq!(fwd.insertions, rev.deletions);
                prop_assert_eq!(fwd.deletions, rev.insertions);
                prop_assert_eq!(fwd.substitutions, rev.substitutions);
                prop_assert_eq!(fwd.hits, rev.hits);
            }

            #[test]
            fn kwh_per_point_scales_with_cost(
                k1 in 0.0f64..100.0,
                k2 in 0.0f64..100.0,
                m1 in 0.0f64..100.0,
                m2 in 0.0f64..100.0,
                c in 0.01f64..50.0,
            ) {
                let a = tests::cer_record("a", k1, m1);
                let b = tests::cer_record("b", k2, m2);
                let mut sa = a.clone();
                let mut sb = b.clone();
                sa.kwh *= c;
                sb.kwh *= c;
                match (kwh_per_point(&a, &b).unwrap(), kwh_per_point(&sa, &sb).unwrap()) {
                    (KwhPerPoint::Finite(v), KwhPerPoint::Finite(sv)) => {
                        prop_assert!(v >= 0.0);
                        prop_assert!((sv - c * v).abs() <= 1e-9 * (1.0 + sv.abs()));
                    }
                    (KwhPerPoint::Infinite, KwhPerPoint::Infinite) => {}
                    (got, scaled) => prop_assert!(false, "variant changed: {:?} vs {:?}", got, scaled),
                }
            }

            #[test]
            fn reference_selection_is_permutation_invariant(
                kwhs in proptest::collection::vec(0.0f64..10.0, 1..8),
                rotation in 0usize..8,
            ) {
                let group: Vec<_> = kwhs
                    .iter()
                    .enumerate()
                    .map(|(i, k)| tests::cer_record(&format!("r{i}"), *k, 10.0))
                    .collect();
                let mut rotated = group.clone();
                rotated.rotate_left(rotation % group.len());
                let a = select_reference(&group).unwrap().id.clone();
                let b = select_reference(&rotated).unwrap().id.clone();
                prop_assert_eq!(&a, &b);
                // Idempotent: re-selecting from the winner alone returns it.
                let winner = group.iter().find(|r| r.id == a).unwrap().clone();
                prop_assert_eq!(select_reference(std::slice::from_ref(&winner)).unwrap().id.clone(), a);
            }

            #[test]
            fn grams_are_monotone_in_kwh(a in 0.0f64..1000.0, b in 0.0f64..1000.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(grams_co2(lo, CO2_G_PER_KWH).unwrap() <= grams_co2(hi, CO2_G_PER_KWH).unwrap());
            }
        }
    }
}
