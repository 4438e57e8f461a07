//! Accuracy@K, F1 under argmax, and evaluation reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rank::{RankedRow, Target};
use crate::scalar::Scalar;
use crate::schema::{name_key, AttrRef, GroundTruth, MatchPair};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("K={k} exceeds the prediction width {width}")]
    KTooLarge { k: usize, width: usize },
    #[error("K must be at least 1")]
    InvalidK,
    #[error("{src_table}.{src_attr} has more than one ground-truth target")]
    AmbiguousTruth { src_table: String, src_attr: String },
}

/// Ground truth restricted to source attributes with one distinct target.
#[derive(Debug, Clone, Default)]
pub struct EvaluableTruth {
    /// `(source, target)`, `None` meaning a null mapping.
    pub pairs: Vec<(AttrRef, Option<AttrRef>)>,
    /// Source attributes with several distinct targets.
    pub excluded: Vec<AttrRef>,
}

fn target_key(p: &MatchPair) -> Option<(String, String)> {
    p.target.as_ref().map(AttrRef::key)
}

/// Splits truth into single-target attributes and 1:n attributes.
/// Exact duplicate pairs count once.
pub fn split_truth(truth: &GroundTruth) -> EvaluableTruth {
    let mut out = EvaluableTruth::default();
    for (source, pairs) in truth.by_source() {
        let mut distinct: Vec<&MatchPair> = Vec::new();
        for p in pairs {
            if !distinct.iter().any(|d| target_key(d) == target_key(p)) {
                distinct.push(p);
            }
        }
        if distinct.len() == 1 {
            out.pairs.push((source, distinct[0].target.clone()));
        } else {
            out.excluded.push(source);
        }
    }
    out
}

fn strict_truth(truth: &GroundTruth) -> Result<Vec<(AttrRef, Option<AttrRef>)>, EvalError> {
    let split = split_truth(truth);
    match split.excluded.first() {
        Some(a) => Err(EvalError::AmbiguousTruth {
            src_table: a.table.clone(),
            src_attr: a.attribute.clone(),
        }),
        None => Ok(split.pairs),
    }
}

fn check_k(rows: &[RankedRow], k: usize) -> Result<(), EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if let Some(width) = rows.iter().map(|r| r.targets.len()).min() {
        if k > width {
            return Err(EvalError::KTooLarge { k, width });
        }
    }
    Ok(())
}

fn row_index(rows: &[RankedRow]) -> HashMap<(String, String), &RankedRow> {
    let mut index = HashMap::with_capacity(rows.len());
    for r in rows {
        index
            .entry((name_key(&r.src_table), name_key(&r.src_attr)))
            .or_insert(r);
    }
    index
}

/// 1-based rank of the true target within `row`, if present.
pub fn hit_rank(row: &RankedRow, truth: Option<&AttrRef>) -> Option<usize> {
    row.targets
        .iter()
        .position(|t| match (t, truth) {
            (Target::Attribute(a), Some(want)) => a.matches(want),
            (Target::Na, None) => true,
            _ => false,
        })
        .map(|i| i + 1)
}

fn ranks(rows: &[RankedRow], pairs: &[(AttrRef, Option<AttrRef>)]) -> Vec<Option<usize>> {
    let index = row_index(rows);
    pairs
        .iter()
        .map(|(src, tgt)| index.get(&src.key()).and_then(|row| hit_rank(row, tgt.as_ref())))
        .collect()
}

/// Fraction of evaluated source attributes whose true target is among the
/// first `k` predictions. A null truth is a hit when `NA` is among them.
/// Attributes with no prediction row count as misses.
pub fn accuracy_at_k<S: Scalar>(rows: &[RankedRow], truth: &GroundTruth, k: usize) -> Result<S, EvalError> {
    check_k(rows, k)?;
    let pairs = strict_truth(truth)?;
    let hits = ranks(rows, &pairs)
        .into_iter()
        .filter(|r| r.is_some_and(|r| r <= k))
        .count();
    Ok(S::ratio(hits, pairs.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

/// Micro precision, recall and F1 treating each rank-1 prediction as the
/// single positive label of its source attribute, `NA` being its own class.
pub fn f1_argmax<S: Scalar>(rows: &[RankedRow], truth: &GroundTruth) -> Result<F1Scores<S>, EvalError> {
    check_k(rows, 1)?;
    let pairs = strict_truth(truth)?;
    let n = pairs.len();
    let tp = ranks(rows, &pairs).into_iter().filter(|r| *r == Some(1)).count();
    let fp = n - tp;
    let fneg = n - tp;
    Ok(F1Scores {
        precision: S::ratio(tp, tp + fp),
        recall: S::ratio(tp, tp + fneg),
        f1: S::ratio(2 * tp, 2 * tp + fp + fneg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeOutcome {
    pub src_table: String,
    pub src_attr: String,
    /// `None` for a null mapping.
    pub truth: Option<AttrRef>,
    /// 1-based rank of the truth in the prediction row, `None` for a miss.
    pub hit_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedAttribute {
    pub src_table: String,
    pub src_attr: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_values: Vec<usize>,
    pub accuracy_at_k: BTreeMap<usize, f64>,
    pub f1_argmax: Option<F1Scores<f64>>,
    pub avg_candidate_tables: f64,
    pub n_evaluated: usize,
    pub n_excluded: usize,
    pub excluded: Vec<ExcludedAttribute>,
    pub per_attribute_outcomes: Vec<AttributeOutcome>,
}

/// Evaluates `rows` at every K in `k_values`, excluding 1:n attributes.
pub fn make_report(
    rows: &[RankedRow],
    truth: &GroundTruth,
    k_values: &[usize],
    avg_candidate_tables: f64,
) -> Result<EvalReport, EvalError> {
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        check_k(rows, k)?;
    }
    let split = split_truth(truth);
    let evaluable = GroundTruth::new(
        split
            .pairs
            .iter()
            .map(|(s, t)| MatchPair::new(&s.table, &s.attribute, t.clone()))
            .collect(),
    );
    let hit_ranks = ranks(rows, &split.pairs);
    let accuracy_at_k = ks
        .iter()
        .map(|&k| Ok((k, accuracy_at_k::<f64>(rows, &evaluable, k)?)))
        .collect::<Result<_, EvalError>>()?;
    let f1 = if rows.is_empty() || rows.iter().all(|r| !r.targets.is_empty()) {
        Some(f1_argmax(rows, &evaluable)?)
    } else {
        None
    };
    Ok(EvalReport {
        k_values: ks,
        accuracy_at_k,
        f1_argmax: f1,
        avg_candidate_tables,
        n_evaluated: split.pairs.len(),
        n_excluded: split.excluded.len(),
        excluded: split
            .excluded
            .iter()
            .map(|a| ExcludedAttribute {
                src_table: a.table.clone(),
                src_attr: a.attribute.clone(),
                reason: "more than one ground-truth target (1:n)".into(),
            })
            .collect(),
        per_attribute_outcomes: split
            .pairs
            .iter()
            .zip(hit_ranks)
            .map(|((s, t), hit_rank)| AttributeOutcome {
                src_table: s.table.clone(),
                src_attr: s.attribute.clone(),
                truth: t.clone(),
                hit_rank,
            })
            .collect(),
    })
}

impl EvalReport {
    /// Plain-text summary: one header line and one value line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "evaluated: {}  excluded (1:n): {}",
            self.n_evaluated, self.n_excluded
        );
        let header: Vec<String> = self
            .k_values
            .iter()
            .map(|k| format!("{:>8}", format!("Acc@{k}")))
            .collect();
        let values: Vec<String> = self
            .k_values
            .iter()
            .map(|k| format!("{:>8.4}", self.accuracy_at_k[k]))
            .collect();
        let _ = writeln!(out, "{}{:>8}", header.join(""), "Avg #T");
        let _ = writeln!(out, "{}{:>8.2}", values.join(""), self.avg_candidate_tables);
        if let Some(f) = &self.f1_argmax {
            let _ = writeln!(
                out,
                "argmax precision {:.4} recall {:.4} F1 {:.4}",
                f.precision, f.recall, f.f1
            );
        }
        out
    }
}
