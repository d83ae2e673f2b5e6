//! Ranking metrics over binary relevance, generic over the item key type
//! so callers can compare on tokens (cross-log) or indices (within one
//! log) with the same arithmetic.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ndcg,
    Precision,
    Recall,
}

/// A metric at a cutoff, e.g. nDCG@10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub k: usize,
}

impl MetricSpec {
    pub fn label(&self) -> String {
        let name = match self.kind {
            MetricKind::Ndcg => "nDCG",
            MetricKind::Precision => "Precision",
            MetricKind::Recall => "Recall",
        };
        format!("{name}@{}", self.k)
    }

    /// Parse a label like `nDCG@10` (metric names case-insensitive).
    pub fn parse(text: &str) -> Result<Self> {
        let (name, depth) = text.split_once('@').ok_or_else(|| {
            Error::InvalidConfig(format!("metric {text:?} is missing its @k cutoff"))
        })?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "ndcg" => MetricKind::Ndcg,
            "precision" => MetricKind::Precision,
            "recall" => MetricKind::Recall,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown metric {other:?} (expected nDCG, Precision, or Recall)"
                )))
            }
        };
        let k: usize = depth.parse().map_err(|_| {
            Error::InvalidConfig(format!("metric cutoff {depth:?} is not a number"))
        })?;
        if k == 0 {
            return Err(Error::InvalidConfig("metric cutoff must be >= 1".into()));
        }
        Ok(MetricSpec { kind, k })
    }

    pub fn compute<T: Eq + Hash>(&self, recommended: &[T], relevant: &HashSet<T>) -> f64 {
        match self.kind {
            MetricKind::Ndcg => ndcg(recommended, relevant, self.k),
            MetricKind::Precision => precision(recommended, relevant, self.k),
            MetricKind::Recall => recall(recommended, relevant, self.k),
        }
    }
}

/// The default reporting suite: nDCG, Precision, Recall, all at `k`.
pub fn default_metrics(k: usize) -> Vec<MetricSpec> {
    [MetricKind::Ndcg, MetricKind::Precision, MetricKind::Recall]
        .into_iter()
        .map(|kind| MetricSpec { kind, k })
        .collect()
}

fn hits_at_k<T: Eq + Hash>(recommended: &[T], relevant: &HashSet<T>, k: usize) -> usize {
    recommended
        .iter()
        .take(k)
        .filter(|item| relevant.contains(item))
        .count()
}

/// Binary-gain nDCG@k: `DCG = sum over hit ranks r of 1/log2(r+1)`
/// (ranks 1-based), normalised by the DCG of a perfect list, which stacks
/// `min(|relevant|, k)` hits from rank 1.
pub fn ndcg<T: Eq + Hash>(recommended: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    assert!(
        !relevant.is_empty(),
        "users with no test items are excluded before metric computation"
    );
    let mut dcg = 0.0;
    for (pos, item) in recommended.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let ideal_hits = relevant.len().min(k);
    let idcg: f64 = (0..ideal_hits).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum();
    dcg / idcg
}

/// Hits in the top k divided by `k` — the divisor is the cutoff, not the
/// list length, so a short list pays for what it failed to fill.
pub fn precision<T: Eq + Hash>(recommended: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    assert!(k > 0, "precision@0 is undefined");
    hits_at_k(recommended, relevant, k) as f64 / k as f64
}

/// Hits in the top k divided by the number of relevant items.
pub fn recall<T: Eq + Hash>(recommended: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    assert!(
        !relevant.is_empty(),
        "users with no test items are excluded before metric computation"
    );
    hits_at_k(recommended, relevant, k) as f64 / relevant.len() as f64
}

/// Unweighted mean over per-user values. Zero evaluable users is an
/// error: "nothing was measured" must not masquerade as a score of 0.
pub fn aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
