//! Baseline recommenders.
//!
//! Six models sharing one contract: fit on a training log, then produce a
//! deterministic top-k item ranking for any user — including users the
//! training log never saw. Ranked lists never contain an item from the
//! user's own training rows, and every tie anywhere breaks the same way:
//! higher score first, then ascending item token (which equals ascending
//! item index, because indices are assigned in token order).

pub mod bpr;
pub mod implicit_mf;
pub mod knn;
pub mod popscore;
pub mod random;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::InteractionLog;

/// Algorithm choice plus hyperparameters. Serialises with an `algorithm`
/// tag and per-field defaults, so `{"algorithm": "BPR"}` is a complete
/// spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum RecommenderSpec {
    Random,
    PopScore,
    #[serde(rename = "UserKNN")]
    UserKnn {
        #[serde(default = "default_neighbours")]
        neighbours: usize,
    },
    #[serde(rename = "ItemKNN")]
    ItemKnn {
        #[serde(default = "default_neighbours")]
        neighbours: usize,
    },
    #[serde(rename = "ImplicitMF")]
    ImplicitMf {
        #[serde(default = "default_mf_factors")]
        factors: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_mf_lambda")]
        lambda: f64,
        #[serde(default = "default_sweeps")]
        sweeps: usize,
    },
    #[serde(rename = "BPR")]
    Bpr {
        #[serde(default = "default_bpr_factors")]
        factors: usize,
        #[serde(default = "default_learn_rate")]
        learn_rate: f64,
        #[serde(default = "default_bpr_lambda")]
        lambda: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
}

fn default_neighbours() -> usize {
    20
}
fn default_mf_factors() -> usize {
    50
}
fn default_alpha() -> f64 {
    40.0
}
fn default_mf_lambda() -> f64 {
    0.1
}
fn default_sweeps() -> usize {
    20
}
fn default_bpr_factors() -> usize {
    64
}
fn default_learn_rate() -> f64 {
    0.05
}
fn default_bpr_lambda() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    30
}

impl RecommenderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RecommenderSpec::Random => "Random",
            RecommenderSpec::PopScore => "PopScore",
            RecommenderSpec::UserKnn { .. } => "UserKNN",
            RecommenderSpec::ItemKnn { .. } => "ItemKNN",
            RecommenderSpec::ImplicitMf { .. } => "ImplicitMF",
            RecommenderSpec::Bpr { .. } => "BPR",
        }
    }

    /// Default-parameter spec for a name, as accepted on the command line.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "Random" => Ok(RecommenderSpec::Random),
            "PopScore" => Ok(RecommenderSpec::PopScore),
            "UserKNN" => Ok(RecommenderSpec::UserKnn {
                neighbours: default_neighbours(),
            }),
            "ItemKNN" => Ok(RecommenderSpec::ItemKnn {
                neighbours: default_neighbours(),
            }),
            "ImplicitMF" => Ok(RecommenderSpec::ImplicitMf {
                factors: default_mf_factors(),
                alpha: default_alpha(),
                lambda: default_mf_lambda(),
                sweeps: default_sweeps(),
            }),
            "BPR" => Ok(RecommenderSpec::Bpr {
                factors: default_bpr_factors(),
                learn_rate: default_learn_rate(),
                lambda: default_bpr_lambda(),
                epochs: default_epochs(),
            }),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm {other:?} (expected one of BPR, ImplicitMF, \
                 ItemKNN, PopScore, Random, UserKNN)"
            ))),
        }
    }

    /// All six baselines with default parameters, in ascending name order.
    pub fn default_suite() -> Vec<RecommenderSpec> {
        ["BPR", "ImplicitMF", "ItemKNN", "PopScore", "Random", "UserKNN"]
            .iter()
            .map(|name| Self::by_name(name).expect("built-in name"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match *self {
            RecommenderSpec::Random | RecommenderSpec::PopScore => Ok(()),
            RecommenderSpec::UserKnn { neighbours } | RecommenderSpec::ItemKnn { neighbours } => {
                if neighbours == 0 {
                    return bad(format!("{}: neighbours must be >= 1", self.name()));
                }
                Ok(())
            }
            RecommenderSpec::ImplicitMf {
                factors,
                alpha,
                lambda,
                ..
            } => {
                if factors == 0 {
                    return bad("ImplicitMF: factors must be >= 1".into());
                }
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return bad("ImplicitMF: alpha must be finite and >= 0".into());
                }
                if !(lambda.is_finite() && lambda > 0.0) {
                    return bad("ImplicitMF: lambda must be finite and > 0".into());
                }
                Ok(())
            }
            RecommenderSpec::Bpr {
                factors,
                learn_rate,
                lambda,
                ..
            } => {
                if factors == 0 {
                    return bad("BPR: factors must be >= 1".into());
                }
                if !(learn_rate.is_finite() && learn_rate > 0.0) {
                    return bad("BPR: learn_rate must be finite and > 0".into());
                }
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return bad("BPR: lambda must be finite and >= 0".into());
                }
                Ok(())
            }
        }
    }
}

/// A user as seen at recommendation time: either a row of the training
/// log, or a token the model never trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserRef<'a> {
    Known(u32),
    Cold(&'a str),
}

/// A fitted model. Implementations are immutable after `fit`; the
/// fingerprint is a content hash of the learned state, so "the same model
/// answered both phases" is checkable by string equality.
pub trait RecommenderModel: Send + Sync {
    fn algorithm(&self) -> &'static str;
    fn fingerprint(&self) -> String;
    /// Top-`k` items (train-log index space), best first. Shorter than
    /// `k` only when the candidate catalog is exhausted.
    fn recommend(&self, user: UserRef<'_>, k: usize) -> RankedList;
}

/// Fit dispatcher. Parameter errors and empty training logs surface here,
/// per cell, rather than poisoning a whole grid run.
pub fn fit(
    spec: &RecommenderSpec,
    train: &Arc<InteractionLog>,
    seed: u64,
) -> Result<Box<dyn RecommenderModel>> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyLog("cannot fit on an empty training log".into()));
    }
    Ok(match *spec {
        RecommenderSpec::Random => Box::new(random::RandomModel::fit(train, seed)),
        RecommenderSpec::PopScore => Box::new(popscore::PopScoreModel::fit(train)),
        RecommenderSpec::UserKnn { neighbours } => {
            Box::new(knn::UserKnnModel::fit(train, neighbours))
        }
        RecommenderSpec::ItemKnn { neighbours } => {
            Box::new(knn::ItemKnnModel::fit(train, neighbours))
        }
        RecommenderSpec::ImplicitMf {
            factors,
            alpha,
            lambda,
            sweeps,
        } => Box::new(implicit_mf::ImplicitMfModel::fit(
            train, factors, alpha, lambda, sweeps, seed,
        )?),
        RecommenderSpec::Bpr {
            factors,
            learn_rate,
            lambda,
            epochs,
        } => Box::new(bpr::BprModel::fit(
            train, factors, learn_rate, lambda, epochs, seed,
        )?),
    })
}

/// Items a ranked list must never contain: the user's own training rows.
#[derive(Clone, Copy)]
pub(crate) enum Exclude<'a> {
    None,
    TrainRow { train: &'a InteractionLog, user: u32 },
}

impl Exclude<'_> {
    pub(crate) fn contains(&self, item: u32) -> bool {
        match *self {
            Exclude::None => false,
            Exclude::TrainRow { train, user } => train.contains_pair(user, item),
        }
    }

}

pub(crate) fn exclusions_for<'a>(train: &'a InteractionLog, user: UserRef<'_>) -> Exclude<'a> {
    match user {
        UserRef::Known(u) => Exclude::TrainRow { train, user: u },
        UserRef::Cold(_) => Exclude::None,
    }
}

/// An ordered recommendation list over the training log's item indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    items: Vec<u32>,
}

impl RankedList {
    /// Construction-time invariants: items are distinct and none is
    /// excluded. Every model's output goes through here.
    pub(crate) fn checked(items: Vec<u32>, exclude: &Exclude<'_>) -> Self {
        for (pos, &item) in items.iter().enumerate() {
            assert!(
                !exclude.contains(item),
                "ranked list contains a training item at position {pos}"
            );
            assert!(
                !items[..pos].contains(&item),
                "ranked list repeats an item at position {pos}"
            );
        }
        RankedList { items }
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// One scored candidate; ordering is the global tie-break rule (greater =
/// ranked earlier): higher score first, lower index on equal scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ranked {
    pub score: f64,
    pub item: u32,
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .expect("recommendation scores must not be NaN")
            .then_with(|| other.item.cmp(&self.item))
    }
}

/// Top-k over a dense score-per-item array via a bounded min-heap.
pub(crate) fn rank_dense(scores: &[f64], exclude: &Exclude<'_>, k: usize) -> Vec<u32> {
    if k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<std::cmp::Reverse<Ranked>> = BinaryHeap::with_capacity(k + 1);
    for (idx, &score) in scores.iter().enumerate() {
        let item = idx as u32;
        if exclude.contains(item) {
            continue;
        }
        assert!(score.is_finite(), "non-finite score for item index {idx}");
        let candidate = Ranked { score, item };
        if heap.len() < k {
            heap.push(std::cmp::Reverse(candidate));
        } else if candidate > heap.peek().expect("heap is non-empty").0 {
            heap.pop();
            heap.push(std::cmp::Reverse(candidate));
        }
    }
    let mut picked: Vec<Ranked> = heap.into_iter().map(|r| r.0).collect();
    picked.sort_unstable_by(|a, b| b.cmp(a));
    picked.into_iter().map(|r| r.item).collect()
}

/// Top-k when only some items carry (non-negative) scores: positive
/// scores rank by the global rule, and unscored items pad the tail in
/// ascending index order — they all tie at zero.
pub(crate) fn rank_positive_sparse(
    mut scored: Vec<(u32, f64)>,
    n_items: u32,
    exclude: &Exclude<'_>,
    k: usize,
) -> Vec<u32> {
    scored.retain(|&(item, score)| {
        assert!(
            score.is_finite() && score >= 0.0,
            "sparse ranking requires non-negative scores, got {score} for item {item}"
        );
        score > 0.0 && !exclude.contains(item)
    });
    scored.sort_unstable_by(|&(item_a, score_a), &(item_b, score_b)| {
        score_b
            .partial_cmp(&score_a)
            .expect("scores are finite")
            .then_with(|| item_a.cmp(&item_b))
    });
    scored.truncate(k);
    let mut items: Vec<u32> = scored.into_iter().map(|(item, _)| item).collect();
    ascending_fill(&mut items, n_items, exclude, k);
    items
}

/// Pad a list up to `k` with the lowest-index items that are neither
/// excluded nor already present.
pub(crate) fn ascending_fill(items: &mut Vec<u32>, n_items: u32, exclude: &Exclude<'_>, k: usize) {
    if items.len() >= k {
        return;
    }
    let mut present = items.clone();
    present.sort_unstable();
    for idx in 0..n_items {
        if items.len() >= k {
            break;
        }
        if exclude.contains(idx) || present.binary_search(&idx).is_ok() {
            continue;
        }
        items.push(idx);
    }
}

/// The all-scores-are-zero list: the first `k` non-excluded item indices.
/// This is the cold-start answer for every score-based model.
pub(crate) fn zero_score_list(n_items: u32, exclude: &Exclude<'_>, k: usize) -> Vec<u32> {
    let mut items = Vec::with_capacity(k.min(n_items as usize));
    ascending_fill(&mut items, n_items, exclude, k);
    items
}

/// Row-major (n × factors) matrix of small uniform values in
/// [-0.1, 0.1), drawn in row order so factor layouts are reproducible.
pub(crate) fn init_factors(
    rng: &mut rand_chacha::ChaCha12Rng,
    n: usize,
    factors: usize,
) -> Vec<f64> {
    use rand::Rng;
    (0..n * factors).map(|_| 0.2 * rng.random::<f64>() - 0.1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_list_in_ascending_byte_order() {
        let names: Vec<&str> = RecommenderSpec::default_suite()
            .iter()
            .map(|s| s.name())
            .collect();
        assert_eq!(
            names,
            ["BPR", "ImplicitMF", "ItemKNN", "PopScore", "Random", "UserKNN"]
        );
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
    }

    #[test]
    fn bare_tag_json_fills_defaults() {
        let spec: RecommenderSpec = serde_json::from_str(r#"{"algorithm": "BPR"}"#).unwrap();
        assert_eq!(
            spec,
            RecommenderSpec::Bpr {
                factors: 64,
                learn_rate: 0.05,
                lambda: 0.01,
                epochs: 30
            }
        );
        let spec: RecommenderSpec =
            serde_json::from_str(r#"{"algorithm": "ImplicitMF", "sweeps": 3}"#).unwrap();
        assert_eq!(
            spec,
            RecommenderSpec::ImplicitMf {
                factors: 50,
                alpha: 40.0,
                lambda: 0.1,
                sweeps: 3
            }
        );
    }

    #[test]
    fn spec_json_round_trips() {
        for spec in RecommenderSpec::default_suite() {
            let text = serde_json::to_string(&spec).unwrap();
            let back: RecommenderSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(spec, back);
        }
    }

    #[test]
    fn unknown_name_is_rejected_with_the_valid_set() {
        let err = RecommenderSpec::by_name("SVD").unwrap_err();
        assert!(err.to_string().contains("UserKNN"));
    }

    #[test]
    fn zero_neighbours_fails_validation() {
        assert!(RecommenderSpec::UserKnn { neighbours: 0 }.validate().is_err());
        assert!(RecommenderSpec::ItemKnn { neighbours: 0 }.validate().is_err());
    }

    #[test]
    fn mf_and_bpr_parameter_bounds() {
        let mut mf = match RecommenderSpec::by_name("ImplicitMF").unwrap() {
            RecommenderSpec::ImplicitMf {
                factors,
                alpha,
                lambda,
                sweeps,
            } => (factors, alpha, lambda, sweeps),
            _ => unreachable!(),
        };
        mf.2 = 0.0;
        assert!(RecommenderSpec::ImplicitMf {
            factors: mf.0,
            alpha: mf.1,
            lambda: mf.2,
            sweeps: mf.3
        }
        .validate()
        .is_err());
        assert!(RecommenderSpec::ImplicitMf {
            factors: 50,
            alpha: 0.0,
            lambda: 0.1,
            sweeps: 0
        }
        .validate()
        .is_ok());
        assert!(RecommenderSpec::Bpr {
            factors: 64,
            learn_rate: 0.0,
            lambda: 0.01,
            epochs: 30
        }
        .validate()
        .is_err());
    }

    fn keys(scores: &[f64]) -> Vec<u32> {
        let mut all: Vec<Ranked> = scores
            .iter()
            .enumerate()
            .map(|(idx, &score)| Ranked {
                score,
                item: idx as u32,
            })
            .collect();
        all.sort_unstable_by(|a, b| b.cmp(a));
        all.into_iter().map(|r| r.item).collect()
    }

    #[test]
    fn dense_ranking_matches_a_full_sort() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from_u64(99);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..5) as f64) / 2.0).collect();
            let k = rng.random_range(1..=n + 3);
            let expected: Vec<u32> = keys(&scores).into_iter().take(k).collect();
            assert_eq!(rank_dense(&scores, &Exclude::None, k), expected);
        }
    }

    #[test]
    fn equal_scores_rank_by_ascending_index() {
        let scores = vec![1.0, 2.0, 2.0, 1.0, 2.0];
        assert_eq!(rank_dense(&scores, &Exclude::None, 5), vec![1, 2, 4, 0, 3]);
    }

    #[test]
    fn sparse_ranking_pads_with_ascending_zeros() {
        let scored = vec![(4u32, 2.0), (1u32, 3.0), (6u32, 0.0)];
        let out = rank_positive_sparse(scored, 8, &Exclude::None, 5);
        // 1 then 4 by score; 0, 2, 3 pad (6 had score zero, ties with pads).
        assert_eq!(out, vec![1, 4, 0, 2, 3]);
    }

    #[test]
    fn excluded_items_never_appear() {
        let pairs = [("u", "a"), ("u", "c")];
        let train =
            InteractionLog::from_token_pairs(pairs.iter().map(|&(u, i)| (u, i))).unwrap();
        let exclude = Exclude::TrainRow {
            train: &train,
            user: 0,
        };
        let scores = vec![5.0, 1.0]; // items a, c — both excluded
        let out = rank_dense(&scores, &exclude, 2);
        assert!(out.is_empty());
        let padded = zero_score_list(2, &exclude, 2);
        assert!(padded.is_empty());
    }

    #[test]
    #[should_panic(expected = "training item")]
    fn checked_list_rejects_train_leakage() {
        let pairs = [("u", "a"), ("u", "b")];
        let train =
            InteractionLog::from_token_pairs(pairs.iter().map(|&(u, i)| (u, i))).unwrap();
        let exclude = Exclude::TrainRow {
            train: &train,
            user: 0,
        };
        RankedList::checked(vec![0], &exclude);
    }

    #[test]
    #[should_panic(expected = "repeats")]
    fn checked_list_rejects_duplicates() {
        RankedList::checked(vec![3, 3], &Exclude::None);
    }
}
