//! Train/test construction.
//!
//! Phase 1 holds out a per-user fraction of each coreset's interactions.
//! Phase 2 asks a different question of the *same* trained models: it
//! samples its test set from the unpruned log's interactions that the
//! pruned training set never saw, so it measures how a model serves the
//! population the pruning threw away.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::log::InteractionLog;
use crate::seed::{rng_from_u64, sample_without_replacement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    Two,
}

impl Phase {
    pub fn number(self) -> u8 {
        match self {
            Phase::One => 1,
            Phase::Two => 2,
        }
    }
}

/// A train/test pair plus the provenance needed to rebuild it.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Arc<InteractionLog>,
    pub test: Arc<InteractionLog>,
    pub phase: Phase,
    pub core_t: u32,
    pub seed: u64,
}

impl SplitPair {
    /// Construction-time invariants: no token pair may live on both
    /// sides. The checks are token-level, so they hold regardless of
    /// which parent each side was carved from.
    fn checked(
        train: Arc<InteractionLog>,
        test: Arc<InteractionLog>,
        phase: Phase,
        core_t: u32,
        seed: u64,
    ) -> Self {
        for (user, item) in test.token_pairs() {
            assert!(
                !train.contains_token_pair(user, item),
                "test pair ({user}, {item}) leaked into training"
            );
        }
        SplitPair {
            train,
            test,
            phase,
            core_t,
            seed,
        }
    }
}

/// Held-out count for a user with `n` interactions at the given training
/// fraction: `round_half_up(n * (1 - train_fraction))`, clamped so a user
/// with two or more interactions always keeps at least one in training,
/// and a singleton user trains on their only interaction.
///
/// Exactness: for fractions whose holdout share keeps `n*(1-f) + 1/2`
/// away from integers (0.8 leaves a gap of at least 0.1) and for dyadic
/// fractions (0.5, 0.75), the result equals the exact rational
/// round-half-up for every `n`. Other fractions have representable tie
/// points (e.g. `n = 5`, `f = 0.9`) where binary rounding of `1 - f`
/// decides the direction; callers get a consistent, deterministic answer,
/// but not necessarily the half-up one.
pub fn test_count_for(n: usize, train_fraction: f64) -> usize {
    debug_assert!(train_fraction > 0.0 && train_fraction < 1.0);
    if n <= 1 {
        return 0;
    }
    let raw = (n as f64 * (1.0 - train_fraction) + 0.5).floor() as usize;
    raw.min(n - 1)
}

/// Per-user holdout split of one coreset. A single sequential RNG stream
/// visits users in ascending index order, so the outcome is a pure
/// function of `(log, train_fraction, seed)`.
pub fn split_per_user(
    log: &Arc<InteractionLog>,
    train_fraction: f64,
    core_t: u32,
    seed: u64,
) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(
            "train_fraction must lie strictly between 0 and 1".into(),
        ));
    }
    if log.is_empty() {
        return Err(Error::EmptyLog("cannot split an empty log".into()));
    }

    let mut rng = rng_from_u64(seed);
    let mut to_test = vec![false; log.n_interactions()];
    for u in 0..log.n_users() as u32 {
        let span = log.user_span(u);
        let n = span.len();
        let k = test_count_for(n, train_fraction);
        for local in sample_without_replacement(&mut rng, n, k) {
            to_test[span.start + local] = true;
        }
    }

    let mut train_pairs = Vec::with_capacity(log.n_interactions());
    let mut test_pairs = Vec::new();
    for (idx, &pair) in log.pairs().iter().enumerate() {
        if to_test[idx] {
            test_pairs.push(pair);
        } else {
            train_pairs.push(pair);
        }
    }
    assert_eq!(train_pairs.len() + test_pairs.len(), log.n_interactions());

    let train = Arc::new(InteractionLog::from_parent_subset(log, train_pairs));
    let test = Arc::new(InteractionLog::from_parent_subset(log, test_pairs));
    Ok(SplitPair::checked(train, test, Phase::One, core_t, seed))
}

/// Build the phase-2 test set: sample `target` interactions (or as many
/// as exist) from the unpruned log's pairs that the pruned training set
/// does not contain, token-for-token. Erroring when no candidate exists
/// keeps "nothing to measure" distinct from "measured zero".
pub fn build_phase2_test(
    zero_core: &Arc<InteractionLog>,
    pruned_train: &InteractionLog,
    target: usize,
    seed: u64,
) -> Result<Arc<InteractionLog>> {
    // Token-level translation maps, so pair membership is one binary
    // search instead of two string lookups per interaction.
    let user_map: Vec<Option<u32>> = (0..zero_core.n_users() as u32)
        .map(|u| pruned_train.user_index(zero_core.user_token(u)))
        .collect();
    let item_map: Vec<Option<u32>> = (0..zero_core.n_items() as u32)
        .map(|i| pruned_train.item_index(zero_core.item_token(i)))
        .collect();

    let candidates: Vec<(u32, u32)> = zero_core
        .pairs()
        .iter()
        .copied()
        .filter(|&(u, i)| match (user_map[u as usize], item_map[i as usize]) {
            (Some(tu), Some(ti)) => !pruned_train.contains_pair(tu, ti),
            _ => true,
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }

    let k = target.min(candidates.len());
    let mut rng = rng_from_u64(seed);
    let mut selected: Vec<(u32, u32)> = sample_without_replacement(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|idx| candidates[idx])
        .collect();
    selected.sort_unstable();
    Ok(Arc::new(InteractionLog::from_parent_subset(
        zero_core, selected,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_user_log(n: usize) -> Arc<InteractionLog> {
        let pairs: Vec<(String, String)> =
            (0..n).map(|k| ("u".to_string(), format!("i{k:03}"))).collect();
        Arc::new(InteractionLog::from_token_pairs(pairs).unwrap())
    }

    #[test]
    fn holdout_counts_at_default_fraction() {
        assert_eq!(test_count_for(10, 0.8), 2);
        assert_eq!(test_count_for(5, 0.8), 1);
        assert_eq!(test_count_for(1, 0.8), 0);
    }

    #[test]
    fn holdout_matches_rational_arithmetic_for_four_fifths() {
        // At f = 0.8 the exact rule is floor((2n + 5) / 10); the float
        // path must agree for every size the splitter will ever see here.
        for n in 1..=200 {
            let expected = if n == 1 { 0 } else { (2 * n + 5) / 10 };
            assert_eq!(test_count_for(n, 0.8), expected.min(n - 1), "n={n}");
        }
    }

    #[test]
    fn holdout_clamps_to_leave_one_training_row() {
        assert_eq!(test_count_for(2, 0.1), 1); // raw round is 2
        assert_eq!(test_count_for(3, 0.05), 2);
    }

    #[test]
    fn ten_interactions_split_eight_two() {
        let log = single_user_log(10);
        let pair = split_per_user(&log, 0.8, 0, 7).unwrap();
        assert_eq!(pair.train.n_interactions(), 8);
        assert_eq!(pair.test.n_interactions(), 2);
    }

    #[test]
    fn singleton_user_trains_on_everything() {
        let log = single_user_log(1);
        let pair = split_per_user(&log, 0.8, 0, 7).unwrap();
        assert_eq!(pair.train.n_interactions(), 1);
        assert!(pair.test.is_empty());
    }

    #[test]
    fn five_interactions_split_four_one() {
        let log = single_user_log(5);
        let pair = split_per_user(&log, 0.8, 0, 7).unwrap();
        assert_eq!(pair.train.n_interactions(), 4);
        assert_eq!(pair.test.n_interactions(), 1);
    }

    fn multi_user_log() -> Arc<InteractionLog> {
        let mut pairs = Vec::new();
        for u in 0..6 {
            for i in 0..(u + 3) {
                pairs.push((format!("u{u}"), format!("i{i:02}")));
            }
        }
        Arc::new(InteractionLog::from_token_pairs(pairs).unwrap())
    }

    #[test]
    fn split_partitions_the_coreset_exactly() {
        let log = multi_user_log();
        let pair = split_per_user(&log, 0.8, 0, 99).unwrap();
        let mut union: Vec<(String, String)> = pair
            .train
            .token_pairs()
            .chain(pair.test.token_pairs())
            .map(|(u, i)| (u.to_string(), i.to_string()))
            .collect();
        union.sort();
        let mut original: Vec<(String, String)> = log
            .token_pairs()
            .map(|(u, i)| (u.to_string(), i.to_string()))
            .collect();
        original.sort();
        assert_eq!(union, original);
    }

    #[test]
    fn split_is_a_pure_function_of_its_seed() {
        let log = multi_user_log();
        let a = split_per_user(&log, 0.8, 0, 5).unwrap();
        let b = split_per_user(&log, 0.8, 0, 5).unwrap();
        assert_eq!(*a.train, *b.train);
        assert_eq!(*a.test, *b.test);
        let c = split_per_user(&log, 0.8, 0, 6).unwrap();
        assert!(*c.test != *a.test || *c.train != *a.train);
    }

    #[test]
    fn empty_log_cannot_be_split() {
        let log = Arc::new(InteractionLog::empty());
        assert!(split_per_user(&log, 0.8, 0, 1).is_err());
    }

    #[test]
    fn bad_fraction_is_rejected() {
        let log = single_user_log(4);
        assert!(split_per_user(&log, 0.0, 0, 1).is_err());
        assert!(split_per_user(&log, 1.0, 0, 1).is_err());
    }

    fn log_of(pairs: &[(&str, &str)]) -> Arc<InteractionLog> {
        Arc::new(InteractionLog::from_token_pairs(pairs.iter().map(|&(u, i)| (u, i))).unwrap())
    }

    #[test]
    fn phase2_takes_the_single_unseen_pair() {
        let zero = log_of(&[("a", "x"), ("a", "y")]);
        let train = log_of(&[("a", "x")]);
        let test = build_phase2_test(&zero, &train, 5, 3).unwrap();
        assert_eq!(test.n_interactions(), 1);
        assert!(test.contains_token_pair("a", "y"));
    }

    #[test]
    fn phase2_large_target_takes_all_candidates() {
        let zero = log_of(&[("a", "x"), ("a", "y"), ("b", "x"), ("b", "z")]);
        let train = log_of(&[("a", "x")]);
        let test = build_phase2_test(&zero, &train, 100, 3).unwrap();
        assert_eq!(test.n_interactions(), 3);
    }

    #[test]
    fn phase2_is_seed_deterministic() {
        let zero = multi_user_log();
        let train = log_of(&[("u0", "i00")]);
        let a = build_phase2_test(&zero, &train, 5, 11).unwrap();
        let b = build_phase2_test(&zero, &train, 5, 11).unwrap();
        assert_eq!(*a, *b);
        assert_eq!(a.n_interactions(), 5);
    }

    #[test]
    fn phase2_with_no_candidates_is_an_error() {
        let zero = log_of(&[("a", "x"), ("b", "y")]);
        let train = log_of(&[("a", "x"), ("b", "y")]);
        assert!(matches!(
            build_phase2_test(&zero, &train, 5, 3),
            Err(Error::NoCandidates)
        ));
    }

    #[test]
    fn phase2_never_samples_trained_pairs() {
        let zero = multi_user_log();
        let pair = split_per_user(&zero, 0.8, 0, 2).unwrap();
        let test = build_phase2_test(&zero, &pair.train, 1000, 13).unwrap();
        for (u, i) in test.token_pairs() {
            assert!(!pair.train.contains_token_pair(u, i));
        }
    }

    #[test]
    fn per_user_test_share_stays_in_band_at_default_fraction() {
        for n in 5..=60 {
            let share = test_count_for(n, 0.8) as f64 / n as f64;
            assert!((0.1..=0.3).contains(&share), "n={n} share={share}");
        }
    }
}
