//! Dataset characterisation: the scalar descriptors (size, shape,
//! density, interaction averages) and the Gini concentration coefficient
//! computed over per-user and per-item interaction counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::InteractionLog;

/// Scalars derivable from the three headline counts alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedStats {
    /// `|U| * |I|`: the size of the full preference matrix.
    pub space_size: u128,
    /// `|U| / |I|`: tall-and-thin datasets are below 1, wide ones above.
    pub shape: f64,
    /// Filled fraction of the space, in `[0, 1]`.
    pub density: f64,
    /// `1 - density`.
    pub sparsity: f64,
    pub avg_int_per_user: f64,
    pub avg_int_per_item: f64,
}

/// Everything reported about one dataset at one core level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsReport {
    pub n_interactions: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub space_size: u128,
    pub shape: f64,
    pub density: f64,
    pub sparsity: f64,
    pub avg_int_per_user: f64,
    pub avg_int_per_item: f64,
    pub gini_user: f64,
    pub gini_item: f64,
}

/// Derive the scalar descriptors from headline counts. All three counts
/// must be positive and consistent (`n_interactions` cannot exceed the
/// space size).
pub fn derive_stats(n_interactions: usize, n_users: usize, n_items: usize) -> Result<DerivedStats> {
    if n_interactions == 0 || n_users == 0 || n_items == 0 {
        return Err(Error::InvalidInput(format!(
            "characterisation needs positive counts, got {n_interactions} interactions, \
             {n_users} users, {n_items} items"
        )));
    }
    let space_size = n_users as u128 * n_items as u128;
    if n_interactions as u128 > space_size {
        return Err(Error::InvalidInput(format!(
            "{n_interactions} interactions cannot fit a {n_users} x {n_items} space"
        )));
    }
    // A u32-indexed log keeps the space below 2^64, so the f64 conversions
    // stay within one rounding step and a full matrix divides to exactly 1.
    let density = n_interactions as f64 / space_size as f64;
    Ok(DerivedStats {
        space_size,
        shape: n_users as f64 / n_items as f64,
        density,
        sparsity: 1.0 - density,
        avg_int_per_user: n_interactions as f64 / n_users as f64,
        avg_int_per_item: n_interactions as f64 / n_items as f64,
    })
}

/// Gini coefficient of a count vector, in `[0, 1 - 2/(n+1)]`.
///
/// Counts are sorted ascending and weighted by descending rank:
/// `G = 1 - 2 * sum((n+1-i) * c_i) / ((n+1) * total)` for 1-based `i`.
/// The sums run in u128, so a uniform vector yields exactly 0 and scaling
/// every count by a constant leaves the result unchanged to the last bit
/// of the final division.
///
/// Counts must all be positive: these are interaction counts of entities
/// that exist, and an entity with zero interactions does not.
pub fn gini(counts: &[u32]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InvalidInput(
            "gini of an empty count vector is undefined".into(),
        ));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidInput(
            "gini requires positive counts".into(),
        ));
    }
    let mut sorted: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
    sorted.sort_unstable();

    let n = sorted.len() as u128;
    let mut weighted: u128 = 0;
    let mut total: u128 = 0;
    for (idx, &c) in sorted.iter().enumerate() {
        let rank_weight = n - idx as u128; // (n + 1 - i) for 1-based i
        weighted += rank_weight * c as u128;
        total += c as u128;
    }
    let denominator = (n + 1) * total;
    let numerator = denominator
        .checked_sub(2 * weighted)
        .expect("ascending sort bounds the weighted sum by (n+1)*total/2");
    Ok(numerator as f64 / denominator as f64)
}

/// Characterise a log: headline counts, derived scalars, and the two
/// concentration coefficients.
pub fn characterize(log: &InteractionLog) -> Result<CharacteristicsReport> {
    let derived = derive_stats(log.n_interactions(), log.n_users(), log.n_items())?;
    Ok(CharacteristicsReport {
        n_interactions: log.n_interactions(),
        n_users: log.n_users(),
        n_items: log.n_items(),
        space_size: derived.space_size,
        shape: derived.shape,
        density: derived.density,
        sparsity: derived.sparsity,
        avg_int_per_user: derived.avg_int_per_user,
        avg_int_per_item: derived.avg_int_per_item,
        gini_user: gini(log.per_user_counts())?,
        gini_item: gini(log.per_item_counts())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_derivations_match_hand_arithmetic() {
        let s = derive_stats(3_000_000, 104_439, 1_105_866).unwrap();
        assert_eq!(s.space_size, 115_495_539_174);
        assert_eq!(format!("{:.2}", s.avg_int_per_user), "28.72");
        assert_eq!(format!("{:.2}", s.avg_int_per_item), "2.71");
        assert_eq!(format!("{:.2}", s.shape), "0.09");
        assert_eq!(format!("{:.4}", 100.0 * s.sparsity), "99.9974");
    }

    #[test]
    fn full_matrix_is_exactly_dense() {
        let s = derive_stats(6, 2, 3).unwrap();
        assert_eq!(s.density, 1.0);
        assert_eq!(s.sparsity, 0.0);
    }

    #[test]
    fn small_example_scalars() {
        let s = derive_stats(5, 2, 3).unwrap();
        assert!((s.density - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(format!("{:.4}", s.density), "0.8333");
        assert_eq!(format!("{:.4}", s.shape), "0.6667");
        assert_eq!(s.avg_int_per_user, 2.5);
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert!(derive_stats(0, 2, 3).is_err());
        assert!(derive_stats(5, 0, 3).is_err());
        assert!(derive_stats(5, 2, 0).is_err());
    }

    #[test]
    fn overfull_space_is_rejected() {
        assert!(derive_stats(7, 2, 3).is_err());
    }

    #[test]
    fn gini_of_uniform_counts_is_exactly_zero() {
        for n in [1usize, 2, 10, 100] {
            for c in [1u32, 7, 1000] {
                assert_eq!(gini(&vec![c; n]).unwrap(), 0.0, "n={n} c={c}");
            }
        }
    }

    #[test]
    fn gini_textbook_pairs() {
        // [1,3]: 1 - 2*(2/3 * 1/4 + 1/3 * 3/4) = 1/6
        let g = gini(&[1, 3]).unwrap();
        assert!((g - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(format!("{:.4}", g), "0.1667");
        // [1,1,8]: numerator (4*10 - 2*13) = 14 over 40
        assert_eq!(gini(&[1, 1, 8]).unwrap(), 0.35);
    }

    #[test]
    fn gini_ignores_input_order() {
        assert_eq!(gini(&[8, 1, 1]).unwrap(), gini(&[1, 8, 1]).unwrap());
        assert_eq!(gini(&[8, 1, 1]).unwrap(), 0.35);
    }

    #[test]
    fn gini_rejects_empty_and_zero() {
        assert!(gini(&[]).is_err());
        assert!(gini(&[3, 0, 1]).is_err());
    }

    #[test]
    fn gini_stays_below_its_upper_bound() {
        // One giant against n-1 singletons approaches 1 - 2/(n+1).
        let mut counts = vec![1u32; 99];
        counts.push(1_000_000_000);
        let g = gini(&counts).unwrap();
        let bound = 1.0 - 2.0 / 101.0;
        assert!(g < bound);
        assert!(g > bound - 1e-4);
    }

    #[test]
    fn characterize_agrees_with_parts() {
        let pairs = [("u1", "a"),
            ("u1", "b"),
            ("u1", "c"),
            ("u2", "a"),
            ("u3", "b")];
        let log =
            InteractionLog::from_token_pairs(pairs.iter().map(|&(u, i)| (u, i))).unwrap();
        let report = characterize(&log).unwrap();
        assert_eq!(report.n_interactions, 5);
        assert_eq!(report.n_users, 3);
        assert_eq!(report.n_items, 3);
        assert_eq!(report.space_size, 9);
        assert_eq!(report.gini_user, gini(&[3, 1, 1]).unwrap());
        assert_eq!(report.gini_item, gini(&[2, 2, 1]).unwrap());
    }

    #[test]
    fn report_survives_json_round_trip() {
        let pairs = [("u1", "a"), ("u2", "a"), ("u2", "b")];
        let log =
            InteractionLog::from_token_pairs(pairs.iter().map(|&(u, i)| (u, i))).unwrap();
        let report = characterize(&log).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: CharacteristicsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn large_space_size_serialises_as_an_integer() {
        let s = derive_stats(3_000_000, 376_115, 1_471_494).unwrap();
        assert_eq!(s.space_size, 553_450_965_810);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("553450965810"));
        let back: DerivedStats = serde_json::from_str(&text).unwrap();
        assert_eq!(back.space_size, s.space_size);
    }
}
