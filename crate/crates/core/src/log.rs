//! The immutable, canonically indexed interaction set at the centre of the
//! pipeline.
//!
//! Construction canonicalises everything once: user and item tokens get dense
//! indices in ascending byte order, and the pair list is sorted by
//! (user, item) and deduplicated. Token-sorted indexing makes the "ascending
//! item token" tie-break used throughout the recommenders equal to plain
//! index order, and gives every log a single platform-independent byte
//! representation, which is what the determinism contracts lean on.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// One parsed row of a raw interaction file, before binarisation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    /// Explicit rating; `None` for inherently implicit sources.
    pub rating: Option<f64>,
    /// Parsed and carried through, never consulted by any operation.
    pub timestamp: Option<i64>,
}

/// Deduplicated set of (user, item) interactions with dense index maps.
///
/// Indices are assigned in ascending token order; `pairs` is sorted by
/// (user index, item index) and free of duplicates. Entities that do not
/// appear in any interaction have no index. The struct is immutable after
/// construction and cheap to share behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLog {
    user_tokens: Vec<String>,
    item_tokens: Vec<String>,
    pairs: Vec<(u32, u32)>,
    /// CSR offsets into `pairs`, length |U|+1.
    user_offsets: Vec<usize>,
    per_user_counts: Vec<u32>,
    per_item_counts: Vec<u32>,
}

/// Item-major adjacency (the transpose of the log's user-major layout).
pub struct ItemAdjacency {
    offsets: Vec<usize>,
    users: Vec<u32>,
}

impl ItemAdjacency {
    /// Users of item `i`, ascending.
    pub fn users_of(&self, i: u32) -> &[u32] {
        &self.users[self.offsets[i as usize]..self.offsets[i as usize + 1]]
    }
}

/// Streaming token interner feeding [`InteractionLog`] construction without
/// materialising per-row strings twice.
pub(crate) struct PairInterner {
    user_ids: HashMap<String, u32>,
    item_ids: HashMap<String, u32>,
    user_tokens: Vec<String>,
    item_tokens: Vec<String>,
    pairs: Vec<(u32, u32)>,
}

impl PairInterner {
    pub(crate) fn new() -> Self {
        PairInterner {
            user_ids: HashMap::new(),
            item_ids: HashMap::new(),
            user_tokens: Vec::new(),
            item_tokens: Vec::new(),
            pairs: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, user: String, item: String) {
        let u = match self.user_ids.get(&user) {
            Some(&id) => id,
            None => {
                let id = self.user_tokens.len() as u32;
                self.user_ids.insert(user.clone(), id);
                self.user_tokens.push(user);
                id
            }
        };
        let i = match self.item_ids.get(&item) {
            Some(&id) => id,
            None => {
                let id = self.item_tokens.len() as u32;
                self.item_ids.insert(item.clone(), id);
                self.item_tokens.push(item);
                id
            }
        };
        self.pairs.push((u, i));
    }

    /// Deduplicate and canonicalise. Errors when nothing was pushed.
    pub(crate) fn finish(self) -> Result<InteractionLog> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyLog(
                "zero interactions after preprocessing".into(),
            ));
        }
        Ok(InteractionLog::from_interned(
            self.user_tokens,
            self.item_tokens,
            self.pairs,
        ))
    }
}

impl InteractionLog {
    /// The log with no interactions — the distinguished empty-coreset value.
    pub fn empty() -> Self {
        let log = InteractionLog {
            user_tokens: Vec::new(),
            item_tokens: Vec::new(),
            pairs: Vec::new(),
            user_offsets: vec![0],
            per_user_counts: Vec::new(),
            per_item_counts: Vec::new(),
        };
        log.validate();
        log
    }

    /// Build from (user token, item token) pairs; duplicates collapse.
    /// Errors on an empty sequence.
    pub fn from_token_pairs<S, T>(token_pairs: T) -> Result<Self>
    where
        S: Into<String>,
        T: IntoIterator<Item = (S, S)>,
    {
        let mut interner = PairInterner::new();
        for (user, item) in token_pairs {
            interner.push(user.into(), item.into());
        }
        interner.finish()
    }

    /// Canonicalise interned pairs: indices in token order, pairs sorted and
    /// deduplicated. Every interned entity appears in at least one pair by
    /// construction, and dedup cannot orphan any.
    fn from_interned(
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
        mut pairs: Vec<(u32, u32)>,
    ) -> Self {
        let user_rank = token_ranks(&user_tokens);
        let item_rank = token_ranks(&item_tokens);
        for pair in pairs.iter_mut() {
            *pair = (user_rank[pair.0 as usize], item_rank[pair.1 as usize]);
        }
        pairs.sort_unstable();
        pairs.dedup();

        let user_tokens = reorder_by_rank(user_tokens, &user_rank);
        let item_tokens = reorder_by_rank(item_tokens, &item_rank);
        Self::assemble(user_tokens, item_tokens, pairs)
    }

    /// Build a sub-log from a subset of a parent's pairs (parent indices).
    /// Surviving entities are re-indexed densely; an empty selection yields
    /// the empty log.
    pub(crate) fn from_parent_subset(parent: &InteractionLog, mut selected: Vec<(u32, u32)>) -> Self {
        if !selected.is_sorted() {
            selected.sort_unstable();
        }
        debug_assert!(selected.windows(2).all(|w| w[0] != w[1]));

        let mut user_seen = vec![false; parent.n_users()];
        let mut item_seen = vec![false; parent.n_items()];
        for &(u, i) in &selected {
            user_seen[u as usize] = true;
            item_seen[i as usize] = true;
        }
        // Prefix sums double as old-index → new-index maps; filtering a
        // token-sorted list keeps it token-sorted.
        let user_map = dense_remap(&user_seen);
        let item_map = dense_remap(&item_seen);
        for pair in selected.iter_mut() {
            *pair = (user_map[pair.0 as usize], item_map[pair.1 as usize]);
        }
        let user_tokens = filter_by_mask(&parent.user_tokens, &user_seen);
        let item_tokens = filter_by_mask(&parent.item_tokens, &item_seen);
        Self::assemble(user_tokens, item_tokens, selected)
    }

    /// Final assembly from canonical parts: token vecs ascending, pairs
    /// sorted+unique with indices matching the token vecs.
    fn assemble(user_tokens: Vec<String>, item_tokens: Vec<String>, pairs: Vec<(u32, u32)>) -> Self {
        let mut per_user_counts = vec![0u32; user_tokens.len()];
        let mut per_item_counts = vec![0u32; item_tokens.len()];
        for &(u, i) in &pairs {
            per_user_counts[u as usize] += 1;
            per_item_counts[i as usize] += 1;
        }
        let mut user_offsets = Vec::with_capacity(user_tokens.len() + 1);
        user_offsets.push(0usize);
        for &c in &per_user_counts {
            user_offsets.push(user_offsets.last().unwrap() + c as usize);
        }
        let log = InteractionLog {
            user_tokens,
            item_tokens,
            pairs,
            user_offsets,
            per_user_counts,
            per_item_counts,
        };
        log.validate();
        log
    }

    /// Structural invariants, asserted on every construction.
    fn validate(&self) {
        assert_eq!(self.user_tokens.len(), self.per_user_counts.len());
        assert_eq!(self.item_tokens.len(), self.per_item_counts.len());
        assert_eq!(self.user_offsets.len(), self.user_tokens.len() + 1);
        assert_eq!(*self.user_offsets.last().unwrap(), self.pairs.len());
        assert!(
            self.user_tokens.windows(2).all(|w| w[0] < w[1]),
            "user tokens must be strictly ascending"
        );
        assert!(
            self.item_tokens.windows(2).all(|w| w[0] < w[1]),
            "item tokens must be strictly ascending"
        );
        assert!(
            self.pairs.windows(2).all(|w| w[0] < w[1]),
            "pairs must be strictly ascending (sorted, deduplicated)"
        );
        let user_sum: usize = self.per_user_counts.iter().map(|&c| c as usize).sum();
        let item_sum: usize = self.per_item_counts.iter().map(|&c| c as usize).sum();
        assert_eq!(user_sum, self.pairs.len(), "per-user counts must sum to |Int|");
        assert_eq!(item_sum, self.pairs.len(), "per-item counts must sum to |Int|");
        assert!(
            self.per_user_counts.iter().all(|&c| c >= 1),
            "indexed users must appear"
        );
        assert!(
            self.per_item_counts.iter().all(|&c| c >= 1),
            "indexed items must appear"
        );
    }

    pub fn n_users(&self) -> usize {
        self.user_tokens.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_tokens.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn user_token(&self, u: u32) -> &str {
        &self.user_tokens[u as usize]
    }

    pub fn item_token(&self, i: u32) -> &str {
        &self.item_tokens[i as usize]
    }

    /// Dense index of a user token, if the user appears in this log.
    pub fn user_index(&self, token: &str) -> Option<u32> {
        self.user_tokens
            .binary_search_by(|t| t.as_str().cmp(token))
            .ok()
            .map(|ix| ix as u32)
    }

    pub fn item_index(&self, token: &str) -> Option<u32> {
        self.item_tokens
            .binary_search_by(|t| t.as_str().cmp(token))
            .ok()
            .map(|ix| ix as u32)
    }

    /// All pairs, sorted by (user, item).
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Item indices of one user's interactions, ascending.
    pub fn items_of(&self, u: u32) -> impl Iterator<Item = u32> + '_ {
        self.user_pairs(u).iter().map(|&(_, i)| i)
    }

    /// The user's pair slice (items ascending within it).
    pub fn user_pairs(&self, u: u32) -> &[(u32, u32)] {
        &self.pairs[self.user_span(u)]
    }

    /// The user's index range within [`Self::pairs`].
    pub fn user_span(&self, u: u32) -> std::ops::Range<usize> {
        self.user_offsets[u as usize]..self.user_offsets[u as usize + 1]
    }

    pub fn user_count(&self, u: u32) -> u32 {
        self.per_user_counts[u as usize]
    }

    pub fn item_count(&self, i: u32) -> u32 {
        self.per_item_counts[i as usize]
    }

    pub fn per_user_counts(&self) -> &[u32] {
        &self.per_user_counts
    }

    pub fn per_item_counts(&self) -> &[u32] {
        &self.per_item_counts
    }

    pub fn contains_pair(&self, u: u32, i: u32) -> bool {
        self.user_pairs(u).binary_search_by(|p| p.1.cmp(&i)).is_ok()
    }

    pub fn contains_token_pair(&self, user: &str, item: &str) -> bool {
        match (self.user_index(user), self.item_index(item)) {
            (Some(u), Some(i)) => self.contains_pair(u, i),
            _ => false,
        }
    }

    /// Interactions as token pairs, in canonical order.
    pub fn token_pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.pairs
            .iter()
            .map(move |&(u, i)| (self.user_token(u), self.item_token(i)))
    }

    /// Item-major transpose, built on demand (counting sort, O(|Int|)).
    pub fn item_adjacency(&self) -> ItemAdjacency {
        let mut offsets = Vec::with_capacity(self.n_items() + 1);
        offsets.push(0usize);
        for &c in &self.per_item_counts {
            offsets.push(offsets.last().unwrap() + c as usize);
        }
        let mut cursor = offsets.clone();
        let mut users = vec![0u32; self.pairs.len()];
        // User-major order in, so each item's user list comes out ascending.
        for &(u, i) in &self.pairs {
            users[cursor[i as usize]] = u;
            cursor[i as usize] += 1;
        }
        ItemAdjacency { offsets, users }
    }

    /// Content digest (hex SHA-256) over tokens and pairs; equal logs hash
    /// equally because the representation is canonical.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.user_tokens.len() as u64).to_le_bytes());
        for token in &self.user_tokens {
            hasher.update((token.len() as u64).to_le_bytes());
            hasher.update(token.as_bytes());
        }
        hasher.update((self.item_tokens.len() as u64).to_le_bytes());
        for token in &self.item_tokens {
            hasher.update((token.len() as u64).to_le_bytes());
            hasher.update(token.as_bytes());
        }
        for &(u, i) in &self.pairs {
            hasher.update(u.to_le_bytes());
            hasher.update(i.to_le_bytes());
        }
        hex(&hasher.finalize())
    }
}

/// Uniform random subset of exactly `cap` interactions when the log exceeds
/// the cap; identity otherwise. Index maps are rebuilt over survivors.
pub fn downsample(log: &InteractionLog, cap: usize, seed: u64) -> Result<InteractionLog> {
    if cap == 0 {
        return Err(Error::InvalidConfig("sample cap must be ≥ 1".into()));
    }
    if log.n_interactions() <= cap {
        return Ok(log.clone());
    }
    let mut rng = seed::rng_from_u64(seed);
    let keep = seed::sample_without_replacement(&mut rng, log.n_interactions(), cap);
    let selected: Vec<(u32, u32)> = keep.into_iter().map(|ix| log.pairs[ix]).collect();
    Ok(InteractionLog::from_parent_subset(log, selected))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// rank[old_position] = position the token takes in ascending order.
fn token_ranks(tokens: &[String]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..tokens.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| tokens[a as usize].cmp(&tokens[b as usize]));
    let mut rank = vec![0u32; tokens.len()];
    for (new_ix, &old_ix) in order.iter().enumerate() {
        rank[old_ix as usize] = new_ix as u32;
    }
    rank
}

fn reorder_by_rank(tokens: Vec<String>, rank: &[u32]) -> Vec<String> {
    let mut out = vec![String::new(); tokens.len()];
    for (old_ix, token) in tokens.into_iter().enumerate() {
        out[rank[old_ix] as usize] = token;
    }
    out
}

fn dense_remap(seen: &[bool]) -> Vec<u32> {
    let mut map = vec![0u32; seen.len()];
    let mut next = 0u32;
    for (ix, &s) in seen.iter().enumerate() {
        map[ix] = next;
        if s {
            next += 1;
        }
    }
    map
}

fn filter_by_mask(tokens: &[String], mask: &[bool]) -> Vec<String> {
    tokens
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(t, _)| t.clone())
        .collect()
}
