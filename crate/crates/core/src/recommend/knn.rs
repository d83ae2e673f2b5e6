//! Nearest-neighbour models over binary interaction vectors.
//!
//! Cosine similarity between binary vectors reduces to
//! `overlap / sqrt(count_a * count_b)`, which is never negative, so both
//! models accumulate only positive evidence and rank with the sparse
//! positive-score path.
//!
//! UserKNN fixes each user's neighbourhood at fit time: the global top-N
//! most similar users. ItemKNN's neighbourhood is per candidate at query
//! time: for a candidate item, the most similar among *the user's own
//! items* — so the same candidate can lean on different neighbours for
//! different users.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::log::{hex, InteractionLog};

use super::{
    exclusions_for, rank_positive_sparse, zero_score_list, RankedList, RecommenderModel, UserRef,
};

pub struct UserKnnModel {
    train: Arc<InteractionLog>,
    neighbours: usize,
    /// Per-user neighbour slices into `hood`, each sorted by
    /// (similarity desc, user index asc).
    offsets: Vec<usize>,
    hood: Vec<(u32, f64)>,
}

impl UserKnnModel {
    pub fn fit(train: &Arc<InteractionLog>, neighbours: usize) -> Self {
        let n_users = train.n_users();
        let adjacency = train.item_adjacency();
        let mut offsets = Vec::with_capacity(n_users + 1);
        offsets.push(0);
        let mut hood = Vec::new();

        let mut overlap = vec![0u32; n_users];
        let mut touched: Vec<u32> = Vec::new();
        for u in 0..n_users as u32 {
            for i in train.items_of(u) {
                for &v in adjacency.users_of(i) {
                    if v == u {
                        continue;
                    }
                    if overlap[v as usize] == 0 {
                        touched.push(v);
                    }
                    overlap[v as usize] += 1;
                }
            }
            let cu = train.user_count(u) as f64;
            let mut candidates: Vec<(u32, f64)> = touched
                .iter()
                .map(|&v| {
                    let sim =
                        overlap[v as usize] as f64 / (cu * train.user_count(v) as f64).sqrt();
                    (v, sim)
                })
                .collect();
            candidates.sort_unstable_by(|&(va, sa), &(vb, sb)| {
                sb.partial_cmp(&sa)
                    .expect("similarities are finite")
                    .then_with(|| va.cmp(&vb))
            });
            candidates.truncate(neighbours);
            hood.extend_from_slice(&candidates);
            offsets.push(hood.len());

            for &v in &touched {
                overlap[v as usize] = 0;
            }
            touched.clear();
        }

        UserKnnModel {
            train: Arc::clone(train),
            neighbours,
            offsets,
            hood,
        }
    }

    fn hood_of(&self, u: u32) -> &[(u32, f64)] {
        &self.hood[self.offsets[u as usize]..self.offsets[u as usize + 1]]
    }
}

impl RecommenderModel for UserKnnModel {
    fn algorithm(&self) -> &'static str {
        "UserKNN"
    }

    fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"UserKNN\x1f");
        hasher.update((self.neighbours as u64).to_le_bytes());
        for &(v, sim) in &self.hood {
            hasher.update(v.to_le_bytes());
            hasher.update(sim.to_le_bytes());
        }
        hasher.update(self.train.digest().as_bytes());
        hex(&hasher.finalize())
    }

    fn recommend(&self, user: UserRef<'_>, k: usize) -> RankedList {
        let exclude = exclusions_for(&self.train, user);
        let n_items = self.train.n_items() as u32;
        let u = match user {
            UserRef::Known(u) => u,
            UserRef::Cold(_) => {
                return RankedList::checked(zero_score_list(n_items, &exclude, k), &exclude)
            }
        };

        // Neighbours in (sim desc, idx asc) order and each neighbour's
        // items ascending: a fixed summation order, so scores are
        // bit-reproducible.
        let mut score = vec![0.0f64; n_items as usize];
        let mut touched: Vec<u32> = Vec::new();
        for &(v, sim) in self.hood_of(u) {
            for i in self.train.items_of(v) {
                if score[i as usize] == 0.0 {
                    touched.push(i);
                }
                score[i as usize] += sim;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let scored: Vec<(u32, f64)> = touched
            .into_iter()
            .map(|i| (i, score[i as usize]))
            .collect();
        RankedList::checked(
            rank_positive_sparse(scored, n_items, &exclude, k),
            &exclude,
        )
    }
}

pub struct ItemKnnModel {
    train: Arc<InteractionLog>,
    neighbours: usize,
    /// Per-item slices into `sims`: all items with positive similarity,
    /// ascending by item index.
    offsets: Vec<usize>,
    sims: Vec<(u32, f64)>,
}

impl ItemKnnModel {
    pub fn fit(train: &Arc<InteractionLog>, neighbours: usize) -> Self {
        let n_items = train.n_items();
        let adjacency = train.item_adjacency();
        let mut offsets = Vec::with_capacity(n_items + 1);
        offsets.push(0);
        let mut sims = Vec::new();

        let mut overlap = vec![0u32; n_items];
        let mut touched: Vec<u32> = Vec::new();
        for j in 0..n_items as u32 {
            for &v in adjacency.users_of(j) {
                for c in train.items_of(v) {
                    if c == j {
                        continue;
                    }
                    if overlap[c as usize] == 0 {
                        touched.push(c);
                    }
                    overlap[c as usize] += 1;
                }
            }
            let cj = train.item_count(j) as f64;
            touched.sort_unstable();
            for &c in &touched {
                let sim = overlap[c as usize] as f64 / (cj * train.item_count(c) as f64).sqrt();
                sims.push((c, sim));
                overlap[c as usize] = 0;
            }
            touched.clear();
            offsets.push(sims.len());
        }

        ItemKnnModel {
            train: Arc::clone(train),
            neighbours,
            offsets,
            sims,
        }
    }

    fn sims_of(&self, j: u32) -> &[(u32, f64)] {
        &self.sims[self.offsets[j as usize]..self.offsets[j as usize + 1]]
    }
}

impl RecommenderModel for ItemKnnModel {
    fn algorithm(&self) -> &'static str {
        "ItemKNN"
    }

    fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"ItemKNN\x1f");
        hasher.update((self.neighbours as u64).to_le_bytes());
        for &(c, sim) in &self.sims {
            hasher.update(c.to_le_bytes());
            hasher.update(sim.to_le_bytes());
        }
        hasher.update(self.train.digest().as_bytes());
        hex(&hasher.finalize())
    }

    fn recommend(&self, user: UserRef<'_>, k: usize) -> RankedList {
        let exclude = exclusions_for(&self.train, user);
        let n_items = self.train.n_items() as u32;
        let u = match user {
            UserRef::Known(u) => u,
            UserRef::Cold(_) => {
                return RankedList::checked(zero_score_list(n_items, &exclude, k), &exclude)
            }
        };

        // Gather (candidate, sim-to-one-of-u's-items) evidence, then for
        // each candidate keep its `neighbours` strongest links. Sorting
        // by (candidate, sim desc) fixes both the grouping and the
        // summation order.
        let mut gathered: Vec<(u32, f64)> = Vec::new();
        for j in self.train.items_of(u) {
            gathered.extend_from_slice(self.sims_of(j));
        }
        gathered.sort_unstable_by(|&(ca, sa), &(cb, sb)| {
            ca.cmp(&cb).then_with(|| {
                sb.partial_cmp(&sa).expect("similarities are finite")
            })
        });

        let mut scored: Vec<(u32, f64)> = Vec::new();
        let mut cursor = 0;
        while cursor < gathered.len() {
            let candidate = gathered[cursor].0;
            let mut sum = 0.0;
            let mut used = 0;
            while cursor < gathered.len() && gathered[cursor].0 == candidate {
                if used < self.neighbours {
                    sum += gathered[cursor].1;
                    used += 1;
                }
                cursor += 1;
            }
            scored.push((candidate, sum));
        }
        RankedList::checked(
            rank_positive_sparse(scored, n_items, &exclude, k),
            &exclude,
        )
    }
}
