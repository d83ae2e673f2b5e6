//! Popularity ranking: items ordered by global training-interaction
//! count, most consumed first, ties on ascending token. Every user sees
//! the same list minus their own training items.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::log::{hex, InteractionLog};

use super::{exclusions_for, RankedList, RecommenderModel, UserRef};

pub struct PopScoreModel {
    train: Arc<InteractionLog>,
    /// Full catalog, ordered by (count desc, item index asc).
    ranked: Vec<u32>,
}

impl PopScoreModel {
    pub fn fit(train: &Arc<InteractionLog>) -> Self {
        let mut ranked: Vec<u32> = (0..train.n_items() as u32).collect();
        ranked.sort_unstable_by(|&a, &b| {
            train
                .item_count(b)
                .cmp(&train.item_count(a))
                .then_with(|| a.cmp(&b))
        });
        PopScoreModel {
            train: Arc::clone(train),
            ranked,
        }
    }
}

impl RecommenderModel for PopScoreModel {
    fn algorithm(&self) -> &'static str {
        "PopScore"
    }

    fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"PopScore\x1f");
        for &item in &self.ranked {
            hasher.update(item.to_le_bytes());
        }
        hasher.update(self.train.digest().as_bytes());
        hex(&hasher.finalize())
    }

    fn recommend(&self, user: UserRef<'_>, k: usize) -> RankedList {
        let exclude = exclusions_for(&self.train, user);
        let items: Vec<u32> = self
            .ranked
            .iter()
            .copied()
            .filter(|&i| !exclude.contains(i))
            .take(k)
            .collect();
        RankedList::checked(items, &exclude)
    }
}
