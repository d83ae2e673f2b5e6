//! Core filtering: the pruning operators under study and the retention
//! arithmetic used to compare a pruned log against its unpruned baseline.
//!
//! The primary operator is the *user-threshold core*: drop every
//! interaction belonging to a user with fewer than `t` interactions,
//! counted in the parent log. One pass, no iteration — a user who falls
//! below `t` only because other users were removed stays in. The item
//! variant is the same operator transposed, and the recursive variant
//! iterates both sides to the classical k-core fixpoint.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::InteractionLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMode {
    UserThreshold,
    ItemThreshold,
    RecursiveCore,
}

impl std::fmt::Display for PruneMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PruneMode::UserThreshold => "user_threshold",
            PruneMode::ItemThreshold => "item_threshold",
            PruneMode::RecursiveCore => "recursive_core",
        };
        f.write_str(name)
    }
}

/// A pruned log plus the provenance needed to trace it back to its parent.
#[derive(Debug, Clone)]
pub struct Coreset {
    pub log: Arc<InteractionLog>,
    pub threshold: u32,
    pub mode: PruneMode,
    pub parent_digest: String,
}

/// Drop all interactions of users with fewer than `t` interactions in
/// `parent`. `t = 0` is the identity (the log is shared, not copied); a
/// threshold nobody meets yields an empty coreset, which is a value, not
/// an error.
pub fn prune_users(parent: &Arc<InteractionLog>, t: u32) -> Coreset {
    let parent_digest = parent.digest();
    if t == 0 {
        return Coreset {
            log: Arc::clone(parent),
            threshold: t,
            mode: PruneMode::UserThreshold,
            parent_digest,
        };
    }
    let keep: Vec<bool> = parent
        .per_user_counts()
        .iter()
        .map(|&c| c >= t)
        .collect();
    let selected: Vec<(u32, u32)> = parent
        .pairs()
        .iter()
        .copied()
        .filter(|&(u, _)| keep[u as usize])
        .collect();
    Coreset {
        log: Arc::new(InteractionLog::from_parent_subset(parent, selected)),
        threshold: t,
        mode: PruneMode::UserThreshold,
        parent_digest,
    }
}

/// The transposed operator: drop all interactions of items with fewer
/// than `t` interactions in `parent`.
pub fn prune_items(parent: &Arc<InteractionLog>, t: u32) -> Coreset {
    let parent_digest = parent.digest();
    if t == 0 {
        return Coreset {
            log: Arc::clone(parent),
            threshold: t,
            mode: PruneMode::ItemThreshold,
            parent_digest,
        };
    }
    let keep: Vec<bool> = parent
        .per_item_counts()
        .iter()
        .map(|&c| c >= t)
        .collect();
    let selected: Vec<(u32, u32)> = parent
        .pairs()
        .iter()
        .copied()
        .filter(|&(_, i)| keep[i as usize])
        .collect();
    Coreset {
        log: Arc::new(InteractionLog::from_parent_subset(parent, selected)),
        threshold: t,
        mode: PruneMode::ItemThreshold,
        parent_digest,
    }
}

/// Classical recursive k-core: peel users *and* items below `t` until a
/// fixpoint. Requires `t >= 1`; at `t = 1` the fixpoint is the input
/// itself because a log never holds zero-count users or items.
pub fn prune_recursive(parent: &Arc<InteractionLog>, t: u32) -> Result<Coreset> {
    if t == 0 {
        return Err(Error::InvalidConfig(
            "recursive core requires a threshold of at least 1".into(),
        ));
    }
    let parent_digest = parent.digest();

    let mut user_count: Vec<u32> = parent.per_user_counts().to_vec();
    let mut item_count: Vec<u32> = parent.per_item_counts().to_vec();
    let mut user_out = vec![false; parent.n_users()];
    let mut item_out = vec![false; parent.n_items()];
    let adjacency = parent.item_adjacency();

    #[derive(Clone, Copy)]
    enum Node {
        User(u32),
        Item(u32),
    }

    let mut queue: VecDeque<Node> = VecDeque::new();
    for (u, &c) in user_count.iter().enumerate() {
        if c < t {
            queue.push_back(Node::User(u as u32));
        }
    }
    for (i, &c) in item_count.iter().enumerate() {
        if c < t {
            queue.push_back(Node::Item(i as u32));
        }
    }

    while let Some(node) = queue.pop_front() {
        match node {
            Node::User(u) => {
                let u = u as usize;
                if user_out[u] || user_count[u] >= t {
                    continue;
                }
                user_out[u] = true;
                for i in parent.items_of(u as u32) {
                    let i = i as usize;
                    if item_out[i] {
                        continue;
                    }
                    item_count[i] -= 1;
                    if item_count[i] < t {
                        queue.push_back(Node::Item(i as u32));
                    }
                }
            }
            Node::Item(i) => {
                let i = i as usize;
                if item_out[i] || item_count[i] >= t {
                    continue;
                }
                item_out[i] = true;
                for &u in adjacency.users_of(i as u32) {
                    let u = u as usize;
                    if user_out[u] {
                        continue;
                    }
                    user_count[u] -= 1;
                    if user_count[u] < t {
                        queue.push_back(Node::User(u as u32));
                    }
                }
            }
        }
    }

    let selected: Vec<(u32, u32)> = parent
        .pairs()
        .iter()
        .copied()
        .filter(|&(u, i)| !user_out[u as usize] && !item_out[i as usize])
        .collect();
    Ok(Coreset {
        log: Arc::new(InteractionLog::from_parent_subset(parent, selected)),
        threshold: t,
        mode: PruneMode::RecursiveCore,
        parent_digest,
    })
}

/// Mode dispatcher for callers that carry the mode as data.
pub fn prune(parent: &Arc<InteractionLog>, t: u32, mode: PruneMode) -> Result<Coreset> {
    match mode {
        PruneMode::UserThreshold => Ok(prune_users(parent, t)),
        PruneMode::ItemThreshold => Ok(prune_items(parent, t)),
        PruneMode::RecursiveCore => prune_recursive(parent, t),
    }
}

/// What fraction of the baseline survives, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub user_retention_pct: f64,
    pub item_retention_pct: f64,
    pub interaction_retention_pct: f64,
}

/// `100 * part / whole`, the single definition every retention figure
/// goes through.
pub fn retention_pct(part: usize, whole: usize) -> f64 {
    100.0 * part as f64 / whole as f64
}

/// Compare a pruned log against the unpruned baseline it descends from.
/// An empty baseline has no meaningful denominators and is an error; an
/// empty *pruned* log simply retains 0%.
pub fn retention(baseline: &InteractionLog, pruned: &InteractionLog) -> Result<RetentionReport> {
    if baseline.is_empty() {
        return Err(Error::InvalidInput(
            "retention baseline has no interactions".into(),
        ));
    }
    Ok(RetentionReport {
        user_retention_pct: retention_pct(pruned.n_users(), baseline.n_users()),
        item_retention_pct: retention_pct(pruned.n_items(), baseline.n_items()),
        interaction_retention_pct: retention_pct(pruned.n_interactions(), baseline.n_interactions()),
    })
}
