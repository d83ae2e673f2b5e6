//! Bayesian personalised ranking: pairwise matrix factorisation trained
//! by stochastic gradient descent on (user, seen item, unseen item)
//! triples, maximising the likelihood that seen outranks unseen.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::log::InteractionLog;
use crate::seed::rng_from_u64;

use super::implicit_mf::{
    expect_magic, factor_fingerprint, read_snapshot_body, write_snapshot_body,
};
use super::{exclusions_for, init_factors, rank_dense, zero_score_list, RankedList,
    RecommenderModel, UserRef};

pub struct BprModel {
    train: Arc<InteractionLog>,
    factors: usize,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
}

impl BprModel {
    pub fn fit(
        train: &Arc<InteractionLog>,
        factors: usize,
        learn_rate: f64,
        lambda: f64,
        epochs: usize,
        seed: u64,
    ) -> Result<Self> {
        let n_users = train.n_users();
        let n_items = train.n_items();
        if n_items < 2 {
            return Err(Error::InvalidInput(
                "BPR needs at least 2 items to form a preference pair".into(),
            ));
        }
        // Users who consumed the whole catalog have no negative item to
        // sample and are skipped; if that is everyone, nothing can train.
        let eligible: Vec<u32> = (0..n_users as u32)
            .filter(|&u| (train.user_count(u) as usize) < n_items)
            .collect();
        if eligible.is_empty() {
            return Err(Error::InvalidInput(
                "every user consumed the full catalog; BPR has no negatives".into(),
            ));
        }

        let mut rng = rng_from_u64(seed);
        let mut user_factors = init_factors(&mut rng, n_users, factors);
        let mut item_factors = init_factors(&mut rng, n_items, factors);

        let triples_per_epoch = train.n_interactions();
        let mut x_old = vec![0.0; factors];
        for epoch in 0..epochs {
            for _ in 0..triples_per_epoch {
                let u = eligible[rng.random_range(0..eligible.len())];
                let pairs = train.user_pairs(u);
                let i = pairs[rng.random_range(0..pairs.len())].1;
                let j = loop {
                    let candidate = rng.random_range(0..n_items as u32);
                    if !train.contains_pair(u, candidate) {
                        break candidate;
                    }
                };

                let xu = &mut user_factors[u as usize * factors..(u as usize + 1) * factors];
                x_old.copy_from_slice(xu);
                let (yi, yj) = two_rows(&mut item_factors, i as usize, j as usize, factors);

                let margin: f64 = x_old
                    .iter()
                    .zip(yi.iter().zip(yj.iter()))
                    .map(|(x, (pi, pj))| x * (pi - pj))
                    .sum();
                let s = 1.0 / (1.0 + margin.exp()); // sigmoid(-margin)

                for f in 0..factors {
                    xu[f] += learn_rate * (s * (yi[f] - yj[f]) - lambda * xu[f]);
                    yi[f] += learn_rate * (s * x_old[f] - lambda * yi[f]);
                    yj[f] += learn_rate * (-s * x_old[f] - lambda * yj[f]);
                }
            }
            if user_factors
                .iter()
                .chain(item_factors.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::NonFinite { sweep: epoch });
            }
        }

        Ok(BprModel {
            train: Arc::clone(train),
            factors,
            user_factors,
            item_factors,
        })
    }

    pub fn score(&self, u: u32, i: u32) -> f64 {
        let base_u = u as usize * self.factors;
        let base_i = i as usize * self.factors;
        (0..self.factors)
            .map(|f| self.user_factors[base_u + f] * self.item_factors[base_i + f])
            .sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        out.write_all(b"BPRSNAP\x01")?;
        write_snapshot_body(
            &mut out,
            &self.train.digest(),
            self.train.n_users(),
            self.train.n_items(),
            self.factors,
            &self.user_factors,
            &self.item_factors,
        )?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, train: &Arc<InteractionLog>) -> Result<Self> {
        let mut input = BufReader::new(fs::File::open(path)?);
        expect_magic(&mut input, b"BPRSNAP\x01")?;
        let (factors, user_factors, item_factors) = read_snapshot_body(&mut input, train)?;
        Ok(BprModel {
            train: Arc::clone(train),
            factors,
            user_factors,
            item_factors,
        })
    }
}

/// Two distinct rows of one matrix, mutably.
fn two_rows(matrix: &mut [f64], a: usize, b: usize, factors: usize) -> (&mut [f64], &mut [f64]) {
    assert_ne!(a, b, "positive and negative item must differ");
    if a < b {
        let (left, right) = matrix.split_at_mut(b * factors);
        (
            &mut left[a * factors..(a + 1) * factors],
            &mut right[..factors],
        )
    } else {
        let (left, right) = matrix.split_at_mut(a * factors);
        let yi = &mut right[..factors];
        (yi, &mut left[b * factors..(b + 1) * factors])
    }
}

impl RecommenderModel for BprModel {
    fn algorithm(&self) -> &'static str {
        "BPR"
    }

    fn fingerprint(&self) -> String {
        factor_fingerprint(
            b"BPR\x1f",
            self.factors,
            &self.user_factors,
            &self.item_factors,
            &self.train.digest(),
        )
    }

    fn recommend(&self, user: UserRef<'_>, k: usize) -> RankedList {
        let exclude = exclusions_for(&self.train, user);
        let n_items = self.train.n_items();
        let u = match user {
            UserRef::Known(u) => u,
            UserRef::Cold(_) => {
                return RankedList::checked(
                    zero_score_list(n_items as u32, &exclude, k),
                    &exclude,
                )
            }
        };
        let scores: Vec<f64> = (0..n_items as u32).map(|i| self.score(u, i)).collect();
        RankedList::checked(rank_dense(&scores, &exclude, k), &exclude)
    }
}
