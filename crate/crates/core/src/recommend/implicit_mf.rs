//! Implicit-feedback matrix factorisation fitted by alternating least
//! squares with confidence weighting: observed cells carry confidence
//! `1 + alpha`, unobserved cells weight 1 toward zero.
//!
//! Each half-sweep solves one side exactly given the other, so the
//! penalised objective is non-increasing sweep over sweep; `fit` records
//! it in [`ImplicitMfModel::objective_trace`] after every sweep. The
//! objective uses the Gramian identity to fold the dense
//! sum-over-all-cells term into `sum_u x_u' (Y'Y) x_u`, which keeps its
//! cost proportional to the observed entries.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::log::{hex, InteractionLog};
use crate::seed::rng_from_u64;

use super::{exclusions_for, init_factors, rank_dense, zero_score_list, RankedList,
    RecommenderModel, UserRef};

pub struct ImplicitMfModel {
    train: Arc<InteractionLog>,
    factors: usize,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    /// Objective before training, then after each full sweep.
    pub objective_trace: Vec<f64>,
}

impl ImplicitMfModel {
    pub fn fit(
        train: &Arc<InteractionLog>,
        factors: usize,
        alpha: f64,
        lambda: f64,
        sweeps: usize,
        seed: u64,
    ) -> Result<Self> {
        let n_users = train.n_users();
        let n_items = train.n_items();
        let mut rng = rng_from_u64(seed);
        let mut user_factors = init_factors(&mut rng, n_users, factors);
        let mut item_factors = init_factors(&mut rng, n_items, factors);
        let adjacency = train.item_adjacency();

        let mut objective_trace = Vec::with_capacity(sweeps + 1);
        objective_trace.push(objective(
            train,
            &user_factors,
            &item_factors,
            factors,
            alpha,
            lambda,
        ));

        let mut gram = vec![0.0; factors * factors];
        let mut a = vec![0.0; factors * factors];
        let mut b = vec![0.0; factors];
        for sweep in 0..sweeps {
            // Users given items.
            gramian(&item_factors, factors, lambda, &mut gram);
            for u in 0..n_users as u32 {
                a.copy_from_slice(&gram);
                b.fill(0.0);
                for i in train.items_of(u) {
                    let y = row(&item_factors, i as usize, factors);
                    rank_one_update(&mut a, y, alpha, factors);
                    for (slot, &value) in b.iter_mut().zip(y) {
                        *slot += (1.0 + alpha) * value;
                    }
                }
                cholesky_solve(&mut a, &mut b, factors, sweep)?;
                row_mut(&mut user_factors, u as usize, factors).copy_from_slice(&b);
            }
            // Items given users.
            gramian(&user_factors, factors, lambda, &mut gram);
            for i in 0..n_items as u32 {
                a.copy_from_slice(&gram);
                b.fill(0.0);
                for &u in adjacency.users_of(i) {
                    let x = row(&user_factors, u as usize, factors);
                    rank_one_update(&mut a, x, alpha, factors);
                    for (slot, &value) in b.iter_mut().zip(x) {
                        *slot += (1.0 + alpha) * value;
                    }
                }
                cholesky_solve(&mut a, &mut b, factors, sweep)?;
                row_mut(&mut item_factors, i as usize, factors).copy_from_slice(&b);
            }

            let value = objective(train, &user_factors, &item_factors, factors, alpha, lambda);
            if !value.is_finite() {
                return Err(Error::NonFinite { sweep });
            }
            objective_trace.push(value);
        }

        Ok(ImplicitMfModel {
            train: Arc::clone(train),
            factors,
            user_factors,
            item_factors,
            objective_trace,
        })
    }

    pub fn score(&self, u: u32, i: u32) -> f64 {
        let x = row(&self.user_factors, u as usize, self.factors);
        let y = row(&self.item_factors, i as usize, self.factors);
        dot(x, y)
    }

    /// Persist the learned factors: a versioned header binding the model
    /// to its training log, then the two dense matrices, little-endian.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        out.write_all(b"MFSNAP\x00\x01")?;
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

    /// Load factors saved by [`Self::save`]. The training log must be the
    /// one the snapshot was fitted on; the embedded digest enforces that.
    /// The objective trace is not persisted — a loaded model serves
    /// recommendations, not convergence diagnostics.
    pub fn load(path: &Path, train: &Arc<InteractionLog>) -> Result<Self> {
        let mut input = BufReader::new(fs::File::open(path)?);
        expect_magic(&mut input, b"MFSNAP\x00\x01")?;
        let (factors, user_factors, item_factors) =
            read_snapshot_body(&mut input, train)?;
        Ok(ImplicitMfModel {
            train: Arc::clone(train),
            factors,
            user_factors,
            item_factors,
            objective_trace: Vec::new(),
        })
    }
}

impl RecommenderModel for ImplicitMfModel {
    fn algorithm(&self) -> &'static str {
        "ImplicitMF"
    }

    fn fingerprint(&self) -> String {
        factor_fingerprint(
            b"ImplicitMF\x1f",
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
        let x = row(&self.user_factors, u as usize, self.factors);
        let scores: Vec<f64> = (0..n_items)
            .map(|i| dot(x, row(&self.item_factors, i, self.factors)))
            .collect();
        RankedList::checked(rank_dense(&scores, &exclude, k), &exclude)
    }
}

fn row(matrix: &[f64], index: usize, factors: usize) -> &[f64] {
    &matrix[index * factors..(index + 1) * factors]
}

fn row_mut(matrix: &mut [f64], index: usize, factors: usize) -> &mut [f64] {
    &mut matrix[index * factors..(index + 1) * factors]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = M'M + lambda * I` for a row-major (rows × factors) matrix.
fn gramian(matrix: &[f64], factors: usize, lambda: f64, out: &mut [f64]) {
    out.fill(0.0);
    for r in 0..matrix.len() / factors {
        let v = row(matrix, r, factors);
        for p in 0..factors {
            let vp = v[p];
            for q in p..factors {
                out[p * factors + q] += vp * v[q];
            }
        }
    }
    for p in 0..factors {
        out[p * factors + p] += lambda;
        for q in p + 1..factors {
            out[q * factors + p] = out[p * factors + q];
        }
    }
}

/// `a += alpha * v v'`.
fn rank_one_update(a: &mut [f64], v: &[f64], alpha: f64, factors: usize) {
    if alpha == 0.0 {
        return;
    }
    for p in 0..factors {
        let vp = alpha * v[p];
        for q in 0..factors {
            a[p * factors + q] += vp * v[q];
        }
    }
}

/// Solve `A x = b` for symmetric positive-definite `A` by Cholesky
/// decomposition, in place: `a` becomes its lower factor, `b` the
/// solution. The ridge term keeps `A` positive definite; a non-positive
/// pivot therefore signals numerical blow-up, reported as [`Error::NonFinite`].
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize, sweep: usize) -> Result<()> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag.is_finite() && diag > 0.0) {
            return Err(Error::NonFinite { sweep });
        }
        let root = diag.sqrt();
        a[j * n + j] = root;
        for i in j + 1..n {
            let mut value = a[i * n + j];
            for k in 0..j {
                value -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = value / root;
        }
    }
    // Forward: L z = b.
    for i in 0..n {
        let mut value = b[i];
        for k in 0..i {
            value -= a[i * n + k] * b[k];
        }
        b[i] = value / a[i * n + i];
    }
    // Back: L' x = z.
    for i in (0..n).rev() {
        let mut value = b[i];
        for k in i + 1..n {
            value -= a[k * n + i] * b[k];
        }
        b[i] = value / a[i * n + i];
    }
    Ok(())
}

/// Penalised weighted squared error: `sum_u x_u'(Y'Y)x_u +
/// sum_obs [(1+alpha)(1-s)^2 - s^2] + lambda (sum ||x||^2 + sum ||y||^2)`.
/// The first term supplies every cell's pull toward zero; the second
/// replaces it on observed cells with the confidence-weighted pull
/// toward one.
fn objective(
    train: &InteractionLog,
    user_factors: &[f64],
    item_factors: &[f64],
    factors: usize,
    alpha: f64,
    lambda: f64,
) -> f64 {
    let mut gram = vec![0.0; factors * factors];
    gramian(item_factors, factors, 0.0, &mut gram);

    let mut dense_term = 0.0;
    for u in 0..train.n_users() {
        let x = row(user_factors, u, factors);
        for p in 0..factors {
            let mut acc = 0.0;
            for q in 0..factors {
                acc += gram[p * factors + q] * x[q];
            }
            dense_term += x[p] * acc;
        }
    }

    let mut observed_term = 0.0;
    for &(u, i) in train.pairs() {
        let s = dot(
            row(user_factors, u as usize, factors),
            row(item_factors, i as usize, factors),
        );
        let residual = 1.0 - s;
        observed_term += (1.0 + alpha) * residual * residual - s * s;
    }

    let reg: f64 = user_factors.iter().map(|v| v * v).sum::<f64>()
        + item_factors.iter().map(|v| v * v).sum::<f64>();
    dense_term + observed_term + lambda * reg
}

pub(crate) fn factor_fingerprint(
    tag: &[u8],
    factors: usize,
    user_factors: &[f64],
    item_factors: &[f64],
    train_digest: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag);
    hasher.update((factors as u64).to_le_bytes());
    for value in user_factors.iter().chain(item_factors) {
        hasher.update(value.to_le_bytes());
    }
    hasher.update(train_digest.as_bytes());
    hex(&hasher.finalize())
}

pub(crate) fn write_snapshot_body<W: Write>(
    out: &mut W,
    digest: &str,
    n_users: usize,
    n_items: usize,
    factors: usize,
    user_factors: &[f64],
    item_factors: &[f64],
) -> Result<()> {
    out.write_all(&(digest.len() as u64).to_le_bytes())?;
    out.write_all(digest.as_bytes())?;
    for dim in [n_users, n_items, factors] {
        out.write_all(&(dim as u64).to_le_bytes())?;
    }
    for value in user_factors.iter().chain(item_factors) {
        out.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_snapshot_body<R: Read>(
    input: &mut R,
    train: &InteractionLog,
) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let digest_len = read_u64(input)? as usize;
    if digest_len > 1024 {
        return Err(Error::InvalidInput("snapshot digest length is implausible".into()));
    }
    let mut digest = vec![0u8; digest_len];
    input.read_exact(&mut digest)?;
    let digest = String::from_utf8(digest)
        .map_err(|_| Error::InvalidInput("snapshot digest is not UTF-8".into()))?;
    if digest != train.digest() {
        return Err(Error::InvalidInput(
            "snapshot was fitted on a different training log".into(),
        ));
    }
    let n_users = read_u64(input)? as usize;
    let n_items = read_u64(input)? as usize;
    let factors = read_u64(input)? as usize;
    if n_users != train.n_users() || n_items != train.n_items() {
        return Err(Error::InvalidInput("snapshot dimensions do not match".into()));
    }
    let user_factors = read_f64s(input, n_users * factors)?;
    let item_factors = read_f64s(input, n_items * factors)?;
    Ok((factors, user_factors, item_factors))
}

pub(crate) fn expect_magic<R: Read>(input: &mut R, magic: &[u8]) -> Result<()> {
    let mut buffer = vec![0u8; magic.len()];
    input.read_exact(&mut buffer)?;
    if buffer != magic {
        return Err(Error::InvalidInput(
            "not a factor snapshot of the expected version".into(),
        ));
    }
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buffer = [0u8; 8];
    input.read_exact(&mut buffer)?;
    Ok(u64::from_le_bytes(buffer))
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count);
    let mut buffer = [0u8; 8];
    for _ in 0..count {
        input.read_exact(&mut buffer)?;
        values.push(f64::from_le_bytes(buffer));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_log() -> Arc<InteractionLog> {
        // Two disjoint taste blocks; each user misses one block item.
        let pairs = vec![
            ("u0", "A0"),
            ("u0", "A1"),
            ("u1", "A1"),
            ("u1", "A2"),
            ("u2", "A0"),
            ("u2", "A2"),
            ("v0", "B0"),
            ("v0", "B1"),
            ("v1", "B1"),
            ("v1", "B2"),
            ("v2", "B0"),
            ("v2", "B2"),
        ];
        Arc::new(InteractionLog::from_token_pairs(pairs.iter().map(|&(u, i)| (u, i))).unwrap())
    }

    fn fit_block(seed: u64) -> ImplicitMfModel {
        ImplicitMfModel::fit(&block_log(), 8, 40.0, 0.1, 20, seed).unwrap()
    }

    #[test]
    fn objective_never_increases() {
        let model = fit_block(3);
        assert_eq!(model.objective_trace.len(), 21);
        for w in model.objective_trace.windows(2) {
            let tolerance = 1e-9 * w[0].abs().max(1.0);
            assert!(
                w[1] <= w[0] + tolerance,
                "objective rose: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn within_block_completion_beats_cross_block() {
        let train = block_log();
        let model = fit_block(3);
        let u0 = train.user_index("u0").unwrap();
        let a2 = train.item_index("A2").unwrap();
        for b in ["B0", "B1", "B2"] {
            let bi = train.item_index(b).unwrap();
            assert!(
                model.score(u0, a2) > model.score(u0, bi),
                "A2 should outscore {b}"
            );
        }
        let list = model.recommend(UserRef::Known(u0), 1);
        assert_eq!(list.items()[0], a2);
    }

    #[test]
    fn alpha_zero_still_converges() {
        let model = ImplicitMfModel::fit(&block_log(), 4, 0.0, 0.1, 10, 1).unwrap();
        for w in model.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        assert!(model.objective_trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fits_are_seed_deterministic() {
        assert_eq!(fit_block(5).fingerprint(), fit_block(5).fingerprint());
        assert_ne!(fit_block(5).fingerprint(), fit_block(6).fingerprint());
    }

    #[test]
    fn zero_sweeps_keeps_the_initial_factors() {
        let a = ImplicitMfModel::fit(&block_log(), 4, 40.0, 0.1, 0, 9).unwrap();
        let b = ImplicitMfModel::fit(&block_log(), 4, 40.0, 0.1, 0, 9).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.objective_trace.len(), 1);
        assert!(!a.recommend(UserRef::Known(0), 2).is_empty());
    }

    #[test]
    fn cold_user_gets_the_ascending_fallback() {
        let train = block_log();
        let model = fit_block(3);
        let list = model.recommend(UserRef::Cold("nobody"), 3);
        let tokens: Vec<&str> = list.items().iter().map(|&i| train.item_token(i)).collect();
        assert_eq!(tokens, ["A0", "A1", "A2"]);
    }

    #[test]
    fn snapshot_round_trips() {
        let train = block_log();
        let model = fit_block(11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mf.snap");
        model.save(&path).unwrap();
        let loaded = ImplicitMfModel::load(&path, &train).unwrap();
        assert_eq!(loaded.fingerprint(), model.fingerprint());
        assert_eq!(
            loaded.recommend(UserRef::Known(1), 4),
            model.recommend(UserRef::Known(1), 4)
        );
    }

    #[test]
    fn snapshot_refuses_a_different_log() {
        let model = fit_block(11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mf.snap");
        model.save(&path).unwrap();
        let other_pairs = [("x", "y"), ("x", "z")];
        let other = Arc::new(
            InteractionLog::from_token_pairs(other_pairs.iter().map(|&(u, i)| (u, i))).unwrap(),
        );
        assert!(ImplicitMfModel::load(&path, &other).is_err());
    }

    #[test]
    fn cholesky_solves_a_known_system() {
        // A = [[4,2],[2,3]], b = [10, 9] → x = [1.5, 2].
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![10.0, 9.0];
        cholesky_solve(&mut a, &mut b, 2, 0).unwrap();
        assert!((b[0] - 1.5).abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-12);
    }
}
