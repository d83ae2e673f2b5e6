//! Grid orchestration: every (dataset × core level × algorithm × metric)
//! cell, both evaluation phases, with per-cell error isolation.
//!
//! One cell = one dataset at one pruning threshold. The cell prunes,
//! characterises, splits, then fits each algorithm once and answers both
//! phases from that single fitted model — phase 1 on the coreset's own
//! holdout, phase 2 on unpruned interactions the pruned training set
//! never contained. A cell that cannot proceed (empty coreset, fit
//! failure, nothing to evaluate) contributes a structured warning and
//! leaves every other cell untouched.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::characteristics::{characterize, CharacteristicsReport};
use crate::corefilter::{prune_users, retention, RetentionReport};
use crate::error::{Error, Result};
use crate::eval::MetricSpec;
use crate::log::InteractionLog;
use crate::recommend::{fit, RecommenderModel, RecommenderSpec, UserRef};
use crate::seed::derive_u64;
use crate::split::{build_phase2_test, split_per_user, SplitPair};

/// A named, fully preprocessed (unpruned) interaction log.
#[derive(Debug, Clone)]
pub struct GridDataset {
    pub name: String,
    pub log: Arc<InteractionLog>,
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Pruning thresholds, strictly increasing, starting at the
    /// unpruned reference level 0.
    pub core_levels: Vec<u32>,
    pub train_fraction: f64,
    pub algorithms: Vec<RecommenderSpec>,
    pub metrics: Vec<MetricSpec>,
    /// Root seed; each cell derives its own streams from this.
    pub seed: u64,
    /// Worker threads for cells; 1 runs them sequentially. The outcome
    /// is identical either way — cells are independent and results are
    /// reassembled in a fixed order.
    pub jobs: usize,
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if self.core_levels.first() != Some(&0) {
            return Err(Error::InvalidConfig(
                "core_levels must start at 0 (the unpruned reference)".into(),
            ));
        }
        if !self.core_levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "core_levels must be strictly increasing".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "train_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms selected".into()));
        }
        let mut names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate algorithm".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidConfig("no metrics selected".into()));
        }
        let mut labels: Vec<String> = self.metrics.iter().map(|m| m.label()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate metric".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be >= 1".into()));
        }
        Ok(())
    }
}

/// One aggregated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset: String,
    pub core_t: u32,
    pub phase: u8,
    pub algorithm: String,
    pub metric: String,
    pub value: f64,
    /// How many users the mean runs over.
    pub n_users: usize,
}

impl EvalRecord {
    pub fn new(
        dataset: String,
        core_t: u32,
        phase: u8,
        algorithm: String,
        metric: String,
        value: f64,
        n_users: usize,
    ) -> Self {
        assert!(
            value.is_finite() && (0.0..=1.0).contains(&value),
            "metric value {value} out of [0, 1] for {algorithm}/{metric}"
        );
        assert!(n_users > 0, "a record must aggregate at least one user");
        EvalRecord {
            dataset,
            core_t,
            phase,
            algorithm,
            metric,
            value,
            n_users,
        }
    }
}

/// A cell (or cell-phase) that produced no records, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWarning {
    pub dataset: String,
    pub core_t: u32,
    pub phase: Option<u8>,
    pub algorithm: Option<String>,
    pub message: String,
}

/// Characterisation of one non-empty coreset against its baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetSummary {
    pub dataset: String,
    pub core_t: u32,
    pub characteristics: CharacteristicsReport,
    pub retention: RetentionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub records: Vec<EvalRecord>,
    pub coresets: Vec<CoresetSummary>,
    pub warnings: Vec<GridWarning>,
}

struct CellOutcome {
    records: Vec<EvalRecord>,
    warnings: Vec<GridWarning>,
    summary: Option<CoresetSummary>,
}

/// Run the full grid. Configuration problems fail fast; anything that
/// goes wrong inside a cell is isolated there and reported as a warning.
/// Equal inputs and config produce an identical outcome, independent of
/// `jobs`.
pub fn run_grid(datasets: &[GridDataset], config: &GridConfig) -> Result<GridOutcome> {
    config.validate()?;
    if datasets.is_empty() {
        return Err(Error::InvalidInput("no datasets given".into()));
    }
    let mut seen = HashSet::new();
    for dataset in datasets {
        if dataset.name.is_empty() {
            return Err(Error::InvalidInput("dataset with an empty name".into()));
        }
        if !seen.insert(dataset.name.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate dataset name {:?}",
                dataset.name
            )));
        }
        if dataset.log.is_empty() {
            return Err(Error::EmptyLog(format!(
                "dataset {:?} has no interactions",
                dataset.name
            )));
        }
    }

    let cells: Vec<(usize, u32)> = datasets
        .iter()
        .enumerate()
        .flat_map(|(ds, _)| config.core_levels.iter().map(move |&t| (ds, t)))
        .collect();

    let outcomes: Vec<CellOutcome> = if config.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(ds, t)| run_cell(&datasets[ds], t, config))
                .collect()
        })
    } else {
        cells
            .iter()
            .map(|&(ds, t)| run_cell(&datasets[ds], t, config))
            .collect()
    };

    let mut outcome = GridOutcome {
        records: Vec::new(),
        coresets: Vec::new(),
        warnings: Vec::new(),
    };
    for cell in outcomes {
        outcome.records.extend(cell.records);
        outcome.warnings.extend(cell.warnings);
        outcome.coresets.extend(cell.summary);
    }
    outcome.records.sort_by(|a, b| {
        (&a.dataset, a.core_t, a.phase, &a.algorithm, &a.metric).cmp(&(
            &b.dataset, b.core_t, b.phase, &b.algorithm, &b.metric,
        ))
    });
    outcome.coresets.sort_by(|a, b| {
        (&a.dataset, a.core_t).cmp(&(&b.dataset, b.core_t))
    });
    outcome.warnings.sort_by(|a, b| {
        (&a.dataset, a.core_t, a.phase, &a.algorithm, &a.message).cmp(&(
            &b.dataset, b.core_t, b.phase, &b.algorithm, &b.message,
        ))
    });
    Ok(outcome)
}

fn run_cell(dataset: &GridDataset, t: u32, config: &GridConfig) -> CellOutcome {
    let mut cell = CellOutcome {
        records: Vec::new(),
        warnings: Vec::new(),
        summary: None,
    };
    let warn = |cell: &mut CellOutcome, phase: Option<u8>, algorithm: Option<&str>, message: String| {
        cell.warnings.push(GridWarning {
            dataset: dataset.name.clone(),
            core_t: t,
            phase,
            algorithm: algorithm.map(str::to_string),
            message,
        });
    };

    let core = prune_users(&dataset.log, t);
    if core.log.is_empty() {
        warn(
            &mut cell,
            None,
            None,
            format!("no user has {t} or more interactions; coreset is empty, cell skipped"),
        );
        return cell;
    }

    cell.summary = Some(CoresetSummary {
        dataset: dataset.name.clone(),
        core_t: t,
        characteristics: characterize(&core.log).expect("non-empty coreset characterises"),
        retention: retention(&dataset.log, &core.log).expect("baseline is non-empty"),
    });

    let level = t.to_string();
    let split_seed = derive_u64(config.seed, &["split", &dataset.name, &level]);
    let split = split_per_user(&core.log, config.train_fraction, t, split_seed)
        .expect("validated fraction and non-empty coreset always split");

    let phase2_test = if t == 0 {
        None // the reference level defines phase 2's candidate pool; it is not re-measured
    } else if split.test.is_empty() {
        warn(
            &mut cell,
            Some(2),
            None,
            "phase-1 test is empty, so phase 2 has no size target; skipped".into(),
        );
        None
    } else {
        let phase2_seed = derive_u64(config.seed, &["phase2", &dataset.name, &level]);
        match build_phase2_test(
            &dataset.log,
            &split.train,
            split.test.n_interactions(),
            phase2_seed,
        ) {
            Ok(test) => Some(test),
            Err(Error::NoCandidates) => {
                warn(
                    &mut cell,
                    Some(2),
                    None,
                    "pruned training already covers every unpruned interaction; \
                     no phase-2 candidates"
                        .into(),
                );
                None
            }
            Err(other) => {
                warn(&mut cell, Some(2), None, other.to_string());
                None
            }
        }
    };

    for spec in &config.algorithms {
        let fit_seed = derive_u64(config.seed, &["fit", &dataset.name, &level, spec.name()]);
        let model = match fit(spec, &split.train, fit_seed) {
            Ok(model) => model,
            Err(e) => {
                warn(
                    &mut cell,
                    None,
                    Some(spec.name()),
                    format!("fit failed: {e}"),
                );
                continue;
            }
        };
        let fingerprint_before = model.fingerprint();

        match evaluate_phase(model.as_ref(), &split, &split.test, &config.metrics) {
            Ok(measures) => {
                for (metric, value, n_users) in measures {
                    cell.records.push(EvalRecord::new(
                        dataset.name.clone(),
                        t,
                        1,
                        spec.name().to_string(),
                        metric.label(),
                        value,
                        n_users,
                    ));
                }
            }
            Err(e) => warn(&mut cell, Some(1), Some(spec.name()), e.to_string()),
        }

        if let Some(test2) = &phase2_test {
            match evaluate_phase(model.as_ref(), &split, test2, &config.metrics) {
                Ok(measures) => {
                    assert_eq!(
                        model.fingerprint(),
                        fingerprint_before,
                        "phase 2 must be answered by the phase-1 model"
                    );
                    for (metric, value, n_users) in measures {
                        cell.records.push(EvalRecord::new(
                            dataset.name.clone(),
                            t,
                            2,
                            spec.name().to_string(),
                            metric.label(),
                            value,
                            n_users,
                        ));
                    }
                }
                Err(e) => warn(&mut cell, Some(2), Some(spec.name()), e.to_string()),
            }
        }
    }
    cell
}

/// Evaluate one fitted model against one test log. Users are compared on
/// tokens, so the test log may come from a different index space than the
/// training log (phase 2). Each user is asked once, at the deepest cutoff
/// any metric needs.
fn evaluate_phase(
    model: &dyn RecommenderModel,
    split: &SplitPair,
    test: &InteractionLog,
    metrics: &[MetricSpec],
) -> Result<Vec<(MetricSpec, f64, usize)>> {
    let k_max = metrics.iter().map(|m| m.k).max().expect("metrics non-empty");
    let train = &split.train;

    let mut per_metric: Vec<Vec<f64>> = vec![Vec::with_capacity(test.n_users()); metrics.len()];
    for tu in 0..test.n_users() as u32 {
        let token = test.user_token(tu);
        let relevant: HashSet<&str> = test.items_of(tu).map(|i| test.item_token(i)).collect();
        let user = match train.user_index(token) {
            Some(u) => UserRef::Known(u),
            None => UserRef::Cold(token),
        };
        let list = model.recommend(user, k_max);
        let recommended: Vec<&str> = list
            .items()
            .iter()
            .map(|&i| train.item_token(i))
            .collect();
        for (slot, metric) in per_metric.iter_mut().zip(metrics) {
            slot.push(metric.compute(&recommended, &relevant));
        }
    }

    metrics
        .iter()
        .zip(per_metric)
        .map(|(metric, values)| {
            let n = values.len();
            crate::eval::aggregate(&values).map(|mean| (*metric, mean, n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::MetricKind;

    /// Synthetic log: user u gets `3 + u % spread` distinct interactions
    /// over a rolling item window.
    fn synthetic(name: &str, users: usize, items: usize, spread: usize) -> GridDataset {
        assert!(2 + spread < items, "window must stay collision-free");
        let mut pairs = Vec::new();
        for u in 0..users {
            let n = 3 + u % spread;
            for x in 0..n {
                pairs.push((format!("u{u:03}"), format!("i{:03}", (u * 13 + x) % items)));
            }
        }
        GridDataset {
            name: name.to_string(),
            log: Arc::new(InteractionLog::from_token_pairs(pairs).unwrap()),
        }
    }

    fn base_config() -> GridConfig {
        GridConfig {
            core_levels: vec![0, 4, 6],
            train_fraction: 0.8,
            algorithms: vec![
                RecommenderSpec::by_name("PopScore").unwrap(),
                RecommenderSpec::by_name("Random").unwrap(),
            ],
            metrics: vec![MetricSpec {
                kind: MetricKind::Ndcg,
                k: 5,
            }],
            seed: 42,
            jobs: 1,
        }
    }

    #[test]
    fn record_counts_follow_the_grid_shape() {
        let datasets = vec![synthetic("alpha", 30, 40, 8), synthetic("beta", 25, 30, 7)];
        let outcome = run_grid(&datasets, &base_config()).unwrap();
        let phase1 = outcome.records.iter().filter(|r| r.phase == 1).count();
        let phase2 = outcome.records.iter().filter(|r| r.phase == 2).count();
        // 2 datasets x 3 cores x 2 algorithms x 1 metric.
        assert_eq!(phase1, 12);
        // Phase 2 exists only at the two pruned levels.
        assert_eq!(phase2, 8);
        assert!(outcome.warnings.is_empty(), "{:?}", outcome.warnings);
        assert_eq!(outcome.coresets.len(), 6);
    }

    #[test]
    fn reruns_are_identical() {
        let datasets = vec![synthetic("alpha", 30, 40, 8)];
        let config = base_config();
        let a = run_grid(&datasets, &config).unwrap();
        let b = run_grid(&datasets, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn outcome_does_not_depend_on_jobs() {
        let datasets = vec![synthetic("alpha", 30, 40, 8), synthetic("beta", 25, 30, 7)];
        let sequential = run_grid(&datasets, &base_config()).unwrap();
        let parallel = run_grid(
            &datasets,
            &GridConfig {
                jobs: 4,
                ..base_config()
            },
        )
        .unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn records_come_out_sorted() {
        let datasets = vec![synthetic("beta", 25, 30, 7), synthetic("alpha", 30, 40, 8)];
        let outcome = run_grid(&datasets, &base_config()).unwrap();
        let keys: Vec<_> = outcome
            .records
            .iter()
            .map(|r| (r.dataset.clone(), r.core_t, r.phase, r.algorithm.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(outcome.records[0].dataset, "alpha");
    }

    #[test]
    fn a_failing_cell_does_not_poison_the_grid() {
        let datasets = vec![synthetic("alpha", 30, 40, 8)];
        let mut config = base_config();
        config.algorithms = vec![
            RecommenderSpec::by_name("PopScore").unwrap(),
            RecommenderSpec::UserKnn { neighbours: 0 },
        ];
        let outcome = run_grid(&datasets, &config).unwrap();
        let popscore = outcome
            .records
            .iter()
            .filter(|r| r.algorithm == "PopScore")
            .count();
        assert_eq!(popscore, 3 + 2); // 3 levels phase 1, 2 levels phase 2
        assert!(outcome.records.iter().all(|r| r.algorithm == "PopScore"));
        // One fit warning per cell.
        assert_eq!(outcome.warnings.len(), 3);
        assert!(outcome
            .warnings
            .iter()
            .all(|w| w.algorithm.as_deref() == Some("UserKNN")
                && w.message.contains("fit failed")));
    }

    #[test]
    fn an_unreachable_core_level_is_skipped_with_a_warning() {
        let datasets = vec![synthetic("alpha", 10, 20, 4)];
        let mut config = base_config();
        config.core_levels = vec![0, 1000];
        let outcome = run_grid(&datasets, &config).unwrap();
        assert!(outcome.records.iter().all(|r| r.core_t == 0));
        assert_eq!(outcome.warnings.len(), 1);
        let warning = &outcome.warnings[0];
        assert_eq!(warning.core_t, 1000);
        assert!(warning.message.contains("empty"));
        assert_eq!(outcome.coresets.len(), 1);
    }

    #[test]
    fn phase2_users_can_be_cold() {
        // With heavy pruning, phase-2 test users often fall outside the
        // pruned training log entirely; the run must still produce
        // phase-2 records rather than tripping on the missing user.
        let datasets = vec![synthetic("alpha", 40, 30, 10)];
        let mut config = base_config();
        config.core_levels = vec![0, 9];
        let outcome = run_grid(&datasets, &config).unwrap();
        assert!(
            outcome.records.iter().any(|r| r.phase == 2 && r.core_t == 9),
            "expected phase-2 records at the pruned level: {:?}",
            outcome.warnings
        );
    }

    #[test]
    fn config_validation_fails_fast() {
        let datasets = vec![synthetic("alpha", 10, 20, 4)];
        let mut bad = base_config();
        bad.core_levels = vec![5, 10];
        assert!(run_grid(&datasets, &bad).is_err());
        let mut dup = base_config();
        dup.algorithms = vec![
            RecommenderSpec::by_name("Random").unwrap(),
            RecommenderSpec::by_name("Random").unwrap(),
        ];
        assert!(run_grid(&datasets, &dup).is_err());
        let empty: Vec<GridDataset> = Vec::new();
        assert!(run_grid(&empty, &base_config()).is_err());
    }

    #[test]
    fn duplicate_dataset_names_are_rejected() {
        let datasets = vec![synthetic("same", 10, 20, 4), synthetic("same", 12, 20, 4)];
        assert!(run_grid(&datasets, &base_config()).is_err());
    }

    #[test]
    fn value_outside_unit_interval_is_refused() {
        let result = std::panic::catch_unwind(|| {
            EvalRecord::new(
                "d".into(),
                0,
                1,
                "Random".into(),
                "nDCG@10".into(),
                1.5,
                3,
            )
        });
        assert!(result.is_err());
    }
}
