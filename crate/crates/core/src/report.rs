//! Report emission: formatted CSV tables plus a full-precision JSON dump.
//!
//! Tables round displayed values (2 or 4 decimals, half-up as `format!`
//! does); `report.json` keeps every number at full precision, so nothing
//! is lost by reading the pretty tables first. Relative changes measure
//! each pruned level against the unpruned reference measurement — the
//! phase-1 record at threshold 0 — for the same dataset, algorithm and
//! metric. Phase 2 shares that reference: at threshold 0 the pruned
//! training set is the full training set, so the phase-2 construction
//! degenerates to phase 1 and is not re-measured.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{EvalRecord, GridOutcome};

/// Percentage change from `reference` to `value`. A zero reference has
/// no meaningful relative change, so the cell stays undefined rather
/// than becoming an infinity.
pub fn relative_change(reference: f64, value: f64) -> Option<f64> {
    if reference == 0.0 {
        None
    } else {
        Some(100.0 * (value - reference) / reference)
    }
}

/// One pruned-level measurement next to its unpruned reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeChangeCell {
    pub dataset: String,
    pub core_t: u32,
    pub phase: u8,
    pub algorithm: String,
    pub metric: String,
    pub reference: f64,
    pub value: f64,
    pub change_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeChangeReport {
    pub cells: Vec<RelativeChangeCell>,
    /// Pruned-level measurements whose reference cell never materialised
    /// (its grid cell failed); they are listed instead of silently dropped.
    pub notes: Vec<String>,
}

/// Pair every pruned-level record with its reference measurement.
pub fn relative_changes(records: &[EvalRecord]) -> RelativeChangeReport {
    let mut reference: BTreeMap<(&str, &str, &str), f64> = BTreeMap::new();
    for r in records {
        if r.core_t == 0 && r.phase == 1 {
            reference.insert((&r.dataset, &r.algorithm, &r.metric), r.value);
        }
    }
    let mut report = RelativeChangeReport::default();
    let mut missing = BTreeSet::new();
    for r in records {
        if r.core_t == 0 {
            continue;
        }
        let key = (r.dataset.as_str(), r.algorithm.as_str(), r.metric.as_str());
        match reference.get(&key) {
            Some(&base) => report.cells.push(RelativeChangeCell {
                dataset: r.dataset.clone(),
                core_t: r.core_t,
                phase: r.phase,
                algorithm: r.algorithm.clone(),
                metric: r.metric.clone(),
                reference: base,
                value: r.value,
                change_pct: relative_change(base, r.value),
            }),
            None => {
                missing.insert(format!(
                    "no reference measurement for {}/{}/{}; relative change omitted",
                    r.dataset, r.algorithm, r.metric
                ));
            }
        }
    }
    report.cells.sort_by(|a, b| {
        (&a.dataset, a.core_t, a.phase, &a.algorithm, &a.metric).cmp(&(
            &b.dataset, b.core_t, b.phase, &b.algorithm, &b.metric,
        ))
    });
    report.notes = missing.into_iter().collect();
    report
}

/// Competition ranks for one column of the comparison: 1 is the best
/// value, ties break by name, and algorithms without a measurement come
/// last in name order. The result is always a permutation of 1..=n.
pub fn rank_algorithms(cells: &[(&str, Option<f64>)]) -> Vec<(String, usize)> {
    let mut present: Vec<(&str, f64)> = Vec::new();
    let mut absent: Vec<&str> = Vec::new();
    for &(name, value) in cells {
        match value {
            Some(v) => present.push((name, v)),
            None => absent.push(name),
        }
    }
    present.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("metric values are finite")
            .then_with(|| a.0.cmp(b.0))
    });
    absent.sort_unstable();
    present
        .iter()
        .map(|&(name, _)| name)
        .chain(absent)
        .enumerate()
        .map(|(i, name)| (name.to_string(), i + 1))
        .collect()
}

/// A rectangular string table with a strict arity invariant and an
/// exact CSV round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: Vec<S>) -> Self {
        let headers: Vec<String> = headers.into_iter().map(Into::into).collect();
        assert!(!headers.is_empty(), "a table needs at least one column");
        Table {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.headers.len(),
            "row arity must match the header"
        );
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.headers)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record?.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, rows })
    }
}

/// Everything `emit_tables` wrote, plus notes about what it left out.
#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// Render a grid outcome into CSV tables plus `report.json`. Tables that
/// would be empty (e.g. phase-2 comparisons when no phase-2 record
/// exists) are omitted and noted in the bundle instead of written blank.
pub fn emit_tables(outcome: &GridOutcome, out_dir: &Path) -> Result<ReportBundle> {
    fs::create_dir_all(out_dir)?;
    let mut bundle = ReportBundle::default();
    let write = |bundle: &mut ReportBundle, name: String, table: &Table| -> Result<()> {
        let path = out_dir.join(name);
        table.write_csv(&path)?;
        bundle.files.push(path);
        Ok(())
    };

    // Dataset characteristics, one file per pruning level.
    let levels: BTreeSet<u32> = outcome.coresets.iter().map(|c| c.core_t).collect();
    for &t in &levels {
        let mut table = Table::new(vec![
            "dataset",
            "interactions",
            "users",
            "items",
            "avg_per_user",
            "avg_per_item",
            "space_size",
            "shape",
            "sparsity_pct",
            "gini_user",
            "gini_item",
        ]);
        for summary in outcome.coresets.iter().filter(|c| c.core_t == t) {
            let ch = &summary.characteristics;
            table.push_row(vec![
                summary.dataset.clone(),
                ch.n_interactions.to_string(),
                ch.n_users.to_string(),
                ch.n_items.to_string(),
                fmt2(ch.avg_int_per_user),
                fmt2(ch.avg_int_per_item),
                ch.space_size.to_string(),
                fmt2(ch.shape),
                fmt4(100.0 * ch.sparsity),
                fmt2(ch.gini_user),
                fmt2(ch.gini_item),
            ]);
        }
        write(&mut bundle, format!("characteristics_t{t}.csv"), &table)?;
    }

    // Retention curves, one file per dataset.
    let dataset_names: BTreeSet<&str> =
        outcome.coresets.iter().map(|c| c.dataset.as_str()).collect();
    for name in &dataset_names {
        let mut table = Table::new(vec![
            "core_t",
            "users_pct",
            "items_pct",
            "interactions_pct",
        ]);
        for summary in outcome.coresets.iter().filter(|c| c.dataset == *name) {
            let r = &summary.retention;
            table.push_row(vec![
                summary.core_t.to_string(),
                fmt2(r.user_retention_pct),
                fmt2(r.item_retention_pct),
                fmt2(r.interaction_retention_pct),
            ]);
        }
        write(&mut bundle, format!("retention_{}.csv", sanitize(name)), &table)?;
    }

    // Relative change against the unpruned reference, long format, with
    // a Mean row per (core level, phase, algorithm, metric) group.
    let changes = relative_changes(&outcome.records);
    bundle.notes.extend(changes.notes.iter().cloned());
    if changes.cells.is_empty() {
        bundle
            .notes
            .push("no pruned-level records; relative-change table omitted".into());
    } else {
        let mut table = Table::new(vec![
            "dataset",
            "core_t",
            "phase",
            "algorithm",
            "metric",
            "reference",
            "value",
            "change_pct",
        ]);
        for cell in &changes.cells {
            table.push_row(vec![
                cell.dataset.clone(),
                cell.core_t.to_string(),
                cell.phase.to_string(),
                cell.algorithm.clone(),
                cell.metric.clone(),
                fmt4(cell.reference),
                fmt4(cell.value),
                cell.change_pct.map(fmt2).unwrap_or_default(),
            ]);
        }
        let mut groups: BTreeMap<(u32, u8, &str, &str), Vec<f64>> = BTreeMap::new();
        for cell in &changes.cells {
            if let Some(change) = cell.change_pct {
                groups
                    .entry((cell.core_t, cell.phase, &cell.algorithm, &cell.metric))
                    .or_default()
                    .push(change);
            }
        }
        for ((core_t, phase, algorithm, metric), values) in &groups {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            table.push_row(vec![
                "Mean".into(),
                core_t.to_string(),
                phase.to_string(),
                (*algorithm).to_string(),
                (*metric).to_string(),
                String::new(),
                String::new(),
                fmt2(mean),
            ]);
        }
        write(&mut bundle, "relative_change.csv".into(), &table)?;
    }

    // Rank matrices, one file per phase.
    for phase in [1u8, 2u8] {
        match rank_matrix(&outcome.records, phase) {
            Some(table) => write(&mut bundle, format!("ranks_phase{phase}.csv"), &table)?,
            None => bundle
                .notes
                .push(format!("no phase-{phase} records; rank matrix omitted")),
        }
    }

    // One value grid per (algorithm, metric, phase): datasets down,
    // pruning levels across, with column summaries.
    let mut grids: BTreeSet<(&str, &str, u8)> = BTreeSet::new();
    for r in &outcome.records {
        grids.insert((&r.algorithm, &r.metric, r.phase));
    }
    for (algorithm, metric, phase) in grids {
        let levels: BTreeSet<u32> = outcome
            .records
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| r.core_t)
            .collect();
        let mut headers = vec!["dataset".to_string()];
        headers.extend(levels.iter().map(|t| format!("t={t}")));
        let mut table = Table::new(headers);
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
        let datasets: BTreeSet<&str> = outcome
            .records
            .iter()
            .map(|r| r.dataset.as_str())
            .collect();
        for name in &datasets {
            let mut row = vec![name.to_string()];
            for (slot, &t) in levels.iter().enumerate() {
                let hit = outcome.records.iter().find(|r| {
                    r.dataset == *name
                        && r.core_t == t
                        && r.phase == phase
                        && r.algorithm == algorithm
                        && r.metric == metric
                });
                match hit {
                    Some(r) => {
                        columns[slot].push(r.value);
                        row.push(fmt4(r.value));
                    }
                    None => row.push(String::new()),
                }
            }
            table.push_row(row);
        }
        for (label, pick) in [
            ("Min", f64::min as fn(f64, f64) -> f64),
            ("Max", f64::max as fn(f64, f64) -> f64),
        ] {
            let mut row = vec![label.to_string()];
            for column in &columns {
                row.push(
                    column
                        .iter()
                        .copied()
                        .reduce(pick)
                        .map(fmt4)
                        .unwrap_or_default(),
                );
            }
            table.push_row(row);
        }
        let mut avg = vec!["Average".to_string()];
        for column in &columns {
            avg.push(if column.is_empty() {
                String::new()
            } else {
                fmt4(column.iter().sum::<f64>() / column.len() as f64)
            });
        }
        table.push_row(avg);
        write(
            &mut bundle,
            format!(
                "grid_{}_{}_phase{phase}.csv",
                sanitize(algorithm),
                sanitize(metric)
            ),
            &table,
        )?;
    }

    // Full-precision dump of everything the tables were rendered from.
    let json_path = out_dir.join("report.json");
    fs::write(&json_path, serde_json::to_string_pretty(outcome)?)?;
    bundle.files.push(json_path);
    Ok(bundle)
}

/// Rank every algorithm inside each (dataset, core level, metric)
/// column of one phase. `None` when the phase has no records at all.
pub fn rank_matrix(records: &[EvalRecord], phase: u8) -> Option<Table> {
    let in_phase: Vec<&EvalRecord> = records.iter().filter(|r| r.phase == phase).collect();
    if in_phase.is_empty() {
        return None;
    }
    let algorithms: BTreeSet<&str> = in_phase.iter().map(|r| r.algorithm.as_str()).collect();
    let columns: BTreeSet<(&str, u32, &str)> = in_phase
        .iter()
        .map(|r| (r.dataset.as_str(), r.core_t, r.metric.as_str()))
        .collect();

    let mut headers = vec!["algorithm".to_string()];
    headers.extend(
        columns
            .iter()
            .map(|(dataset, t, metric)| format!("{dataset}|t={t}|{metric}")),
    );
    let mut table = Table::new(headers);

    let mut by_algorithm: BTreeMap<&str, Vec<String>> = algorithms
        .iter()
        .map(|&name| (name, vec![name.to_string()]))
        .collect();
    for &(dataset, t, metric) in &columns {
        let cells: Vec<(&str, Option<f64>)> = algorithms
            .iter()
            .map(|&name| {
                let value = in_phase
                    .iter()
                    .find(|r| {
                        r.dataset == dataset
                            && r.core_t == t
                            && r.metric == metric
                            && r.algorithm == name
                    })
                    .map(|r| r.value);
                (name, value)
            })
            .collect();
        for (name, rank) in rank_algorithms(&cells) {
            by_algorithm
                .get_mut(name.as_str())
                .expect("ranked name came from the same set")
                .push(rank.to_string());
        }
    }
    for (_, row) in by_algorithm {
        table.push_row(row);
    }
    Some(table)
}
