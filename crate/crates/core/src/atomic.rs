//! The atomic interchange format: tab-separated `.inter` files with a
//! typed header, one row per implicit interaction, constant label `1.0`.
//! Every artifact the pipeline persists between stages goes through this
//! module, and a write/read round trip reproduces the log exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::log::{InteractionLog, PairInterner};
use crate::split::SplitPair;

pub const ATOMIC_HEADER: &str = "user_id:token\titem_id:token\tlabel:float";

fn check_token(token: &str, context: &str) -> Result<()> {
    if token.is_empty() || token.contains(['\t', '\n', '\r']) {
        return Err(Error::TokenNotPortable {
            token: token.to_string(),
            context: context.to_string(),
        });
    }
    Ok(())
}

/// Write a log as an `.inter` file. The write lands atomically: content
/// goes to a sibling temp file first and is renamed into place, so a
/// crash never leaves a half-written artifact under the final name.
pub fn write_inter(log: &InteractionLog, path: &Path) -> Result<()> {
    for (user, item) in log.token_pairs() {
        check_token(user, "user token")?;
        check_token(item, "item token")?;
    }
    let tmp_path = temp_sibling(path);
    {
        let mut out = BufWriter::new(fs::File::create(&tmp_path)?);
        writeln!(out, "{ATOMIC_HEADER}")?;
        for (user, item) in log.token_pairs() {
            writeln!(out, "{user}\t{item}\t1.0")?;
        }
        out.flush()?;
    }
    fs::rename(&tmp_path, path)?;
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Read an `.inter` file back into a log. The header must match
/// [`ATOMIC_HEADER`] byte for byte. A header with zero data rows is a
/// legitimate artifact (an empty test side) and comes back as the empty
/// log; the label column is present for interchange compatibility and is
/// not interpreted.
pub fn read_inter(path: &Path) -> Result<InteractionLog> {
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    match lines.next() {
        Some(Ok(header)) if header == ATOMIC_HEADER => {}
        Some(Ok(other)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected atomic header, found {other:?}"),
            })
        }
        Some(Err(e)) => return Err(e.into()),
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "file is empty, expected atomic header".into(),
            })
        }
    }

    let mut interner = PairInterner::new();
    let mut n_rows = 0u64;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx as u64 + 2;
        let mut fields = line.split('\t');
        let user = fields.next().unwrap_or("");
        let item = fields.next().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected at least 2 tab-separated fields".into(),
        })?;
        if user.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty user token".into(),
            });
        }
        if item.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty item token".into(),
            });
        }
        interner.push(user.to_string(), item.to_string());
        n_rows += 1;
    }
    if n_rows == 0 {
        return Ok(InteractionLog::empty());
    }
    interner.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Persist a split as `{stem}.train.inter` and `{stem}.test.inter`
/// under `out_dir` (created if missing).
pub fn export_atomic(pair: &SplitPair, out_dir: &Path, stem: &str) -> Result<ExportPaths> {
    fs::create_dir_all(out_dir)?;
    let paths = ExportPaths {
        train: out_dir.join(format!("{stem}.train.inter")),
        test: out_dir.join(format!("{stem}.test.inter")),
    };
    write_inter(&pair.train, &paths.train)?;
    write_inter(&pair.test, &paths.test)?;
    Ok(paths)
}

/// Load both sides of a previously exported split.
pub fn import_atomic(paths: &ExportPaths) -> Result<(Arc<InteractionLog>, Arc<InteractionLog>)> {
    Ok((
        Arc::new(read_inter(&paths.train)?),
        Arc::new(read_inter(&paths.test)?),
    ))
}
