//! Streaming ingestion: delimited text → `RawInteraction` records →
//! binarisation → deduplicated [`InteractionLog`].
//!
//! Parsing is an iterator so a 10M-row file never has to fit in memory:
//! peak usage is proportional to what survives binarisation (interned token
//! tables plus 8-byte index pairs), not to the raw file.

use std::io::Read;

use crate::error::{Error, Result};
use crate::log::{InteractionLog, PairInterner, RawInteraction};

/// Column layout of a delimited input file.
///
/// Rows must carry at least enough fields to reach every referenced column;
/// extra trailing fields are tolerated (real-world logs carry them). Tokens
/// are compared byte-exact: no trimming, no case folding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFormat {
    pub delimiter: u8,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_col: Option<usize>,
}

impl InputFormat {
    /// Comma-separated `user,item,rating` with no header.
    pub fn csv() -> Self {
        InputFormat {
            delimiter: b',',
            has_header: false,
            user_col: 0,
            item_col: 1,
            rating_col: Some(2),
            timestamp_col: None,
        }
    }

    /// Tab-separated `user,item,rating` with no header.
    pub fn tsv() -> Self {
        InputFormat {
            delimiter: b'\t',
            ..Self::csv()
        }
    }

    /// The atomic interchange format: tab-separated with a typed header;
    /// the label column is ignored on re-ingest (everything is implicit).
    pub fn atomic() -> Self {
        InputFormat {
            delimiter: b'\t',
            has_header: true,
            user_col: 0,
            item_col: 1,
            rating_col: None,
            timestamp_col: None,
        }
    }

    fn required_fields(&self) -> usize {
        let mut max_col = self.user_col.max(self.item_col);
        if let Some(c) = self.rating_col {
            max_col = max_col.max(c);
        }
        if let Some(c) = self.timestamp_col {
            max_col = max_col.max(c);
        }
        max_col + 1
    }
}

impl Default for InputFormat {
    fn default() -> Self {
        Self::csv()
    }
}

/// Stream `RawInteraction`s out of delimited text. Errors carry absolute
/// 1-based line numbers; a source with zero data rows yields one
/// [`Error::EmptyLog`].
pub fn parse_log<R: Read>(source: R, format: &InputFormat) -> RawRecords<R> {
    let reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .flexible(true) // arity is checked per row, with our own error text
        .from_reader(source);
    RawRecords {
        records: reader.into_byte_records(),
        format: format.clone(),
        yielded: 0,
        finished: false,
    }
}

pub struct RawRecords<R: Read> {
    records: csv::ByteRecordsIntoIter<R>,
    format: InputFormat,
    yielded: u64,
    finished: bool,
}

impl<R: Read> RawRecords<R> {
    fn parse_record(&self, record: &csv::ByteRecord) -> Result<RawInteraction> {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let required = self.format.required_fields();
        if record.len() < required {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected at least {required} fields, found {}",
                    record.len()
                ),
            });
        }
        let user = field_str(record, self.format.user_col, "user", line)?;
        let item = field_str(record, self.format.item_col, "item", line)?;
        if user.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty user token".into(),
            });
        }
        if item.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty item token".into(),
            });
        }
        let rating = match self.format.rating_col {
            Some(col) => {
                let text = field_str(record, col, "rating", line)?;
                Some(text.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("unparsable rating {text:?}"),
                })?)
            }
            None => None,
        };
        let timestamp = match self.format.timestamp_col {
            Some(col) => {
                let text = field_str(record, col, "timestamp", line)?;
                Some(text.trim().parse::<i64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("unparsable timestamp {text:?}"),
                })?)
            }
            None => None,
        };
        Ok(RawInteraction {
            user: user.to_string(),
            item: item.to_string(),
            rating,
            timestamp,
        })
    }
}

fn field_str<'r>(
    record: &'r csv::ByteRecord,
    col: usize,
    what: &str,
    line: u64,
) -> Result<&'r str> {
    let bytes = record.get(col).expect("arity checked above");
    std::str::from_utf8(bytes).map_err(|_| Error::Parse {
        line,
        message: format!("invalid UTF-8 in {what} column"),
    })
}

impl<R: Read> Iterator for RawRecords<R> {
    type Item = Result<RawInteraction>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.records.next() {
            Some(Ok(record)) => {
                self.yielded += 1;
                Some(self.parse_record(&record))
            }
            Some(Err(e)) => Some(Err(e.into())),
            None => {
                self.finished = true;
                if self.yielded == 0 {
                    Some(Err(Error::EmptyLog("input contains no data rows".into())))
                } else {
                    None
                }
            }
        }
    }
}

/// Keep records whose rating is absent or ≥ `threshold`; retained ratings
/// become the binary value 1. Errors pass through untouched.
pub fn binarize<I>(records: I, threshold: f64) -> impl Iterator<Item = Result<RawInteraction>>
where
    I: IntoIterator<Item = Result<RawInteraction>>,
{
    records.into_iter().filter_map(move |result| match result {
        Err(e) => Some(Err(e)),
        Ok(mut record) => match record.rating {
            None => Some(Ok(record)),
            Some(value) if value >= threshold => {
                record.rating = Some(1.0);
                Some(Ok(record))
            }
            Some(_) => None,
        },
    })
}

/// Deduplicate (user, item) pairs and build the canonical indexed log.
/// Errors on the first failed record, or when nothing remains.
pub fn build_log<I>(records: I) -> Result<InteractionLog>
where
    I: IntoIterator<Item = Result<RawInteraction>>,
{
    let mut interner = PairInterner::new();
    for record in records {
        let record = record?;
        interner.push(record.user, record.item);
    }
    interner.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(user: &str, item: &str, rating: Option<f64>) -> RawInteraction {
        RawInteraction {
            user: user.into(),
            item: item.into(),
            rating,
            timestamp: None,
        }
    }

    fn parse_all(text: &str, format: &InputFormat) -> Vec<Result<RawInteraction>> {
        parse_log(text.as_bytes(), format).collect()
    }

    #[test]
    fn csv_rows_map_to_records() {
        let format = InputFormat {
            timestamp_col: Some(3),
            ..InputFormat::csv()
        };
        let rows = parse_all("u1,i1,5.0,100\nu2,i2,3.0,101", &format);
        assert_eq!(rows.len(), 2);
        let first = rows[0].as_ref().unwrap();
        assert_eq!(first.user, "u1");
        assert_eq!(first.item, "i1");
        assert_eq!(first.rating, Some(5.0));
        assert_eq!(first.timestamp, Some(100));
    }

    #[test]
    fn short_row_is_an_arity_error_at_line_1() {
        let format = InputFormat {
            timestamp_col: Some(3),
            ..InputFormat::csv()
        };
        let rows = parse_all("u1,i1", &format);
        assert_eq!(rows.len(), 1);
        match rows[0].as_ref().unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(*line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicates_pass_through_parsing() {
        // Dedup belongs to build_log, not the parser.
        let rows = parse_all("u1,i1,5\nu1,i1,5\nu2,i1,4", &InputFormat::csv());
        let line_count = "u1,i1,5\nu1,i1,5\nu2,i1,4".lines().count();
        assert_eq!(rows.len(), line_count);
        assert!(rows.iter().all(|r| r.is_ok()));
    }

    #[test]
    fn unparsable_rating_names_its_line() {
        let rows = parse_all("u1,i1,5.0\nu2,i2,high", &InputFormat::csv());
        match rows[1].as_ref().unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(*line, 2);
                assert!(message.contains("rating"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let rows = parse_all("", &InputFormat::csv());
        assert_eq!(rows.len(), 1);
        assert!(matches!(rows[0], Err(Error::EmptyLog(_))));
    }

    #[test]
    fn header_only_file_is_an_error() {
        let format = InputFormat {
            has_header: true,
            ..InputFormat::csv()
        };
        let rows = parse_all("user,item,rating", &format);
        assert_eq!(rows.len(), 1);
        assert!(matches!(rows[0], Err(Error::EmptyLog(_))));
    }

    #[test]
    fn header_shifts_line_numbers() {
        let format = InputFormat {
            has_header: true,
            ..InputFormat::csv()
        };
        let rows = parse_all("user,item,rating\nu1,i1,bad", &format);
        match rows[0].as_ref().unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(*line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn binarize_keeps_threshold_and_above() {
        let input = vec![
            Ok(raw("u", "a", Some(3.0))),
            Ok(raw("u", "b", Some(4.0))),
            Ok(raw("u", "c", Some(5.0))),
        ];
        let kept: Vec<_> = binarize(input, 4.0).map(|r| r.unwrap()).collect();
        assert_eq!(kept.len(), 2);
        assert!(kept.iter().all(|r| r.rating == Some(1.0)));
    }

    #[test]
    fn binarize_boundary_is_inclusive() {
        let input = vec![Ok(raw("u", "a", Some(3.9))), Ok(raw("u", "b", Some(4.0)))];
        let kept: Vec<_> = binarize(input, 4.0).map(|r| r.unwrap()).collect();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].item, "b");
    }

    #[test]
    fn binarize_passes_ratingless_records_unchanged() {
        let input = vec![Ok(raw("u", "a", None)), Ok(raw("v", "b", None))];
        let kept: Vec<_> = binarize(input, 4.0).map(|r| r.unwrap()).collect();
        assert_eq!(kept, vec![raw("u", "a", None), raw("v", "b", None)]);
    }

    #[test]
    fn build_log_dedups_and_counts() {
        let input = vec![
            Ok(raw("u1", "i1", None)),
            Ok(raw("u1", "i1", None)),
            Ok(raw("u1", "i2", None)),
        ];
        let log = build_log(input).unwrap();
        assert_eq!(log.n_interactions(), 2);
        assert_eq!(log.n_users(), 1);
        assert_eq!(log.n_items(), 2);
    }

    #[test]
    fn build_log_propagates_parse_errors() {
        let input = vec![
            Ok(raw("u1", "i1", None)),
            Err(Error::Parse {
                line: 2,
                message: "boom".into(),
            }),
        ];
        assert!(build_log(input).is_err());
    }

    #[test]
    fn build_log_rejects_empty() {
        assert!(matches!(build_log(Vec::new()), Err(Error::EmptyLog(_))));
    }

    #[test]
    fn binarize_then_dedup_keeps_pair_with_any_qualifying_duplicate() {
        // Same pair seen at 2.0 and 5.0: binarise-before-dedup keeps it.
        let input = vec![Ok(raw("u", "a", Some(2.0))), Ok(raw("u", "a", Some(5.0)))];
        let log = build_log(binarize(input, 4.0)).unwrap();
        assert_eq!(log.n_interactions(), 1);
    }
}
