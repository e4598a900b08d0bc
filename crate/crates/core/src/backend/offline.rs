//! Offline stats loader: pre-scored passages stored as stats-JSONL.
//!
//! One JSON object per line, matching the `/v1/score` response plus
//! provenance: `{"id", "backend_id", "vocab_size", "scored_from", "tokens"}`.
//! Every record is validated against the per-token invariants on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::BackendError;
use crate::stats::TextStats;

/// Streaming reader over a stats-JSONL file; yields records in file order.
pub struct StatsReader<R: BufRead> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl StatsReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let file = File::open(path)?;
        Ok(StatsReader {
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }
}

impl<R: BufRead> StatsReader<R> {
    pub fn new(reader: R) -> Self {
        StatsReader {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for StatsReader<R> {
    type Item = Result<TextStats, BackendError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            if line.trim().is_empty() {
                continue;
            }
            let stats: TextStats = match serde_json::from_str(&line) {
                Ok(s) => s,
                Err(e) => {
                    return Some(Err(BackendError::Parse {
                        line: self.line_no,
                        reason: e.to_string(),
                    }))
                }
            };
            if let Err(e) = stats.validate() {
                return Some(Err(e));
            }
            return Some(Ok(stats));
        }
    }
}

/// Loads and validates every record of a stats-JSONL file.
/// An empty file yields an empty vector, not an error.
pub fn load_offline_stats(path: &Path) -> Result<Vec<TextStats>, BackendError> {
    StatsReader::open(path)?.collect()
}

/// Writes records as stats-JSONL, one object per line.
pub fn write_stats_jsonl(path: &Path, stats: &[TextStats]) -> Result<(), BackendError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for s in stats {
        let line = serde_json::to_string(s).map_err(|e| BackendError::Protocol {
            reason: format!("serializing stats record {:?}: {e}", s.id),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::TokenStats;
    use std::io::Cursor;

    fn record(id: &str) -> TextStats {
        TextStats {
            id: id.into(),
            backend_id: "test".into(),
            vocab_size: 16,
            scored_from: 1,
            truncated: false,
            tokens: vec![TokenStats {
                token_text: "w".into(),
                log_prob: -1.25,
                rank: 3,
                entropy: 1.5,
            }],
        }
    }

    #[test]
    fn empty_input_yields_empty_stream() {
        let reader = StatsReader::new(Cursor::new(""));
        assert_eq!(reader.count(), 0);
    }

    #[test]
    fn rank_zero_is_an_invariant_violation_naming_the_record() {
        let line = r#"{"id":"bad-one","backend_id":"b","vocab_size":4,"scored_from":1,
            "tokens":[{"token":"x","logprob":-1.0,"rank":0,"entropy":0.5}]}"#
            .replace('\n', "");
        let mut reader = StatsReader::new(Cursor::new(line));
        match reader.next().unwrap() {
            Err(BackendError::InvariantViolation { id, reason }) => {
                assert_eq!(id, "bad-one");
                assert!(reason.contains("rank"), "reason was {reason:?}");
            }
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let input = format!("{}\nnot json\n", serde_json::to_string(&record("ok")).unwrap());
        let mut reader = StatsReader::new(Cursor::new(input));
        assert!(reader.next().unwrap().is_ok());
        match reader.next().unwrap() {
            Err(BackendError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_through_file_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.jsonl");
        let records = vec![record("a"), record("b")];
        write_stats_jsonl(&path, &records).unwrap();
        let loaded = load_offline_stats(&path).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn blank_lines_are_skipped() {
        let input = format!("\n{}\n\n", serde_json::to_string(&record("a")).unwrap());
        let reader = StatsReader::new(Cursor::new(input));
        let loaded: Result<Vec<_>, _> = reader.collect();
        assert_eq!(loaded.unwrap().len(), 1);
    }
}
