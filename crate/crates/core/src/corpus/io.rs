use std::fs;
use std::path::Path;

use super::{Corpus, CorpusError, LabeledEvent};

/// One JSON object per line, each terminated by `\n`.
pub fn render_corpus(c: &Corpus) -> String {
    let mut out = String::new();
    for e in &c.events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Parses JSON Lines. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let record: LabeledEvent = serde_json::from_str(line)
            .map_err(|e| CorpusError::MalformedRecord { line: line_no, message: e.to_string() })?;
        record.event.check().map_err(|field| CorpusError::MalformedRecord {
            line: line_no,
            message: format!("invalid {field}"),
        })?;
        events.push(record);
    }
    Ok(Corpus::from_events(events))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    parse_corpus(&fs::read_to_string(path)?)
}

pub fn write_corpus(c: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    fs::write(path, render_corpus(c))?;
    Ok(())
}
