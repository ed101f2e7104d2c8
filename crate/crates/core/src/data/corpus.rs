use std::io::{BufRead, Write};

use super::ScenarioRecord;
use crate::{Error, Result};

/// Parses a JSONL corpus. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<ScenarioRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScenarioRecord =
            serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        record
            .validate()
            .map_err(|(field, message)| Error::InvalidField {
                line: lineno,
                field,
                message,
            })?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_corpus_str(s: &str) -> Result<Vec<ScenarioRecord>> {
    parse_corpus(s.as_bytes())
}

pub fn write_corpus<W: Write>(records: &[ScenarioRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(records: &[ScenarioRecord]) -> String {
    let mut buf = Vec::new();
    write_corpus(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
