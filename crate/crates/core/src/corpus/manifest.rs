//! Line-oriented manifest files.
//!
//! Each non-empty line not starting with `#` is one record of nine
//! `|`-separated fields:
//!
//! ```text
//! id|signer|split|sentence|gloss|note|frame_count|fps|frames_path
//! 1|A|train|今晚瑜伽课什么时候开始呢?|今天/晚上/瑜伽/课/开始/什么/时间/?|瑜伽|120|30|frames/000001
//! ```
//!
//! `gloss` and `note` are `/`-separated token lists; `note` may be empty.

use std::path::{Path, PathBuf};

use super::{CorpusEntry, CorpusError, Split};

pub const FIELD_COUNT: usize = 9;

fn split_tokens(field: &str) -> Vec<String> {
    field.split('/').map(|t| t.trim().to_string()).collect()
}

/// Parses one record; `line_no` is 1-based and only used in errors.
pub fn parse_record(line: &str, line_no: usize) -> Result<CorpusEntry, CorpusError> {
    let malformed = |reason: String| CorpusError::Malformed {
        line: line_no,
        reason,
    };
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != FIELD_COUNT {
        return Err(malformed(format!(
            "expected {FIELD_COUNT} '|'-separated fields, found {}",
            fields.len()
        )));
    }
    let id = fields[0]
        .trim()
        .parse()
        .map_err(|_| malformed(format!("bad id {:?}", fields[0])))?;
    let split: Split = fields[2].parse().map_err(|e: CorpusError| malformed(e.to_string()))?;
    if fields[4].trim().is_empty() {
        return Err(CorpusError::EmptyGloss { line: line_no });
    }
    let glosses = split_tokens(fields[4]);
    if glosses.iter().any(String::is_empty) {
        return Err(malformed(format!("empty token in gloss {:?}", fields[4])));
    }
    let notes = if fields[5].trim().is_empty() {
        Vec::new()
    } else {
        split_tokens(fields[5])
    };
    let frame_count = fields[6]
        .trim()
        .parse()
        .map_err(|_| malformed(format!("bad frame_count {:?}", fields[6])))?;
    let fps = fields[7]
        .trim()
        .parse()
        .map_err(|_| malformed(format!("bad fps {:?}", fields[7])))?;
    let entry = CorpusEntry {
        id,
        signer: fields[1].trim().to_string(),
        split,
        sentence: fields[3].to_string(),
        glosses,
        notes,
        frame_count,
        fps,
        frames_path: PathBuf::from(fields[8].trim()),
    };
    entry.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(entry)
}

pub fn parse_manifest(text: &str) -> Result<Vec<CorpusEntry>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_record(l.trim_end_matches('\r'), i + 1))
        .collect()
}

pub fn load_manifest(path: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_manifest(&text)
}

pub fn format_record(e: &CorpusEntry) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}|{}|{}",
        e.id,
        e.signer,
        e.split,
        e.sentence,
        e.glosses.join("/"),
        e.notes.join("/"),
        e.frame_count,
        e.fps,
        e.frames_path.display()
    )
}

pub fn format_manifest(entries: &[CorpusEntry]) -> String {
    let mut out = String::from("# id|signer|split|sentence|gloss|note|frame_count|fps|frames_path\n");
    for e in entries {
        out.push_str(&format_record(e));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, entries: &[CorpusEntry]) -> Result<(), CorpusError> {
    std::fs::write(path, format_manifest(entries)).map_err(|e| CorpusError::io(path, e))
}

/// Resolves an entry's frame archive against the manifest location.
pub fn resolve_frames(manifest_path: &Path, entry: &CorpusEntry) -> PathBuf {
    if entry.frames_path.is_absolute() {
        entry.frames_path.clone()
    } else {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&entry.frames_path)
    }
}
