//! Line-delimited JSON record files. Line 1 of every file is a header record
//! `{"schema": "...", "version": N}`; each following non-blank line is one
//! record with the field names of [`Item`] or [`Response`].

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::types::{validate_items, Item, Response};
use crate::{Error, Result};

pub const ITEMS_SCHEMA: &str = "icscore/items";
pub const RESPONSES_SCHEMA: &str = "icscore/responses";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

fn parse_records<T: DeserializeOwned>(path: &Path, text: &str, schema: &str) -> Result<Vec<T>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, l)) => {
            serde_json::from_str(l).map_err(|e| parse_err(1, format!("bad header: {e}")))?
        }
        None => return Err(parse_err(1, "missing header line".into())),
    };
    if header.schema != schema {
        return Err(parse_err(
            1,
            format!("expected schema {schema}, found {}", header.schema),
        ));
    }
    if header.version != SCHEMA_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported schema version {}", header.version),
        ));
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

fn render_records<T: Serialize>(schema: &str, records: &[T]) -> Result<String> {
    let mut out = serde_json::to_string(&Header {
        schema: schema.to_string(),
        version: SCHEMA_VERSION,
    })?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parse an items file from memory and validate it.
pub fn read_items(path: &Path, text: &str) -> Result<Vec<Item>> {
    let items: Vec<Item> = parse_records(path, text, ITEMS_SCHEMA)?;
    validate_items(&items)?;
    Ok(items)
}

pub fn load_items(path: &Path) -> Result<Vec<Item>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_items(path, &text)
}

/// Parse a responses file and check each record against its item.
pub fn read_responses(path: &Path, text: &str, items: &[Item]) -> Result<Vec<Response>> {
    let responses: Vec<Response> = parse_records(path, text, RESPONSES_SCHEMA)?;
    let by_id: HashMap<&str, &Item> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut ids = std::collections::HashSet::new();
    for r in &responses {
        let item = by_id.get(r.item_id.as_str()).ok_or_else(|| {
            Error::Reference(format!(
                "response {} references unknown item {}",
                r.response_id, r.item_id
            ))
        })?;
        for score in std::iter::once(r.rater1).chain(r.rater2) {
            if !item.contains(score) {
                return Err(Error::Validation(format!(
                    "response {}: score {} outside item {} range {}..={}",
                    r.response_id, score, item.item_id, item.min_score, item.max_score
                )));
            }
        }
        if !ids.insert(r.response_id.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate response_id {}",
                r.response_id
            )));
        }
    }
    Ok(responses)
}

pub fn load_responses(path: &Path, items: &[Item]) -> Result<Vec<Response>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_responses(path, &text, items)
}

pub fn write_items(path: &Path, items: &[Item]) -> Result<()> {
    write_text(path, &render_records(ITEMS_SCHEMA, items)?)
}

pub fn write_responses(path: &Path, responses: &[Response]) -> Result<()> {
    write_text(path, &render_records(RESPONSES_SCHEMA, responses)?)
}
