use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::UNIX_EPOCH;

use super::{CorpusError, RawDocument};

/// Reads a delimited collection with header `id,timestamp,text` (RFC 4180 quoting).
/// An empty timestamp field means the document has none.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RawDocument>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "timestamp", "text"] {
        return Err(CorpusError::Malformed(format!(
            "expected header id,timestamp,text, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let id = record[0].to_string();
        let ts = record[1].trim();
        let timestamp = if ts.is_empty() {
            None
        } else {
            Some(ts.parse::<i64>().map_err(|_| {
                CorpusError::Malformed(format!("document {id:?}: bad timestamp {ts:?}"))
            })?)
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        docs.push(RawDocument {
            id,
            timestamp,
            text: record[2].to_string(),
        });
    }
    Ok(docs)
}

/// Reads every regular file in `dir` (non-recursive) as one document: the file
/// name is the id and the modification time the timestamp. Files are returned
/// in name order; invalid UTF-8 is replaced lossily.
pub fn read_dir(dir: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    let mut entries: Vec<_> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .collect();
    entries.sort_by_key(|e| e.file_name());
    entries
        .into_iter()
        .map(|entry| {
            let meta = entry.metadata()?;
            let timestamp = meta
                .modified()
                .ok()
                .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
                .map(|d| d.as_secs() as i64);
            let bytes = fs::read(entry.path())?;
            Ok(RawDocument {
                id: entry.file_name().to_string_lossy().into_owned(),
                timestamp,
                text: String::from_utf8_lossy(&bytes).into_owned(),
            })
        })
        .collect()
}
