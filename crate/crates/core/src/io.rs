//! Canonical on-disk formats: interaction files, id-map sidecars, and
//! relabel maps. All files are UTF-8 CSV with a fixed header and `\n`
//! line endings, so equal inputs serialize to equal bytes.

use std::fs;
use std::path::Path;

use crate::data::{IdMap, Interaction, InteractionLog};
use crate::error::{Result, SpError};
use crate::shift::RelabelMap;

const INTERACTION_HEADER: [&str; 3] = ["user", "item", "timestamp"];

fn io_err(path: &Path, source: std::io::Error) -> SpError {
    SpError::io(path.display().to_string(), source)
}

fn csv_err(path: &Path, err: csv::Error) -> SpError {
    match err.position() {
        Some(pos) => SpError::parse(path.display().to_string(), pos.line(), err.to_string()),
        None => SpError::parse(path.display().to_string(), 0, err.to_string()),
    }
}

/// Writes a canonical interaction file with header `user,item,timestamp`.
pub fn write_interactions(path: &Path, log: &InteractionLog) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => SpError::Data(format!("{}: {other:?}", path.display())),
    })?;
    writer
        .write_record(INTERACTION_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for it in log {
        writer
            .write_record([
                it.user.to_string(),
                it.item.to_string(),
                it.timestamp.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a canonical interaction file (dense indices, epoch seconds).
/// An empty body is allowed; stage logic decides whether that is an
/// error in context.
pub fn read_interactions(path: &Path) -> Result<InteractionLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => SpError::Data(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| {
                SpError::parse(path.display().to_string(), line, "missing column")
            })
        };
        let user: u32 = field(0)?.parse().map_err(|_| {
            SpError::parse(path.display().to_string(), line, "bad user index")
        })?;
        let item: u32 = field(1)?.parse().map_err(|_| {
            SpError::parse(path.display().to_string(), line, "bad item index")
        })?;
        let timestamp: i64 = field(2)?.parse().map_err(|_| {
            SpError::parse(path.display().to_string(), line, "bad timestamp")
        })?;
        rows.push(Interaction::new(user, item, timestamp));
    }
    Ok(InteractionLog::from_unsorted(rows))
}

fn write_key_map(path: &Path, keys: &[String]) -> Result<()> {
    let mut out = String::from("external_key,dense_index\n");
    for (idx, key) in keys.iter().enumerate() {
        // Keys may contain commas in pathological inputs; quote like CSV.
        if key.contains([',', '"', '\n']) {
            out.push_str(&format!("\"{}\",{idx}\n", key.replace('"', "\"\"")));
        } else {
            out.push_str(&format!("{key},{idx}\n"));
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn read_key_map(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => SpError::Data(format!("{}: {other:?}", path.display())),
        })?;
    let mut keys = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let key = record.get(0).ok_or_else(|| {
            SpError::parse(path.display().to_string(), line, "missing key column")
        })?;
        let idx: usize = record
            .get(1)
            .ok_or_else(|| SpError::parse(path.display().to_string(), line, "missing index"))?
            .parse()
            .map_err(|_| SpError::parse(path.display().to_string(), line, "bad index"))?;
        if idx != keys.len() {
            return Err(SpError::parse(
                path.display().to_string(),
                line,
                format!("index {idx} out of order, expected {}", keys.len()),
            ));
        }
        keys.push(key.to_owned());
    }
    Ok(keys)
}

/// Persists an [`IdMap`] as a pair of two-column sidecar files
/// (`external_key,dense_index`), one for users and one for items; a
/// single shared file would make identical user and item keys
/// ambiguous.
pub fn write_id_map(users_path: &Path, items_path: &Path, map: &IdMap) -> Result<()> {
    write_key_map(users_path, map.user_keys())?;
    write_key_map(items_path, map.item_keys())
}

pub fn read_id_map(users_path: &Path, items_path: &Path) -> Result<IdMap> {
    let mut map = IdMap::new();
    for key in read_key_map(users_path)? {
        map.intern_user(&key);
    }
    for key in read_key_map(items_path)? {
        map.intern_item(&key);
    }
    Ok(map)
}

/// Writes a relabel map as two-column text `original_index,fresh_index`,
/// rows ascending by original index.
pub fn write_relabel_map(path: &Path, map: &RelabelMap) -> Result<()> {
    let mut out = String::from("original_index,fresh_index\n");
    for (original, fresh) in map.entries() {
        out.push_str(&format!("{original},{fresh}\n"));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_relabel_map(path: &Path) -> Result<RelabelMap> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => SpError::Data(format!("{}: {other:?}", path.display())),
        })?;
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_col = |i: usize| -> Result<u32> {
            record
                .get(i)
                .ok_or_else(|| SpError::parse(path.display().to_string(), line, "missing column"))?
                .parse()
                .map_err(|_| SpError::parse(path.display().to_string(), line, "bad index"))
        };
        entries.push((parse_col(0)?, parse_col(1)?));
    }
    RelabelMap::from_entries(entries)
}
