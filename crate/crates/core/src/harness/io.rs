//! File formats: canonical JSON, sample CSV and content digests.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{InstanceSpec, LabeledSample};

/// JSON with object keys sorted, pretty-printed, newline-terminated.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps object keys in a sorted map.
    let v = serde_json::to_value(value).map_err(|source| Error::Json {
        path: "<memory>".into(),
        source,
    })?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|source| Error::Json {
        path: "<memory>".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

/// `sha256("blob <len>\0" || bytes)`, hex encoded, like `git hash-object`
/// with SHA-256.
pub fn content_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Plain SHA-256 of the canonical JSON of `value`.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonical_json(value)?.as_bytes())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, path)
}

/// Parses `text`; serde's message names the offending field and position.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, canonical_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn parse_instance(path: &Path) -> Result<InstanceSpec> {
    let spec: InstanceSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_instance(spec: &InstanceSpec, path: &Path) -> Result<()> {
    write_json(spec, path)
}

fn csv_err(path: &Path, row: usize, reason: impl ToString) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        row,
        reason: reason.to_string(),
    }
}

/// Writes samples as CSV with header `x_1,...,x_d,y`.
pub fn dump_samples(samples: &[LabeledSample], path: &Path) -> Result<()> {
    let d = samples.first().map_or(0, |s| s.context.len());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, 0, e))?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| csv_err(path, 0, e))?;
    for (row, s) in samples.iter().enumerate() {
        if s.context.len() != d {
            return Err(csv_err(
                path,
                row + 1,
                format!("context has {} coordinates, expected {d}", s.context.len()),
            ));
        }
        let fields = s.context.iter().chain([&s.label]).map(f64::to_string);
        w.write_record(fields).map_err(|e| csv_err(path, row + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads samples written by [`dump_samples`]. Rows are numbered from 1,
/// not counting the header.
pub fn load_samples(path: &Path) -> Result<Vec<LabeledSample>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e))?;
    let header = r.headers().map_err(|e| csv_err(path, 0, e))?.clone();
    let cols = header.len();
    let d = cols.checked_sub(1).filter(|&d| d > 0).ok_or_else(|| {
        csv_err(path, 0, "header must be x_1,...,x_d,y with d >= 1")
    })?;
    for (i, name) in header.iter().enumerate() {
        let want = if i == d { "y".to_string() } else { format!("x_{}", i + 1) };
        if name.trim() != want {
            return Err(csv_err(path, 0, format!("column {} is `{name}`, expected `{want}`", i + 1)));
        }
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_err(path, row, e))?;
        if rec.len() != cols {
            return Err(csv_err(path, row, format!("expected {cols} columns, found {}", rec.len())));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| csv_err(path, row, format!("column {}: {e}", j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (context, label) = vals.split_at(d);
        out.push(LabeledSample {
            context: context.to_vec(),
            label: label[0],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys() {
        let v = serde_json::json!({"b": 1, "a": {"z": 0.1, "c": [3, 2]}});
        let s = canonical_json(&v).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.find("\"c\"").unwrap() < s.find("\"z\"").unwrap());
    }

    #[test]
    fn digest_matches_git_for_known_blob() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            content_digest(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn samples_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let samples = vec![
            LabeledSample {
                context: vec![0.1, 1.0 / 3.0],
                label: 0.123_456_789_012_345_67,
            },
            LabeledSample {
                context: vec![0.0, 1.0],
                label: 1e-17,
            },
        ];
        dump_samples(&samples, &path).unwrap();
        assert_eq!(load_samples(&path).unwrap(), samples);
    }

    #[test]
    fn bad_csv_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        fs::write(&path, "x_1,x_2,y\n0.1,0.2,0.3\n0.1,0.2\n").unwrap();
        let err = load_samples(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        fs::write(&path, "x_1,y\n0.1,abc\n").unwrap();
        let err = load_samples(&path).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("column 2"), "{err}");
        fs::write(&path, "a,y\n").unwrap();
        assert!(load_samples(&path).is_err());
    }
}
