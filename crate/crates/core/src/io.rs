//! File formats shared by the pipeline stages: JSON lines for records,
//! delimited text for features and vectors, JSON for small artifacts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::base_learner::format_g17;
use crate::features::{FeatureVector, QiefFeatures, QIEF_NAMES};
use crate::{Error, Result};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Blank lines are skipped; a bad line is reported with its number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub const FEATURE_HEADER: [&str; 6] = [
    "id",
    "avg_tfidf",
    QIEF_NAMES[0],
    QIEF_NAMES[1],
    QIEF_NAMES[2],
    QIEF_NAMES[3],
];

pub fn write_features(path: &Path, rows: &[(String, FeatureVector)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(FEATURE_HEADER).map_err(err)?;
    for (id, f) in rows {
        let q = f.qief.as_array();
        let mut rec = vec![id.clone(), format_g17(f.avg_tfidf)];
        rec.extend(q.iter().map(u32::to_string));
        w.write_record(rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<(String, FeatureVector)>> {
    let rows = read_numeric_table(path, Some(&FEATURE_HEADER))?;
    rows.into_iter()
        .map(|(line, id, v)| {
            let count = |k: usize| -> Result<u32> {
                let x = v[k];
                if x < 0.0 || x.fract() != 0.0 || x > f64::from(u32::MAX) {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        line,
                        message: format!("{}: expected a count, got {x}", FEATURE_HEADER[k + 1]),
                    });
                }
                Ok(x as u32)
            };
            Ok((
                id,
                FeatureVector {
                    avg_tfidf: v[0],
                    qief: QiefFeatures {
                        percentage_count: count(1)?,
                        population_count: count(2)?,
                        dose_count: count(3)?,
                        numeric_count: count(4)?,
                    },
                },
            ))
        })
        .collect()
}

/// Fixed input vectors for the base learner: `id, h1, ..., hd`.
pub fn write_vectors(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut header = vec!["id".to_string()];
    header.extend((1..=dim).map(|j| format!("h{j}")));
    w.write_record(&header).map_err(err)?;
    for (id, h) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(h.iter().map(|&v| format_g17(v)));
        w.write_record(rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_vectors(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    Ok(read_numeric_table(path, None)?
        .into_iter()
        .map(|(_, id, v)| (id, v))
        .collect())
}

/// Rows of `id, numbers...` as `(line, id, values)`; all values finite,
/// ids unique.
fn read_numeric_table(
    path: &Path,
    header: Option<&[&str]>,
) -> Result<Vec<(usize, String, Vec<f64>)>> {
    let fmt = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().from_reader(open(path)?);
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| fmt(1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if let Some(expected) = header {
        if got.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(fmt(
                1,
                format!(
                    "bad header: expected {}, got {}",
                    expected.join(","),
                    got.join(",")
                ),
            ));
        }
    } else if got.first().map(String::as_str) != Some("id") {
        return Err(fmt(1, "first column must be id".into()));
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fmt(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(fmt(line, format!("duplicate id {id:?}")));
        }
        let mut v = Vec::with_capacity(rec.len() - 1);
        for (k, raw) in rec.iter().enumerate().skip(1) {
            let x: f64 = raw
                .trim()
                .parse()
                .map_err(|_| fmt(line, format!("{}: not a number: {raw:?}", got[k])))?;
            if !x.is_finite() {
                return Err(fmt(line, format!("{}: non-finite value", got[k])));
            }
            v.push(x);
        }
        out.push((line, id, v));
    }
    Ok(out)
}
