//! Probability interchange file shared with external base learners.
//!
//! ```text
//! id,model,p_P,p_I,p_O
//! 123-0,linear,0.10000000000000001,0.5,1
//! ```
//!
//! Values are written with 17 significant digits (`%.17g`), so every `f64`
//! survives a write/read cycle unchanged.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::Triple;

pub const PROBABILITY_HEADER: [&str; 5] = ["id", "model", "p_P", "p_I", "p_O"];

#[derive(Debug, Clone, PartialEq)]
pub struct BaseProbabilities {
    pub instance_id: String,
    pub model_name: String,
    pub p: Triple,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InterchangeError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: duplicate id {id:?} for model {model:?}")]
    Duplicate {
        line: u64,
        id: String,
        model: String,
    },
    #[error("bad header: expected {expected:?}, got {got:?}")]
    Header { expected: String, got: String },
    #[error("{0}")]
    Csv(String),
}

/// `%.17g` formatting: shortest of fixed or exponent form, trailing zeros
/// removed.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };
    if !(-4..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        let dot = if frac.is_empty() { "" } else { "." };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{}{dot}{frac}e{esign}{:02}", &digits[..1], exp.abs());
    }
    let (int_part, frac_part) = if exp >= 0 {
        let split = (exp + 1) as usize;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        (
            "0".to_string(),
            format!("{}{}", "0".repeat((-exp - 1) as usize), digits),
        )
    };
    let frac = frac_part.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

pub fn write_probability_file<W: Write>(
    out: W,
    rows: &[BaseProbabilities],
) -> Result<(), InterchangeError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| InterchangeError::Csv(e.to_string());
    w.write_record(PROBABILITY_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.instance_id.clone(),
            r.model_name.clone(),
            format_g17(r.p[0]),
            format_g17(r.p[1]),
            format_g17(r.p[2]),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| InterchangeError::Csv(e.to_string()))?;
    Ok(())
}

/// Parse and validate: every probability finite and in `[0, 1]`, and
/// `(id, model)` pairs unique.
pub fn read_probability_rows<R: Read>(
    input: R,
) -> Result<Vec<BaseProbabilities>, InterchangeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| InterchangeError::Csv(e.to_string()))?
        .clone();
    if header.iter().map(str::trim).ne(PROBABILITY_HEADER) {
        return Err(InterchangeError::Header {
            expected: PROBABILITY_HEADER.join(","),
            got: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| InterchangeError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(InterchangeError::Row {
                line,
                message: format!("expected 5 fields, got {}", rec.len()),
            });
        }
        let mut p = [0.0; 3];
        for (k, slot) in p.iter_mut().enumerate() {
            let raw = rec[k + 2].trim();
            let v: f64 = raw.parse().map_err(|_| InterchangeError::Row {
                line,
                message: format!("{}: not a number: {raw:?}", PROBABILITY_HEADER[k + 2]),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(InterchangeError::Row {
                    line,
                    message: format!("{} = {raw} is outside [0, 1]", PROBABILITY_HEADER[k + 2]),
                });
            }
            *slot = v;
        }
        let id = rec[0].to_string();
        let model = rec[1].to_string();
        if !seen.insert((id.clone(), model.clone())) {
            return Err(InterchangeError::Duplicate { line, id, model });
        }
        rows.push(BaseProbabilities {
            instance_id: id,
            model_name: model,
            p,
        });
    }
    Ok(rows)
}

pub fn read_probability_file(path: &Path) -> crate::Result<Vec<BaseProbabilities>> {
    let file = std::fs::File::open(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(read_probability_rows(std::io::BufReader::new(file))?)
}
