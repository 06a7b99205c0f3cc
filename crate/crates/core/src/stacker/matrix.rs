//! Stack-feature matrix file:
//! `id, m1_pP, m1_pI, m1_pO, ..., avg_tfidf, pct, pop, dose, num, t_P, t_I, t_O`.

use std::io::{Read, Write};
use std::path::Path;

use super::{feature_names, StackInstance};
use crate::base_learner::format_g17;
use crate::Error;

const TARGET_NAMES: [&str; 3] = ["t_P", "t_I", "t_O"];

#[derive(Debug, Clone, PartialEq)]
pub struct StackMatrix {
    pub n_models: usize,
    pub instances: Vec<StackInstance>,
}

impl StackMatrix {
    pub fn header(n_models: usize) -> Vec<String> {
        let mut h = vec!["id".to_string()];
        h.extend(feature_names(n_models));
        h.extend(TARGET_NAMES.iter().map(|s| s.to_string()));
        h
    }
}

pub fn write_stack_matrix<W: Write>(out: W, m: &StackMatrix) -> crate::Result<()> {
    let width = 3 * m.n_models + 5;
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Config(format!("writing stack matrix: {e}"));
    w.write_record(StackMatrix::header(m.n_models))
        .map_err(err)?;
    for inst in &m.instances {
        if inst.x.len() != width {
            return Err(super::StackError::Shape {
                expected: width,
                got: inst.x.len(),
            }
            .into());
        }
        let mut rec = vec![inst.id.clone()];
        rec.extend(inst.x.iter().chain(&inst.t).map(|&v| format_g17(v)));
        w.write_record(rec).map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("writing stack matrix: {e}")))?;
    Ok(())
}

pub fn read_stack_matrix<R: Read>(input: R, path: &Path) -> crate::Result<StackMatrix> {
    let fmt = |line: u64, message: String| Error::Format {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| fmt(1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let fixed = 1 + 5 + TARGET_NAMES.len();
    if header.len() < fixed + 3 || !(header.len() - fixed).is_multiple_of(3) {
        return Err(fmt(1, format!("unexpected column count {}", header.len())));
    }
    let n_models = (header.len() - fixed) / 3;
    let expected = StackMatrix::header(n_models);
    if header != expected {
        return Err(fmt(
            1,
            format!(
                "bad header: expected {}, got {}",
                expected.join(","),
                header.join(",")
            ),
        ));
    }
    let width = 3 * n_models + 5;
    let mut instances = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fmt(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = Vec::with_capacity(width + 3);
        for (k, raw) in rec.iter().enumerate().skip(1) {
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| fmt(line, format!("{}: not a number: {raw:?}", expected[k])))?;
            if !v.is_finite() {
                return Err(fmt(line, format!("{}: non-finite value", expected[k])));
            }
            vals.push(v);
        }
        let t = [vals[width], vals[width + 1], vals[width + 2]];
        if t.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(fmt(line, "targets must be 0 or 1".into()));
        }
        vals.truncate(width);
        instances.push(StackInstance {
            id: rec[0].to_string(),
            x: vals,
            t,
        });
    }
    Ok(StackMatrix {
        n_models,
        instances,
    })
}
