use std::collections::HashSet;

use super::{parse_finite, IoError};

/// Rows of `id, f0 .. f{dim-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dim: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

fn header(dim: usize) -> Vec<String> {
    std::iter::once("id".to_string()).chain((0..dim).map(|i| format!("f{i}"))).collect()
}

pub fn parse_features(text: &str) -> Result<FeatureTable, IoError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let head = match records.next() {
        None => return Err(IoError::parse(1, "missing header")),
        Some(r) => r.map_err(|e| IoError::parse(1, e.to_string()))?,
    };
    if head.len() < 2 {
        return Err(IoError::parse(1, "header needs an id column and at least one feature"));
    }
    let dim = head.len() - 1;
    let expected = header(dim);
    if let Some((i, (got, want))) = head.iter().zip(&expected).enumerate().find(|(_, (g, w))| g != w) {
        return Err(IoError::parse(1, format!("header column {i} is {got:?}, expected {want:?}")));
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            IoError::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim + 1 {
            return Err(IoError::parse(line, format!("expected {dim} feature values, found {}", record.len().saturating_sub(1))));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(IoError::parse(line, "empty id"));
        }
        let values = record
            .iter()
            .skip(1)
            .zip(&expected[1..])
            .map(|(f, col)| parse_finite(f, line, col))
            .collect::<Result<Vec<f64>, _>>()?;
        if !seen.insert(id.clone()) {
            return Err(IoError::parse(line, format!("duplicate id {id:?}")));
        }
        rows.push((id, values));
    }
    Ok(FeatureTable { dim, rows })
}

pub fn format_features(table: &FeatureTable) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| IoError::parse(0, e.to_string());
    w.write_record(header(table.dim)).map_err(fail)?;
    for (id, values) in &table.rows {
        if values.len() != table.dim {
            return Err(IoError::parse(0, format!("row {id:?} has {} values, expected {}", values.len(), table.dim)));
        }
        w.write_record(std::iter::once(id.clone()).chain(values.iter().map(f64::to_string))).map_err(fail)?;
    }
    w.into_inner().map_err(|e| IoError::parse(0, e.to_string()))
}
