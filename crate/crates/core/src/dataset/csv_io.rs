use std::collections::HashMap;
use std::path::Path;

use super::{ColumnKind, ColumnSpec, Dataset, Schema, TargetKind, TargetSpec};
use crate::error::{Error, Result};

/// Column roles for [`load_csv`]. Columns not listed are inferred: a column
/// that parses entirely as numbers is ordered, anything else categorical.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub target: String,
    pub categorical: Vec<String>,
    pub ordered: Vec<String>,
    pub weight: Option<String>,
    /// `None` infers: a non-numeric target means classification.
    pub classification: Option<bool>,
}

impl CsvOptions {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            ..Default::default()
        }
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_raw(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(r) => r?.iter().map(str::to_owned).collect(),
        None => {
            return Ok(RawTable {
                header: Vec::new(),
                rows: Vec::new(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                line: i + 2,
                expected: header.len(),
                found: rec.len(),
            });
        }
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(RawTable { header, rows })
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_owned()))
}

fn parse_number(raw: &RawTable, col: usize, line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::NonNumeric {
        column: raw.header[col].clone(),
        line,
        value: s.to_owned(),
    })
}

/// Dense codes in first-appearance order.
fn encode_levels(values: impl Iterator<Item = String>) -> (Vec<String>, Vec<f64>) {
    let mut map: HashMap<String, usize> = HashMap::new();
    let mut levels = Vec::new();
    let codes = values
        .map(|v| {
            let next = levels.len();
            let code = *map.entry(v.clone()).or_insert_with(|| {
                levels.push(v);
                next
            });
            code as f64
        })
        .collect();
    (levels, codes)
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let raw = read_raw(path.as_ref())?;
    if raw.rows.is_empty() {
        return Err(Error::NoRows);
    }
    let target_col = column_index(&raw.header, &opts.target)?;
    let weight_col = opts
        .weight
        .as_deref()
        .map(|w| column_index(&raw.header, w))
        .transpose()?;
    for name in opts.categorical.iter().chain(&opts.ordered) {
        column_index(&raw.header, name)?;
    }

    let mut specs = Vec::new();
    let mut columns = Vec::new();
    for (c, name) in raw.header.iter().enumerate() {
        if c == target_col || Some(c) == weight_col {
            continue;
        }
        let cells = || raw.rows.iter().map(move |r| r[c].clone());
        let declared_cat = opts.categorical.contains(name);
        let declared_ord = opts.ordered.contains(name);
        let numeric = cells().all(|s| s.parse::<f64>().is_ok());
        if declared_cat || (!declared_ord && !numeric) {
            let (levels, codes) = encode_levels(cells());
            specs.push(ColumnSpec::categorical(name.clone(), levels));
            columns.push(codes);
        } else {
            let values = raw
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| parse_number(&raw, c, i + 2, &r[c]))
                .collect::<Result<Vec<_>>>()?;
            specs.push(ColumnSpec::ordered(name.clone()));
            columns.push(values);
        }
    }

    let target_cells = raw.rows.iter().map(|r| r[target_col].clone());
    let classification = opts
        .classification
        .unwrap_or_else(|| !raw.rows.iter().all(|r| r[target_col].parse::<f64>().is_ok()));
    let (target_kind, targets) = if classification {
        let (labels, codes) = encode_levels(target_cells);
        (TargetKind::Classification { labels }, codes)
    } else {
        let values = raw
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| parse_number(&raw, target_col, i + 2, &r[target_col]))
            .collect::<Result<Vec<_>>>()?;
        (TargetKind::Regression, values)
    };
    let weights = weight_col
        .map(|w| {
            raw.rows
                .iter()
                .enumerate()
                .map(|(i, r)| parse_number(&raw, w, i + 2, &r[w]))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    let schema = Schema {
        features: specs,
        target: TargetSpec {
            name: opts.target.clone(),
            kind: target_kind,
        },
        weight_column: opts.weight.clone(),
    };
    Dataset::new(columns, targets, weights, schema)
}

fn decode_feature(raw: &RawTable, spec: &ColumnSpec, col: usize, line: usize, s: &str) -> Result<f64> {
    match &spec.kind {
        ColumnKind::Ordered => parse_number(raw, col, line, s),
        ColumnKind::Categorical { levels } => levels
            .iter()
            .position(|l| l == s)
            .map(|c| c as f64)
            .ok_or_else(|| Error::UnknownCategory {
                column: spec.name.clone(),
                label: s.to_owned(),
            }),
    }
}

fn decode_target(raw: &RawTable, spec: &TargetSpec, col: usize, line: usize, s: &str) -> Result<f64> {
    match &spec.kind {
        TargetKind::Regression => parse_number(raw, col, line, s),
        TargetKind::Classification { labels } => labels
            .iter()
            .position(|l| l == s)
            .map(|c| c as f64)
            .ok_or_else(|| Error::UnknownClass(s.to_owned())),
    }
}

/// Loads a file against a fixed schema; codes are never reassigned.
pub fn load_csv_with_schema(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let raw = read_raw(path.as_ref())?;
    if raw.rows.is_empty() {
        return Err(Error::NoRows);
    }
    let feature_cols = schema
        .features
        .iter()
        .map(|s| column_index(&raw.header, &s.name))
        .collect::<Result<Vec<_>>>()?;
    let target_col = column_index(&raw.header, &schema.target.name)?;
    let weight_col = schema
        .weight_column
        .as_deref()
        .map(|w| column_index(&raw.header, w))
        .transpose()?;
    let mut columns = vec![Vec::with_capacity(raw.rows.len()); schema.features.len()];
    let mut targets = Vec::with_capacity(raw.rows.len());
    let mut weights = weight_col.map(|_| Vec::with_capacity(raw.rows.len()));
    for (i, row) in raw.rows.iter().enumerate() {
        let line = i + 2;
        for (j, (&c, spec)) in feature_cols.iter().zip(&schema.features).enumerate() {
            columns[j].push(decode_feature(&raw, spec, c, line, &row[c])?);
        }
        targets.push(decode_target(&raw, &schema.target, target_col, line, &row[target_col])?);
        if let (Some(w), Some(ws)) = (weight_col, weights.as_mut()) {
            ws.push(parse_number(&raw, w, line, &row[w])?);
        }
    }
    Dataset::new(columns, targets, weights, schema.clone())
}

/// Feature rows for prediction. The target column may be absent; when
/// present its labels must be known to the schema.
pub fn load_feature_rows(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Vec<f64>>> {
    let raw = read_raw(path.as_ref())?;
    if raw.header.is_empty() {
        return Ok(Vec::new());
    }
    let feature_cols = schema
        .features
        .iter()
        .map(|s| column_index(&raw.header, &s.name))
        .collect::<Result<Vec<_>>>()?;
    let target_col = column_index(&raw.header, &schema.target.name).ok();
    raw.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            if let Some(t) = target_col {
                decode_target(&raw, &schema.target, t, line, &row[t])?;
            }
            feature_cols
                .iter()
                .zip(&schema.features)
                .map(|(&c, spec)| decode_feature(&raw, spec, c, line, &row[c]))
                .collect()
        })
        .collect()
}

fn encode_cell(kind: &ColumnKind, v: f64) -> String {
    match kind {
        ColumnKind::Ordered => v.to_string(),
        ColumnKind::Categorical { levels } => levels[v as usize].clone(),
    }
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let schema = ds.schema();
    if schema.weight_column.is_none() && ds.weights().iter().any(|&w| w != 1.0) {
        return Err(Error::InvalidDataset(
            "non-unit weights need a named weight column".into(),
        ));
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push(&schema.target.name);
    if let Some(w) = &schema.weight_column {
        header.push(w);
    }
    writer.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut record: Vec<String> = schema
            .features
            .iter()
            .enumerate()
            .map(|(j, spec)| encode_cell(&spec.kind, ds.value(i, j)))
            .collect();
        record.push(match &schema.target.kind {
            TargetKind::Regression => ds.target(i).to_string(),
            TargetKind::Classification { labels } => labels[ds.class(i)].clone(),
        });
        if schema.weight_column.is_some() {
            record.push(ds.weights()[i].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
