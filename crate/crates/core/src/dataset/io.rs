use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnData, ColumnKind, ColumnRole, ColumnSchema, Dataset, Schema, NULL_CODE};
use crate::error::{Error, Result};

/// Loads a headered CSV. Cells equal to any of `null_tokens` become nulls.
pub fn load_csv(path: impl AsRef<Path>, columns: &[ColumnSchema], null_tokens: &BTreeSet<String>, positive_label: Option<&str>) -> Result<Dataset> {
    let per_column = vec![null_tokens.clone(); columns.len()];
    load_csv_with_tokens(path, columns, &per_column, positive_label)
}

/// Like [`load_csv`] with one null-token set per schema column.
pub fn load_csv_with_tokens(
    path: impl AsRef<Path>,
    columns: &[ColumnSchema],
    null_tokens: &[BTreeSet<String>],
    positive_label: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, columns, null_tokens, positive_label)
}

pub fn read_csv<R: Read>(reader: R, columns: &[ColumnSchema], null_tokens: &[BTreeSet<String>], positive_label: Option<&str>) -> Result<Dataset> {
    if null_tokens.len() != columns.len() {
        return Err(Error::Schema("one null-token set per column is required".into()));
    }
    for c in columns {
        c.validate()?;
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();

    let mut positions = Vec::with_capacity(columns.len());
    for c in columns {
        let pos = header
            .iter()
            .position(|h| h == c.name)
            .ok_or_else(|| Error::Schema(format!("column `{}` missing from CSV header", c.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| !columns.iter().any(|c| c.name == *h)) {
        return Err(Error::Schema(format!("CSV has column `{extra}` not declared in the schema")));
    }
    if header.len() != columns.len() {
        return Err(Error::Schema("CSV header repeats a column name".into()));
    }

    let mut cats: Vec<Vec<String>> = columns.iter().map(|c| c.category_list().to_vec()).collect();
    let open: Vec<bool> = columns.iter().map(ColumnSchema::is_open).collect();
    let mut buffers: Vec<ColumnData> = columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numerical => ColumnData::Numerical(Vec::new()),
            ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
        })
        .collect();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, c) in columns.iter().enumerate() {
            let raw = record.get(positions[j]).unwrap_or("");
            let is_null = null_tokens[j].contains(raw);
            if is_null && c.role == ColumnRole::Target {
                return Err(Error::Validation(format!("row {row}: target `{}` is null", c.name)));
            }
            match &mut buffers[j] {
                ColumnData::Numerical(v) => {
                    if is_null {
                        v.push(f64::NAN);
                    } else {
                        let x: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                            row,
                            column: c.name.clone(),
                            value: raw.to_owned(),
                        })?;
                        if !x.is_finite() {
                            return Err(Error::Parse {
                                row,
                                column: c.name.clone(),
                                value: raw.to_owned(),
                            });
                        }
                        v.push(x);
                    }
                }
                ColumnData::Categorical(v) => {
                    if is_null {
                        v.push(NULL_CODE);
                        continue;
                    }
                    match cats[j].iter().position(|k| k == raw) {
                        Some(code) => v.push(code as u32),
                        None if open[j] => {
                            cats[j].push(raw.to_owned());
                            v.push((cats[j].len() - 1) as u32);
                        }
                        None => {
                            return Err(Error::Validation(format!(
                                "row {row}: unknown category {raw:?} in column `{}`",
                                c.name
                            )))
                        }
                    }
                }
            }
        }
    }

    let mut frozen: Vec<ColumnSchema> = columns.to_vec();
    for (c, list) in frozen.iter_mut().zip(cats) {
        if c.kind == ColumnKind::Categorical {
            c.categories = Some(list);
        }
    }
    let target_idx = frozen
        .iter()
        .position(|c| c.role == ColumnRole::Target)
        .ok_or_else(|| Error::Schema("exactly one target column is required, found 0".into()))?;
    let target_cats = frozen[target_idx].category_list().to_vec();
    if target_cats.len() != 2 {
        return Err(Error::Schema(format!(
            "target `{}` must have exactly 2 categories, found {}",
            frozen[target_idx].name,
            target_cats.len()
        )));
    }
    let positive = positive_label.map(str::to_owned).unwrap_or_else(|| target_cats[1].clone());
    let Some(pos_code) = target_cats.iter().position(|c| *c == positive) else {
        return Err(Error::Schema(format!("positive label {positive:?} is not a target category")));
    };

    let mut labels = Vec::new();
    let mut data = Vec::with_capacity(columns.len() - 1);
    for (j, buf) in buffers.into_iter().enumerate() {
        if j == target_idx {
            if let ColumnData::Categorical(codes) = buf {
                labels = codes.iter().map(|&c| u8::from(c as usize == pos_code)).collect();
            }
        } else {
            data.push(buf);
        }
    }
    let schema = Schema::from_columns(frozen, Some(positive))?;
    Dataset::new(schema, data, labels)
}

/// Writes the dataset as CSV: feature columns in schema order followed by
/// the target. Nulls are written as `null_token`.
pub fn write_csv<W: Write>(d: &Dataset, writer: W, null_token: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = d.schema();
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&schema.target.name);
    w.write_record(&header)?;
    let [neg, pos] = d.target_labels();
    for r in 0..d.n_rows() {
        let mut rec: Vec<String> = (0..d.n_cols())
            .map(|j| d.cell_text(r, j).unwrap_or_else(|| null_token.to_owned()))
            .collect();
        rec.push(if d.labels()[r] == 1 { pos } else { neg }.to_owned());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
