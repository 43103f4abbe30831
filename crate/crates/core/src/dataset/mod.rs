//! Tabular data model: typed columns, per-cell null masks, a binary target
//! and sensitive-attribute metadata.

mod builder;
mod config;
mod groups;
mod io;
mod split;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use builder::DatasetBuilder;
pub use config::{ColumnConfig, DatasetConfig, GroupConfig};
pub use groups::{demographics, group_membership, Demographics, Group, GroupAttribute, GroupSpec, GroupStats, Predicate};
pub use io::{load_csv, load_csv_with_tokens, read_csv, write_csv};
pub use split::{split, SplitSpec};

/// Internal null sentinel for categorical codes.
pub const NULL_CODE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Feature,
    Target,
    SensitiveAttribute,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
    /// Ordered category labels. `None` or an empty list on a categorical
    /// column means the list is learned from data at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSchema {
    pub fn numerical(name: impl Into<String>, role: ColumnRole) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numerical,
            role,
            categories: None,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, role: ColumnRole, categories: impl IntoIterator<Item = S>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            role,
            categories: Some(categories.into_iter().map(Into::into).collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.categories) {
            (ColumnKind::Numerical, Some(_)) => Err(Error::Schema(format!(
                "numerical column `{}` must not declare categories",
                self.name
            ))),
            (ColumnKind::Categorical, Some(cats)) => {
                let mut seen = std::collections::HashSet::new();
                for c in cats {
                    if !seen.insert(c) {
                        return Err(Error::Schema(format!(
                            "duplicate category {c:?} in column `{}`",
                            self.name
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_open(&self) -> bool {
        self.kind == ColumnKind::Categorical && self.categories.as_ref().map_or(true, Vec::is_empty)
    }

    pub fn category_list(&self) -> &[String] {
        self.categories.as_deref().unwrap_or(&[])
    }

    pub fn category_code(&self, label: &str) -> Option<u32> {
        self.category_list().iter().position(|c| c == label).map(|i| i as u32)
    }
}

/// Frozen schema of a loaded dataset: the non-target columns in file order,
/// the binary target and which target label counts as positive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
    pub target: ColumnSchema,
    pub positive_label: String,
}

impl Schema {
    /// Splits a full column list into features and target and checks the
    /// target invariants. `positive_label` defaults to the second target
    /// category.
    pub fn from_columns(all: Vec<ColumnSchema>, positive_label: Option<String>) -> Result<Self> {
        for c in &all {
            c.validate()?;
        }
        let mut names = std::collections::HashSet::new();
        for c in &all {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        let (targets, columns): (Vec<_>, Vec<_>) = all.into_iter().partition(|c| c.role == ColumnRole::Target);
        let target = match <[ColumnSchema; 1]>::try_from(targets) {
            Ok([t]) => t,
            Err(v) => {
                return Err(Error::Schema(format!(
                    "exactly one target column is required, found {}",
                    v.len()
                )))
            }
        };
        if target.kind != ColumnKind::Categorical {
            return Err(Error::Schema(format!("target `{}` must be categorical", target.name)));
        }
        let cats = target.category_list();
        if !target.is_open() && cats.len() != 2 {
            return Err(Error::Schema(format!(
                "target `{}` must have exactly 2 categories, found {}",
                target.name,
                cats.len()
            )));
        }
        let positive_label = match positive_label {
            Some(p) => p,
            None if cats.len() == 2 => cats[1].clone(),
            None => String::new(),
        };
        Ok(Schema {
            columns,
            target,
            positive_label,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::Schema(format!("unknown column `{name}`")))
    }

    /// Digest over column names and kinds. Category lists are excluded so a
    /// dummy category appended by an imputer keeps the fingerprint stable.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in self.columns.iter().chain(std::iter::once(&self.target)) {
            h.update(c.name.as_bytes());
            h.update([0u8, c.kind as u8, c.role as u8]);
        }
        hex::encode(&h.finalize()[..16])
    }
}

/// A single cell, with categorical values as codes into the column's
/// category list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
    Null,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnData {
    Numerical(#[serde(with = "nan_as_null")] Vec<f64>),
    Categorical(Vec<u32>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numerical(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, row: usize) -> Cell {
        match self {
            ColumnData::Numerical(v) if v[row].is_nan() => Cell::Null,
            ColumnData::Numerical(v) => Cell::Num(v[row]),
            ColumnData::Categorical(v) if v[row] == NULL_CODE => Cell::Null,
            ColumnData::Categorical(v) => Cell::Cat(v[row]),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numerical(v) => ColumnData::Numerical(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| if x.is_nan() { None } else { Some(*x) }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// Row-major `n × p` boolean matrix; `true` marks a missing cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NullMask {
    n_rows: usize,
    n_cols: usize,
    bits: Vec<bool>,
}

impl NullMask {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        NullMask {
            n_rows,
            n_cols,
            bits: vec![false; n_rows * n_cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.n_cols + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn column_count(&self, col: usize) -> usize {
        (0..self.n_rows).filter(|&r| self.get(r, col)).count()
    }

    pub fn row_has_any(&self, row: usize) -> bool {
        self.bits[row * self.n_cols..(row + 1) * self.n_cols].iter().any(|&b| b)
    }

    /// `self ⊇ other`.
    pub fn contains(&self, other: &NullMask) -> bool {
        self.shape() == other.shape() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a || !b)
    }

    pub fn union_with(&mut self, other: &NullMask) {
        assert_eq!(self.shape(), other.shape(), "mask shapes differ");
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> NullMask {
        let mut bits = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            bits.extend_from_slice(&self.bits[r * self.n_cols..(r + 1) * self.n_cols]);
        }
        NullMask {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<ColumnData>,
    labels: Vec<u8>,
    mask: NullMask,
    /// Position of each row in the originally loaded dataset.
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Assembles a dataset and checks every structural invariant. The null
    /// mask is derived from the sentinels in `columns`.
    pub fn new(schema: Schema, columns: Vec<ColumnData>, labels: Vec<u8>) -> Result<Self> {
        let n = labels.len();
        if columns.len() != schema.columns.len() {
            return Err(Error::Schema(format!(
                "{} column buffers for {} schema columns",
                columns.len(),
                schema.columns.len()
            )));
        }
        let mut mask = NullMask::new(n, columns.len());
        for (j, (col, cs)) in columns.iter().zip(&schema.columns).enumerate() {
            if col.len() != n {
                return Err(Error::Schema(format!("column `{}` has {} rows, expected {n}", cs.name, col.len())));
            }
            match (col, cs.kind) {
                (ColumnData::Numerical(v), ColumnKind::Numerical) => {
                    for (r, x) in v.iter().enumerate() {
                        if x.is_nan() {
                            mask.set(r, j, true);
                        } else if x.is_infinite() {
                            return Err(Error::Validation(format!("row {r}, column `{}`: non-finite value", cs.name)));
                        }
                    }
                }
                (ColumnData::Categorical(v), ColumnKind::Categorical) => {
                    let k = cs.category_list().len() as u32;
                    for (r, &code) in v.iter().enumerate() {
                        if code == NULL_CODE {
                            mask.set(r, j, true);
                        } else if code >= k {
                            return Err(Error::Validation(format!(
                                "row {r}, column `{}`: category code {code} outside list of {k}",
                                cs.name
                            )));
                        }
                    }
                }
                _ => return Err(Error::Schema(format!("column `{}` buffer does not match its kind", cs.name))),
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!("label {bad} is not binary")));
        }
        Ok(Dataset {
            schema,
            columns,
            labels,
            mask,
            row_ids: (0..n).collect(),
        })
    }

    pub fn builder() -> DatasetBuilder {
        DatasetBuilder::default()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &ColumnData {
        &self.columns[j]
    }

    pub fn column_schema(&self, j: usize) -> &ColumnSchema {
        &self.schema.columns[j]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema.require(name)
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.columns[col].cell(row)
    }

    #[inline]
    pub fn is_null(&self, row: usize, col: usize) -> bool {
        self.mask.get(row, col)
    }

    pub fn mask(&self) -> &NullMask {
        &self.mask
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn null_count(&self) -> usize {
        self.mask.count()
    }

    pub fn has_nulls(&self) -> bool {
        self.null_count() > 0
    }

    pub fn category_label(&self, col: usize, code: u32) -> &str {
        &self.schema.columns[col].category_list()[code as usize]
    }

    /// Renders a cell as text (`None` for null).
    pub fn cell_text(&self, row: usize, col: usize) -> Option<String> {
        match self.cell(row, col) {
            Cell::Num(x) => Some(format_number(x)),
            Cell::Cat(code) => Some(self.category_label(col, code).to_owned()),
            Cell::Null => None,
        }
    }

    pub fn target_labels(&self) -> [&str; 2] {
        let cats = self.schema.target.category_list();
        let pos = &self.schema.positive_label;
        let neg = cats.iter().find(|c| *c != pos).map(String::as_str).unwrap_or("");
        [neg, pos.as_str()]
    }

    /// Rows with no nulls in any column.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| !self.mask.row_has_any(r)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            mask: self.mask.select_rows(rows),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }

    /// Erases a cell to the null sentinel.
    pub fn set_null(&mut self, row: usize, col: usize) {
        match &mut self.columns[col] {
            ColumnData::Numerical(v) => v[row] = f64::NAN,
            ColumnData::Categorical(v) => v[row] = NULL_CODE,
        }
        self.mask.set(row, col, true);
    }

    /// Writes an observed value into a cell, clearing its mask bit.
    pub fn set_cell(&mut self, row: usize, col: usize, cell: Cell) -> Result<()> {
        match (&mut self.columns[col], cell) {
            (_, Cell::Null) => {
                self.set_null(row, col);
                return Ok(());
            }
            (ColumnData::Numerical(v), Cell::Num(x)) if x.is_finite() => v[row] = x,
            (ColumnData::Categorical(v), Cell::Cat(c)) if (c as usize) < self.schema.columns[col].category_list().len() => {
                v[row] = c
            }
            _ => {
                return Err(Error::Contract(format!(
                    "cell value {cell:?} does not fit column `{}`",
                    self.schema.columns[col].name
                )))
            }
        }
        self.mask.set(row, col, false);
        Ok(())
    }

    /// Returns the code of `label` in a categorical column, appending it to
    /// the category list when absent.
    pub fn ensure_category(&mut self, col: usize, label: &str) -> Result<u32> {
        let cs = &mut self.schema.columns[col];
        if cs.kind != ColumnKind::Categorical {
            return Err(Error::Contract(format!("column `{}` is not categorical", cs.name)));
        }
        if let Some(code) = cs.category_code(label) {
            return Ok(code);
        }
        let cats = cs.categories.get_or_insert_with(Vec::new);
        cats.push(label.to_owned());
        Ok((cats.len() - 1) as u32)
    }

    /// Values of a numerical column at observed rows.
    pub fn observed_numbers(&self, col: usize) -> Vec<f64> {
        match &self.columns[col] {
            ColumnData::Numerical(v) => v.iter().copied().filter(|x| !x.is_nan()).collect(),
            ColumnData::Categorical(_) => Vec::new(),
        }
    }

    /// Per-category counts of observed values of a categorical column.
    pub fn category_counts(&self, col: usize) -> Vec<usize> {
        let k = self.schema.columns[col].category_list().len();
        let mut counts = vec![0usize; k];
        if let ColumnData::Categorical(v) = &self.columns[col] {
            for &c in v.iter().filter(|&&c| c != NULL_CODE) {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    pub fn column_by_name(&self) -> HashMap<&str, usize> {
        self.schema.columns.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect()
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> Dataset {
        Dataset::builder()
            .numerical("x", [Some(1.0), None, Some(3.0)])
            .categorical("c", ["a", "b"], [Some("a"), Some("b"), None])
            .target("y", ["no", "yes"], [0, 1, 1])
            .build()
            .unwrap()
    }

    #[test]
    fn mask_tracks_sentinels() {
        let d = small();
        assert_eq!(d.mask().shape(), (3, 2));
        assert!(d.is_null(1, 0));
        assert!(d.is_null(2, 1));
        assert_eq!(d.null_count(), 2);
        assert_eq!(d.complete_rows(), vec![0]);
        assert_eq!(d.cell(0, 1), Cell::Cat(0));
    }

    #[test]
    fn target_must_be_binary() {
        let cols = vec![
            ColumnSchema::numerical("x", ColumnRole::Feature),
            ColumnSchema::categorical("y", ColumnRole::Target, ["a", "b", "c"]),
        ];
        assert!(matches!(Schema::from_columns(cols, None), Err(Error::Schema(_))));
    }

    #[test]
    fn exactly_one_target() {
        let cols = vec![ColumnSchema::numerical("x", ColumnRole::Feature)];
        assert!(Schema::from_columns(cols, None).is_err());
    }

    #[test]
    fn duplicate_categories_rejected() {
        let c = ColumnSchema::categorical("c", ColumnRole::Feature, ["a", "a"]);
        assert!(c.validate().is_err());
        let mut n = ColumnSchema::numerical("x", ColumnRole::Feature);
        n.categories = Some(vec![]);
        assert!(n.validate().is_err());
    }

    #[test]
    fn set_cell_and_dummy_category() {
        let mut d = small();
        d.set_cell(1, 0, Cell::Num(2.0)).unwrap();
        assert!(!d.is_null(1, 0));
        let code = d.ensure_category(1, "__missing__").unwrap();
        assert_eq!(code, 2);
        d.set_cell(2, 1, Cell::Cat(code)).unwrap();
        assert_eq!(d.null_count(), 0);
        assert_eq!(d.ensure_category(1, "a").unwrap(), 0);
    }

    #[test]
    fn fingerprint_ignores_categories() {
        let mut d = small();
        let before = d.schema().fingerprint();
        d.ensure_category(1, "zz").unwrap();
        assert_eq!(before, d.schema().fingerprint());
    }

    #[test]
    fn serde_round_trip_keeps_nulls() {
        let d = small();
        let json = serde_json::to_string(&d).unwrap();
        let back: Dataset = serde_json::from_str(&json).unwrap();
        assert_eq!(back.mask(), d.mask());
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    proptest! {
        #[test]
        fn masked_plus_observed_cover_all_cells(cells in proptest::collection::vec(proptest::option::of(-1e6f64..1e6), 1..40)) {
            let n = cells.len();
            let d = Dataset::builder()
                .numerical("x", cells.clone())
                .numerical("z", cells.iter().rev().cloned())
                .target("y", ["0", "1"], (0..n).map(|i| (i % 2) as u8))
                .build()
                .unwrap();
            let observed: usize = (0..d.n_cols()).map(|j| d.observed_numbers(j).len()).sum();
            prop_assert_eq!(d.null_count() + observed, d.n_rows() * d.n_cols());
        }
    }
}
