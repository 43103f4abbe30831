use super::{ColumnData, ColumnRole, ColumnSchema, Dataset, Schema, NULL_CODE};
use crate::error::{Error, Result};

/// In-memory construction of small datasets (fixtures, tests, synthetic
/// generators).
#[derive(Default)]
pub struct DatasetBuilder {
    columns: Vec<(ColumnSchema, ColumnData)>,
    target: Option<(ColumnSchema, Vec<u8>)>,
    positive_label: Option<String>,
    error: Option<Error>,
}

impl DatasetBuilder {
    pub fn numerical(self, name: &str, values: impl IntoIterator<Item = Option<f64>>) -> Self {
        self.numerical_with_role(name, ColumnRole::Feature, values)
    }

    pub fn sensitive_numerical(self, name: &str, values: impl IntoIterator<Item = Option<f64>>) -> Self {
        self.numerical_with_role(name, ColumnRole::SensitiveAttribute, values)
    }

    pub fn categorical<C, V>(self, name: &str, categories: impl IntoIterator<Item = C>, values: impl IntoIterator<Item = Option<V>>) -> Self
    where
        C: AsRef<str>,
        V: AsRef<str>,
    {
        self.categorical_with_role(name, ColumnRole::Feature, categories, values)
    }

    pub fn sensitive_categorical<C, V>(
        self,
        name: &str,
        categories: impl IntoIterator<Item = C>,
        values: impl IntoIterator<Item = Option<V>>,
    ) -> Self
    where
        C: AsRef<str>,
        V: AsRef<str>,
    {
        self.categorical_with_role(name, ColumnRole::SensitiveAttribute, categories, values)
    }

    /// Binary target; `labels` are 0/1 with 1 meaning `categories[1]`.
    pub fn target<C: AsRef<str>>(mut self, name: &str, categories: [C; 2], labels: impl IntoIterator<Item = u8>) -> Self {
        let schema = ColumnSchema::categorical(name, ColumnRole::Target, categories.iter().map(|c| c.as_ref().to_owned()));
        self.positive_label = Some(categories[1].as_ref().to_owned());
        self.target = Some((schema, labels.into_iter().collect()));
        self
    }

    pub fn numerical_with_role(mut self, name: &str, role: ColumnRole, values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let data = values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        self.columns.push((ColumnSchema::numerical(name, role), ColumnData::Numerical(data)));
        self
    }

    pub fn categorical_with_role<C, V>(
        mut self,
        name: &str,
        role: ColumnRole,
        categories: impl IntoIterator<Item = C>,
        values: impl IntoIterator<Item = Option<V>>,
    ) -> Self
    where
        C: AsRef<str>,
        V: AsRef<str>,
    {
        let mut cats: Vec<String> = categories.into_iter().map(|c| c.as_ref().to_owned()).collect();
        let open = cats.is_empty();
        let mut codes = Vec::new();
        for v in values {
            let Some(v) = v else {
                codes.push(NULL_CODE);
                continue;
            };
            let v = v.as_ref();
            match cats.iter().position(|c| c == v) {
                Some(i) => codes.push(i as u32),
                None if open => {
                    cats.push(v.to_owned());
                    codes.push((cats.len() - 1) as u32);
                }
                None => {
                    self.error.get_or_insert(Error::Validation(format!("unknown category {v:?} in column `{name}`")));
                    codes.push(NULL_CODE);
                }
            }
        }
        self.columns
            .push((ColumnSchema::categorical(name, role, cats), ColumnData::Categorical(codes)));
        self
    }

    pub fn build(self) -> Result<Dataset> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let (target, labels) = self
            .target
            .ok_or_else(|| Error::Schema("dataset needs a target column".into()))?;
        let (schemas, data): (Vec<_>, Vec<_>) = self.columns.into_iter().unzip();
        let mut all = schemas;
        all.push(target);
        let schema = Schema::from_columns(all, self.positive_label)?;
        Dataset::new(schema, data, labels)
    }
}
