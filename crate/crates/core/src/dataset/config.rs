use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_csv_with_tokens, ColumnSchema, Dataset, GroupSpec, Schema};
use crate::error::{Error, Result};

pub type GroupConfig = GroupSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    #[serde(flatten)]
    pub schema: ColumnSchema,
    /// Overrides the dataset-level null tokens for this column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_tokens: Option<Vec<String>>,
}

/// Schema config file: column layout, null tokens, the sensitive-group
/// definition and where missingness rules come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// CSV location, resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
    #[serde(default = "default_null_tokens")]
    pub null_tokens: Vec<String>,
    /// Built-in rule-table preset name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Rule-table file, resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    pub columns: Vec<ColumnConfig>,
    pub group: GroupSpec,
}

fn default_null_tokens() -> Vec<String> {
    vec![String::new()]
}

impl DatasetConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DatasetConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and makes `path` / `rules` absolute.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.path {
            cfg.path = Some(base.join(p));
        }
        if let Some(p) = &cfg.rules {
            cfg.rules = Some(base.join(p));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let columns = self.column_schemas();
        let schema = Schema::from_columns(columns, self.positive_label.clone())?;
        self.group.validate()?;
        for a in &self.group.attributes {
            schema.require(&a.column)?;
        }
        Ok(())
    }

    pub fn column_schemas(&self) -> Vec<ColumnSchema> {
        self.columns.iter().map(|c| c.schema.clone()).collect()
    }

    pub fn null_token_sets(&self) -> Vec<BTreeSet<String>> {
        self.columns
            .iter()
            .map(|c| c.null_tokens.as_ref().unwrap_or(&self.null_tokens).iter().cloned().collect())
            .collect()
    }

    pub fn load(&self) -> Result<Dataset> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("dataset `{}` has no CSV path", self.name)))?;
        self.load_from(path)
    }

    pub fn load_from(&self, csv: impl AsRef<Path>) -> Result<Dataset> {
        load_csv_with_tokens(csv, &self.column_schemas(), &self.null_token_sets(), self.positive_label.as_deref())
    }
}
