use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::pipeline::ResultRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Persisted {
    Appended,
    /// A byte-identical record with this GUID was already present.
    Duplicate,
}

/// Append-only JSONL result store, one record per line, deduplicated by
/// GUID. Persisting a GUID that is already stored with a different payload
/// is an integrity error.
#[derive(Debug)]
pub struct ResultStore {
    path: PathBuf,
    index: HashMap<String, String>,
    order: Vec<String>,
}

fn guid_of(line: &str) -> Result<String> {
    let v: Value = serde_json::from_str(line)?;
    v.get("guid")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| Error::Integrity("result line without a guid".into()))
}

impl ResultStore {
    /// Opens (or creates) the store and indexes its records.
    pub fn open(path: impl Into<PathBuf>) -> Result<ResultStore> {
        let path = path.into();
        let mut store = ResultStore {
            path,
            index: HashMap::new(),
            order: Vec::new(),
        };
        if store.path.exists() {
            let f = File::open(&store.path).map_err(|e| Error::io(&store.path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&store.path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let guid = guid_of(&line).map_err(|e| Error::Integrity(format!("{} line {}: {e}", store.path.display(), i + 1)))?;
                store.insert(guid, line)?;
            }
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, guid: &str) -> bool {
        self.index.contains_key(guid)
    }

    fn insert(&mut self, guid: String, line: String) -> Result<Persisted> {
        match self.index.get(&guid) {
            Some(existing) if *existing == line => Ok(Persisted::Duplicate),
            Some(_) => Err(Error::Integrity(format!(
                "guid {guid} is already stored with a different payload"
            ))),
            None => {
                self.order.push(guid.clone());
                self.index.insert(guid, line);
                Ok(Persisted::Appended)
            }
        }
    }

    pub fn persist(&mut self, record: &ResultRecord) -> Result<Persisted> {
        let line = serde_json::to_string(record)?;
        let outcome = self.insert(record.guid.clone(), line.clone())?;
        if outcome == Persisted::Appended {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(&self.path, e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(outcome)
    }

    /// Records in insertion order.
    pub fn records(&self) -> Result<Vec<ResultRecord>> {
        self.order
            .iter()
            .map(|g| Ok(serde_json::from_str(&self.index[g])?))
            .collect()
    }

    /// Raw lines sorted by GUID; independent of the execution schedule.
    pub fn sorted_lines(&self) -> Vec<&str> {
        let mut guids: Vec<&String> = self.order.iter().collect();
        guids.sort();
        guids.into_iter().map(|g| self.index[g].as_str()).collect()
    }

    pub fn query(&self, filter: &Filter) -> Result<Vec<ResultRecord>> {
        let mut out = Vec::new();
        for g in &self.order {
            let v: Value = serde_json::from_str(&self.index[g])?;
            if filter.matches(&v) {
                out.push(serde_json::from_value(v)?);
            }
        }
        Ok(out)
    }
}

/// Conjunction of `field=value` conditions. Fields are dotted paths looked
/// up first in the record's `spec` and then at the top level, so
/// `scenario=S10`, `imputer.kind=miss-forest` and `status=error` all work.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Filter {
    pub conditions: Vec<(String, String)>,
}

impl Filter {
    pub fn parse<S: AsRef<str>>(terms: &[S]) -> Result<Filter> {
        let conditions = terms
            .iter()
            .map(|t| {
                let t = t.as_ref();
                t.split_once('=')
                    .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                    .ok_or_else(|| Error::Config(format!("filter `{t}` is not of the form field=value")))
            })
            .collect::<Result<_>>()?;
        Ok(Filter { conditions })
    }

    pub fn matches(&self, record: &Value) -> bool {
        self.conditions.iter().all(|(field, want)| {
            let found = lookup(record.get("spec"), field).or_else(|| lookup(Some(record), field));
            match found {
                Some(Value::String(s)) => s == want,
                Some(Value::Null) | None => want == "none",
                Some(Value::Number(n)) => want.parse::<f64>().ok() == n.as_f64(),
                Some(other) => other.to_string() == *want,
            }
        })
    }
}

fn lookup<'a>(root: Option<&'a Value>, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(root?, |v, key| v.get(key))
}
