//! The app database (records of domain data types) and the instance store.
//!
//! Backends are looked up by name in a [`BackendRegistry`]; `jsonl` keeps
//! everything on disk under a data directory, `memory` keeps it in process.

mod instances;
mod jsonl;
mod memory;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::model::DataType;
use crate::value::Value;

pub use instances::{write_atomically, FileInstanceStore, MemoryInstanceStore};
pub use jsonl::JsonlDatabase;
pub use memory::MemoryDatabase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Record {
    pub record_id: u64,
    pub app_id: String,
    pub type_name: String,
    pub values: BTreeMap<String, Value>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("incomplete record: missing {0}")]
    IncompleteRecord(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::StorageFailure(e.to_string())
    }
}

/// Records scoped per app and data type. Record ids are dense per stream,
/// starting at 1.
pub trait AppDatabase: Send + Sync {
    fn put_record(&self, app_id: &str, ty: &DataType, values: BTreeMap<String, Value>) -> Result<Record, StoreError>;

    /// Newest first; `filter` is exact equality on one attribute path.
    fn query_records(
        &self,
        app_id: &str,
        ty: &DataType,
        filter: Option<(&str, &Value)>,
    ) -> Result<Vec<Record>, StoreError>;

    fn newest(&self, app_id: &str, ty: &DataType) -> Result<Option<Record>, StoreError> {
        Ok(self.query_records(app_id, ty, None)?.into_iter().next())
    }
}

/// Durable instance snapshots, one per instance id (upsert).
pub trait InstanceStore: Send + Sync {
    fn save_instance(&self, instance_id: u64, snapshot: &str) -> Result<(), StoreError>;
    fn load_instances(&self) -> Result<Vec<String>, StoreError>;
}

/// Checks `values` against the type declaration, widening Integer to Decimal.
pub fn validate_record(
    ty: &DataType,
    mut values: BTreeMap<String, Value>,
) -> Result<BTreeMap<String, Value>, StoreError> {
    let mut out = BTreeMap::new();
    for (path, attr) in ty.paths() {
        let Some(v) = values.remove(&path) else {
            return Err(StoreError::IncompleteRecord(path));
        };
        let converted = match (&v, attr.set) {
            (Value::List(items), true) => items
                .iter()
                .map(|i| i.coerce(attr.ty))
                .collect::<Option<Vec<_>>>()
                .map(Value::List),
            (Value::List(_), false) | (_, true) => None,
            (scalar, false) => scalar.coerce(attr.ty),
        };
        let Some(converted) = converted else {
            return Err(StoreError::TypeMismatch(format!(
                "`{path}` expects {}, got `{v}`",
                attr.ty
            )));
        };
        out.insert(path, converted);
    }
    if let Some(extra) = values.into_keys().next() {
        return Err(StoreError::TypeMismatch(format!(
            "`{extra}` is not an attribute of `{}`",
            ty.name
        )));
    }
    Ok(out)
}

pub(crate) fn check_filter(ty: &DataType, filter: Option<(&str, &Value)>) -> Result<(), StoreError> {
    match filter {
        Some((path, _)) if !ty.paths().any(|(p, _)| p == path) => Err(StoreError::UnknownAttribute(path.to_string())),
        _ => Ok(()),
    }
}

/// Newest-first view of one stream, filtered.
pub(crate) fn select(records: &[Record], filter: Option<(&str, &Value)>) -> Vec<Record> {
    let mut out: Vec<Record> = records
        .iter()
        .filter(|r| filter.is_none_or(|(path, v)| r.values.get(path) == Some(v)))
        .cloned()
        .collect();
    out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(b.record_id.cmp(&a.record_id)));
    out
}

/// An opened storage backend.
#[derive(Clone)]
pub struct Backend {
    pub records: Arc<dyn AppDatabase>,
    pub instances: Arc<dyn InstanceStore>,
}

pub type BackendFactory = fn(&Path, Arc<dyn Clock>) -> Result<Backend, StoreError>;

/// Storage backends selectable by name.
pub struct BackendRegistry {
    factories: BTreeMap<&'static str, BackendFactory>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut registry = BackendRegistry::empty();
        registry.register("jsonl", |dir, clock| {
            Ok(Backend {
                records: Arc::new(JsonlDatabase::open(&dir.join("records"), clock)?),
                instances: Arc::new(FileInstanceStore::open(&dir.join("instances"))?),
            })
        });
        registry.register("memory", |_, clock| {
            Ok(Backend {
                records: Arc::new(MemoryDatabase::new(clock)),
                instances: Arc::new(MemoryInstanceStore::default()),
            })
        });
        registry
    }

    /// Registers a backend; a later registration under the same name wins.
    pub fn register(&mut self, name: &'static str, factory: BackendFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn open(&self, name: &str, data_dir: &Path, clock: Arc<dyn Clock>) -> Result<Backend, StoreError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| StoreError::StorageFailure(format!("no storage backend named `{name}`")))?;
        factory(data_dir, clock)
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        BackendRegistry::builtin()
    }
}
