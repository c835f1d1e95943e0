//! The three model layers: domains, flows and app definitions.
//!
//! Documents are JSON. Parsing runs in two phases: the text is first read as
//! generic JSON (syntax errors), then decoded into the typed model (schema
//! errors), and finally cross-checked (references, graph shape, types). All
//! problems within one document are reported together.

mod app;
mod domain;
mod error;
mod flow;
mod repository;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value as Json;

pub use app::{parse_app, AppDefinition, Launcher};
pub use domain::{
    parse_domain, Attribute, Choices, DataOperation, DataType, Domain, IterationKind, Param, Service, ServiceOrigin,
    Task, TaskAction,
};
pub use error::ModelError;
pub use flow::{
    parse_flow, reachable_steps, AttrInfo, CommonOp, Flow, Step, StepBody, StepKind, TaskRef, Transition, TypeRef,
};
pub use repository::{load_repository, Repository};

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
pub fn serialize<T: Serialize>(model: &T) -> String {
    let json = serde_json::to_value(model).expect("models serialize to JSON");
    canonical_text(&json)
}

pub fn canonical_text(json: &Json) -> String {
    let mut text = serde_json::to_string_pretty(&canonicalize(json)).expect("JSON values print");
    text.push('\n');
    text
}

/// Rebuilds every object with its keys in sorted order.
pub fn canonicalize(json: &Json) -> Json {
    match json {
        Json::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            Json::Object(entries.into_iter().map(|(k, v)| (k.clone(), canonicalize(v))).collect())
        }
        Json::Array(items) => Json::Array(items.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

pub(crate) fn decode<T: DeserializeOwned>(document: &str) -> Result<T, ModelError> {
    let json: Json = serde_json::from_str(document).map_err(ModelError::from_json)?;
    serde_json::from_value(json).map_err(ModelError::from_json)
}

/// `[a-z][a-zA-Z0-9_]*`: data type and attribute names.
pub(crate) fn is_attribute_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `[A-Za-z_][A-Za-z0-9_]*`: every other model identifier.
pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
