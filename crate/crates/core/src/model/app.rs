use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::value::Value;

use super::error::Diagnostics;
use super::flow::Flow;
use super::{decode, is_identifier, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Launcher {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<String>,
    pub flow: String,
    #[serde(default)]
    pub initial_values: BTreeMap<String, Value>,
}

fn default_version() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AppDefinition {
    pub app_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logo: Option<String>,
    #[serde(default = "default_version")]
    pub version: u64,
    pub launchers: Vec<Launcher>,
}

impl AppDefinition {
    pub fn launcher(&self, id: &str) -> Option<&Launcher> {
        self.launchers.iter().find(|l| l.id == id)
    }
}

/// Parses an app definition and checks every launcher against the flows.
/// Initial values are converted to the declared attribute types.
pub fn parse_app(document: &str, flows: &BTreeMap<String, Flow>) -> Result<AppDefinition, ModelError> {
    let mut app: AppDefinition = decode(document)?;
    let mut diags = Diagnostics::default();

    if !is_identifier(&app.app_id) {
        diags.push(ModelError::Schema(format!("invalid appId `{}`", app.app_id)));
    }
    if app.version == 0 {
        diags.push(ModelError::Schema("version starts at 1".into()));
    }
    let mut ids = BTreeSet::new();
    for launcher in &mut app.launchers {
        if !is_identifier(&launcher.id) {
            diags.push(ModelError::Schema(format!("invalid launcher id `{}`", launcher.id)));
        }
        if !ids.insert(launcher.id.clone()) {
            diags.push(ModelError::DuplicateName {
                category: "launcher".into(),
                name: launcher.id.clone(),
            });
        }
        let Some(flow) = flows.get(&launcher.flow) else {
            diags.push(ModelError::UnknownFlow(launcher.flow.clone()));
            continue;
        };
        for (path, value) in launcher.initial_values.iter_mut() {
            let Some(info) = flow.attributes.get(path) else {
                diags.push(ModelError::Reference(format!(
                    "launcher `{}` sets `{path}`, which flow `{}` does not use",
                    launcher.id, flow.name
                )));
                continue;
            };
            let attr = &info.attribute;
            let converted = match (&*value, attr.set) {
                (Value::List(items), true) => items
                    .iter()
                    .map(|v| v.coerce(attr.ty))
                    .collect::<Option<Vec<_>>>()
                    .map(Value::List),
                (Value::List(_), false) | (_, true) => None,
                (v, false) => v.coerce(attr.ty),
            };
            match converted {
                Some(v) => *value = v,
                None => diags.push(ModelError::TypeMismatch(format!(
                    "launcher `{}`: initial value `{value}` does not fit `{path}` ({}{})",
                    launcher.id,
                    if attr.set { "list of " } else { "" },
                    attr.ty
                ))),
            }
        }
    }
    diags.finish(app)
}
