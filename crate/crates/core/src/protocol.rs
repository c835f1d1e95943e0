//! The two coordination messages exchanged with generic clients.
//!
//! A request tells a client what to show (`displayElements`), what to ask
//! (`gatherElements`), which answers are restricted to a named list
//! (`constraints`), and carries those lists plus default answers (`value`).
//! A response returns one single-key map per gathered element. Neither
//! message says anything about the flow being executed.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::engine::{InstanceState, Outcome};
use crate::model::{canonicalize, AppDefinition};
use crate::value::{ScalarType, Value};

/// One `{name: value}` entry of a `value` or `response` list.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedValue {
    pub name: String,
    pub value: Value,
}

impl NamedValue {
    pub fn new(name: impl Into<String>, value: Value) -> Self {
        NamedValue {
            name: name.into(),
            value,
        }
    }
}

impl Serialize for NamedValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1))?;
        map.serialize_entry(&self.name, &self.value)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for NamedValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, Value>::deserialize(deserializer)?;
        if map.len() != 1 {
            return Err(D::Error::custom(format!(
                "expected a single-key object, found {} keys",
                map.len()
            )));
        }
        let (name, value) = map.into_iter().next().expect("one entry");
        Ok(NamedValue { name, value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayElement {
    pub name: String,
    pub label: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatherElement {
    pub name: String,
    pub label: String,
    pub set: bool,
    #[serde(rename = "type")]
    pub ty: ScalarType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Constraint {
    pub name: String,
    pub value_from: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct IterationRequest {
    pub instance_id: u64,
    pub display_elements: Vec<DisplayElement>,
    pub gather_elements: Vec<GatherElement>,
    pub constraints: Vec<Constraint>,
    pub value: Vec<NamedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct IterationResponse {
    pub instance_id: u64,
    pub response: Vec<NamedValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid iteration request: {0}")]
pub struct RequestSchemaError(pub String);

impl IterationRequest {
    /// Looks up a named entry of the `value` section.
    pub fn value_of(&self, name: &str) -> Option<&Value> {
        self.value.iter().find(|v| v.name == name).map(|v| &v.value)
    }

    pub fn constraint_for(&self, element: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == element)
    }

    /// Allowed values for `element`, when a constraint restricts it.
    pub fn choices_for(&self, element: &str) -> Option<&[Value]> {
        let c = self.constraint_for(element)?;
        match self.value_of(&c.value_from)? {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    /// Checks the structural invariants a client relies on.
    pub fn validate(&self) -> Result<(), RequestSchemaError> {
        let mut names = BTreeSet::new();
        for g in &self.gather_elements {
            if !names.insert(g.name.as_str()) {
                return Err(RequestSchemaError(format!("duplicate gather element `{}`", g.name)));
            }
        }
        for c in &self.constraints {
            if !names.contains(c.name.as_str()) {
                return Err(RequestSchemaError(format!(
                    "constraint targets unknown element `{}`",
                    c.name
                )));
            }
            match self.value_of(&c.value_from) {
                Some(Value::List(_)) => {}
                Some(_) => {
                    return Err(RequestSchemaError(format!(
                        "value `{}` referenced by a constraint is not a list",
                        c.value_from
                    )))
                }
                None => {
                    return Err(RequestSchemaError(format!(
                        "constraint references missing value `{}`",
                        c.value_from
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        canonicalize(&serde_json::to_value(self).expect("requests serialize"))
    }

    /// Compact canonical wire text (sorted keys, arrays in declared order).
    pub fn to_wire(&self) -> String {
        self.to_json().to_string()
    }
}

impl IterationResponse {
    pub fn to_json(&self) -> serde_json::Value {
        canonicalize(&serde_json::to_value(self).expect("responses serialize"))
    }

    pub fn to_wire(&self) -> String {
        self.to_json().to_string()
    }
}

/// What an end-user client learns about an app: enough to list launchers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AppSummary {
    pub app_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logo: Option<String>,
    pub version: u64,
    pub launchers: Vec<LauncherSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LauncherSummary {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<String>,
}

impl From<&AppDefinition> for AppSummary {
    fn from(app: &AppDefinition) -> Self {
        AppSummary {
            app_id: app.app_id.clone(),
            name: app.name.clone(),
            logo: app.logo.clone(),
            version: app.version,
            launchers: app
                .launchers
                .iter()
                .map(|l| LauncherSummary {
                    id: l.id.clone(),
                    label: l.label.clone(),
                    icon: l.icon.clone(),
                })
                .collect(),
        }
    }
}

/// Answer to a launch or a response: the instance's state and, while it
/// waits for the user, the next request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Reply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<u64>,
    pub status: InstanceState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<IterationRequest>,
}

impl Reply {
    pub fn from_outcome(instance_id: Option<u64>, outcome: Outcome) -> Self {
        match outcome {
            Outcome::Request(request) => Reply {
                instance_id,
                status: InstanceState::WaitingForUser,
                request: Some(request),
            },
            Outcome::Final(status) => Reply {
                instance_id,
                status: status.state(),
                request: None,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    pub(crate) fn expected_booth_request() -> serde_json::Value {
        json!({
            "instanceId": 15,
            "displayElements": [],
            "gatherElements": [
                {"name": "booth_number", "label": "Booth Number:", "set": false, "type": "Integer"},
                {"name": "booth_cardinalPoint", "label": "Cardinal Point:", "set": false, "type": "string"}
            ],
            "constraints": [{"name": "booth_cardinalPoint", "valueFrom": "cpoints"}],
            "value": [{"cpoints": ["North", "South", "East", "West"]}]
        })
    }

    #[test]
    fn booth_request_decodes_and_validates() {
        let req: IterationRequest = serde_json::from_value(expected_booth_request()).unwrap();
        req.validate().unwrap();
        assert_eq!(req.gather_elements[1].ty, ScalarType::String);
        assert_eq!(req.choices_for("booth_cardinalPoint").unwrap().len(), 4);
        assert!(req.choices_for("booth_number").is_none());
    }

    #[test]
    fn booth_response_decodes() {
        let resp: IterationResponse = serde_json::from_value(json!({
            "instanceId": 15,
            "response": [{"booth_number": 1}, {"booth_cardinalPoint": "North"}]
        }))
        .unwrap();
        assert_eq!(resp.response[0], NamedValue::new("booth_number", Value::Integer(1)));
        assert_eq!(
            resp.to_wire(),
            r#"{"instanceId":15,"response":[{"booth_number":1},{"booth_cardinalPoint":"North"}]}"#
        );
    }

    #[test]
    fn unknown_keys_and_multi_key_entries_are_rejected() {
        let mut extra = expected_booth_request();
        extra["step"] = json!("ask");
        assert!(serde_json::from_value::<IterationRequest>(extra).is_err());
        let bad = json!({"instanceId": 1, "response": [{"a": 1, "b": 2}]});
        assert!(serde_json::from_value::<IterationResponse>(bad).is_err());
    }

    #[test]
    fn constraint_invariants() {
        let mut req: IterationRequest = serde_json::from_value(expected_booth_request()).unwrap();
        req.constraints[0].name = "ghost".into();
        assert!(req.validate().is_err());
        let mut req: IterationRequest = serde_json::from_value(expected_booth_request()).unwrap();
        req.value.clear();
        assert!(req.validate().is_err());
    }
}
