use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::value::{ScalarType, Value};

use super::error::Diagnostics;
use super::{decode, is_attribute_name, is_identifier, ModelError};

/// A named value list an attribute's answers must come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Choices {
    pub name: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
    pub label: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub set: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Choices>,
    /// Display hint for clients, e.g. `"image"` for a String holding a URL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataType {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl DataType {
    /// Flattened `type_attribute` path used on the wire and in environments.
    pub fn path_of(&self, attribute: &Attribute) -> String {
        format!("{}_{}", self.name, attribute.name)
    }

    pub fn paths(&self) -> impl Iterator<Item = (String, &Attribute)> + '_ {
        self.attributes.iter().map(|a| (self.path_of(a), a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServiceOrigin {
    Internal,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataOperation {
    Store,
    Retrieve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ScalarType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Service {
    pub name: String,
    pub origin: ServiceOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<DataOperation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_type: Option<String>,
    #[serde(default)]
    pub input: Vec<Param>,
    #[serde(default)]
    pub output: Vec<Param>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterationKind {
    #[serde(rename = "PROMPT")]
    Prompt,
    #[serde(rename = "DISPLAY")]
    Display,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum TaskAction {
    /// Calls a service of the same domain. `bindings` maps every service input
    /// to the attribute path supplying it; `outputs` maps service outputs to
    /// the attribute paths receiving them.
    ServiceCall {
        service: String,
        #[serde(default)]
        bindings: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        outputs: BTreeMap<String, String>,
    },
    UserIteration {
        iteration: IterationKind,
        attributes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub name: String,
    pub actions: Vec<TaskAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub name: String,
    pub types: Vec<DataType>,
    pub services: Vec<Service>,
    pub tasks: Vec<Task>,
}

impl Domain {
    pub fn data_type(&self, name: &str) -> Option<&DataType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn service(&self, name: &str) -> Option<&Service> {
        self.services.iter().find(|s| s.name == name)
    }

    pub fn task(&self, name: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.name == name)
    }

    /// Every attribute path declared by the domain's types.
    pub fn attributes(&self) -> BTreeMap<String, (&DataType, &Attribute)> {
        self.types
            .iter()
            .flat_map(|t| t.paths().map(move |(p, a)| (p, (t, a))))
            .collect()
    }

    /// Input/output signature implied by an internal data operation.
    pub fn internal_signature(op: DataOperation, ty: &DataType) -> (Vec<Param>, Vec<Param>) {
        let fields = ty
            .paths()
            .map(|(name, a)| Param {
                name,
                ty: a.ty,
                set: a.set,
            })
            .collect::<Vec<_>>();
        match op {
            DataOperation::Store => (
                fields,
                vec![Param {
                    name: "recordId".into(),
                    ty: ScalarType::Integer,
                    set: false,
                }],
            ),
            DataOperation::Retrieve => (Vec::new(), fields),
        }
    }
}

fn check_unique<'a>(diags: &mut Diagnostics, category: &str, names: impl IntoIterator<Item = &'a str>) {
    let mut seen = BTreeSet::new();
    for name in names {
        if !seen.insert(name) {
            diags.push(ModelError::DuplicateName {
                category: category.into(),
                name: name.into(),
            });
        }
    }
}

/// Parses and validates a domain document.
pub fn parse_domain(document: &str) -> Result<Domain, ModelError> {
    let mut domain: Domain = decode(document)?;
    let mut diags = Diagnostics::default();

    if !is_identifier(&domain.name) {
        diags.push(ModelError::Schema(format!("invalid domain name `{}`", domain.name)));
    }
    check_unique(&mut diags, "type", domain.types.iter().map(|t| t.name.as_str()));
    check_unique(&mut diags, "service", domain.services.iter().map(|s| s.name.as_str()));
    check_unique(&mut diags, "task", domain.tasks.iter().map(|t| t.name.as_str()));

    validate_types(&domain, &mut diags);
    normalize_services(&mut domain, &mut diags);
    validate_tasks(&domain, &mut diags);

    diags.finish(domain)
}

fn validate_types(domain: &Domain, diags: &mut Diagnostics) {
    let mut paths = BTreeSet::new();
    let mut choice_lists: BTreeMap<&str, &Vec<Value>> = BTreeMap::new();
    for ty in &domain.types {
        if !is_attribute_name(&ty.name) {
            diags.push(ModelError::Schema(format!("invalid type name `{}`", ty.name)));
        }
        check_unique(
            diags,
            &format!("attribute of type `{}`", ty.name),
            ty.attributes.iter().map(|a| a.name.as_str()),
        );
        for attr in &ty.attributes {
            let path = ty.path_of(attr);
            if !is_attribute_name(&attr.name) {
                diags.push(ModelError::Schema(format!("invalid attribute name `{path}`")));
            }
            if attr.label.trim().is_empty() {
                diags.push(ModelError::Schema(format!("attribute `{path}` has an empty label")));
            }
            if !paths.insert(path.clone()) {
                diags.push(ModelError::DuplicateName {
                    category: "attribute path".into(),
                    name: path.clone(),
                });
            }
            if let Some(choices) = &attr.choices {
                if !is_identifier(&choices.name) {
                    diags.push(ModelError::Schema(format!(
                        "invalid choice list name `{}`",
                        choices.name
                    )));
                }
                if choices.values.is_empty() {
                    diags.push(ModelError::Schema(format!("choice list `{}` is empty", choices.name)));
                }
                if let Some(bad) = choices.values.iter().find(|v| !v.conforms_to(attr.ty, false)) {
                    diags.push(ModelError::TypeMismatch(format!(
                        "choice `{bad}` of `{path}` is not {}",
                        attr.ty
                    )));
                }
                match choice_lists.get(choices.name.as_str()) {
                    Some(existing) if **existing != choices.values => diags.push(ModelError::DuplicateName {
                        category: "choice list".into(),
                        name: choices.name.clone(),
                    }),
                    _ => {
                        choice_lists.insert(&choices.name, &choices.values);
                    }
                }
            }
        }
    }
    // lists and attribute defaults share the `value` section of a request
    for name in choice_lists.keys() {
        if paths.contains(*name) {
            diags.push(ModelError::DuplicateName {
                category: "choice list / attribute path".into(),
                name: name.to_string(),
            });
        }
    }
}

fn normalize_services(domain: &mut Domain, diags: &mut Diagnostics) {
    let types = domain.types.clone();
    for svc in &mut domain.services {
        if !is_identifier(&svc.name) {
            diags.push(ModelError::Schema(format!("invalid service name `{}`", svc.name)));
        }
        check_unique(
            diags,
            &format!("input of service `{}`", svc.name),
            svc.input.iter().map(|p| p.name.as_str()),
        );
        check_unique(
            diags,
            &format!("output of service `{}`", svc.name),
            svc.output.iter().map(|p| p.name.as_str()),
        );
        match svc.origin {
            ServiceOrigin::External => {
                if svc.endpoint.is_none() {
                    diags.push(ModelError::Schema(format!(
                        "external service `{}` needs an endpoint",
                        svc.name
                    )));
                }
                if svc.operation.is_some() || svc.data_type.is_some() {
                    diags.push(ModelError::Schema(format!(
                        "external service `{}` cannot declare a data operation",
                        svc.name
                    )));
                }
            }
            ServiceOrigin::Internal => {
                if svc.endpoint.is_some() {
                    diags.push(ModelError::Schema(format!(
                        "internal service `{}` cannot declare an endpoint",
                        svc.name
                    )));
                }
                let (Some(op), Some(type_name)) = (svc.operation, svc.data_type.as_deref()) else {
                    diags.push(ModelError::Schema(format!(
                        "internal service `{}` needs an operation and a dataType",
                        svc.name
                    )));
                    continue;
                };
                let Some(ty) = types.iter().find(|t| t.name == type_name) else {
                    diags.push(ModelError::Reference(format!(
                        "service `{}` uses undeclared type `{type_name}`",
                        svc.name
                    )));
                    continue;
                };
                let (input, output) = Domain::internal_signature(op, ty);
                for (declared, implied, side) in [(&mut svc.input, input, "input"), (&mut svc.output, output, "output")]
                {
                    if declared.is_empty() {
                        *declared = implied;
                    } else if *declared != implied {
                        diags.push(ModelError::Schema(format!(
                            "{side} of internal service `{}` must match type `{type_name}`",
                            svc.name
                        )));
                    }
                }
            }
        }
    }
}

fn validate_tasks(domain: &Domain, diags: &mut Diagnostics) {
    let attributes = domain.attributes();
    for task in &domain.tasks {
        if !is_identifier(&task.name) {
            diags.push(ModelError::Schema(format!("invalid task name `{}`", task.name)));
        }
        if task.actions.is_empty() {
            diags.push(ModelError::Schema(format!("task `{}` has no actions", task.name)));
        }
        let unknown_attr = |diags: &mut Diagnostics, path: &str| {
            if !attributes.contains_key(path) {
                diags.push(ModelError::Reference(format!(
                    "task `{}` uses undeclared attribute `{path}`",
                    task.name
                )));
                true
            } else {
                false
            }
        };
        for action in &task.actions {
            match action {
                TaskAction::ServiceCall {
                    service,
                    bindings,
                    outputs,
                } => {
                    let Some(svc) = domain.service(service) else {
                        diags.push(ModelError::Reference(format!(
                            "task `{}` calls undeclared service `{service}`",
                            task.name
                        )));
                        continue;
                    };
                    for param in &svc.input {
                        match bindings.get(&param.name) {
                            None => diags.push(ModelError::Reference(format!(
                                "task `{}` does not bind input `{}` of `{service}`",
                                task.name, param.name
                            ))),
                            Some(path) => {
                                if !unknown_attr(diags, path) {
                                    let (_, attr) = attributes[path.as_str()];
                                    if !param_accepts(param, attr) {
                                        diags.push(ModelError::TypeMismatch(format!(
                                            "`{path}` cannot feed input `{}` of `{service}`",
                                            param.name
                                        )));
                                    }
                                }
                            }
                        }
                    }
                    for name in bindings.keys() {
                        if !svc.input.iter().any(|p| &p.name == name) {
                            diags.push(ModelError::Reference(format!(
                                "task `{}` binds unknown input `{name}` of `{service}`",
                                task.name
                            )));
                        }
                    }
                    for (name, path) in outputs {
                        match svc.output.iter().find(|p| &p.name == name) {
                            None => diags.push(ModelError::Reference(format!(
                                "task `{}` maps unknown output `{name}` of `{service}`",
                                task.name
                            ))),
                            Some(param) => {
                                if !unknown_attr(diags, path) {
                                    let (_, attr) = attributes[path.as_str()];
                                    if !(param.set == attr.set
                                        && (param.ty == attr.ty
                                            || (param.ty == ScalarType::Integer && attr.ty == ScalarType::Decimal)))
                                    {
                                        diags.push(ModelError::TypeMismatch(format!(
                                            "output `{name}` of `{service}` cannot be stored in `{path}`"
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
                TaskAction::UserIteration { attributes: paths, .. } => {
                    if paths.is_empty() {
                        diags.push(ModelError::Schema(format!(
                            "user iteration in task `{}` lists no attributes",
                            task.name
                        )));
                    }
                    check_unique(
                        diags,
                        &format!("iteration attribute in task `{}`", task.name),
                        paths.iter().map(String::as_str),
                    );
                    for path in paths {
                        unknown_attr(diags, path);
                    }
                }
            }
        }
    }
}

fn param_accepts(param: &Param, attr: &Attribute) -> bool {
    param.set == attr.set
        && (param.ty == attr.ty || (param.ty == ScalarType::Decimal && attr.ty == ScalarType::Integer))
}
