use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::expr::{self, ExprError, Schema};
use crate::value::ScalarType;

use super::domain::{Attribute, DataOperation, Domain, TaskAction};
use super::error::Diagnostics;
use super::{decode, is_identifier, ModelError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeRef {
    pub domain: String,
    #[serde(rename = "type")]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRef {
    pub domain: String,
    pub task: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    Common,
    Data,
    Domain,
}

impl StepKind {
    pub fn name(self) -> &'static str {
        match self {
            StepKind::Common => "Common",
            StepKind::Data => "Data",
            StepKind::Domain => "Domain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommonOp {
    Start,
    End,
    Assign { target: String, expression: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepBody {
    Common(CommonOp),
    Data { op: DataOperation, data_type: TypeRef },
    Domain { task: TaskRef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStep", into = "RawStep")]
pub struct Step {
    pub id: String,
    pub body: StepBody,
}

impl Step {
    pub fn kind(&self) -> StepKind {
        match self.body {
            StepBody::Common(_) => StepKind::Common,
            StepBody::Data { .. } => StepKind::Data,
            StepBody::Domain { .. } => StepKind::Domain,
        }
    }

    pub fn is_start(&self) -> bool {
        self.body == StepBody::Common(CommonOp::Start)
    }

    pub fn is_end(&self) -> bool {
        self.body == StepBody::Common(CommonOp::End)
    }
}

/// On-disk shape of a step: a `kind` tag plus the fields that kind uses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawStep {
    id: String,
    kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_type: Option<TypeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<TaskRef>,
}

impl TryFrom<RawStep> for Step {
    type Error = String;

    fn try_from(raw: RawStep) -> Result<Self, String> {
        let id = raw.id;
        let extra = |what: &str| format!("step `{id}`: `{what}` is not allowed for this kind");
        let body = match raw.kind {
            StepKind::Common => {
                if raw.data_type.is_some() {
                    return Err(extra("dataType"));
                }
                if raw.task.is_some() {
                    return Err(extra("task"));
                }
                let op = match raw.op.as_deref() {
                    Some("Start") => CommonOp::Start,
                    Some("End") => CommonOp::End,
                    Some("Assign") => CommonOp::Assign {
                        target: raw
                            .target
                            .clone()
                            .ok_or_else(|| format!("step `{id}`: Assign needs `target`"))?,
                        expression: raw
                            .expression
                            .clone()
                            .ok_or_else(|| format!("step `{id}`: Assign needs `expression`"))?,
                    },
                    other => return Err(format!("step `{id}`: invalid common op {other:?}")),
                };
                if !matches!(op, CommonOp::Assign { .. }) && (raw.target.is_some() || raw.expression.is_some()) {
                    return Err(extra("target/expression"));
                }
                StepBody::Common(op)
            }
            StepKind::Data => {
                if raw.task.is_some() || raw.target.is_some() || raw.expression.is_some() {
                    return Err(extra("task/target/expression"));
                }
                let op = match raw.op.as_deref() {
                    Some("Store") => DataOperation::Store,
                    Some("Retrieve") => DataOperation::Retrieve,
                    other => return Err(format!("step `{id}`: invalid data op {other:?}")),
                };
                let data_type = raw
                    .data_type
                    .ok_or_else(|| format!("step `{id}`: Data step needs `dataType`"))?;
                StepBody::Data { op, data_type }
            }
            StepKind::Domain => {
                if raw.op.is_some() || raw.data_type.is_some() || raw.target.is_some() || raw.expression.is_some() {
                    return Err(extra("op/dataType/target/expression"));
                }
                let task = raw
                    .task
                    .ok_or_else(|| format!("step `{id}`: Domain step needs `task`"))?;
                StepBody::Domain { task }
            }
        };
        Ok(Step { id, body })
    }
}

impl From<Step> for RawStep {
    fn from(step: Step) -> Self {
        let mut raw = RawStep {
            id: step.id,
            kind: StepKind::Common,
            op: None,
            target: None,
            expression: None,
            data_type: None,
            task: None,
        };
        match step.body {
            StepBody::Common(op) => {
                raw.op = Some(
                    match op {
                        CommonOp::Start => "Start",
                        CommonOp::End => "End",
                        CommonOp::Assign { target, expression } => {
                            raw.target = Some(target);
                            raw.expression = Some(expression);
                            "Assign"
                        }
                    }
                    .to_string(),
                );
            }
            StepBody::Data { op, data_type } => {
                raw.kind = StepKind::Data;
                raw.op = Some(format!("{op:?}"));
                raw.data_type = Some(data_type);
            }
            StepBody::Domain { task } => {
                raw.kind = StepKind::Domain;
                raw.task = Some(task);
            }
        }
        raw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    pub order: i64,
}

/// Where an environment attribute is declared.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrInfo {
    pub domain: String,
    pub data_type: String,
    pub attribute: Attribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub name: String,
    #[serde(default)]
    pub imports: Vec<String>,
    pub steps: Vec<Step>,
    pub transitions: Vec<Transition>,
    /// Environment schema: every attribute path the flow touches. Derived on parse.
    #[serde(skip)]
    pub attributes: BTreeMap<String, AttrInfo>,
}

impl Flow {
    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn start(&self) -> Option<&Step> {
        self.steps.iter().find(|s| s.is_start())
    }

    /// Outgoing transitions of `id` in ascending `order`.
    pub fn outgoing(&self, id: &str) -> Vec<&Transition> {
        let mut out: Vec<_> = self.transitions.iter().filter(|t| t.from == id).collect();
        out.sort_by_key(|t| t.order);
        out
    }

    /// Scalar attributes of the environment, for type-checking expressions.
    pub fn expression_schema(&self) -> Schema {
        scalar_schema(&self.attributes)
    }
}

fn scalar_schema(attrs: &BTreeMap<String, AttrInfo>) -> Schema {
    attrs
        .iter()
        .filter(|(_, info)| !info.attribute.set)
        .map(|(path, info)| (path.clone(), info.attribute.ty))
        .collect()
}

/// Step ids reachable from the Start step by breadth-first search.
pub fn reachable_steps(flow: &Flow) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let Some(start) = flow.start() else {
        return seen;
    };
    let mut queue = VecDeque::from([start.id.clone()]);
    seen.insert(start.id.clone());
    while let Some(id) = queue.pop_front() {
        for t in flow.transitions.iter().filter(|t| t.from == id) {
            if seen.insert(t.to.clone()) {
                queue.push_back(t.to.clone());
            }
        }
    }
    seen
}

/// Parses a flow document against the available domains.
pub fn parse_flow(document: &str, domains: &BTreeMap<String, Domain>) -> Result<Flow, ModelError> {
    let mut flow: Flow = decode(document)?;
    let mut diags = Diagnostics::default();

    if !is_identifier(&flow.name) {
        diags.push(ModelError::Schema(format!("invalid flow name `{}`", flow.name)));
    }
    let mut imported = BTreeMap::new();
    for name in &flow.imports {
        match domains.get(name) {
            Some(d) => {
                imported.insert(name.as_str(), d);
            }
            None => diags.push(ModelError::UnknownDomain(name.clone())),
        }
    }

    let catalog = import_catalog(&imported, &mut diags);
    let mut referenced = BTreeSet::new();
    check_steps(&flow, &imported, &mut referenced, &mut diags);
    check_graph(&flow, &mut diags);
    check_expressions(&flow, &catalog, &mut referenced, &mut diags);

    for path in &referenced {
        match catalog.get(path) {
            Some(info) => {
                flow.attributes.insert(path.clone(), info.clone());
            }
            None => diags.push(ModelError::Reference(format!(
                "attribute `{path}` is not declared by any imported domain"
            ))),
        }
    }
    diags.finish(flow)
}

/// All attributes of the imported domains; a path declared twice must agree on type.
fn import_catalog(imported: &BTreeMap<&str, &Domain>, diags: &mut Diagnostics) -> BTreeMap<String, AttrInfo> {
    let mut catalog: BTreeMap<String, AttrInfo> = BTreeMap::new();
    for domain in imported.values() {
        for (path, (ty, attr)) in domain.attributes() {
            if let Some(existing) = catalog.get(&path) {
                if existing.attribute.ty != attr.ty || existing.attribute.set != attr.set {
                    diags.push(ModelError::Schema(format!(
                        "attribute `{path}` is declared with different types in `{}` and `{}`",
                        existing.domain, domain.name
                    )));
                }
                continue;
            }
            catalog.insert(
                path,
                AttrInfo {
                    domain: domain.name.clone(),
                    data_type: ty.name.clone(),
                    attribute: attr.clone(),
                },
            );
        }
    }
    catalog
}

fn check_steps(
    flow: &Flow,
    imported: &BTreeMap<&str, &Domain>,
    referenced: &mut BTreeSet<String>,
    diags: &mut Diagnostics,
) {
    let mut ids = BTreeSet::new();
    for step in &flow.steps {
        if !is_identifier(&step.id) {
            diags.push(ModelError::Schema(format!("invalid step id `{}`", step.id)));
        }
        if !ids.insert(step.id.as_str()) {
            diags.push(ModelError::DuplicateName {
                category: "step".into(),
                name: step.id.clone(),
            });
        }
        match &step.body {
            StepBody::Common(CommonOp::Assign { target, .. }) => {
                referenced.insert(target.clone());
            }
            StepBody::Common(_) => {}
            StepBody::Data { data_type, .. } => {
                let Some(domain) = imported.get(data_type.domain.as_str()) else {
                    diags.push(ModelError::UnknownDomain(data_type.domain.clone()));
                    continue;
                };
                match domain.data_type(&data_type.name) {
                    Some(ty) => referenced.extend(ty.paths().map(|(p, _)| p)),
                    None => diags.push(ModelError::Reference(format!(
                        "step `{}` uses undeclared type `{}.{}`",
                        step.id, data_type.domain, data_type.name
                    ))),
                }
            }
            StepBody::Domain { task } => {
                let Some(domain) = imported.get(task.domain.as_str()) else {
                    diags.push(ModelError::UnknownDomain(task.domain.clone()));
                    continue;
                };
                let Some(found) = domain.task(&task.task) else {
                    diags.push(ModelError::UnknownTask {
                        domain: task.domain.clone(),
                        task: task.task.clone(),
                    });
                    continue;
                };
                for action in &found.actions {
                    match action {
                        TaskAction::ServiceCall {
                            bindings,
                            outputs,
                            service,
                        } => {
                            referenced.extend(bindings.values().cloned());
                            referenced.extend(outputs.values().cloned());
                            // unmapped outputs land under their own name when it is an attribute
                            if let Some(svc) = domain.service(service) {
                                let attrs = domain.attributes();
                                referenced.extend(
                                    svc.output
                                        .iter()
                                        .filter(|p| !outputs.contains_key(&p.name) && attrs.contains_key(&p.name))
                                        .map(|p| p.name.clone()),
                                );
                            }
                        }
                        TaskAction::UserIteration { attributes, .. } => {
                            referenced.extend(attributes.iter().cloned());
                        }
                    }
                }
            }
        }
    }
}

fn check_graph(flow: &Flow, diags: &mut Diagnostics) {
    let starts = flow.steps.iter().filter(|s| s.is_start()).count();
    if starts != 1 {
        diags.push(ModelError::Graph(format!(
            "expected exactly one Start step, found {starts}"
        )));
    }
    if !flow.steps.iter().any(Step::is_end) {
        diags.push(ModelError::Graph("flow has no End step".into()));
    }
    let ids: BTreeSet<&str> = flow.steps.iter().map(|s| s.id.as_str()).collect();
    let mut ranks = BTreeSet::new();
    for t in &flow.transitions {
        for end in [&t.from, &t.to] {
            if !ids.contains(end.as_str()) {
                diags.push(ModelError::Graph(format!("transition references unknown step `{end}`")));
            }
        }
        if !ranks.insert((t.from.as_str(), t.order)) {
            diags.push(ModelError::Graph(format!(
                "two transitions leave `{}` with order {}",
                t.from, t.order
            )));
        }
    }
    if starts == 1 {
        let reachable = reachable_steps(flow);
        for step in &flow.steps {
            if !reachable.contains(&step.id) {
                diags.push(ModelError::Graph(format!(
                    "step `{}` is unreachable from Start",
                    step.id
                )));
            }
        }
    }
}

fn check_expressions(
    flow: &Flow,
    catalog: &BTreeMap<String, AttrInfo>,
    referenced: &mut BTreeSet<String>,
    diags: &mut Diagnostics,
) {
    let schema = scalar_schema(catalog);
    let mut compile = |context: String, source: &str, diags: &mut Diagnostics| -> Option<ScalarType> {
        let result = expr::parse_expression(source).and_then(|e| {
            referenced.extend(e.attributes());
            expr::typecheck(&e, &schema)
        });
        match result {
            Ok(ty) => Some(ty),
            Err(error) => {
                diags.push(ModelError::Expression { context, error });
                None
            }
        }
    };
    for step in &flow.steps {
        if let StepBody::Common(CommonOp::Assign { target, expression }) = &step.body {
            let Some(ty) = compile(format!("step `{}`", step.id), expression, diags) else {
                continue;
            };
            let Some(target_ty) = schema.get(target) else {
                // unknown targets are reported with the other unresolved paths
                if catalog.contains_key(target) {
                    diags.push(ModelError::TypeMismatch(format!(
                        "step `{}` cannot assign to list attribute `{target}`",
                        step.id
                    )));
                }
                continue;
            };
            if !(ty == *target_ty || (ty == ScalarType::Integer && *target_ty == ScalarType::Decimal)) {
                diags.push(ModelError::TypeMismatch(format!(
                    "step `{}` assigns {ty} to `{target}` of type {target_ty}",
                    step.id
                )));
            }
        }
    }
    for t in &flow.transitions {
        let Some(cond) = &t.condition else { continue };
        let context = format!("transition `{}` -> `{}`", t.from, t.to);
        if let Some(ty) = compile(context.clone(), cond, diags) {
            if ty != ScalarType::Boolean {
                diags.push(ModelError::Expression {
                    context,
                    error: ExprError::TypeMismatch(format!("condition has type {ty}, expected Boolean")),
                });
            }
        }
    }
}
