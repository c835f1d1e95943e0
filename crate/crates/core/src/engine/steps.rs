use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{self, ExprError};
use crate::model::{CommonOp, DataOperation, Flow, IterationKind, Step, StepBody, StepKind, TaskAction};
use crate::services::{ServiceError, ServiceRef};
use crate::store::StoreError;
use crate::value::Value;

use super::exec::ExecContext;
use super::instance::FlowInstance;

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// Step done; follow the outgoing transitions.
    Continue,
    /// End step reached.
    End,
    /// A user iteration is needed at action `action_index` of the current task.
    Suspend {
        action_index: usize,
        kind: IterationKind,
        attributes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("attribute `{0}` is unbound")]
    UnboundAttribute(String),
    #[error("nothing to display for `{0}`")]
    UnresolvableDisplay(String),
    #[error("no `{0}` record to retrieve")]
    NoRecord(String),
    #[error("model inconsistency: {0}")]
    Model(String),
    #[error("no handler registered for {0} steps")]
    NoHandler(String),
    #[error("step budget of {0} exhausted; the flow is probably looping")]
    BudgetExhausted(usize),
}

/// Executes one kind of step.
pub trait StepHandler: Send + Sync {
    fn kind(&self) -> StepKind;

    fn execute(
        &self,
        ctx: &ExecContext<'_>,
        flow: &Flow,
        instance: &mut FlowInstance,
        step: &Step,
    ) -> Result<StepOutcome, StepError>;
}

/// Step handlers keyed by step kind name.
#[derive(Clone)]
pub struct StepRegistry {
    handlers: BTreeMap<&'static str, Arc<dyn StepHandler>>,
}

impl StepRegistry {
    pub fn empty() -> Self {
        StepRegistry {
            handlers: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut registry = StepRegistry::empty();
        registry.register(Arc::new(CommonStep));
        registry.register(Arc::new(DataStep));
        registry.register(Arc::new(DomainStep));
        registry
    }

    /// Installs `handler` for its kind, replacing any previous one.
    pub fn register(&mut self, handler: Arc<dyn StepHandler>) {
        self.handlers.insert(handler.kind().name(), handler);
    }

    pub fn get(&self, kind: StepKind) -> Result<&dyn StepHandler, StepError> {
        self.handlers
            .get(kind.name())
            .map(|h| h.as_ref())
            .ok_or_else(|| StepError::NoHandler(kind.name().to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.handlers.keys().copied()
    }
}

impl Default for StepRegistry {
    fn default() -> Self {
        StepRegistry::builtin()
    }
}

/// Converts `value` to the declared type of `path` in the flow environment.
fn fit(flow: &Flow, path: &str, value: Value) -> Result<Value, StepError> {
    let info = flow
        .attributes
        .get(path)
        .ok_or_else(|| StepError::Model(format!("`{path}` is not in the flow environment")))?;
    let attr = &info.attribute;
    let fitted = match (&value, attr.set) {
        (Value::List(items), true) => items
            .iter()
            .map(|v| v.coerce(attr.ty))
            .collect::<Option<Vec<_>>>()
            .map(Value::List),
        (Value::List(_), false) | (_, true) => None,
        (v, false) => v.coerce(attr.ty),
    };
    fitted.ok_or_else(|| {
        StepError::Expression(ExprError::TypeMismatch(format!(
            "`{value}` does not fit `{path}` of type {}",
            attr.ty
        )))
    })
}

struct CommonStep;

impl StepHandler for CommonStep {
    fn kind(&self) -> StepKind {
        StepKind::Common
    }

    fn execute(
        &self,
        _ctx: &ExecContext<'_>,
        flow: &Flow,
        instance: &mut FlowInstance,
        step: &Step,
    ) -> Result<StepOutcome, StepError> {
        match &step.body {
            StepBody::Common(CommonOp::Start) => Ok(StepOutcome::Continue),
            StepBody::Common(CommonOp::End) => Ok(StepOutcome::End),
            StepBody::Common(CommonOp::Assign { target, expression }) => {
                let parsed = expr::parse_expression(expression)?;
                let value = expr::evaluate(&parsed, &instance.env)?;
                let value = fit(flow, target, value)?;
                instance.env.insert(target.clone(), value);
                Ok(StepOutcome::Continue)
            }
            _ => Err(StepError::Model(format!("step `{}` is not a Common step", step.id))),
        }
    }
}

struct DataStep;

impl StepHandler for DataStep {
    fn kind(&self) -> StepKind {
        StepKind::Data
    }

    fn execute(
        &self,
        ctx: &ExecContext<'_>,
        _flow: &Flow,
        instance: &mut FlowInstance,
        step: &Step,
    ) -> Result<StepOutcome, StepError> {
        let StepBody::Data { op, data_type } = &step.body else {
            return Err(StepError::Model(format!("step `{}` is not a Data step", step.id)));
        };
        let ty = ctx
            .models
            .data_type(&data_type.domain, &data_type.name)
            .ok_or_else(|| StepError::Model(format!("type `{}` vanished", data_type.name)))?;
        match op {
            DataOperation::Store => {
                let values = ty
                    .paths()
                    .map(|(path, _)| match instance.env.get(&path) {
                        Some(v) => Ok((path, v.clone())),
                        None => Err(StepError::UnboundAttribute(path)),
                    })
                    .collect::<Result<BTreeMap<_, _>, _>>()?;
                ctx.store.put_record(&instance.app_id, ty, values)?;
            }
            DataOperation::Retrieve => {
                let record = ctx
                    .store
                    .newest(&instance.app_id, ty)?
                    .ok_or_else(|| StepError::NoRecord(ty.name.clone()))?;
                instance.env.extend(record.values);
            }
        }
        Ok(StepOutcome::Continue)
    }
}

struct DomainStep;

impl StepHandler for DomainStep {
    fn kind(&self) -> StepKind {
        StepKind::Domain
    }

    fn execute(
        &self,
        ctx: &ExecContext<'_>,
        flow: &Flow,
        instance: &mut FlowInstance,
        step: &Step,
    ) -> Result<StepOutcome, StepError> {
        let StepBody::Domain { task: task_ref } = &step.body else {
            return Err(StepError::Model(format!("step `{}` is not a Domain step", step.id)));
        };
        let task = ctx
            .models
            .domains
            .get(&task_ref.domain)
            .and_then(|d| d.task(&task_ref.task))
            .ok_or_else(|| StepError::Model(format!("task `{}` vanished", task_ref.task)))?;

        for index in instance.pending_action_index..task.actions.len() {
            match &task.actions[index] {
                TaskAction::UserIteration { iteration, attributes } => {
                    instance.pending_action_index = index;
                    return Ok(StepOutcome::Suspend {
                        action_index: index,
                        kind: *iteration,
                        attributes: attributes.clone(),
                    });
                }
                TaskAction::ServiceCall {
                    service,
                    bindings,
                    outputs,
                } => {
                    let inputs = bindings
                        .iter()
                        .map(|(param, path)| match instance.env.get(path) {
                            Some(v) => Ok((param.clone(), v.clone())),
                            None => Err(StepError::UnboundAttribute(path.clone())),
                        })
                        .collect::<Result<BTreeMap<_, _>, _>>()?;
                    let service_ref = ServiceRef::new(&task_ref.domain, service);
                    let results = ctx
                        .services
                        .invoke(&service_ref, &inputs, &instance.app_id, ctx.store)?;
                    for (name, value) in results {
                        let target = match outputs.get(&name) {
                            Some(path) => path.clone(),
                            None if flow.attributes.contains_key(&name) => name,
                            None => continue,
                        };
                        let value = fit(flow, &target, value)?;
                        instance.env.insert(target, value);
                    }
                    instance.pending_action_index = index + 1;
                }
            }
        }
        Ok(StepOutcome::Continue)
    }
}
