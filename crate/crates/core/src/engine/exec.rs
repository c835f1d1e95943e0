use std::collections::BTreeSet;

use serde_json::json;

use crate::clock::Clock;
use crate::expr::{self, Env, ExprError};
use crate::model::{AppDefinition, Flow, IterationKind};
use crate::protocol::{Constraint, DisplayElement, GatherElement, IterationRequest, IterationResponse, NamedValue};
use crate::services::ServiceInvoker;
use crate::store::AppDatabase;
use crate::value::Value;

use super::instance::{Direction, FlowInstance, InstanceState};
use super::models::Models;
use super::steps::{StepError, StepOutcome, StepRegistry};
use super::{EngineError, FinalStatus, Outcome};

/// Steps executed by one `advance` call before the instance is failed.
const STEP_BUDGET: usize = 10_000;

/// Borrowed collaborators needed to run steps.
pub struct ExecContext<'a> {
    pub models: &'a Models,
    pub store: &'a dyn AppDatabase,
    pub services: &'a ServiceInvoker,
    pub clock: &'a dyn Clock,
    pub handlers: &'a StepRegistry,
}

fn flow_of<'m>(models: &'m Models, instance: &FlowInstance) -> Result<&'m Flow, EngineError> {
    models
        .flows
        .get(&instance.flow_name)
        .ok_or_else(|| EngineError::UnknownFlow(instance.flow_name.clone()))
}

/// Creates a `Running` instance positioned on the Start step, with the
/// launcher's initial values bound.
pub fn create_instance(
    ctx: &ExecContext<'_>,
    app: &AppDefinition,
    launcher_id: &str,
    instance_id: u64,
) -> Result<FlowInstance, EngineError> {
    let launcher = app
        .launcher(launcher_id)
        .ok_or_else(|| EngineError::UnknownLauncher(launcher_id.to_string()))?;
    let flow = ctx
        .models
        .flows
        .get(&launcher.flow)
        .ok_or_else(|| EngineError::UnknownFlow(launcher.flow.clone()))?;
    let start = flow
        .start()
        .ok_or_else(|| EngineError::UnknownFlow(launcher.flow.clone()))?;
    let now = ctx.clock.now();
    let mut instance = FlowInstance {
        instance_id,
        app_id: app.app_id.clone(),
        launcher_id: launcher.id.clone(),
        flow_name: flow.name.clone(),
        model_version: app.version,
        state: InstanceState::Running,
        current_step: start.id.clone(),
        pending_action_index: 0,
        env: launcher.initial_values.clone().into_iter().collect(),
        pending_request: None,
        started_at: now,
        log: Vec::new(),
    };
    instance.push_log(
        now,
        Direction::Internal,
        json!({"event": "Launched", "launcher": launcher.id, "version": app.version}),
    );
    instance.push_log(
        now,
        Direction::Internal,
        json!({"event": "StepEntered", "step": start.id}),
    );
    Ok(instance)
}

/// Creates an instance and runs it to its first request or to completion.
pub fn launch(
    ctx: &ExecContext<'_>,
    app: &AppDefinition,
    launcher_id: &str,
    instance_id: u64,
) -> Result<(FlowInstance, Outcome), EngineError> {
    let mut instance = create_instance(ctx, app, launcher_id, instance_id)?;
    let outcome = advance(ctx, &mut instance)?;
    Ok((instance, outcome))
}

/// Outgoing transitions of `step_id` are tried in ascending `order`; the
/// first without a condition, or whose condition holds, wins.
pub fn select_transition(flow: &Flow, step_id: &str, env: &Env) -> Result<Option<String>, ExprError> {
    for t in flow.outgoing(step_id) {
        let taken = match &t.condition {
            None => true,
            Some(source) => {
                let cond = expr::parse_expression(source)?;
                match expr::evaluate(&cond, env)? {
                    Value::Boolean(b) => b,
                    other => {
                        return Err(ExprError::TypeMismatch(format!(
                            "condition evaluated to `{other}`, not a Boolean"
                        )))
                    }
                }
            }
        };
        if taken {
            return Ok(Some(t.to.clone()));
        }
    }
    Ok(None)
}

fn finish(ctx: &ExecContext<'_>, instance: &mut FlowInstance, status: FinalStatus, payload: serde_json::Value) {
    instance.state = status.state();
    instance.pending_request = None;
    instance.push_log(ctx.clock.now(), Direction::Internal, payload);
}

fn fail(ctx: &ExecContext<'_>, instance: &mut FlowInstance, error: StepError) -> EngineError {
    let reason = format!("step `{}`: {error}", instance.current_step);
    tracing::warn!(instance = instance.instance_id, %reason, "instance failed");
    finish(
        ctx,
        instance,
        FinalStatus::Failed,
        json!({"event": "Failed", "reason": reason}),
    );
    EngineError::StepFailure {
        instance_id: instance.instance_id,
        reason,
    }
}

/// Runs the instance until it needs the user or terminates.
pub fn advance(ctx: &ExecContext<'_>, instance: &mut FlowInstance) -> Result<Outcome, EngineError> {
    if instance.state != InstanceState::Running {
        return Err(EngineError::NotRunning(instance.instance_id));
    }
    let flow = flow_of(ctx.models, instance)?;
    for _ in 0..STEP_BUDGET {
        let step = flow.step(&instance.current_step).ok_or_else(|| {
            EngineError::Schema(format!("step `{}` not in flow `{}`", instance.current_step, flow.name))
        })?;
        let outcome = ctx
            .handlers
            .get(step.kind())
            .and_then(|handler| handler.execute(ctx, flow, instance, step));
        match outcome {
            Err(e) => return Err(fail(ctx, instance, e)),
            Ok(StepOutcome::End) => {
                finish(ctx, instance, FinalStatus::Finalized, json!({"event": "Finalized"}));
                return Ok(Outcome::Final(FinalStatus::Finalized));
            }
            Ok(StepOutcome::Suspend { kind, attributes, .. }) => {
                let request = match build_iteration_request(ctx, flow, instance, kind, &attributes) {
                    Ok(r) => r,
                    Err(e) => return Err(fail(ctx, instance, e)),
                };
                instance.state = InstanceState::WaitingForUser;
                instance.pending_request = Some(request.clone());
                instance.push_log(ctx.clock.now(), Direction::EngineToClient, request.to_json());
                return Ok(Outcome::Request(request));
            }
            Ok(StepOutcome::Continue) => match select_transition(flow, &step.id, &instance.env) {
                Err(e) => return Err(fail(ctx, instance, e.into())),
                Ok(None) => {
                    finish(
                        ctx,
                        instance,
                        FinalStatus::Finalized,
                        json!({"event": "Finalized", "reason": "no eligible transition"}),
                    );
                    return Ok(Outcome::Final(FinalStatus::Finalized));
                }
                Ok(Some(next)) => {
                    instance.push_log(
                        ctx.clock.now(),
                        Direction::Internal,
                        json!({"event": "StepEntered", "step": next}),
                    );
                    instance.current_step = next;
                    instance.pending_action_index = 0;
                }
            },
        }
    }
    Err(fail(ctx, instance, StepError::BudgetExhausted(STEP_BUDGET)))
}

/// Builds the request for one user iteration.
///
/// PROMPT attributes become gather elements; a value already bound in the
/// environment is offered as a default, and choice lists become constraints.
/// DISPLAY attributes are resolved from the environment first, then from the
/// newest app-database record of the owning type.
pub fn build_iteration_request(
    ctx: &ExecContext<'_>,
    flow: &Flow,
    instance: &FlowInstance,
    kind: IterationKind,
    attributes: &[String],
) -> Result<IterationRequest, StepError> {
    let mut request = IterationRequest {
        instance_id: instance.instance_id,
        display_elements: Vec::new(),
        gather_elements: Vec::new(),
        constraints: Vec::new(),
        value: Vec::new(),
    };
    let info_of = |path: &str| {
        flow.attributes
            .get(path)
            .ok_or_else(|| StepError::Model(format!("`{path}` is not in the flow environment")))
    };
    match kind {
        IterationKind::Prompt => {
            let mut lists = BTreeSet::new();
            let mut defaults = Vec::new();
            for path in attributes {
                let attr = &info_of(path)?.attribute;
                request.gather_elements.push(GatherElement {
                    name: path.clone(),
                    label: attr.label.clone(),
                    set: attr.set,
                    ty: attr.ty,
                });
                if let Some(choices) = &attr.choices {
                    request.constraints.push(Constraint {
                        name: path.clone(),
                        value_from: choices.name.clone(),
                    });
                    if lists.insert(choices.name.clone()) {
                        request
                            .value
                            .push(NamedValue::new(&choices.name, Value::List(choices.values.clone())));
                    }
                }
                if let Some(v) = instance.env.get(path) {
                    defaults.push(NamedValue::new(path, v.clone()));
                }
            }
            request.value.extend(defaults);
        }
        IterationKind::Display => {
            for path in attributes {
                let info = info_of(path)?;
                let value = match instance.env.get(path) {
                    Some(v) => v.clone(),
                    None => {
                        let ty = ctx
                            .models
                            .data_type(&info.domain, &info.data_type)
                            .ok_or_else(|| StepError::Model(format!("type `{}` vanished", info.data_type)))?;
                        ctx.store
                            .newest(&instance.app_id, ty)?
                            .and_then(|r| r.values.get(path).cloned())
                            .ok_or_else(|| StepError::UnresolvableDisplay(path.clone()))?
                    }
                };
                request.display_elements.push(DisplayElement {
                    name: path.clone(),
                    label: info.attribute.label.clone(),
                    ty: info.attribute.ty,
                    value,
                    render: info.attribute.render.clone(),
                });
            }
        }
    }
    Ok(request)
}

/// Checks `response` against the outstanding request and converts the answers
/// to the declared element types.
fn validate_response(
    request: &IterationRequest,
    response: &IterationResponse,
) -> Result<Vec<(String, Value)>, EngineError> {
    if response.instance_id != request.instance_id {
        return Err(EngineError::InstanceMismatch {
            expected: request.instance_id,
            found: response.instance_id,
        });
    }
    let mut seen = BTreeSet::new();
    let mut accepted = Vec::new();
    for entry in &response.response {
        let element = request
            .gather_elements
            .iter()
            .find(|g| g.name == entry.name)
            .ok_or_else(|| EngineError::UnknownElement(entry.name.clone()))?;
        if !seen.insert(entry.name.as_str()) {
            return Err(EngineError::DuplicateElement(entry.name.clone()));
        }
        let value = match (&entry.value, element.set) {
            (Value::List(items), true) => items
                .iter()
                .map(|v| v.coerce(element.ty))
                .collect::<Option<Vec<_>>>()
                .map(Value::List),
            (Value::List(_), false) | (_, true) => None,
            (v, false) => v.coerce(element.ty),
        }
        .ok_or_else(|| {
            EngineError::TypeMismatch(format!(
                "`{}` expects {}{}, got `{}`",
                element.name,
                if element.set { "a list of " } else { "" },
                element.ty,
                entry.value
            ))
        })?;
        if let Some(choices) = request.choices_for(&element.name) {
            let answers = match &value {
                Value::List(items) => items.clone(),
                v => vec![v.clone()],
            };
            if let Some(bad) = answers.iter().find(|a| !choices.contains(a)) {
                return Err(EngineError::ConstraintViolation {
                    element: element.name.clone(),
                    value: bad.to_string(),
                });
            }
        }
        accepted.push((entry.name.clone(), value));
    }
    if let Some(missing) = request.gather_elements.iter().find(|g| !seen.contains(g.name.as_str())) {
        return Err(EngineError::MissingElement(missing.name.clone()));
    }
    Ok(accepted)
}

/// Applies a client's answer and resumes execution. A rejected answer leaves
/// the instance waiting on the same request.
pub fn apply_response(
    ctx: &ExecContext<'_>,
    instance: &mut FlowInstance,
    response: &IterationResponse,
) -> Result<Outcome, EngineError> {
    let request = match (&instance.state, &instance.pending_request) {
        (InstanceState::WaitingForUser, Some(r)) => r.clone(),
        _ => return Err(EngineError::StaleInstance(instance.instance_id)),
    };
    let accepted = match validate_response(&request, response) {
        Ok(a) => a,
        Err(e) => {
            instance.push_log(
                ctx.clock.now(),
                Direction::Internal,
                json!({"event": "ResponseRejected", "error": e.to_string()}),
            );
            return Err(e);
        }
    };
    instance.push_log(ctx.clock.now(), Direction::ClientToEngine, response.to_json());
    instance.env.extend(accepted);
    instance.pending_request = None;
    instance.pending_action_index += 1;
    instance.state = InstanceState::Running;
    advance(ctx, instance)
}

pub fn cancel(clock: &dyn Clock, instance: &mut FlowInstance) -> Result<FinalStatus, EngineError> {
    if instance.state.is_terminal() {
        return Err(EngineError::AlreadyTerminal(instance.instance_id));
    }
    instance.state = InstanceState::Cancelled;
    instance.pending_request = None;
    instance.push_log(clock.now(), Direction::Internal, json!({"event": "Cancelled"}));
    Ok(FinalStatus::Cancelled)
}

pub fn snapshot(instance: &FlowInstance) -> String {
    serde_json::to_string_pretty(instance).expect("instances serialize")
}

/// Rebuilds an instance from its snapshot, checking that the models it was
/// pinned to are still available.
pub fn restore(text: &str, models: &Models) -> Result<FlowInstance, EngineError> {
    let instance: FlowInstance = serde_json::from_str(text).map_err(|e| EngineError::Schema(e.to_string()))?;
    if models.app_version(&instance.app_id, instance.model_version).is_none() {
        return Err(EngineError::ModelVersionMissing {
            app_id: instance.app_id,
            version: instance.model_version,
        });
    }
    let flow = flow_of(models, &instance)?;
    if flow.step(&instance.current_step).is_none() {
        return Err(EngineError::Schema(format!(
            "step `{}` not in flow `{}`",
            instance.current_step, flow.name
        )));
    }
    let waiting = instance.state == InstanceState::WaitingForUser;
    if waiting != instance.pending_request.is_some() {
        return Err(EngineError::Schema(
            "pending request must be present exactly when waiting for the user".into(),
        ));
    }
    Ok(instance)
}
