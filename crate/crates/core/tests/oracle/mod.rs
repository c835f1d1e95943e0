//! Reference implementations used to cross-check the engine. They share no
//! code with the library beyond the model types they walk.
#![allow(dead_code)]

use std::collections::BTreeMap;

use flow_core::model::{CommonOp, Flow, IterationKind, StepBody, TaskAction};
use flow_core::Value;
use proptest::prelude::*;

// ---- Boolean expressions ----

#[derive(Debug, Clone)]
pub enum BoolAst {
    Var(usize),
    Const(bool),
    Not(Box<BoolAst>),
    And(Box<BoolAst>, Box<BoolAst>),
    Or(Box<BoolAst>, Box<BoolAst>),
    Eq(Box<BoolAst>, Box<BoolAst>),
    Ne(Box<BoolAst>, Box<BoolAst>),
}

pub const VARS: [&str; 4] = ["p_a", "p_b", "p_c", "p_d"];

impl BoolAst {
    pub fn eval(&self, vars: &[bool]) -> bool {
        match self {
            BoolAst::Var(i) => vars[*i],
            BoolAst::Const(b) => *b,
            BoolAst::Not(e) => !e.eval(vars),
            BoolAst::And(l, r) => l.eval(vars) && r.eval(vars),
            BoolAst::Or(l, r) => l.eval(vars) || r.eval(vars),
            BoolAst::Eq(l, r) => l.eval(vars) == r.eval(vars),
            BoolAst::Ne(l, r) => l.eval(vars) != r.eval(vars),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            BoolAst::Var(_) | BoolAst::Const(_) => 0,
            BoolAst::Not(e) => 1 + e.depth(),
            BoolAst::And(l, r) | BoolAst::Or(l, r) | BoolAst::Eq(l, r) | BoolAst::Ne(l, r) => {
                1 + l.depth().max(r.depth())
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            BoolAst::Or(..) => 1,
            BoolAst::And(..) => 2,
            BoolAst::Not(_) => 3,
            BoolAst::Eq(..) | BoolAst::Ne(..) => 4,
            BoolAst::Var(_) | BoolAst::Const(_) => 5,
        }
    }

    /// Source text with only the parentheses precedence requires.
    pub fn render(&self) -> String {
        let wrap = |e: &BoolAst, min: u8| {
            if e.prec() < min {
                format!("({})", e.render())
            } else {
                e.render()
            }
        };
        match self {
            BoolAst::Var(i) => VARS[*i].to_string(),
            BoolAst::Const(b) => b.to_string(),
            BoolAst::Not(e) => format!("not {}", wrap(e, 3)),
            BoolAst::And(l, r) => format!("{} and {}", wrap(l, 2), wrap(r, 3)),
            BoolAst::Or(l, r) => format!("{} or {}", wrap(l, 1), wrap(r, 2)),
            BoolAst::Eq(l, r) => format!("{} == {}", wrap(l, 5), wrap(r, 5)),
            BoolAst::Ne(l, r) => format!("{} != {}", wrap(l, 5), wrap(r, 5)),
        }
    }
}

/// Random trees of depth at most `depth` over the first `vars` variables.
pub fn bool_ast(depth: u32, vars: usize) -> impl Strategy<Value = BoolAst> {
    let leaf = prop_oneof![
        4 => (0..vars).prop_map(BoolAst::Var),
        1 => any::<bool>().prop_map(BoolAst::Const),
    ];
    leaf.prop_recursive(depth, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| BoolAst::Not(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| BoolAst::And(Box::new(l), Box::new(r))),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| BoolAst::Or(Box::new(l), Box::new(r))),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| BoolAst::Eq(Box::new(l), Box::new(r))),
            (inner.clone(), inner).prop_map(|(l, r)| BoolAst::Ne(Box::new(l), Box::new(r))),
        ]
    })
}

/// Every tree of depth at most `depth` over `vars` variables.
pub fn all_bool_asts(depth: usize, vars: usize) -> Vec<BoolAst> {
    let mut out: Vec<BoolAst> = (0..vars).map(BoolAst::Var).collect();
    out.push(BoolAst::Const(true));
    out.push(BoolAst::Const(false));
    for _ in 0..depth {
        let prev = out.clone();
        for a in &prev {
            out.push(BoolAst::Not(Box::new(a.clone())));
            for b in &prev {
                let (a, b) = (Box::new(a.clone()), Box::new(b.clone()));
                out.push(BoolAst::And(a.clone(), b.clone()));
                out.push(BoolAst::Or(a.clone(), b.clone()));
                out.push(BoolAst::Eq(a.clone(), b.clone()));
                out.push(BoolAst::Ne(a, b));
            }
        }
        out.retain(|e| e.depth() <= depth);
        dedup_by_render(&mut out);
    }
    out
}

fn dedup_by_render(asts: &mut Vec<BoolAst>) {
    let mut seen = std::collections::BTreeSet::new();
    asts.retain(|e| seen.insert(e.render()));
}

/// Compares the library evaluator with the truth table of `ast`.
pub fn check_truth_table(ast: &BoolAst, vars: usize) -> Result<(), String> {
    let source = ast.render();
    let parsed = flow_core::expr::parse_expression(&source).map_err(|e| format!("{source}: {e}"))?;
    for bits in 0..(1u32 << vars) {
        let assignment: Vec<bool> = (0..vars).map(|i| bits & (1 << i) != 0).collect();
        let env = (0..vars)
            .map(|i| (VARS[i].to_string(), Value::Boolean(assignment[i])))
            .collect();
        let got = flow_core::expr::evaluate(&parsed, &env).map_err(|e| format!("{source}: {e}"))?;
        let want = ast.eval(&assignment);
        if got != Value::Boolean(want) {
            return Err(format!("{source} with {assignment:?}: got {got}, want {want}"));
        }
    }
    Ok(())
}

// ---- conditions and assignments in flows ----

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mini {
    Int(i64),
    Bool(bool),
}

/// Tiny evaluator for the condition and assignment texts used by fixtures:
/// identifiers, integer literals, `+`, comparisons, `not`, `and`, `or`, parens.
pub fn mini_eval(source: &str, env: &BTreeMap<String, Value>) -> Result<Value, String> {
    let tokens = mini_lex(source);
    let mut pos = 0;
    let v = mini_or(&tokens, &mut pos, env)?;
    if pos != tokens.len() {
        return Err(format!("trailing input in `{source}`"));
    }
    Ok(match v {
        Mini::Int(i) => Value::Integer(i),
        Mini::Bool(b) => Value::Boolean(b),
    })
}

fn mini_lex(source: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if i + 1 < chars.len() && matches!((c, chars[i + 1]), ('>' | '<' | '=' | '!', '=')) {
            out.push(format!("{c}="));
            i += 2;
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
    out
}

fn mini_or(t: &[String], pos: &mut usize, env: &BTreeMap<String, Value>) -> Result<Mini, String> {
    let mut lhs = mini_and(t, pos, env)?;
    while t.get(*pos).is_some_and(|s| s == "or") {
        *pos += 1;
        let rhs = mini_and(t, pos, env)?;
        lhs = Mini::Bool(as_bool(lhs)? || as_bool(rhs)?);
    }
    Ok(lhs)
}

fn mini_and(t: &[String], pos: &mut usize, env: &BTreeMap<String, Value>) -> Result<Mini, String> {
    let mut lhs = mini_not(t, pos, env)?;
    while t.get(*pos).is_some_and(|s| s == "and") {
        *pos += 1;
        let rhs = mini_not(t, pos, env)?;
        lhs = Mini::Bool(as_bool(lhs)? && as_bool(rhs)?);
    }
    Ok(lhs)
}

fn mini_not(t: &[String], pos: &mut usize, env: &BTreeMap<String, Value>) -> Result<Mini, String> {
    if t.get(*pos).is_some_and(|s| s == "not") {
        *pos += 1;
        return Ok(Mini::Bool(!as_bool(mini_not(t, pos, env)?)?));
    }
    let lhs = mini_sum(t, pos, env)?;
    let Some(op) = t
        .get(*pos)
        .filter(|s| ["<", ">", "<=", ">=", "==", "!="].contains(&s.as_str()))
    else {
        return Ok(lhs);
    };
    let op = op.clone();
    *pos += 1;
    let rhs = mini_sum(t, pos, env)?;
    Ok(Mini::Bool(match (lhs, rhs) {
        (Mini::Int(a), Mini::Int(b)) => match op.as_str() {
            "<" => a < b,
            ">" => a > b,
            "<=" => a <= b,
            ">=" => a >= b,
            "==" => a == b,
            _ => a != b,
        },
        (Mini::Bool(a), Mini::Bool(b)) if op == "==" => a == b,
        (Mini::Bool(a), Mini::Bool(b)) if op == "!=" => a != b,
        _ => return Err(format!("cannot compare with `{op}`")),
    }))
}

fn mini_sum(t: &[String], pos: &mut usize, env: &BTreeMap<String, Value>) -> Result<Mini, String> {
    let mut lhs = mini_atom(t, pos, env)?;
    while t.get(*pos).is_some_and(|s| s == "+") {
        *pos += 1;
        let rhs = mini_atom(t, pos, env)?;
        lhs = Mini::Int(as_int(lhs)? + as_int(rhs)?);
    }
    Ok(lhs)
}

fn mini_atom(t: &[String], pos: &mut usize, env: &BTreeMap<String, Value>) -> Result<Mini, String> {
    let tok = t.get(*pos).ok_or("unexpected end")?.clone();
    *pos += 1;
    if tok == "(" {
        let v = mini_or(t, pos, env)?;
        if t.get(*pos).map(String::as_str) != Some(")") {
            return Err("missing `)`".into());
        }
        *pos += 1;
        return Ok(v);
    }
    if let Ok(i) = tok.parse::<i64>() {
        return Ok(Mini::Int(i));
    }
    match tok.as_str() {
        "true" => Ok(Mini::Bool(true)),
        "false" => Ok(Mini::Bool(false)),
        name => match env.get(name) {
            Some(Value::Integer(i)) => Ok(Mini::Int(*i)),
            Some(Value::Boolean(b)) => Ok(Mini::Bool(*b)),
            other => Err(format!("`{name}` bound to {other:?}")),
        },
    }
}

fn as_bool(v: Mini) -> Result<bool, String> {
    match v {
        Mini::Bool(b) => Ok(b),
        Mini::Int(_) => Err("expected a Boolean".into()),
    }
}

fn as_int(v: Mini) -> Result<i64, String> {
    match v {
        Mini::Int(i) => Ok(i),
        Mini::Bool(_) => Err("expected an Integer".into()),
    }
}

// ---- path enumeration ----

/// Applies what a step does to the environment, given the user's answers.
fn step_effect(
    flow: &Flow,
    domains: &BTreeMap<String, flow_core::model::Domain>,
    id: &str,
    env: &mut BTreeMap<String, Value>,
    answers: &BTreeMap<String, Value>,
) -> Result<(), String> {
    let step = flow.step(id).ok_or("unknown step")?;
    match &step.body {
        StepBody::Common(CommonOp::Assign { target, expression }) => {
            let v = mini_eval(expression, env)?;
            env.insert(target.clone(), v);
        }
        StepBody::Domain { task } => {
            let task = domains[&task.domain].task(&task.task).ok_or("unknown task")?;
            for action in &task.actions {
                if let TaskAction::UserIteration {
                    iteration: IterationKind::Prompt,
                    attributes,
                } = action
                {
                    for a in attributes {
                        let v = answers.get(a).ok_or_else(|| format!("no answer for `{a}`"))?;
                        env.insert(a.clone(), v.clone());
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Enumerates every path from the Start step, then keeps those where each
/// edge taken is the lowest-ordered edge whose condition holds and the path
/// stops only at an End step or where no edge holds. Returns all such paths; a well-formed flow has
/// exactly one.
pub fn selected_paths(
    flow: &Flow,
    domains: &BTreeMap<String, flow_core::model::Domain>,
    initial: &BTreeMap<String, Value>,
    answers: &BTreeMap<String, Value>,
) -> Result<Vec<Vec<String>>, String> {
    let start = flow.start().ok_or("no start")?.id.clone();
    let mut found = Vec::new();
    let mut stack = vec![(vec![start], initial.clone(), true)];
    while let Some((path, mut env, consistent)) = stack.pop() {
        if path.len() > 2 * flow.steps.len() {
            continue;
        }
        let here = path.last().unwrap().clone();
        step_effect(flow, domains, &here, &mut env, answers)?;
        let mut edges: Vec<_> = flow.transitions.iter().filter(|t| t.from == here).collect();
        edges.sort_by_key(|t| t.order);
        let holds: Vec<bool> = edges
            .iter()
            .map(|t| match &t.condition {
                None => Ok(true),
                Some(c) => mini_eval(c, &env).map(|v| v == Value::Boolean(true)),
            })
            .collect::<Result<_, _>>()?;
        let is_end = flow.step(&here).is_some_and(|s| s.is_end());
        if consistent && (is_end || !holds.contains(&true)) {
            found.push(path.clone());
        }
        if is_end {
            continue;
        }
        for (k, t) in edges.iter().enumerate() {
            let first_true = holds[..k].iter().all(|h| !h) && holds[k];
            let mut next = path.clone();
            next.push(t.to.clone());
            stack.push((next, env.clone(), consistent && first_true));
        }
    }
    Ok(found)
}

// ---- recorded runs ----

/// Client-visible log entries must alternate request, response, request, ...
/// starting with a request, and every entry must carry the instance's id.
pub fn check_alternation(instance: &flow_core::engine::FlowInstance) -> Result<(), String> {
    use flow_core::engine::Direction;
    let mut expect = Direction::EngineToClient;
    for entry in instance.log.iter().filter(|e| e.direction != Direction::Internal) {
        if entry.direction != expect {
            return Err(format!(
                "entry {} is {:?}, expected {expect:?}",
                entry.seq, entry.direction
            ));
        }
        if entry.payload["instanceId"] != instance.instance_id {
            return Err(format!(
                "entry {} addressed to {}",
                entry.seq, entry.payload["instanceId"]
            ));
        }
        expect = match expect {
            Direction::EngineToClient => Direction::ClientToEngine,
            _ => Direction::EngineToClient,
        };
    }
    let seqs: Vec<u64> = instance.log.iter().map(|e| e.seq).collect();
    if seqs != (0..instance.log.len() as u64).collect::<Vec<_>>() {
        return Err("log sequence numbers are not dense".into());
    }
    Ok(())
}

/// Keys an iteration request may contain, at any depth, besides element
/// names inside `value` entries.
const REQUEST_KEYS: [&str; 5] = [
    "instanceId",
    "displayElements",
    "gatherElements",
    "constraints",
    "value",
];
const ELEMENT_KEYS: [&str; 6] = ["name", "label", "type", "set", "value", "render"];
const CONSTRAINT_KEYS: [&str; 2] = ["name", "valueFrom"];

/// Scans a request for anything beyond the protocol's fields: step ids, flow
/// names, conditions and the like must never reach a client.
pub fn scan_request(request: &serde_json::Value, internal_names: &[&str]) -> Result<(), String> {
    let obj = request.as_object().ok_or("request is not an object")?;
    for key in obj.keys() {
        if !REQUEST_KEYS.contains(&key.as_str()) {
            return Err(format!("unexpected top-level key `{key}`"));
        }
    }
    for list in ["displayElements", "gatherElements"] {
        for element in obj[list].as_array().ok_or("element list is not an array")? {
            for key in element.as_object().ok_or("element is not an object")?.keys() {
                if !ELEMENT_KEYS.contains(&key.as_str()) {
                    return Err(format!("unexpected key `{key}` in {list}"));
                }
            }
        }
    }
    for c in obj["constraints"].as_array().ok_or("constraints is not an array")? {
        for key in c.as_object().ok_or("constraint is not an object")?.keys() {
            if !CONSTRAINT_KEYS.contains(&key.as_str()) {
                return Err(format!("unexpected key `{key}` in constraints"));
            }
        }
    }
    for v in obj["value"].as_array().ok_or("value is not an array")? {
        if v.as_object().is_none_or(|o| o.len() != 1) {
            return Err(format!("value entry {v} is not a single-key object"));
        }
    }
    let text = request.to_string();
    for name in internal_names {
        if text.contains(&format!("\"{name}\"")) {
            return Err(format!("internal name `{name}` leaked into {text}"));
        }
    }
    Ok(())
}
