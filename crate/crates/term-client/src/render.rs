use flow_core::protocol::IterationRequest;
use flow_core::{ScalarType, Value};

use crate::ClientError;

/// One input the user has to provide.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub name: String,
    pub label: String,
    pub ty: ScalarType,
    pub set: bool,
    pub default: Option<Value>,
    pub choices: Option<Vec<Value>>,
}

impl Prompt {
    /// `Booth Number: (Integer)`, followed by choices and default if any.
    pub fn text(&self) -> String {
        let mut out = format!("{} ({}", self.label, self.ty);
        if self.set {
            out.push_str(", comma-separated");
        }
        out.push(')');
        if let Some(choices) = &self.choices {
            let names: Vec<String> = choices.iter().map(ToString::to_string).collect();
            out.push_str(&format!(" [{}]", names.join("/")));
        }
        if let Some(default) = &self.default {
            out.push_str(&format!(" <default: {default}>"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedRequest {
    pub display_lines: Vec<String>,
    pub prompts: Vec<Prompt>,
}

fn show(value: &Value) -> String {
    match value {
        Value::List(items) => items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

pub fn render_request(request: &IterationRequest) -> Result<RenderedRequest, ClientError> {
    request.validate().map_err(|e| ClientError::Schema(e.0))?;
    let display_lines = request
        .display_elements
        .iter()
        .map(|d| match d.render.as_deref() {
            Some(hint) => format!("{} [{hint}: {}]", d.label, show(&d.value)),
            None => format!("{} {}", d.label, show(&d.value)),
        })
        .collect();
    let prompts = request
        .gather_elements
        .iter()
        .map(|g| Prompt {
            name: g.name.clone(),
            label: g.label.clone(),
            ty: g.ty,
            set: g.set,
            default: request.value_of(&g.name).cloned(),
            choices: request.choices_for(&g.name).map(<[Value]>::to_vec),
        })
        .collect();
    Ok(RenderedRequest { display_lines, prompts })
}

fn parse_scalar(text: &str, ty: ScalarType) -> Result<Value, ClientError> {
    let fail = || ClientError::Parse {
        input: text.to_string(),
        expected: ty.to_string(),
    };
    match ty {
        ScalarType::Integer => text.parse().map(Value::Integer).map_err(|_| fail()),
        ScalarType::Decimal => text
            .parse::<f64>()
            .ok()
            .filter(|d| d.is_finite())
            .map(Value::Decimal)
            .ok_or_else(fail),
        ScalarType::Boolean => match text.to_ascii_lowercase().as_str() {
            "true" | "yes" | "y" => Ok(Value::Boolean(true)),
            "false" | "no" | "n" => Ok(Value::Boolean(false)),
            _ => Err(fail()),
        },
        ScalarType::String => Ok(Value::String(text.to_string())),
    }
}

/// Reads one answer. An empty line takes the default; set-valued prompts
/// take a comma-separated list. Choices are enforced before anything is sent.
pub fn parse_input(prompt: &Prompt, line: &str) -> Result<Value, ClientError> {
    let line = line.trim();
    if line.is_empty() {
        return prompt.default.clone().ok_or(ClientError::Required);
    }
    let value = if prompt.set {
        let items = line
            .split(',')
            .map(|part| parse_scalar(part.trim(), prompt.ty))
            .collect::<Result<Vec<_>, _>>()?;
        Value::List(items)
    } else {
        parse_scalar(line, prompt.ty)?
    };
    if let Some(choices) = &prompt.choices {
        let items = match &value {
            Value::List(items) => items.as_slice(),
            scalar => std::slice::from_ref(scalar),
        };
        if let Some(bad) = items.iter().find(|v| !choices.contains(v)) {
            return Err(ClientError::LocalConstraintViolation {
                element: prompt.label.clone(),
                value: bad.to_string(),
            });
        }
    }
    Ok(value)
}
