//! Scalar types and runtime values shared by models, expressions and the wire protocol.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value as Json;

/// The four scalar kinds an attribute can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarType {
    Integer,
    Decimal,
    String,
    Boolean,
}

impl ScalarType {
    pub const ALL: [ScalarType; 4] = [
        ScalarType::Integer,
        ScalarType::Decimal,
        ScalarType::String,
        ScalarType::Boolean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Integer => "Integer",
            ScalarType::Decimal => "Decimal",
            ScalarType::String => "String",
            ScalarType::Boolean => "Boolean",
        }
    }

    /// Case-insensitive lookup; `"string"` and `"String"` are the same type.
    pub fn parse(name: &str) -> Option<ScalarType> {
        ScalarType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(name))
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ScalarType::Integer | ScalarType::Decimal)
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ScalarType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ScalarType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        ScalarType::parse(&raw).ok_or_else(|| D::Error::custom(format!("unknown scalar type `{raw}`")))
    }
}

/// A runtime value. Lists are homogeneous and never nested.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Integer(i64),
    Decimal(f64),
    String(String),
    Boolean(bool),
    List(Vec<Value>),
}

impl Value {
    /// Scalar kind of this value, `None` for lists.
    pub fn scalar_type(&self) -> Option<ScalarType> {
        match self {
            Value::Integer(_) => Some(ScalarType::Integer),
            Value::Decimal(_) => Some(ScalarType::Decimal),
            Value::String(_) => Some(ScalarType::String),
            Value::Boolean(_) => Some(ScalarType::Boolean),
            Value::List(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Integer(i) => Json::from(*i),
            Value::Decimal(d) => serde_json::Number::from_f64(*d).map(Json::Number).unwrap_or(Json::Null),
            Value::String(s) => Json::String(s.clone()),
            Value::Boolean(b) => Json::Bool(*b),
            Value::List(items) => Json::Array(items.iter().map(Value::to_json).collect()),
        }
    }

    /// Untyped conversion: JSON integers become `Integer`, other numbers `Decimal`.
    pub fn from_json(json: &Json) -> Result<Value, String> {
        match json {
            Json::Array(items) => {
                let values = items
                    .iter()
                    .map(Value::from_scalar_json)
                    .collect::<Result<Vec<_>, _>>()?;
                Value::list(values)
            }
            other => Value::from_scalar_json(other),
        }
    }

    fn from_scalar_json(json: &Json) -> Result<Value, String> {
        match json {
            Json::Bool(b) => Ok(Value::Boolean(*b)),
            Json::String(s) => Ok(Value::String(s.clone())),
            Json::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Value::Integer(i))
                } else if n.is_u64() {
                    Err(format!("integer {n} is outside the 64-bit signed range"))
                } else {
                    Ok(Value::Decimal(n.as_f64().unwrap_or(f64::NAN)))
                }
            }
            Json::Array(_) => Err("nested lists are not allowed".to_string()),
            Json::Null => Err("null is not a value".to_string()),
            Json::Object(_) => Err("objects are not values".to_string()),
        }
    }

    /// Builds a list, promoting mixed Integer/Decimal elements to Decimal.
    pub fn list(items: Vec<Value>) -> Result<Value, String> {
        let mut kinds = items.iter().filter_map(Value::scalar_type).collect::<Vec<_>>();
        kinds.sort();
        kinds.dedup();
        match kinds.as_slice() {
            [] | [_] => Ok(Value::List(items)),
            [ScalarType::Integer, ScalarType::Decimal] => Ok(Value::List(
                items
                    .into_iter()
                    .map(|v| v.coerce(ScalarType::Decimal).unwrap_or(v))
                    .collect(),
            )),
            _ => Err("list elements must share one scalar type".to_string()),
        }
    }

    /// Typed conversion used wherever the expected attribute type is known.
    pub fn from_json_typed(json: &Json, ty: ScalarType, set: bool) -> Result<Value, String> {
        if set {
            let Json::Array(items) = json else {
                return Err(format!("expected a list of {ty}"));
            };
            let values = items
                .iter()
                .map(|item| Value::from_json_typed(item, ty, false))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Value::List(values));
        }
        let value = Value::from_scalar_json(json).map_err(|e| format!("expected {ty}: {e}"))?;
        value.coerce(ty).ok_or_else(|| format!("expected {ty}, found {}", json))
    }

    /// Returns the value as `ty` if it already is one, or is an Integer widened to Decimal.
    pub fn coerce(&self, ty: ScalarType) -> Option<Value> {
        match (self, ty) {
            (Value::Integer(i), ScalarType::Decimal) => Some(Value::Decimal(*i as f64)),
            (v, t) if v.scalar_type() == Some(t) => Some(v.clone()),
            _ => None,
        }
    }

    /// Checks the value against an attribute declaration without converting it.
    pub fn conforms_to(&self, ty: ScalarType, set: bool) -> bool {
        match self {
            Value::List(items) => set && items.iter().all(|v| v.scalar_type() == Some(ty)),
            v => !set && v.scalar_type() == Some(ty),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => f.write_str(&format_decimal(*d)),
            Value::String(s) => f.write_str(s),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::List(items) => {
                let parts = items.iter().map(|v| v.to_string()).collect::<Vec<_>>();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

/// Decimal text that always reads back as a Decimal (never as an Integer).
pub fn format_decimal(d: f64) -> String {
    let mut s = format!("{d}");
    if !s.contains('.') && d.is_finite() {
        s.push_str(".0");
    }
    s
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = Json::deserialize(deserializer)?;
        Value::from_json(&json).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn scalar_names_parse_case_insensitively() {
        assert_eq!(ScalarType::parse("string"), Some(ScalarType::String));
        assert_eq!(ScalarType::parse("INTEGER"), Some(ScalarType::Integer));
        assert_eq!(ScalarType::parse("text"), None);
        assert_eq!(serde_json::to_string(&ScalarType::String).unwrap(), "\"String\"");
    }

    #[test]
    fn json_numbers_keep_their_kind() {
        assert_eq!(Value::from_json(&json!(1)).unwrap(), Value::Integer(1));
        assert_eq!(Value::from_json(&json!(1.5)).unwrap(), Value::Decimal(1.5));
        assert_eq!(serde_json::to_string(&Value::Decimal(2.0)).unwrap(), "2.0");
        assert!(Value::from_json(&json!(u64::MAX)).is_err());
    }

    #[test]
    fn lists_are_flat_and_homogeneous() {
        let cpoints = Value::from_json(&json!(["North", "South", "East", "West"])).unwrap();
        assert!(matches!(cpoints, Value::List(ref v) if v.len() == 4));
        assert!(Value::from_json(&json!([1, "a"])).is_err());
        assert!(Value::from_json(&json!([[1]])).is_err());
        assert_eq!(
            Value::from_json(&json!([1, 2.5])).unwrap(),
            Value::List(vec![Value::Decimal(1.0), Value::Decimal(2.5)])
        );
    }

    #[test]
    fn typed_conversion_widens_integers_only() {
        assert_eq!(
            Value::from_json_typed(&json!(3), ScalarType::Decimal, false).unwrap(),
            Value::Decimal(3.0)
        );
        assert!(Value::from_json_typed(&json!("abc"), ScalarType::Integer, false).is_err());
        assert!(Value::from_json_typed(&json!(1.5), ScalarType::Integer, false).is_err());
        assert!(Value::from_json_typed(&json!(1), ScalarType::Integer, true).is_err());
        assert_eq!(
            Value::from_json_typed(&json!(["a"]), ScalarType::String, true).unwrap(),
            Value::List(vec![Value::String("a".into())])
        );
    }
}
