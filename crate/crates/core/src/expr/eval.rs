use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::value::Value;

use super::{BinaryOp, Expr, ExprError, UnaryOp};

/// Attribute path → bound value.
pub type Env = BTreeMap<String, Value>;

/// Evaluates `expr` against `env`. `and`/`or` short-circuit left to right.
pub fn evaluate(expr: &Expr, env: &Env) -> Result<Value, ExprError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Attr(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| ExprError::UnboundAttribute(name.clone())),
        Expr::Unary(UnaryOp::Not, e) => match evaluate(e, env)? {
            Value::Boolean(b) => Ok(Value::Boolean(!b)),
            v => Err(runtime_mismatch("not", &v)),
        },
        Expr::Unary(UnaryOp::Negate, e) => match evaluate(e, env)? {
            Value::Integer(i) => i.checked_neg().map(Value::Integer).ok_or(ExprError::Overflow),
            Value::Decimal(d) => Ok(Value::Decimal(-d)),
            v => Err(runtime_mismatch("-", &v)),
        },
        Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), l, r) => {
            let lhs = expect_bool(evaluate(l, env)?, *op)?;
            match (op, lhs) {
                (BinaryOp::And, false) => Ok(Value::Boolean(false)),
                (BinaryOp::Or, true) => Ok(Value::Boolean(true)),
                _ => Ok(Value::Boolean(expect_bool(evaluate(r, env)?, *op)?)),
            }
        }
        Expr::Binary(op, l, r) => {
            let lhs = evaluate(l, env)?;
            let rhs = evaluate(r, env)?;
            if op.is_arithmetic() {
                arithmetic(*op, lhs, rhs)
            } else {
                compare(*op, &lhs, &rhs)
            }
        }
    }
}

fn runtime_mismatch(op: &str, v: &Value) -> ExprError {
    ExprError::TypeMismatch(format!("`{op}` cannot be applied to `{v}`"))
}

fn expect_bool(v: Value, op: BinaryOp) -> Result<bool, ExprError> {
    v.as_bool().ok_or_else(|| runtime_mismatch(op.symbol(), &v))
}

fn arithmetic(op: BinaryOp, lhs: Value, rhs: Value) -> Result<Value, ExprError> {
    match (&lhs, &rhs) {
        (Value::Integer(a), Value::Integer(b)) => {
            let (a, b) = (*a, *b);
            let result = match op {
                BinaryOp::Add => a.checked_add(b),
                BinaryOp::Sub => a.checked_sub(b),
                BinaryOp::Mul => a.checked_mul(b),
                _ => {
                    if b == 0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    // truncates toward zero; only i64::MIN / -1 overflows
                    a.checked_div(b)
                }
            };
            result.map(Value::Integer).ok_or(ExprError::Overflow)
        }
        _ => {
            let (Some(a), Some(b)) = (as_f64(&lhs), as_f64(&rhs)) else {
                return Err(runtime_mismatch(
                    op.symbol(),
                    if as_f64(&lhs).is_none() { &lhs } else { &rhs },
                ));
            };
            let result = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                _ => {
                    if b == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    a / b
                }
            };
            if result.is_finite() {
                Ok(Value::Decimal(result))
            } else {
                Err(ExprError::Overflow)
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Decimal(d) => Some(*d),
        _ => None,
    }
}

fn compare(op: BinaryOp, lhs: &Value, rhs: &Value) -> Result<Value, ExprError> {
    let ordering = match (lhs, rhs) {
        (Value::Integer(a), Value::Integer(b)) => Some(a.cmp(b)),
        (Value::String(a), Value::String(b)) => Some(a.chars().cmp(b.chars())),
        (Value::Boolean(a), Value::Boolean(b)) if matches!(op, BinaryOp::Eq | BinaryOp::Ne) => Some(a.cmp(b)),
        _ => match (as_f64(lhs), as_f64(rhs)) {
            (Some(a), Some(b)) => a.partial_cmp(&b),
            _ => {
                return Err(ExprError::TypeMismatch(format!(
                    "cannot apply `{}` to `{lhs}` and `{rhs}`",
                    op.symbol()
                )))
            }
        },
    };
    let Some(ordering) = ordering else {
        return Ok(Value::Boolean(op == BinaryOp::Ne));
    };
    let result = match op {
        BinaryOp::Eq => ordering == Ordering::Equal,
        BinaryOp::Ne => ordering != Ordering::Equal,
        BinaryOp::Lt => ordering == Ordering::Less,
        BinaryOp::Le => ordering != Ordering::Greater,
        BinaryOp::Gt => ordering == Ordering::Greater,
        _ => ordering != Ordering::Less,
    };
    Ok(Value::Boolean(result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn eval(src: &str, env: &[(&str, Value)]) -> Result<Value, ExprError> {
        let env = env.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        evaluate(&parse_expression(src).unwrap(), &env)
    }

    #[test]
    fn literal_comparison() {
        assert_eq!(eval("1 < 2", &[]), Ok(Value::Boolean(true)));
    }

    #[test]
    fn string_equality_from_env() {
        let env = [("booth_cardinalPoint", Value::String("North".into()))];
        assert_eq!(
            eval(r#"booth_cardinalPoint == "North""#, &env),
            Ok(Value::Boolean(true))
        );
    }

    #[test]
    fn integer_division_truncates_toward_zero() {
        assert_eq!(eval("7 / 2", &[]), Ok(Value::Integer(3)));
        assert_eq!(eval("-7 / 2", &[]), Ok(Value::Integer(-3)));
        assert_eq!(eval("7.0 / 2", &[]), Ok(Value::Decimal(3.5)));
    }

    #[test]
    fn declared_runtime_errors() {
        assert_eq!(eval("1 / 0", &[]), Err(ExprError::DivisionByZero));
        assert_eq!(eval("1.0 / 0", &[]), Err(ExprError::DivisionByZero));
        assert_eq!(eval("9223372036854775807 + 1", &[]), Err(ExprError::Overflow));
        let min = [("m", Value::Integer(i64::MIN))];
        assert_eq!(eval("m / -1", &min), Err(ExprError::Overflow));
        assert_eq!(eval("-m", &min), Err(ExprError::Overflow));
        assert_eq!(eval("x", &[]), Err(ExprError::UnboundAttribute("x".into())));
    }

    #[test]
    fn short_circuit_skips_unbound_rhs() {
        assert_eq!(eval("false and ghost", &[]), Ok(Value::Boolean(false)));
        assert_eq!(eval("true or ghost", &[]), Ok(Value::Boolean(true)));
        assert!(eval("true and ghost", &[]).is_err());
    }

    #[test]
    fn strings_order_by_code_point() {
        assert_eq!(eval(r#""Z" < "a""#, &[]), Ok(Value::Boolean(true)));
        assert_eq!(eval(r#""é" > "z""#, &[]), Ok(Value::Boolean(true)));
        assert_eq!(eval(r#""ab" < "abc""#, &[]), Ok(Value::Boolean(true)));
    }

    #[test]
    fn mixed_numeric_comparison_is_exact() {
        assert_eq!(eval("1 == 1.0", &[]), Ok(Value::Boolean(true)));
        assert_eq!(eval("0.1 + 0.2 == 0.3", &[]), Ok(Value::Boolean(false)));
    }
}
