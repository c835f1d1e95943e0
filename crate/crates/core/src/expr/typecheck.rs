use std::collections::BTreeMap;

use crate::value::ScalarType;

use super::{BinaryOp, Expr, ExprError, UnaryOp};

/// Attribute path → declared scalar type.
pub type Schema = BTreeMap<String, ScalarType>;

fn mismatch(msg: String) -> ExprError {
    ExprError::TypeMismatch(msg)
}

/// Computes the static type of `expr`.
///
/// Mixed Integer/Decimal operands promote to Decimal, in arithmetic and in
/// comparisons. Equality otherwise needs identical types; ordering is defined
/// for numbers and strings only.
pub fn typecheck(expr: &Expr, schema: &Schema) -> Result<ScalarType, ExprError> {
    match expr {
        Expr::Literal(v) => v
            .scalar_type()
            .ok_or_else(|| mismatch("list literals are not expressions".into())),
        Expr::Attr(name) => schema
            .get(name)
            .copied()
            .ok_or_else(|| ExprError::UnknownAttribute(name.clone())),
        Expr::Unary(UnaryOp::Not, e) => match typecheck(e, schema)? {
            ScalarType::Boolean => Ok(ScalarType::Boolean),
            t => Err(mismatch(format!("`not` needs Boolean, found {t}"))),
        },
        Expr::Unary(UnaryOp::Negate, e) => match typecheck(e, schema)? {
            t if t.is_numeric() => Ok(t),
            t => Err(mismatch(format!("unary `-` needs a number, found {t}"))),
        },
        Expr::Binary(op, l, r) => {
            let lt = typecheck(l, schema)?;
            let rt = typecheck(r, schema)?;
            binary_type(*op, lt, rt)
        }
    }
}

fn binary_type(op: BinaryOp, lt: ScalarType, rt: ScalarType) -> Result<ScalarType, ExprError> {
    use ScalarType::*;
    let numeric = lt.is_numeric() && rt.is_numeric();
    match op {
        BinaryOp::And | BinaryOp::Or => {
            if lt == Boolean && rt == Boolean {
                Ok(Boolean)
            } else {
                Err(mismatch(format!(
                    "`{}` needs Boolean operands, found {lt} and {rt}",
                    op.symbol()
                )))
            }
        }
        BinaryOp::Eq | BinaryOp::Ne => {
            if lt == rt || numeric {
                Ok(Boolean)
            } else {
                Err(mismatch(format!("cannot compare {lt} with {rt}")))
            }
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            if numeric || (lt == String && rt == String) {
                Ok(Boolean)
            } else {
                Err(mismatch(format!("cannot order {lt} and {rt}")))
            }
        }
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
            if !numeric {
                Err(mismatch(format!(
                    "`{}` needs numbers, found {lt} and {rt}",
                    op.symbol()
                )))
            } else if lt == Integer && rt == Integer {
                Ok(Integer)
            } else {
                Ok(Decimal)
            }
        }
    }
}
