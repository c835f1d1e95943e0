//! The condition and assignment language used by transitions and Assign steps.
//!
//! Precedence, loosest first: `or`, `and`, `not`, comparisons (non-associative),
//! `+ -`, `* /`, unary `-`. There is no null: an attribute missing from the
//! environment makes evaluation fail instead of producing a value.

mod eval;
mod parser;
mod typecheck;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::value::{format_decimal, ScalarType, Value};

pub use eval::{evaluate, Env};
pub use parser::parse_expression;
pub use typecheck::{typecheck, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Negate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Attr(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn attr(name: &str) -> Expr {
        Expr::Attr(name.to_string())
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Expr {
        Expr::Unary(op, Box::new(operand))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Every attribute path referenced by the expression.
    pub fn attributes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_attributes(&mut out);
        out
    }

    fn collect_attributes(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Attr(name) => {
                out.insert(name.clone());
            }
            Expr::Unary(_, e) => e.collect_attributes(out),
            Expr::Binary(_, l, r) => {
                l.collect_attributes(out);
                r.collect_attributes(out);
            }
        }
    }
}

/// Fully parenthesised rendering; parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => write_literal(f, v),
            Expr::Attr(name) => f.write_str(name),
            Expr::Unary(UnaryOp::Not, e) => write!(f, "(not {e})"),
            Expr::Unary(UnaryOp::Negate, e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        Value::Integer(i) if *i < 0 => write!(f, "(-{})", i.unsigned_abs()),
        Value::Integer(i) => write!(f, "{i}"),
        Value::Decimal(d) if *d < 0.0 => write!(f, "(-{})", format_decimal(-d)),
        Value::Decimal(d) => f.write_str(&format_decimal(*d)),
        Value::Boolean(b) => write!(f, "{b}"),
        Value::String(s) => {
            f.write_str("\"")?;
            for c in s.chars() {
                match c {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    c => write!(f, "{c}")?,
                }
            }
            f.write_str("\"")
        }
        Value::List(_) => Err(fmt::Error),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{0}` is unbound")]
    UnboundAttribute(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

/// Parses and type-checks in one go, returning the tree and its type.
pub fn compile(source: &str, schema: &Schema) -> Result<(Expr, ScalarType), ExprError> {
    let expr = parse_expression(source)?;
    let ty = typecheck(&expr, schema)?;
    Ok((expr, ty))
}
