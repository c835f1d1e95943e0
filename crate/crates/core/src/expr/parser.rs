use crate::value::Value;

use super::{BinaryOp, Expr, ExprError, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Dec(f64),
    Str(String),
    Ident(String),
    And,
    Or,
    Not,
    True,
    False,
    Op(BinaryOp),
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b'+' | b'-' | b'*' | b'/' => {
                i += 1;
                Tok::Op(match c {
                    b'+' => BinaryOp::Add,
                    b'-' => BinaryOp::Sub,
                    b'*' => BinaryOp::Mul,
                    _ => BinaryOp::Div,
                })
            }
            b'=' | b'!' | b'<' | b'>' => {
                let followed_by_eq = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, followed_by_eq) {
                    (b'=', true) => BinaryOp::Eq,
                    (b'!', true) => BinaryOp::Ne,
                    (b'<', true) => BinaryOp::Le,
                    (b'>', true) => BinaryOp::Ge,
                    (b'<', false) => BinaryOp::Lt,
                    (b'>', false) => BinaryOp::Gt,
                    _ => return Err(syntax(i, format!("unexpected `{}`", c as char))),
                };
                i += if followed_by_eq { 2 } else { 1 };
                Tok::Op(op)
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(syntax(start, "unterminated string literal"));
                    };
                    i += ch.len_utf8();
                    match ch {
                        '"' => break,
                        '\\' => match bytes.get(i) {
                            Some(b'"') => {
                                s.push('"');
                                i += 1;
                            }
                            Some(b'\\') => {
                                s.push('\\');
                                i += 1;
                            }
                            _ => return Err(syntax(i - 1, "invalid escape sequence")),
                        },
                        ch => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let is_decimal = bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit);
                if is_decimal {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let d = src[start..i].parse::<f64>().map_err(|e| syntax(start, e.to_string()))?;
                    Tok::Dec(d)
                } else {
                    let n = src[start..i]
                        .parse::<i64>()
                        .map_err(|_| syntax(start, "integer literal out of range"))?;
                    Tok::Int(n)
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                match &src[start..i] {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    word => Tok::Ident(word.to_string()),
                }
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.not()?;
        while self.peek().tok == Tok::And {
            self.bump();
            let rhs = self.not()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ExprError> {
        if self.peek().tok == Tok::Not {
            self.bump();
            return Ok(Expr::unary(UnaryOp::Not, self.not()?));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.add()?;
        let op = match self.peek().tok {
            Tok::Op(op) if op.is_comparison() => op,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add()?;
        if let Tok::Op(next) = self.peek().tok {
            if next.is_comparison() {
                return Err(syntax(self.peek().offset, "comparison operators cannot be chained"));
            }
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.mul()?;
        while let Tok::Op(op @ (BinaryOp::Add | BinaryOp::Sub)) = self.peek().tok {
            self.bump();
            let rhs = self.mul()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ (BinaryOp::Mul | BinaryOp::Div)) = self.peek().tok {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek().tok == Tok::Op(BinaryOp::Sub) {
            self.bump();
            return Ok(Expr::unary(UnaryOp::Negate, self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let token = self.bump();
        match token.tok {
            Tok::Int(i) => Ok(Expr::Literal(Value::Integer(i))),
            Tok::Dec(d) => Ok(Expr::Literal(Value::Decimal(d))),
            Tok::Str(s) => Ok(Expr::Literal(Value::String(s))),
            Tok::True => Ok(Expr::Literal(Value::Boolean(true))),
            Tok::False => Ok(Expr::Literal(Value::Boolean(false))),
            Tok::Ident(name) => Ok(Expr::Attr(name)),
            Tok::LParen => {
                let inner = self.or()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(syntax(close.offset, "expected `)`"));
                }
                Ok(inner)
            }
            Tok::Eof => Err(syntax(token.offset, "unexpected end of expression")),
            other => Err(syntax(token.offset, format!("unexpected token {other:?}"))),
        }
    }
}

/// Parses expression source into a tree. Errors carry the byte offset of the
/// offending token.
pub fn parse_expression(source: &str) -> Result<Expr, ExprError> {
    let tokens = lex(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.or()?;
    let rest = parser.peek();
    if rest.tok != Tok::Eof {
        return Err(syntax(rest.offset, "unexpected trailing input"));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(i: i64) -> Expr {
        Expr::Literal(Value::Integer(i))
    }

    #[test]
    fn equality_against_literal() {
        assert_eq!(
            parse_expression("booth_number == 1").unwrap(),
            Expr::binary(BinaryOp::Eq, Expr::attr("booth_number"), lit(1))
        );
    }

    #[test]
    fn not_binds_tighter_than_and_or() {
        let expected = Expr::binary(
            BinaryOp::Or,
            Expr::unary(
                UnaryOp::Not,
                Expr::binary(BinaryOp::And, Expr::attr("a"), Expr::attr("b")),
            ),
            Expr::attr("c"),
        );
        assert_eq!(parse_expression("not (a and b) or c").unwrap(), expected);
    }

    #[test]
    fn chained_comparison_is_rejected() {
        let err = parse_expression("1 < 2 < 3").unwrap_err();
        assert!(matches!(err, ExprError::Syntax { offset: 6, .. }), "{err:?}");
    }

    #[test]
    fn arithmetic_precedence_and_left_associativity() {
        let e = parse_expression("1 - 2 - 3 * -4").unwrap();
        let expected = Expr::binary(
            BinaryOp::Sub,
            Expr::binary(BinaryOp::Sub, lit(1), lit(2)),
            Expr::binary(BinaryOp::Mul, lit(3), Expr::unary(UnaryOp::Negate, lit(4))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn comparison_binds_tighter_than_not() {
        let e = parse_expression("not x > 1").unwrap();
        assert_eq!(
            e,
            Expr::unary(UnaryOp::Not, Expr::binary(BinaryOp::Gt, Expr::attr("x"), lit(1)))
        );
    }

    #[test]
    fn string_escapes() {
        let e = parse_expression(r#""say \"hi\" \\ ok""#).unwrap();
        assert_eq!(e, Expr::Literal(Value::String(r#"say "hi" \ ok"#.into())));
        assert!(parse_expression(r#""bad \n""#).is_err());
        assert!(parse_expression(r#""open"#).is_err());
    }

    #[test]
    fn error_offsets() {
        assert!(matches!(
            parse_expression("booth_number >"),
            Err(ExprError::Syntax { offset: 14, .. })
        ));
        assert!(matches!(
            parse_expression("a $ b"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_expression("(a"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_expression("a b"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(parse_expression("").is_err());
        assert!(parse_expression("99999999999999999999").is_err());
    }

    #[test]
    fn decimals_and_keywords() {
        assert_eq!(parse_expression("2.50").unwrap(), Expr::Literal(Value::Decimal(2.5)));
        assert_eq!(
            parse_expression("true != false").unwrap(),
            Expr::binary(
                BinaryOp::Ne,
                Expr::Literal(Value::Boolean(true)),
                Expr::Literal(Value::Boolean(false))
            )
        );
        // `android` is an identifier, not `and` followed by `roid`
        assert_eq!(parse_expression("android").unwrap(), Expr::attr("android"));
    }

    #[test]
    fn pretty_print_reparses() {
        for src in [
            "not (a and b) or c",
            "x * (y + 2) / -3 >= 1.5",
            r#"name == "a \"q\"" and not flag"#,
            "-(-1)",
        ] {
            let e = parse_expression(src).unwrap();
            assert_eq!(parse_expression(&e.to_string()).unwrap(), e, "{src}");
        }
    }
}
