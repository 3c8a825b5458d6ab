use super::ast::{BinaryOp, Expr, UnaryOp};
use thiserror::Error;

/// Parse failure. Offsets are 1-based byte positions; an error at end of
/// input reports `len + 1`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable x{index} at offset {offset} exceeds chart dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    // Returns (token, 0-based start byte).
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(|t| (t, start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self
                .src
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                self.pos += 1;
            }
            let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
            return Ok((Tok::Ident(name), start));
        }
        self.pos += 1;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let ch = std::str::from_utf8(&self.src[start..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start + 1,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let digits = |lx: &mut Lexer| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(|b| b.is_ascii_digit()) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ParseError::Syntax {
                offset: start + 1,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ParseError::Syntax {
                offset: start + 1,
                message: format!("malformed number '{text}'"),
            })
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (t, at) = self.lex.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.at + 1,
            message: message.into(),
        })
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return self.err("expected ')'");
        }
        self.bump()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump()?;
        let k = self.int_exponent()?;
        if self.tok == Tok::Op('^') {
            return self.err("chained '^' is ambiguous; add parentheses");
        }
        Ok(Expr::powi(base, k))
    }

    fn int_exponent(&mut self) -> Result<i32, ParseError> {
        let paren = self.tok == Tok::LParen;
        if paren {
            self.bump()?;
        }
        let neg = match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                true
            }
            Tok::Op('+') => {
                self.bump()?;
                false
            }
            _ => false,
        };
        let Tok::Num(v) = self.tok else {
            return self.err("exponent must be an integer literal");
        };
        if v.fract() != 0.0 || v > i32::MAX as f64 {
            return self.err("exponent must be an integer literal");
        }
        self.bump()?;
        if paren {
            self.expect_rparen()?;
        }
        let k = v as i32;
        Ok(if neg { -k } else { k })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(op) = UnaryOp::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return self.err(format!("expected '(' after {name}"));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::unary(op, arg));
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|d| {
                    (!d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                        .then(|| d.parse::<usize>().ok())
                        .flatten()
                }) {
                    if idx == 0 || idx > self.dim {
                        return Err(ParseError::VariableOutOfRange {
                            index: idx,
                            dim: self.dim,
                            offset: at + 1,
                        });
                    }
                    return Ok(Expr::Var(idx - 1));
                }
                Err(ParseError::UnknownIdentifier {
                    name,
                    offset: at + 1,
                })
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::RParen => self.err("unexpected ')'"),
            Tok::Op(c) => self.err(format!("unexpected operator '{c}'")),
        }
    }
}

/// Parses an expression in the chart variables `x1..x{dim}`.
///
/// Grammar (whitespace insignificant):
///
/// ```text
/// expr     = term { ("+" | "-") term } ;
/// term     = unary { ("*" | "/") unary } ;
/// unary    = ("-" | "+") unary | power ;
/// power    = primary [ "^" exponent ] ;
/// exponent = ["-" | "+"] integer | "(" ["-" | "+"] integer ")" ;
/// primary  = number | "pi" | variable | func "(" expr ")" | "(" expr ")" ;
/// func     = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" ;
/// variable = "x" digit { digit } ;
/// ```
pub fn parse_expression(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lex: Lexer {
            src: text.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
        dim,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_product_of_trig() {
        let e = parse_expression("sin(x1)*cos(x2)", 2).unwrap();
        assert_eq!(
            e,
            Expr::mul(
                Expr::unary(UnaryOp::Sin, Expr::Var(0)),
                Expr::unary(UnaryOp::Cos, Expr::Var(1))
            )
        );
    }

    #[test]
    fn parses_square_plus_one() {
        let e = parse_expression("x1^2 + 1", 1).unwrap();
        assert_eq!(e, Expr::add(Expr::powi(Expr::Var(0), 2), Expr::Num(1.0)));
    }

    #[test]
    fn unbalanced_paren_reports_offset_seven() {
        let err = parse_expression("sin(x1", 1).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert_eq!(err.offset(), 7);
    }

    #[test]
    fn rejects_unknown_identifier_and_range() {
        assert!(matches!(
            parse_expression("foo(x1)", 1),
            Err(ParseError::UnknownIdentifier { offset: 1, .. })
        ));
        assert!(matches!(
            parse_expression("x1 + x3", 2),
            Err(ParseError::VariableOutOfRange { index: 3, offset: 6, .. })
        ));
        assert!(matches!(
            parse_expression("x0", 2),
            Err(ParseError::VariableOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn fractional_exponent_is_rejected() {
        assert!(parse_expression("x1^0.5", 1).is_err());
        assert!(parse_expression("x1^x1", 1).is_err());
        assert!(parse_expression("x1^2^3", 1).is_err());
    }

    #[test]
    fn precedence_and_negative_exponent() {
        let e = parse_expression("-x1^2", 1).unwrap();
        assert_eq!(e, Expr::neg(Expr::powi(Expr::Var(0), 2)));
        let e = parse_expression("x1^(-2) * 2", 1).unwrap();
        assert_eq!(e.eval(&[2.0]), 0.5);
        let e = parse_expression("1 - 2 - 3", 0).unwrap();
        assert_eq!(e.eval(&[]), -4.0);
        let e = parse_expression("2*pi/4", 0).unwrap();
        assert!((e.eval(&[]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(parse_expression("1.5e-3", 0).unwrap(), Expr::Num(1.5e-3));
    }

    #[test]
    fn canonical_printer_round_trips() {
        for src in [
            "sin(x1)*cos(x2)",
            "-(x1 - 3)^(-2) / exp(x2)",
            "sqrt(1 + x1^2) - log(2 + x2) * tan(0.25)",
            "-2 * x1",
        ] {
            let a = parse_expression(src, 2).unwrap();
            let printed = a.to_string();
            let b = parse_expression(&printed, 2).unwrap();
            assert_eq!(a, b, "{src} -> {printed}");
        }
    }
}
