//! Canonical prefix s-expression form, e.g. `(div x (add x z))`.
//!
//! The writer emits lowercase ASCII with single spaces. The reader accepts
//! any ASCII whitespace between tokens. Depth is not bounded here beyond a
//! nesting guard; callers that need `MAX_DEPTH` check it themselves.

use std::fmt::Write;

use super::{format_real, BinaryOp, Expr, UnaryOp, Var};

/// Parser recursion guard, far above any tree the engine produces.
const MAX_NESTING: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte {position}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected `{0}`")]
    Unexpected(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` takes {expected} argument(s), found {found}")]
    Arity { op: String, expected: usize, found: usize },
    #[error("invalid number `{0}`")]
    BadNumber(String),
    #[error("constant {0} is outside [-1, 1)")]
    ConstantOutOfRange(String),
    #[error("trailing input")]
    Trailing,
    #[error("nesting deeper than {MAX_NESTING}")]
    TooDeep,
}

pub fn serialize(e: &Expr) -> String {
    let mut out = String::with_capacity(e.size() * 6);
    write_sexpr(e, &mut out);
    out
}

fn write_sexpr(e: &Expr, out: &mut String) {
    match e {
        Expr::Binary(op, a, b) => {
            write!(out, "({} ", op.name()).unwrap();
            write_sexpr(a, out);
            out.push(' ');
            write_sexpr(b, out);
            out.push(')');
        }
        Expr::Unary(op, a) => {
            write!(out, "({} ", op.name()).unwrap();
            write_sexpr(a, out);
            out.push(')');
        }
        Expr::Var(v) => out.push_str(v.name()),
        Expr::Const(c) => write!(out, "(const {})", format_real(*c)).unwrap(),
    }
}

pub fn deserialize(text: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(text);
    let mut parser = Parser { tokens, pos: 0, end: text.len() };
    let expr = parser.expr(0)?;
    if let Some(tok) = parser.tokens.get(parser.pos) {
        return Err(ParseError { position: tok.start, kind: ParseErrorKind::Trailing });
    }
    Ok(expr)
}

#[derive(Debug)]
struct Token<'a> {
    start: usize,
    text: &'a str,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b if b.is_ascii_whitespace() => i += 1,
            b'(' | b')' => {
                tokens.push(Token { start: i, text: &text[i..i + 1] });
                i += 1;
            }
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                tokens.push(Token { start, text: &text[start..i] });
            }
        }
    }
    tokens
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<&Token<'a>, ParseError> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or(ParseError { position: self.end, kind: ParseErrorKind::UnexpectedEnd })?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek_is_close(&self) -> bool {
        self.tokens.get(self.pos).is_some_and(|t| t.text == ")")
    }

    fn expr(&mut self, nesting: usize) -> Result<Expr, ParseError> {
        let tok = self.next()?;
        let (start, text) = (tok.start, tok.text);
        match text {
            "(" => {
                if nesting >= MAX_NESTING {
                    return Err(ParseError { position: start, kind: ParseErrorKind::TooDeep });
                }
                self.compound(start, nesting + 1)
            }
            "x" => Ok(Expr::Var(Var::X)),
            "y" => Ok(Expr::Var(Var::Y)),
            "z" => Ok(Expr::Var(Var::Z)),
            "t" => Ok(Expr::Var(Var::T)),
            other => Err(ParseError { position: start, kind: ParseErrorKind::Unexpected(other.into()) }),
        }
    }

    fn compound(&mut self, open: usize, nesting: usize) -> Result<Expr, ParseError> {
        let head = self.next()?;
        let (head_pos, head_text) = (head.start, head.text);
        if head_text == "const" {
            let num = self.next()?;
            let (num_pos, num_text) = (num.start, num.text);
            let value: f64 = num_text.parse().map_err(|_| ParseError {
                position: num_pos,
                kind: ParseErrorKind::BadNumber(num_text.into()),
            })?;
            let expr = Expr::try_constant(value).ok_or(ParseError {
                position: num_pos,
                kind: ParseErrorKind::ConstantOutOfRange(num_text.into()),
            })?;
            self.close()?;
            return Ok(expr);
        }

        enum Head {
            Binary(BinaryOp),
            Unary(UnaryOp),
        }
        let op = BinaryOp::ALL
            .iter()
            .find(|op| op.name() == head_text)
            .map(|op| Head::Binary(*op))
            .or_else(|| UnaryOp::ALL.iter().find(|op| op.name() == head_text).map(|op| Head::Unary(*op)))
            .ok_or_else(|| ParseError {
                position: head_pos,
                kind: if head_text == "(" || head_text == ")" {
                    ParseErrorKind::Unexpected(head_text.into())
                } else {
                    ParseErrorKind::UnknownOperator(head_text.into())
                },
            })?;

        let mut args = Vec::with_capacity(2);
        while !self.peek_is_close() {
            if self.pos >= self.tokens.len() {
                return Err(ParseError { position: self.end, kind: ParseErrorKind::UnexpectedEnd });
            }
            args.push(self.expr(nesting)?);
        }
        self.close()?;

        let arity_error = |expected: usize, found: usize| ParseError {
            position: open,
            kind: ParseErrorKind::Arity { op: head_text.into(), expected, found },
        };
        match op {
            Head::Binary(op) => {
                if args.len() != 2 {
                    return Err(arity_error(2, args.len()));
                }
                let b = args.pop().unwrap();
                let a = args.pop().unwrap();
                Ok(Expr::binary(op, a, b))
            }
            Head::Unary(op) => {
                if args.len() != 1 {
                    return Err(arity_error(1, args.len()));
                }
                Ok(Expr::unary(op, args.pop().unwrap()))
            }
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        let tok = self.next()?;
        match tok.text {
            ")" => Ok(()),
            other => Err(ParseError { position: tok.start, kind: ParseErrorKind::Unexpected(other.into()) }),
        }
    }
}
