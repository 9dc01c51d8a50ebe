//! A small arithmetic expression language for user-authored functions.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | atom
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `min(a,b)`, `max(a,b)`, `abs(a)`, `pow(a,b)`, `sqrt(a)`, `exp(a)`.
//! Variables are fixed at parse time, so evaluation never fails on an unknown
//! name.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
    Pow,
    Sqrt,
    Exp,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            Func::Abs | Func::Sqrt | Func::Exp => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Call(f, args) => match f {
                Func::Min => args[0].eval(vars).min(args[1].eval(vars)),
                Func::Max => args[0].eval(vars).max(args[1].eval(vars)),
                Func::Abs => args[0].eval(vars).abs(),
                Func::Pow => args[0].eval(vars).powf(args[1].eval(vars)),
                Func::Sqrt => args[0].eval(vars).sqrt(),
                Func::Exp => args[0].eval(vars).exp(),
            },
        }
    }
}

/// A parsed expression over a fixed list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    variables: Vec<String>,
    root: Node,
}

impl Expr {
    /// Parses `source`; identifiers must be functions or one of `variables`.
    pub fn parse(source: &str, variables: &[&str]) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            variables,
            end: source.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected {}", tok.kind),
            });
        }
        Ok(Expr {
            source: source.to_string(),
            variables: variables.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    /// Evaluates with `vars[i]` bound to the i-th declared variable.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        debug_assert_eq!(vars.len(), self.variables.len());
        self.root.eval(vars)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn root(&self) -> &Node {
        &self.root
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Variable names for a state of dimension `dim`: `x` in one dimension,
/// `x1..xd` otherwise.
pub fn state_variables(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".to_string()]
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier '{s}'"),
            TokenKind::Plus => f.write_str("'+'"),
            TokenKind::Minus => f.write_str("'-'"),
            TokenKind::Star => f.write_str("'*'"),
            TokenKind::Slash => f.write_str("'/'"),
            TokenKind::LParen => f.write_str("'('"),
            TokenKind::RParen => f.write_str("')'"),
            TokenKind::Comma => f.write_str("','"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push(Token {
                    kind: TokenKind::Number(value),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(src[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unknown token '{}'", src[start..].chars().next().unwrap()),
                })
            }
        };
        i += 1;
        out.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    variables: &'a [&'a str],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        self.pos += 1;
        tok
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        let offset = self.offset();
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(Error::Parse {
                offset,
                message: format!("expected {kind}, found {}", t.kind),
            }),
            None => Err(Error::Parse {
                offset,
                message: format!("expected {kind}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node> {
        let offset = self.offset();
        let tok = match self.next() {
            Some(t) => t.clone(),
            None => {
                return Err(Error::Parse {
                    offset,
                    message: "unexpected end of input".into(),
                })
            }
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::lookup(&name) {
                    self.expect(TokenKind::LParen)?;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokenKind::RParen)?;
                    if args.len() != func.arity() {
                        return Err(Error::Parse {
                            offset: tok.offset,
                            message: format!(
                                "{} takes {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    Ok(Node::Call(func, args))
                } else if let Some(i) = self.variables.iter().position(|v| *v == name) {
                    Ok(Node::Var(i))
                } else {
                    Err(Error::Parse {
                        offset: tok.offset,
                        message: format!("unknown identifier '{name}'"),
                    })
                }
            }
            other => Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(src: &str, x: f64) -> f64 {
        Expr::parse(src, &["x"]).unwrap().eval(&[x])
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(eval1("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(eval1("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(eval1("-x - -2", 5.0), -3.0);
        assert_eq!(eval1("8 / 2 / 2", 0.0), 2.0);
        assert_eq!(eval1("1.5e1 + .5", 0.0), 15.5);
    }

    #[test]
    fn functions() {
        assert_eq!(eval1("min(pow(abs(x),3),1)", -0.5), 0.125);
        assert_eq!(eval1("min(pow(abs(x),3),1)", 3.0), 1.0);
        assert_eq!(eval1("max(x, 0)", -2.0), 0.0);
        assert_eq!(eval1("sqrt(x)", 4.0), 2.0);
        assert_eq!(eval1("exp(0)", 1.0), 1.0);
    }

    #[test]
    fn errors_carry_offsets() {
        match Expr::parse("min(x,", &["x"]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        match Expr::parse("x + y", &["x"]) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("'y'"));
            }
            other => panic!("{other:?}"),
        }
        match Expr::parse("pow(x)", &["x"]) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 0);
                assert!(message.contains("2 argument"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("x $ 1", &["x"]), Err(Error::Parse { offset: 2, .. })));
        assert!(matches!(Expr::parse("(x", &["x"]), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("x 1", &["x"]), Err(Error::Parse { offset: 2, .. })));
    }

    #[test]
    fn multi_dimensional_variables() {
        let names = state_variables(2);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let e = Expr::parse("x1 * x2 + 1", &refs).unwrap();
        assert_eq!(e.eval(&[2.0, 3.0]), 7.0);
    }
}
