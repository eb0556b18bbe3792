//! Scalar functions of `(x, t)` used for coefficients, forcing and initial data.
//!
//! Functions are either parsed expressions over the grammar
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' unary)?
//! atom  := number | x | t | exp(expr) | sin(expr) | cos(expr) | '(' expr ')'
//! ```
//!
//! or tabulated samples in one variable with linear interpolation.
//! Expressions print back in a form that parses to the same tree.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    X,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Literal in the canonical form the parser produces (negatives as `Neg`).
    pub fn number(v: f64) -> Expr {
        if v.is_sign_negative() {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(a, b) => a.eval(x, t).powf(b.eval(x, t)),
            Expr::Call(f, a) => f.apply(a.eval(x, t)),
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses(var) || b.uses(var),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < p)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => "*",
                    _ => "/",
                };
                write_child(f, a, a.precedence() < p)?;
                f.write_str(op)?;
                write_child(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, b) => {
                write_child(f, a, a.precedence() <= p)?;
                f.write_str("^")?;
                // the exponent is parsed as a unary expression
                write_child(f, b, b.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
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
            let v: f64 = text.parse().map_err(|_| Error::Expression {
                column: col,
                message: format!("malformed number '{text}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Expression {
                    column: col,
                    message: format!("number '{text}' overflows"),
                });
            }
            out.push((Token::Num(v), col));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Token::Ident(src[start..i].to_string()), col));
        } else if "+-*/^".contains(c) {
            out.push((Token::Op(c), col));
            i += 1;
        } else if c == '(' {
            out.push((Token::LParen, col));
            i += 1;
        } else if c == ')' {
            out.push((Token::RParen, col));
            i += 1;
        } else {
            return Err(Error::Expression {
                column: col,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            column: self.col(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Token::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Token::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "x" => {
                        self.pos += 1;
                        return Ok(Expr::Var(Var::X));
                    }
                    "t" => {
                        self.pos += 1;
                        return Ok(Expr::Var(Var::T));
                    }
                    "exp" => Func::Exp,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    other => return self.err(format!("unknown identifier '{other}'")),
                };
                self.pos += 1;
                if self.peek() != Some(&Token::LParen) {
                    return self.err(format!("expected '(' after '{name}'"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Token::Op(c) => self.err(format!("unexpected operator '{c}'")),
            Token::RParen => self.err("unexpected ')'"),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected ')'")
        }
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            end_col: src.len() + 1,
        };
        let e = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return parser.err("trailing input");
        }
        Ok(e)
    }
}

/// Samples `(s, value)` in one variable, linearly interpolated and held
/// constant outside the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub var: Var,
    pub points: Vec<(f64, f64)>,
}

impl Table {
    pub fn new(var: Var, points: Vec<(f64, f64)>) -> Result<Table> {
        let table = Table { var, points };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("table has no points".into()));
        }
        if self
            .points
            .iter()
            .any(|(s, v)| !s.is_finite() || !v.is_finite())
        {
            return Err(Error::InvalidArgument("table has non-finite entries".into()));
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        let pts = &self.points;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if s <= first.0 {
            return first.1;
        }
        if s >= last.0 {
            return last.1;
        }
        let k = pts.partition_point(|(a, _)| *a <= s);
        let (s0, v0) = pts[k - 1];
        let (s1, v1) = pts[k];
        v0 + (v1 - v0) * (s - s0) / (s1 - s0)
    }
}

/// A weighted sum `Σ cᵢ fᵢ`, used where functions are combined linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Combination {
    pub terms: Vec<(f64, ScalarFn)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    Expr(Expr),
    Table(Table),
    Combination(Combination),
}

impl ScalarFn {
    pub fn parse(src: &str) -> Result<ScalarFn> {
        Ok(ScalarFn::Expr(src.parse()?))
    }

    pub fn constant(v: f64) -> ScalarFn {
        ScalarFn::Expr(Expr::number(v))
    }

    pub fn zero() -> ScalarFn {
        ScalarFn::constant(0.0)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            ScalarFn::Expr(e) => e.eval(x, t),
            ScalarFn::Table(tab) => match tab.var {
                Var::X => tab.eval(x),
                Var::T => tab.eval(t),
            },
            ScalarFn::Combination(c) => c.terms.iter().map(|(w, f)| w * f.eval(x, t)).sum(),
        }
    }

    pub fn at_t(&self, t: f64) -> f64 {
        self.eval(0.0, t)
    }

    pub fn at_x(&self, x: f64) -> f64 {
        self.eval(x, 0.0)
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            ScalarFn::Expr(e) => e.uses(var),
            ScalarFn::Table(tab) => tab.var == var,
            ScalarFn::Combination(c) => c.terms.iter().any(|(_, f)| f.uses(var)),
        }
    }

    /// `Σ cᵢ fᵢ`; stays a single expression when every term is one.
    pub fn linear_combination(terms: &[(f64, &ScalarFn)]) -> ScalarFn {
        let all_expr = terms.iter().all(|(_, f)| matches!(f, ScalarFn::Expr(_)));
        if !all_expr {
            return ScalarFn::Combination(Combination {
                terms: terms.iter().map(|(w, f)| (*w, (*f).clone())).collect(),
            });
        }
        let mut acc: Option<Expr> = None;
        for (w, f) in terms {
            let ScalarFn::Expr(e) = f else { unreachable!() };
            let term = Expr::Mul(Box::new(Expr::number(*w)), Box::new(e.clone()));
            acc = Some(match acc {
                None => term,
                Some(a) => Expr::Add(Box::new(a), Box::new(term)),
            });
        }
        ScalarFn::Expr(acc.unwrap_or(Expr::Num(0.0)))
    }
}

impl From<Expr> for ScalarFn {
    fn from(e: Expr) -> Self {
        ScalarFn::Expr(e)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarFnRepr {
    Expr(String),
    Number(f64),
    Table(Table),
    Combination(Combination),
}

impl Serialize for ScalarFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ScalarFn::Expr(e) => s.collect_str(e),
            ScalarFn::Table(t) => t.serialize(s),
            ScalarFn::Combination(c) => c.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ScalarFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ScalarFnRepr::deserialize(d)? {
            ScalarFnRepr::Expr(text) => ScalarFn::parse(&text).map_err(serde::de::Error::custom),
            ScalarFnRepr::Number(v) => Ok(ScalarFn::constant(v)),
            ScalarFnRepr::Table(t) => {
                t.validate().map_err(serde::de::Error::custom)?;
                Ok(ScalarFn::Table(t))
            }
            ScalarFnRepr::Combination(c) => Ok(ScalarFn::Combination(c)),
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Expr(e) => write!(f, "{e}"),
            ScalarFn::Table(t) => write!(f, "table({:?}, {} points)", t.var, t.points.len()),
            ScalarFn::Combination(c) => {
                for (i, (w, g)) in c.terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{w}*[{g}]")?;
                }
                Ok(())
            }
        }
    }
}
