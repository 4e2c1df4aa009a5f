//! Scalar expression language for nonlinearities and forcing terms.
//!
//! Grammar (whitespace ignored between tokens):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;              (* right associative *)
//! primary = number | "pi" | "e" | variable
//!         | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "tan" | "atan" | "exp" | "ln"
//!         | "abs" | "sgn" | "sqrt" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```
//!
//! The variable of a nonlinearity is `s`; forcing expressions use `x` and `y`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    S,
    X,
    Y,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::S => "s",
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Ln,
    Abs,
    Sgn,
    Sqrt,
}

impl Func {
    const ALL: [Func; 9] =
        [Func::Sin, Func::Cos, Func::Tan, Func::Atan, Func::Exp, Func::Ln, Func::Abs, Func::Sgn, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Atan => x.atan(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Abs => x.abs(),
            // sgn(0) = 0, unlike Float::signum
            Func::Sgn => {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    x
                }
            }
            Func::Sqrt => x.sqrt(),
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values bound to the variables during evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<T> {
    pub s: T,
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => *offset,
        }
    }
}

/// Parses an expression in the variable `s`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    Parser::new(text, &[Var::S]).parse_all()
}

/// Parses an expression over the spatial variables `x`, `y`.
pub fn parse_field(text: &str) -> Result<Expr, ParseError> {
    Parser::new(text, &[Var::X, Var::Y]).parse_all()
}

/// Parses an expression with no variables at all.
pub fn parse_constant(text: &str) -> Result<Expr, ParseError> {
    Parser::new(text, &[]).parse_all()
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

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
    vars: &'a [Var],
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, vars: &'a [Var]) -> Self {
        Self { src, pos: 0, tok: Tok::End, tok_start: 0, vars }
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        self.advance()?;
        let e = self.expr()?;
        if self.tok != Tok::End {
            return Err(self.syntax("unexpected trailing input"));
        }
        Ok(e)
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.tok_start, message: message.to_string() }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        if c.is_ascii_digit() || (c == b'.' && bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit)) {
            let start = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos < bytes.len() && bytes[self.pos] == b'.' {
                self.pos += 1;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
            // exponent only if digits follow, so "2e" stays "2" then identifier "e"
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let mut p = self.pos + 1;
                if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                    p += 1;
                }
                if p < bytes.len() && bytes[p].is_ascii_digit() {
                    while p < bytes.len() && bytes[p].is_ascii_digit() {
                        p += 1;
                    }
                    self.pos = p;
                }
            }
            let text = &self.src[start..self.pos];
            let v: f64 = text.parse().map_err(|_| self.syntax("malformed number"))?;
            self.tok = Tok::Num(v);
            return Ok(());
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
            return Ok(());
        }
        self.pos += 1;
        self.tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                // step over the full UTF-8 character for the message
                let ch = self.src[self.tok_start..].chars().next().unwrap_or('?');
                return Err(self.syntax(&format!("unexpected character '{ch}'")));
            }
        };
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = self.tok {
            self.advance()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = self.tok {
            self.advance()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.advance()?;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.advance()?;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(self.syntax("expected ')'"));
                }
                self.advance()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let offset = self.tok_start;
                self.advance()?;
                if let Some(f) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return Err(self.syntax(&format!("expected '(' after function '{name}'")));
                    }
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(self.syntax("expected ')'"));
                    }
                    self.advance()?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    other => match self.vars.iter().find(|v| v.name() == other) {
                        Some(&v) => Ok(Expr::Var(v)),
                        None => Err(ParseError::UnknownIdentifier { offset, name }),
                    },
                }
            }
            Tok::End => Err(self.syntax("unexpected end of input")),
            Tok::RParen => Err(self.syntax("unexpected ')'")),
            Tok::Op(c) => Err(self.syntax(&format!("unexpected operator '{c}'"))),
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var() -> Expr {
        Expr::Var(Var::S)
    }

    /// Evaluates with `s` bound.
    pub fn eval<T: Real>(&self, s: T) -> T {
        self.eval_env(&Env { s, x: T::zero(), y: T::zero() })
    }

    pub fn eval_env<T: Real>(&self, env: &Env<T>) -> T {
        match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Const(Constant::Pi) => T::PI(),
            Expr::Const(Constant::E) => T::E(),
            Expr::Var(Var::S) => env.s,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::Y) => env.y,
            Expr::Neg(a) => -a.eval_env(env),
            Expr::Bin(op, a, b) => {
                let x = a.eval_env(env);
                let y = b.eval_env(env);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => pow(x, y),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval_env(env)),
        }
    }

    /// True when the tree mentions the given variable.
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v,
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Bin(_, a, b) => a.depends_on(v) || b.depends_on(v),
        }
    }

    pub fn is_constant(&self) -> bool {
        !(self.depends_on(Var::S) || self.depends_on(Var::X) || self.depends_on(Var::Y))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Bin(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Symbolic derivative with respect to `s`.
    ///
    /// Conventions: d|u|/ds = sgn(u)·u′ and d sgn(u)/ds = 0 everywhere,
    /// including at u = 0. Only trivial folding of 0 and 1 is applied.
    pub fn differentiate(&self) -> Expr {
        self.diff(Var::S)
    }

    fn diff(&self, v: Var) -> Expr {
        use Expr as E;
        match self {
            E::Num(_) | E::Const(_) => E::Num(0.0),
            E::Var(w) => E::Num(if *w == v { 1.0 } else { 0.0 }),
            E::Neg(a) => neg(a.diff(v)),
            E::Bin(op, a, b) => {
                let (da, db) = (a.diff(v), b.diff(v));
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    BinOp::Div => div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        powc((**b).clone(), 2.0),
                    ),
                    BinOp::Pow => {
                        if !b.depends_on(v) {
                            // b · a^(b−1) · a′
                            let exp_minus_one = match **b {
                                E::Num(n) => E::Num(n - 1.0),
                                _ => sub((**b).clone(), E::Num(1.0)),
                            };
                            mul(mul((**b).clone(), pow_expr((**a).clone(), exp_minus_one)), da)
                        } else {
                            // a^b · (b′ ln a + b a′ / a)
                            mul(
                                self.clone(),
                                add(
                                    mul(db, call(Func::Ln, (**a).clone())),
                                    div(mul((**b).clone(), da), (**a).clone()),
                                ),
                            )
                        }
                    }
                }
            }
            E::Call(f, a) => {
                let da = a.diff(v);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => add(E::Num(1.0), powc(call(Func::Tan, inner), 2.0)),
                    Func::Atan => div(E::Num(1.0), add(E::Num(1.0), powc(inner, 2.0))),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Ln => div(E::Num(1.0), inner),
                    Func::Abs => call(Func::Sgn, inner),
                    Func::Sgn => E::Num(0.0),
                    Func::Sqrt => div(E::Num(1.0), mul(E::Num(2.0), call(Func::Sqrt, inner))),
                };
                mul(outer, da)
            }
        }
    }
}

fn pow<T: Real>(x: T, y: T) -> T {
    // integer exponents through powi so negative bases work
    if y.fract() == T::zero() && y.abs() <= T::lit(64.0) {
        x.powi(y.to_i32().unwrap_or(0))
    } else {
        x.powf(y)
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(n) if *n == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return b;
    }
    if is_num(&b, 0.0) {
        return a;
    }
    Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return neg(b);
    }
    Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        return Expr::Num(0.0);
    }
    if is_num(&a, 1.0) {
        return b;
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return Expr::Num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(n) if n == 0.0 => Expr::Num(0.0),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow_expr(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&b, 0.0) {
        return Expr::Num(1.0);
    }
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

fn powc(a: Expr, n: f64) -> Expr {
    pow_expr(a, Expr::Num(n))
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Fully parenthesized printing; re-parses to a structurally equal tree
/// for every tree the parser can produce.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Const(Constant::Pi) => write!(f, "pi"),
            Expr::Const(Constant::E) => write!(f, "e"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
