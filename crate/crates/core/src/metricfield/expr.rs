//! Expression DSL for metric components.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | 'x'<index> | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt
//! ```

use std::fmt;

use crate::error::{LkError, Result};

use super::jet::Jet2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(usize),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Pi => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Value of a variable-free subtree.
    fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Pi => Some(std::f64::consts::PI),
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            _ => None,
        }
    }

    /// Plain floating-point evaluation (no derivatives).
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Var(i) => Ok(point[*i]),
            Expr::Neg(a) => Ok(-a.eval(point)?),
            Expr::Call(f, a) => {
                let u = a.eval(point)?;
                let v = match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Tan => {
                        if u.cos() == 0.0 {
                            return Err(self.domain("tangent pole"));
                        }
                        u.tan()
                    }
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.domain(format!("log of {u}")));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(self.domain(format!("sqrt of {u}")));
                        }
                        u.sqrt()
                    }
                };
                Ok(v)
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(point)?;
                match op {
                    BinOp::Add => Ok(x + b.eval(point)?),
                    BinOp::Sub => Ok(x - b.eval(point)?),
                    BinOp::Mul => Ok(x * b.eval(point)?),
                    BinOp::Div => {
                        let y = b.eval(point)?;
                        if y == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        Ok(x / y)
                    }
                    BinOp::Pow => match integer_exponent(b) {
                        Some(k) => Ok(x.powi(k)),
                        None => {
                            if x <= 0.0 {
                                return Err(self.domain(format!("non-integer power of {x}")));
                            }
                            Ok((b.eval(point)? * x.ln()).exp())
                        }
                    },
                }
            }
        }
    }

    /// Second-order jet of the expression at `point`, differentiating with
    /// respect to all `point.len()` coordinates.
    pub fn eval_jet2(&self, point: &[f64]) -> Result<Jet2> {
        let n = point.len();
        match self {
            Expr::Num(v) => Ok(Jet2::constant(n, *v)),
            Expr::Pi => Ok(Jet2::constant(n, std::f64::consts::PI)),
            Expr::Var(i) => Ok(Jet2::variable(n, *i, point[*i])),
            Expr::Neg(a) => Ok(-a.eval_jet2(point)?),
            Expr::Call(f, a) => {
                let u = a.eval_jet2(point)?;
                match f {
                    Func::Sin => Ok(u.sin()),
                    Func::Cos => Ok(u.cos()),
                    Func::Tan => {
                        if u.value().cos() == 0.0 {
                            return Err(self.domain("tangent pole"));
                        }
                        Ok(u.tan())
                    }
                    Func::Exp => Ok(u.exp()),
                    Func::Log => {
                        if u.value() <= 0.0 {
                            return Err(self.domain(format!("log of {}", u.value())));
                        }
                        Ok(u.ln())
                    }
                    Func::Sqrt => {
                        if u.value() <= 0.0 {
                            return Err(self.domain(format!(
                                "sqrt of {} (not differentiable)",
                                u.value()
                            )));
                        }
                        Ok(u.sqrt())
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval_jet2(point)?;
                match op {
                    BinOp::Add => Ok(&x + &b.eval_jet2(point)?),
                    BinOp::Sub => Ok(&x - &b.eval_jet2(point)?),
                    BinOp::Mul => Ok(&x * &b.eval_jet2(point)?),
                    BinOp::Div => {
                        let y = b.eval_jet2(point)?;
                        if y.value() == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        Ok(&x / &y)
                    }
                    BinOp::Pow => match integer_exponent(b) {
                        Some(k) => Ok(x.powi(k)),
                        None => {
                            if x.value() <= 0.0 {
                                return Err(self.domain(format!(
                                    "non-integer power of {}",
                                    x.value()
                                )));
                            }
                            let y = b.eval_jet2(point)?;
                            Ok((&y * &x.ln()).exp())
                        }
                    },
                }
            }
        }
    }

    fn domain(&self, reason: impl Into<String>) -> LkError {
        LkError::Domain {
            expr: self.to_string(),
            reason: reason.into(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn integer_exponent(e: &Expr) -> Option<i32> {
    let v = e.constant_value()?;
    (v.fract() == 0.0 && v.abs() <= 1024.0).then_some(v as i32)
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let (left, right) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                write_child(f, a, left)?;
                write!(f, "{}", op.symbol())?;
                write_child(f, b, right)
            }
        }
    }
}

/// Parses `text` into an expression over the coordinates `x0..x{dim-1}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.syntax("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> LkError {
        LkError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.syntax(format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| LkError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !v.is_finite() {
            return Err(LkError::Syntax {
                offset: start,
                message: format!("number `{text}` overflows"),
            });
        }
        Ok(Expr::Num(v))
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax(format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(Expr::call(func, arg));
        }
        if let Some(idx) = name.strip_prefix('x') {
            if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = idx.parse().map_err(|_| LkError::UnknownIdentifier {
                    name: name.to_string(),
                    offset: start,
                })?;
                if index >= self.dim {
                    return Err(LkError::VariableOutOfRange {
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Expr::Var(index));
            }
        }
        Err(LkError::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })
    }
}
