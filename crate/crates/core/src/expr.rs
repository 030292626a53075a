//! Closed-form coordinate expressions: `x1^2 + x2^2`, `sqrt(1 - x1*x1)`, ...
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := power (('*' | '/') power)*
//! power   := unary ('^' power)?          right associative
//! unary   := '-' unary | primary
//! primary := number | 'x1'..'x8' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x1^2` is `(-x1)^2`.
//! Coordinates are 1-based in the text and 0-based in the tree.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jets::{Jet, JetContext, JetError};

pub const MAX_COORDS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("{func} takes {expected} argument(s), got {got} (byte {offset})")]
    Arity { func: &'static str, expected: usize, got: usize, offset: usize },
    #[error("coordinate x{} used in a {dim}-dimensional scenario", .index + 1)]
    CoordOutOfRange { index: usize, dim: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ExprError::Syntax { offset: start, message: format!("number `{text}` overflows") });
            }
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Op(c as char), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ExprError::Syntax { offset: i, message: format!("unexpected character `{ch}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.power()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.power()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if self.eat('^') {
            let exp = self.power()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.syntax("expected `)`");
                }
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(index) = coord_index(&name) {
                    return Ok(Expr::Coord(index));
                }
                let Some(func) = Func::lookup(&name) else {
                    return Err(ExprError::UnknownIdentifier { name, offset });
                };
                if !self.eat('(') {
                    return self.syntax(format!("expected `(` after `{name}`"));
                }
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                if !self.eat(')') {
                    return self.syntax("expected `)` or `,`");
                }
                if args.len() != func.arity() {
                    return Err(ExprError::Arity {
                        func: func.name(),
                        expected: func.arity(),
                        got: args.len(),
                        offset,
                    });
                }
                Ok(Expr::Call(func, args))
            }
            Some(Tok::Op(c)) => self.syntax(format!("unexpected `{c}`")),
            None => self.syntax("unexpected end of input"),
        }
    }
}

fn coord_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.len() != 1 {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    (1..=MAX_COORDS).contains(&k).then(|| k - 1)
}

pub fn parse(source: &str) -> Result<Expr, ExprError> {
    let toks = tokenize(source)?;
    let mut p = Parser { toks, pos: 0, end: source.len() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.syntax("trailing input");
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Binary(BinOp::Pow, ..) => 3,
        Expr::Neg(_) => 4,
        Expr::Number(v) if *v < 0.0 => 0,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v:?}"),
            Expr::Coord(i) => write!(f, "x{}", i + 1),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_child(f, inner, 4)
            }
            Expr::Binary(op, l, r) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 4, 3),
                };
                write_child(f, l, lp)?;
                f.write_str(sym)?;
                write_child(f, r, rp)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Arithmetic shared by the scalar and jet evaluators.
trait Scalar: Sized + Clone {
    fn num(&self, v: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, JetError>;
    fn neg(&self) -> Self;
    fn func(&self, f: Func) -> Result<Self, JetError>;
    fn powr(&self, r: f64) -> Result<Self, JetError>;
}

impl Scalar for f64 {
    fn num(&self, v: f64) -> Self {
        v
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self, JetError> {
        if !(o.abs() > crate::jets::DEFAULT_DIV_FLOOR) {
            return Err(JetError::DegenerateValue { op: "div", value: *o });
        }
        Ok(self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn func(&self, f: Func) -> Result<Self, JetError> {
        let a = *self;
        Ok(match f {
            Func::Sqrt if !(a > 0.0) => return Err(JetError::DomainError { func: "sqrt", value: a }),
            Func::Ln if !(a > 0.0) => return Err(JetError::DomainError { func: "ln", value: a }),
            Func::Sqrt => a.sqrt(),
            Func::Ln => a.ln(),
            Func::Exp => a.exp(),
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Pow => unreachable!("pow is binary"),
        })
    }
    fn powr(&self, r: f64) -> Result<Self, JetError> {
        let a = *self;
        if r.fract() == 0.0 && r.abs() <= i32::MAX as f64 {
            if r < 0.0 && !(a.abs() > crate::jets::DEFAULT_DIV_FLOOR) {
                return Err(JetError::DegenerateValue { op: "pow", value: a });
            }
            return Ok(a.powi(r as i32));
        }
        if !(a > 0.0) {
            return Err(JetError::DomainError { func: "pow", value: a });
        }
        Ok(a.powf(r))
    }
}

impl Scalar for Jet {
    fn num(&self, v: f64) -> Self {
        Jet::constant(self.context(), v)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self, JetError> {
        Jet::div(self, o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn func(&self, f: Func) -> Result<Self, JetError> {
        match f {
            Func::Sqrt => self.sqrt(),
            Func::Ln => self.ln(),
            Func::Exp => Ok(self.exp()),
            Func::Sin => Ok(self.sin()),
            Func::Cos => Ok(self.cos()),
            Func::Pow => unreachable!("pow is binary"),
        }
    }
    fn powr(&self, r: f64) -> Result<Self, JetError> {
        self.pow_real(r)
    }
}

impl Expr {
    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Number(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Neg(e) => e.max_coord(),
            Expr::Binary(_, l, r) => l.max_coord().max(r.max_coord()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_coord).max(),
        }
    }

    /// Reject coordinates outside a `dim`-dimensional chart.
    pub fn check_dim(&self, dim: usize) -> Result<(), ExprError> {
        match self.max_coord() {
            Some(i) if i >= dim => Err(ExprError::CoordOutOfRange { index: i, dim }),
            _ => Ok(()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_coord().is_none()
    }

    fn eval_generic<S: Scalar>(&self, vars: &[S]) -> Result<S, ExprError> {
        let proto = &vars[0];
        Ok(match self {
            Expr::Number(v) => proto.num(*v),
            Expr::Coord(i) => vars
                .get(*i)
                .cloned()
                .ok_or(ExprError::CoordOutOfRange { index: *i, dim: vars.len() })?,
            Expr::Neg(e) => e.eval_generic(vars)?.neg(),
            Expr::Binary(op, l, r) => {
                if *op == BinOp::Pow {
                    return power(l, r, vars);
                }
                let a = l.eval_generic(vars)?;
                let b = r.eval_generic(vars)?;
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => a.div(&b)?,
                    BinOp::Pow => unreachable!(),
                }
            }
            Expr::Call(Func::Pow, args) => power(&args[0], &args[1], vars)?,
            Expr::Call(f, args) => args[0].eval_generic(vars)?.func(*f)?,
        })
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        if point.is_empty() {
            return self.eval_generic(&[0.0]).and_then(|v| {
                if self.is_constant() {
                    Ok(v)
                } else {
                    Err(ExprError::CoordOutOfRange { index: self.max_coord().unwrap_or(0), dim: 0 })
                }
            });
        }
        self.eval_generic(point)
    }

    /// Evaluate with already-lifted coordinate jets (`coords[i]` is `x_{i+1}`).
    pub fn eval_jets(&self, coords: &[Jet]) -> Result<Jet, ExprError> {
        assert!(!coords.is_empty(), "at least one coordinate jet is required");
        self.eval_generic(coords)
    }
}

fn power<S: Scalar>(base: &Expr, exponent: &Expr, vars: &[S]) -> Result<S, ExprError> {
    let b = base.eval_generic(vars)?;
    if exponent.is_constant() {
        let r = exponent.eval_generic(&[0.0])?;
        return Ok(b.powr(r)?);
    }
    // variable exponent: exp(e * ln b)
    let e = exponent.eval_generic(vars)?;
    Ok(e.mul(&b.func(Func::Ln)?).func(Func::Exp)?)
}

/// Jet of `ast` with coordinates `x_{i+1}` lifted as variable `i` at `point[i]`.
pub fn eval_jet(ast: &Expr, ctx: &Arc<JetContext>, point: &[f64]) -> Result<Jet, ExprError> {
    if let Some(i) = ast.max_coord() {
        if i >= point.len() {
            return Err(ExprError::CoordOutOfRange { index: i, dim: point.len() });
        }
    }
    if point.len() > ctx.num_vars() {
        return Err(JetError::IndexOutOfRange { index: point.len() - 1, num_vars: ctx.num_vars() }.into());
    }
    let coords = point
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(ctx, i, v))
        .collect::<Result<Vec<_>, _>>()?;
    if coords.is_empty() {
        return Ok(Jet::constant(ctx, ast.eval(&[])?));
    }
    ast.eval_jets(&coords)
}

// Builders used when composing expressions programmatically.

pub fn num(v: f64) -> Expr {
    Expr::Number(v)
}

pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::Binary(op, Box::new(l), Box::new(r))
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        bin(BinOp::Add, self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        bin(BinOp::Sub, self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        bin(BinOp::Mul, self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        bin(BinOp::Div, self, rhs)
    }
}

impl Expr {
    pub fn pow(self, exponent: Expr) -> Expr {
        bin(BinOp::Pow, self, exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn b(op: BinOp, l: Expr, r: Expr) -> Expr {
        bin(op, l, r)
    }

    #[test]
    fn parse_sum_of_squares() {
        let e = parse("x1^2 + x2^2").unwrap();
        assert_eq!(
            e,
            b(
                BinOp::Add,
                b(BinOp::Pow, Expr::Coord(0), num(2.0)),
                b(BinOp::Pow, Expr::Coord(1), num(2.0))
            )
        );
    }

    #[test]
    fn parse_negated_coordinate() {
        assert_eq!(parse("-x2").unwrap(), Expr::Neg(Box::new(Expr::Coord(1))));
    }

    #[test]
    fn arity_is_checked() {
        assert!(matches!(
            parse("sqrt(x1, x2)"),
            Err(ExprError::Arity { func: "sqrt", expected: 1, got: 2, .. })
        ));
        assert!(matches!(parse("pow(x1)"), Err(ExprError::Arity { func: "pow", .. })));
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse("x1 + y").unwrap_err(),
            ExprError::UnknownIdentifier { name: "y".into(), offset: 5 }
        );
        assert!(matches!(parse("x9"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x0"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("(x1 + 2"), Err(ExprError::Syntax { offset: 7, .. })));
        assert!(matches!(parse("x1 $ 2"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("1e999"), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x1 x2"), Err(ExprError::Syntax { offset: 3, .. })));
    }

    #[test]
    fn precedence_rules() {
        // unary minus binds tighter than ^
        assert_eq!(parse("-x1^2").unwrap(), b(BinOp::Pow, Expr::Neg(Box::new(Expr::Coord(0))), num(2.0)));
        // ^ is right associative
        assert_eq!(
            parse("x1^2^3").unwrap(),
            b(BinOp::Pow, Expr::Coord(0), b(BinOp::Pow, num(2.0), num(3.0)))
        );
        assert_eq!(
            parse("1 - x1 - x2").unwrap(),
            b(BinOp::Sub, b(BinOp::Sub, num(1.0), Expr::Coord(0)), Expr::Coord(1))
        );
        assert_eq!(parse("2.5e-1*x1").unwrap(), b(BinOp::Mul, num(0.25), Expr::Coord(0)));
        assert_eq!(parse(".5").unwrap(), num(0.5));
        assert_eq!(parse("x2^-1").unwrap(), b(BinOp::Pow, Expr::Coord(1), Expr::Neg(Box::new(num(1.0)))));
    }

    #[test]
    fn eval_sum_of_squares_jet() {
        let ctx = JetContext::new(2, 2).unwrap();
        let j = eval_jet(&parse("x1^2+x2^2").unwrap(), &ctx, &[0.6, 0.0]).unwrap();
        assert_relative_eq!(j.value(), 0.36, epsilon = 1e-15);
        assert_relative_eq!(j.partial_vars(&[0]).unwrap(), 1.2, epsilon = 1e-15);
        assert_eq!(j.partial_vars(&[1]).unwrap(), 0.0);
        assert_eq!(j.partial_vars(&[0, 0]).unwrap(), 2.0);
        assert_eq!(j.partial_vars(&[1, 1]).unwrap(), 2.0);
        assert_eq!(j.partial_vars(&[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn eval_product_jet() {
        let ctx = JetContext::new(2, 2).unwrap();
        let j = eval_jet(&parse("x1*x2").unwrap(), &ctx, &[2.0, 3.0]).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.partial_vars(&[0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn eval_domain_errors() {
        let ctx = JetContext::new(2, 2).unwrap();
        let err = eval_jet(&parse("ln(x1)").unwrap(), &ctx, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, ExprError::Jet(JetError::DomainError { func: "ln", .. })));
        let err = eval_jet(&parse("x1^0.5").unwrap(), &ctx, &[-1.0, 1.0]).unwrap_err();
        assert!(matches!(err, ExprError::Jet(JetError::DomainError { .. })));
        // integer literal exponents work for any base
        assert_eq!(eval_jet(&parse("x1^3").unwrap(), &ctx, &[-2.0, 1.0]).unwrap().value(), -8.0);
        assert!(parse("x1/x2").unwrap().eval(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn dimension_checks() {
        let e = parse("x3 + 1").unwrap();
        assert_eq!(e.check_dim(2).unwrap_err(), ExprError::CoordOutOfRange { index: 2, dim: 2 });
        assert!(e.check_dim(3).is_ok());
        let ctx = JetContext::new(2, 1).unwrap();
        assert!(eval_jet(&e, &ctx, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn variable_exponent() {
        let e = parse("x1^x2").unwrap();
        let ctx = JetContext::new(2, 2).unwrap();
        let j = eval_jet(&e, &ctx, &[2.0, 3.0]).unwrap();
        assert_relative_eq!(j.value(), 8.0, epsilon = 1e-14);
        // d/dx2 = x1^x2 ln x1
        assert_relative_eq!(j.partial_vars(&[1]).unwrap(), 8.0 * 2f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(parse("pow(x1, 0.5)").unwrap().eval(&[4.0]).unwrap(), 2.0);
    }

    #[test]
    fn print_reparses() {
        for src in ["-x1^2", "x1 - (x2 - 3)", "1/(x1*x2)", "(x1^2)^3", "-(x1 + x2)", "sin(x1)*cos(-x2)^2", "2^3^x1"] {
            let ast = parse(src).unwrap();
            assert_eq!(parse(&ast.to_string()).unwrap(), ast, "{src} -> {ast}");
        }
    }
}
