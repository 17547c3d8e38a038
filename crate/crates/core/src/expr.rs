//! Expression language for metric components.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' signed-number)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//!
//! Identifiers match `[a-z][a-z0-9_]*` and name variables bound at
//! evaluation time; the function set is exactly `sqrt`, `exp`, `log`, `sin`,
//! `cos`. Exponents are numeric literals: integral ones (any sign) evaluate
//! by repeated squaring, fractional ones require a positive base. Note that
//! per the grammar `-x^2` parses as `(-x)^2`; the canonical printer always
//! parenthesizes such bases.
//!
//! The same syntax tree evaluates over jets (driving the differentiation
//! pipeline) and over plain scalars (for cheap sampling), through the
//! [`EvalContext`] abstraction.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetConfig};
use crate::num::{real, Real};

/// Binary arithmetic operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Built-in univariate functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(String),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Base raised to a literal exponent.
    Pow(Box<Expr>, f64),
}

/// Supplies variable bindings and scalar embedding during evaluation.
pub trait EvalContext {
    type Value: Clone;

    fn constant(&self, value: f64) -> Self::Value;
    fn variable(&self, name: &str) -> Result<Self::Value>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn neg(&self, a: &Self::Value) -> Result<Self::Value>;
    fn call(&self, func: Func, a: &Self::Value) -> Result<Self::Value>;
    fn powi(&self, a: &Self::Value, k: i64) -> Result<Self::Value>;
    fn powf(&self, a: &Self::Value, r: f64) -> Result<Self::Value>;
}

impl Expr {
    /// Parses `source`; errors carry 1-based line and column positions.
    pub fn parse(source: &str) -> Result<Expr> {
        let tokens = lex(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        parser.expect_eof()?;
        Ok(expr)
    }

    /// Evaluates under the given context.
    pub fn eval<C: EvalContext>(&self, ctx: &C) -> Result<C::Value> {
        match self {
            Expr::Number(v) => Ok(ctx.constant(*v)),
            Expr::Var(name) => ctx.variable(name),
            Expr::Neg(a) => {
                let a = a.eval(ctx)?;
                ctx.neg(&a)
            }
            Expr::Call(func, a) => {
                let a = a.eval(ctx)?;
                ctx.call(*func, &a)
            }
            Expr::Bin(op, a, b) => {
                let a = a.eval(ctx)?;
                let b = b.eval(ctx)?;
                match op {
                    BinOp::Add => ctx.add(&a, &b),
                    BinOp::Sub => ctx.sub(&a, &b),
                    BinOp::Mul => ctx.mul(&a, &b),
                    BinOp::Div => ctx.div(&a, &b),
                }
            }
            Expr::Pow(base, exponent) => {
                let base = base.eval(ctx)?;
                if exponent.fract() == 0.0 && exponent.abs() < 2e9 {
                    ctx.powi(&base, *exponent as i64)
                } else {
                    ctx.powf(&base, *exponent)
                }
            }
        }
    }

    /// All variable names appearing in the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Number(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Pow(a, _) => a.collect_variables(out),
            Expr::Bin(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Number(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min: u8) -> fmt::Result {
            if child.precedence() < min {
                write!(f, "(")?;
                write!(f, "{child}")?;
                write!(f, ")")
            } else {
                write!(f, "{child}")
            }
        }
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                // A power child must be parenthesized: the grammar reads
                // -a^k as (-a)^k, which is a different tree.
                let min = if matches!(**a, Expr::Pow(..)) { 5 } else { 3 };
                write_child(f, a, min)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let (sym, lvl) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                };
                write_child(f, a, lvl)?;
                write!(f, " {sym} ")?;
                // Right operand needs one level more so that a - (b - c) and
                // a / (b / c) keep their grouping.
                write_child(f, b, lvl + 1)
            }
            Expr::Pow(base, exponent) => {
                // Only plain atoms may appear unparenthesized as a base.
                if base.precedence() == 5 {
                    write!(f, "{base}^{exponent}")
                } else {
                    write!(f, "({base})^{exponent}")
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(source: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let bytes: Vec<char> = source.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let (tline, tcol) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '+' => {
                out.push(Spanned { tok: Tok::Plus, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            '-' => {
                out.push(Spanned { tok: Tok::Minus, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            '*' => {
                out.push(Spanned { tok: Tok::Star, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            '/' => {
                out.push(Spanned { tok: Tok::Slash, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, line: tline, col: tcol });
                advance(1, &mut i, &mut col);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == '.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(Error::Parse {
                            line,
                            col: col + (i - start),
                            msg: "expected digits after decimal point".into(),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mark = i;
                    i += 1;
                    if i < bytes.len() && (bytes[i] == '+' || bytes[i] == '-') {
                        i += 1;
                    }
                    if i < bytes.len() && bytes[i].is_ascii_digit() {
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        // Not an exponent marker after all; back off so the
                        // `e` lexes as the start of an identifier.
                        i = mark;
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    line,
                    col: tcol,
                    msg: format!("bad number literal '{text}'"),
                })?;
                col += i - start;
                out.push(Spanned { tok: Tok::Number(value), line: tline, col: tcol });
            }
            c if c.is_ascii_lowercase() => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_lowercase()
                        || bytes[i].is_ascii_digit()
                        || bytes[i] == '_')
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                col += i - start;
                out.push(Spanned { tok: Tok::Ident(text), line: tline, col: tcol });
            }
            other => {
                return Err(Error::Parse {
                    line: tline,
                    col: tcol,
                    msg: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.tokens.get(self.pos) {
            Some(s) => (s.line, s.col),
            None => self
                .tokens
                .last()
                .map(|s| (s.line, s.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        Error::Parse { line, col, msg: msg.into() }
    }

    fn expect_eof(&self) -> Result<()> {
        if self.pos == self.tokens.len() {
            Ok(())
        } else {
            Err(self.error("expected end of expression"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            acc = Expr::Bin(op, Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            acc = Expr::Bin(op, Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let negative = if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                true
            } else {
                false
            };
            match self.bump() {
                Some(Tok::Number(v)) => {
                    let exponent = if negative { -v } else { v };
                    Ok(Expr::Pow(Box::new(base), exponent))
                }
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    Err(self.error("exponent must be a numeric literal"))
                }
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Number(v)) => {
                self.bump();
                Ok(Expr::Number(v))
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let func = Func::from_name(&name)
                        .ok_or(Error::UnknownFunction { name: name.clone() })?;
                    self.bump();
                    let inner = self.expr()?;
                    match self.bump() {
                        Some(Tok::RParen) => Ok(Expr::Call(func, Box::new(inner))),
                        _ => {
                            self.pos = self.pos.saturating_sub(1);
                            Err(self.error("expected ')'"))
                        }
                    }
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        Err(self.error("expected ')'"))
                    }
                }
            }
            Some(Tok::Minus) => {
                self.bump();
                let inner = self.atom()?;
                Ok(Expr::Neg(Box::new(inner)))
            }
            _ => Err(self.error("expected a number, variable, function call, or '('")),
        }
    }
}

/// Evaluation over jets; variables resolve through a closure so callers can
/// bind `x1..xn, y1..yn` (or any other naming) without building maps.
pub struct JetContext<'a, T: Real> {
    config: JetConfig,
    resolve: Box<dyn Fn(&str) -> Option<Jet<T>> + 'a>,
    expected: Vec<String>,
}

impl<'a, T: Real> JetContext<'a, T> {
    pub fn new(
        config: JetConfig,
        expected: Vec<String>,
        resolve: impl Fn(&str) -> Option<Jet<T>> + 'a,
    ) -> Self {
        JetContext { config, resolve: Box::new(resolve), expected }
    }
}

impl<'a, T: Real> EvalContext for JetContext<'a, T> {
    type Value = Jet<T>;

    fn constant(&self, value: f64) -> Jet<T> {
        Jet::constant(&self.config, real::<T>(value))
    }

    fn variable(&self, name: &str) -> Result<Jet<T>> {
        (self.resolve)(name).ok_or_else(|| Error::UnknownVariable {
            name: name.into(),
            expected: self.expected.join(", "),
        })
    }

    fn add(&self, a: &Jet<T>, b: &Jet<T>) -> Result<Jet<T>> {
        a.add(b)
    }

    fn sub(&self, a: &Jet<T>, b: &Jet<T>) -> Result<Jet<T>> {
        a.sub(b)
    }

    fn mul(&self, a: &Jet<T>, b: &Jet<T>) -> Result<Jet<T>> {
        a.mul(b)
    }

    fn div(&self, a: &Jet<T>, b: &Jet<T>) -> Result<Jet<T>> {
        a.div(b)
    }

    fn neg(&self, a: &Jet<T>) -> Result<Jet<T>> {
        Ok(a.neg())
    }

    fn call(&self, func: Func, a: &Jet<T>) -> Result<Jet<T>> {
        match func {
            Func::Sqrt => a.sqrt(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
        }
    }

    fn powi(&self, a: &Jet<T>, k: i64) -> Result<Jet<T>> {
        a.powi(k)
    }

    fn powf(&self, a: &Jet<T>, r: f64) -> Result<Jet<T>> {
        a.powf(real::<T>(r))
    }
}

/// Evaluation over plain scalars with the same domain rules as jets.
pub struct ScalarContext<'a, T: Real> {
    resolve: Box<dyn Fn(&str) -> Option<T> + 'a>,
    expected: Vec<String>,
}

impl<'a, T: Real> ScalarContext<'a, T> {
    pub fn new(expected: Vec<String>, resolve: impl Fn(&str) -> Option<T> + 'a) -> Self {
        ScalarContext { resolve: Box::new(resolve), expected }
    }
}

impl<'a, T: Real> EvalContext for ScalarContext<'a, T> {
    type Value = T;

    fn constant(&self, value: f64) -> T {
        real::<T>(value)
    }

    fn variable(&self, name: &str) -> Result<T> {
        (self.resolve)(name).ok_or_else(|| Error::UnknownVariable {
            name: name.into(),
            expected: self.expected.join(", "),
        })
    }

    fn add(&self, a: &T, b: &T) -> Result<T> {
        Ok(*a + *b)
    }

    fn sub(&self, a: &T, b: &T) -> Result<T> {
        Ok(*a - *b)
    }

    fn mul(&self, a: &T, b: &T) -> Result<T> {
        Ok(*a * *b)
    }

    fn div(&self, a: &T, b: &T) -> Result<T> {
        if *b == T::zero() {
            return Err(Error::Domain { func: "div", value: 0.0 });
        }
        Ok(*a / *b)
    }

    fn neg(&self, a: &T) -> Result<T> {
        Ok(-*a)
    }

    fn call(&self, func: Func, a: &T) -> Result<T> {
        let bad = |f: &'static str| Error::Domain { func: f, value: a.to_f64().unwrap_or(f64::NAN) };
        Ok(match func {
            Func::Sqrt => {
                if *a <= T::zero() {
                    return Err(bad("sqrt"));
                }
                a.sqrt()
            }
            Func::Exp => a.exp(),
            Func::Log => {
                if *a <= T::zero() {
                    return Err(bad("log"));
                }
                a.ln()
            }
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
        })
    }

    fn powi(&self, a: &T, k: i64) -> Result<T> {
        if k < 0 && *a == T::zero() {
            return Err(Error::Domain { func: "div", value: 0.0 });
        }
        Ok(a.powi(k as i32))
    }

    fn powf(&self, a: &T, r: f64) -> Result<T> {
        if *a <= T::zero() {
            return Err(Error::Domain { func: "pow", value: a.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(a.powf(real::<T>(r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval_at(src: &str, bindings: &[(&str, f64)]) -> Result<f64> {
        let expr = Expr::parse(src)?;
        let names: Vec<String> = bindings.iter().map(|(n, _)| n.to_string()).collect();
        let ctx = ScalarContext::<f64>::new(names, |name| {
            bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
        });
        expr.eval(&ctx)
    }

    #[test]
    fn precedence_and_grouping() {
        assert_eq!(eval_at("1 + 2 * 3", &[]).unwrap(), 7.0);
        assert_eq!(eval_at("(1 + 2) * 3", &[]).unwrap(), 9.0);
        assert_eq!(eval_at("2 ^ 3 * 2", &[]).unwrap(), 16.0);
        assert_eq!(eval_at("12 / 2 / 3", &[]).unwrap(), 2.0);
        assert_eq!(eval_at("8 - 3 - 1", &[]).unwrap(), 4.0);
        assert_eq!(eval_at("2 ^ -2", &[]).unwrap(), 0.25);
        // Per the grammar the sign binds inside the power.
        assert_eq!(eval_at("-2 ^ 2", &[]).unwrap(), 4.0);
    }

    #[test]
    fn scientific_numbers_parse() {
        assert_eq!(eval_at("1e-3", &[]).unwrap(), 1e-3);
        assert_eq!(eval_at("2.5E+2", &[]).unwrap(), 250.0);
        assert_eq!(eval_at("1e2", &[]).unwrap(), 100.0);
        // `e` not followed by an exponent is an identifier.
        assert_eq!(eval_at("2e", &[("e", 3.0)]).is_err(), true); // 2e = juxtaposition, rejected
    }

    #[test]
    fn malformed_inputs_report_positions() {
        match Expr::parse("1 + * 2") {
            Err(Error::Parse { line: 1, col: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match Expr::parse("x1 +\n  (y1") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("5.").is_err());
        assert!(Expr::parse(".5").is_err());
        assert!(Expr::parse("x^y").is_err());
        assert!(Expr::parse("2x").is_err());
    }

    #[test]
    fn only_the_five_functions_exist() {
        assert!(Expr::parse("sqrt(x1)").is_ok());
        assert!(Expr::parse("cos(sin(exp(log(x1))))").is_ok());
        for bad in ["abs(x1)", "min(x1)", "max(x1)", "tan(x1)", "sinh(x1)"] {
            match Expr::parse(bad) {
                Err(Error::UnknownFunction { .. }) => {}
                other => panic!("{bad}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_variables_list_expectations() {
        let err = eval_at("x1 + q7", &[("x1", 1.0)]).unwrap_err();
        match err {
            Error::UnknownVariable { name, expected } => {
                assert_eq!(name, "q7");
                assert!(expected.contains("x1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn domain_violations_surface() {
        assert!(matches!(eval_at("sqrt(0 - 1)", &[]), Err(Error::Domain { func: "sqrt", .. })));
        assert!(matches!(eval_at("log(0)", &[]), Err(Error::Domain { func: "log", .. })));
        assert!(matches!(eval_at("1 / (1 - 1)", &[]), Err(Error::Domain { func: "div", .. })));
        assert!(matches!(eval_at("(0 - 2) ^ 0.5", &[]), Err(Error::Domain { func: "pow", .. })));
        // Integral exponents of negative bases are fine.
        assert_eq!(eval_at("(0 - 2) ^ 3", &[]).unwrap(), -8.0);
    }

    #[test]
    fn fractional_power_matches_sqrt() {
        let via_pow = eval_at("x1 ^ 0.5", &[("x1", 7.3)]).unwrap();
        let via_sqrt = eval_at("sqrt(x1)", &[("x1", 7.3)]).unwrap();
        assert!((via_pow - via_sqrt).abs() < 1e-15);
    }

    #[test]
    fn variables_are_collected_sorted() {
        let expr = Expr::parse("y2 * x1 + sin(x2) - y1 ^ 2").unwrap();
        let vars: Vec<String> = expr.variables().into_iter().collect();
        assert_eq!(vars, ["x1", "x2", "y1", "y2"]);
    }

    #[test]
    fn jet_and_scalar_evaluation_agree() {
        let src = "sqrt(x1 ^ 2 + y1 ^ 2) * exp(x2 / 3) - sin(y2) / (2 + cos(x1))";
        let expr = Expr::parse(src).unwrap();
        let vals = [("x1", 0.7), ("x2", -0.4), ("y1", 1.2), ("y2", 0.9)];
        let scalar = {
            let ctx = ScalarContext::<f64>::new(vec![], |n| {
                vals.iter().find(|(k, _)| *k == n).map(|(_, v)| *v)
            });
            expr.eval(&ctx).unwrap()
        };
        let cfg = JetConfig::get(4, 3).unwrap();
        let jet = {
            let ctx = JetContext::<f64>::new(cfg.clone(), vec![], |n| {
                let var = match n {
                    "x1" => 0,
                    "x2" => 1,
                    "y1" => 2,
                    "y2" => 3,
                    _ => return None,
                };
                let v = vals.iter().find(|(k, _)| *k == n).map(|(_, v)| *v)?;
                Some(Jet::variable(&cfg, var, v).unwrap())
            });
            expr.eval(&ctx).unwrap()
        };
        assert!((jet.value() - scalar).abs() < 1e-14);
        // Spot check one derivative against the finite difference oracle.
        let f = |p: &[f64]| {
            (p[0] * p[0] + p[2] * p[2]).sqrt() * (p[1] / 3.0).exp()
                - p[3].sin() / (2.0 + p[0].cos())
        };
        let point = [0.7, -0.4, 1.2, 0.9];
        let fd = crate::jet::finite_difference_partial(&f, &point, &[1, 0, 1, 0], 1e-3);
        let jd = jet.derivative(&[1, 0, 1, 0]).unwrap();
        assert!((fd - jd).abs() < 1e-8, "fd {fd} vs jet {jd}");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.1f64..9.5).prop_map(|v| Expr::Number((v * 100.0).round() / 100.0)),
            prop_oneof![Just("x1"), Just("x2"), Just("y1")].prop_map(|s| Expr::Var(s.into())),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)
                ])
                    .prop_map(|(a, b, op)| Expr::Bin(op, Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), prop_oneof![Just(Func::Sqrt), Just(Func::Exp), Just(Func::Sin)])
                    .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
                (inner, -3i32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k as f64)),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn printing_round_trips(expr in arb_expr()) {
            let printed = expr.to_string();
            let reparsed = Expr::parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &expr);
            // Printing is a fixed point.
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
