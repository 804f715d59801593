//! Infix grammar and printer.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' sum ')' | '(' sum ')'
//! ```
//!
//! Exponents must fold to a rational constant. Identifiers `x` and `y` are
//! the coordinates, `name(...)` is an opaque function application (names
//! may end in `'`), and any other identifier is looked up in the
//! substitution map passed to [`parse_with`].

use std::collections::HashMap;
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use super::{Expr, Node, Var};
use crate::scalar::{format_rational, is_integer, parse_rational, rational_pow, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unexpected {found} at offset {pos}")]
    UnexpectedToken { pos: usize, found: String },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("exponent at offset {pos} is not a rational constant")]
    NonConstantExponent { pos: usize },
    #[error("malformed number {0:?}")]
    BadNumber(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(q) => format!("number {}", format_rational(q)),
        Tok::Ident(s) => format!("identifier {s:?}"),
        Tok::Op(c) => format!("{c:?}"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            let mantissa: String = chars[start..i].iter().map(|p| p.1).collect();
            let mut value = parse_rational(&mantissa).ok_or_else(|| ParseError::BadNumber(mantissa.clone()))?;
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                let digits_start = j;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                if j > digits_start {
                    let exp: String = chars[i + 1..j].iter().map(|p| p.1).collect();
                    let exp: i32 = exp.parse().map_err(|_| ParseError::BadNumber(exp.clone()))?;
                    let ten = Rational::from_integer(10.into());
                    value *= num_traits::pow::Pow::pow(&ten, exp);
                    i = j;
                }
            }
            out.push((pos, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i].1 == '\'' {
                i += 1;
            }
            out.push((pos, Tok::Ident(chars[start..i].iter().map(|p| p.1).collect())));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(ParseError::UnexpectedChar { pos, ch: c }),
            };
            out.push((pos, t));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    subs: &'a HashMap<String, Expr>,
    /// When set, this identifier is the only variable and maps to `x`.
    single: Option<&'a str>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0).unwrap_or(usize::MAX)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.1.clone());
        self.at += 1;
        t
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Some(Tok::RParen) => Ok(()),
            Some(t) => Err(ParseError::UnexpectedToken { pos: self.toks[self.at - 1].0, found: describe(&t) }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let c = *c;
            self.bump();
            let rhs = self.product()?;
            lhs = fold(if c == '+' { Node::Add(lhs, rhs) } else { Node::Sub(lhs, rhs) });
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let c = *c;
            self.bump();
            let rhs = self.unary()?;
            lhs = fold(if c == '*' { Node::Mul(lhs, rhs) } else { Node::Div(lhs, rhs) });
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.bump();
                let inner = self.unary()?;
                Ok(fold(Node::Neg(inner)))
            }
            Some(Tok::Op('+')) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.bump();
            let pos = self.pos();
            let exp = self.unary()?;
            let q = const_value(&exp).ok_or(ParseError::NonConstantExponent { pos })?;
            return Ok(fold(Node::Pow(base, q)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(q)) => Ok(Expr::constant(q)),
            Some(Tok::LParen) => {
                let e = self.sum()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(Expr::func(&name, arg));
                }
                if let Some(v) = self.single {
                    return if name == v { Ok(Expr::var(Var::X)) } else { Err(ParseError::UnknownIdentifier(name)) };
                }
                match name.as_str() {
                    "x" => Ok(Expr::var(Var::X)),
                    "y" => Ok(Expr::var(Var::Y)),
                    _ => self.subs.get(&name).cloned().ok_or(ParseError::UnknownIdentifier(name)),
                }
            }
            Some(t) => Err(ParseError::UnexpectedToken { pos, found: describe(&t) }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }
}

fn const_value(e: &Expr) -> Option<Rational> {
    match e.node() {
        Node::Const(q) => Some(q.clone()),
        Node::Neg(a) => const_value(a).map(|q| -q),
        Node::Add(a, b) => Some(const_value(a)? + const_value(b)?),
        Node::Sub(a, b) => Some(const_value(a)? - const_value(b)?),
        Node::Mul(a, b) => Some(const_value(a)? * const_value(b)?),
        Node::Div(a, b) => {
            let d = const_value(b)?;
            if d.is_zero() {
                None
            } else {
                Some(const_value(a)? / d)
            }
        }
        Node::Pow(a, q) => rational_pow(&const_value(a)?, q),
        _ => None,
    }
}

/// Builds a node, folding it when all operands are constants and the result
/// is an exact rational.
fn fold(node: Node) -> Expr {
    let e = Expr::from_node(node);
    let folds = match e.node() {
        Node::Neg(a) => a.as_const().is_some(),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            a.as_const().is_some() && b.as_const().is_some()
        }
        Node::Pow(a, _) => a.as_const().is_some(),
        _ => false,
    };
    if folds {
        if let Some(q) = const_value(&e) {
            return Expr::constant(q);
        }
    }
    e
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    parse_with(src, &HashMap::new())
}

/// Parses with named sub-expressions: `parse_with("Ebar(f)", {f: x*y})`.
pub fn parse_with(src: &str, subs: &HashMap<String, Expr>) -> Result<Expr, ParseError> {
    run(src, subs, None)
}

/// Parses a function of one variable called `var`; the result uses `x` as
/// the placeholder. `x` and `y` themselves are rejected.
pub fn parse_univariate(src: &str, var: &str) -> Result<Expr, ParseError> {
    run(src, &HashMap::new(), Some(var))
}

fn run(src: &str, subs: &HashMap<String, Expr>, single: Option<&str>) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0, subs, single };
    let e = p.sum()?;
    match p.bump() {
        None => Ok(e),
        Some(t) => Err(ParseError::UnexpectedToken { pos: p.toks[p.at - 1].0, found: describe(&t) }),
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(q) => {
            if q.is_negative() {
                PREC_UNARY
            } else if is_integer(q) {
                PREC_ATOM
            } else {
                PREC_PRODUCT
            }
        }
        Node::Var(_) | Node::Func(..) => PREC_ATOM,
        Node::Neg(_) => PREC_UNARY,
        Node::Add(..) | Node::Sub(..) => PREC_SUM,
        Node::Mul(..) | Node::Div(..) => PREC_PRODUCT,
        Node::Pow(..) => PREC_POWER,
    }
}

fn write_at(e: &Expr, min: u8, xn: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if prec(e) < min {
        f.write_str("(")?;
        write_expr(e, xn, f)?;
        f.write_str(")")
    } else {
        write_expr(e, xn, f)
    }
}

/// Writes a right operand; negations are parenthesized for readability.
fn write_rhs(e: &Expr, min: u8, xn: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if prec(e) == PREC_UNARY {
        write_at(e, PREC_POWER, xn, f)
    } else {
        write_at(e, min, xn, f)
    }
}

pub(crate) fn write_expr(e: &Expr, xn: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Const(q) => f.write_str(&format_rational(q)),
        Node::Var(Var::X) => f.write_str(xn),
        Node::Var(Var::Y) => f.write_str("y"),
        Node::Neg(a) => {
            f.write_str("-")?;
            write_at(a, PREC_UNARY, xn, f)
        }
        Node::Add(a, b) => {
            write_at(a, PREC_SUM, xn, f)?;
            f.write_str(" + ")?;
            write_rhs(b, PREC_PRODUCT, xn, f)
        }
        Node::Sub(a, b) => {
            write_at(a, PREC_SUM, xn, f)?;
            f.write_str(" - ")?;
            write_rhs(b, PREC_PRODUCT, xn, f)
        }
        Node::Mul(a, b) => {
            write_at(a, PREC_PRODUCT, xn, f)?;
            f.write_str("*")?;
            write_rhs(b, PREC_UNARY, xn, f)
        }
        Node::Div(a, b) => {
            write_at(a, PREC_PRODUCT, xn, f)?;
            f.write_str("/")?;
            write_rhs(b, PREC_UNARY, xn, f)
        }
        Node::Pow(a, q) => {
            write_at(a, PREC_ATOM, xn, f)?;
            if is_integer(q) && !q.is_negative() {
                write!(f, "^{}", format_rational(q))
            } else {
                write!(f, "^({})", format_rational(q))
            }
        }
        Node::Func(name, a) => {
            write!(f, "{name}(")?;
            write_expr(a, xn, f)?;
            f.write_str(")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn precedence() {
        let e = parse("-x^2 + 2*x*y/3").unwrap();
        assert_eq!(e.to_string(), "-x^2 + 2*x*y/3");
        let e = parse("x^-1").unwrap();
        assert_eq!(e, Expr::x().pow(rat(-1, 1)));
    }

    #[test]
    fn exponent_folds() {
        let e = parse("x*y^(-1/5)").unwrap();
        assert_eq!(e, Expr::x() * Expr::y().pow(rat(-1, 5)));
        assert!(matches!(parse("x^y"), Err(ParseError::NonConstantExponent { .. })));
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse("0.25").unwrap(), Expr::rat(1, 4));
        assert_eq!(parse("1e-3").unwrap(), Expr::rat(1, 1000));
    }

    #[test]
    fn functions_and_substitution() {
        let mut subs = HashMap::new();
        subs.insert("f".to_string(), parse("x*y").unwrap());
        let e = parse_with("Ebar'(f) + f", &subs).unwrap();
        assert_eq!(e.to_string(), "Ebar'(x*y) + x*y");
        assert!(matches!(parse("f + 1"), Err(ParseError::UnknownIdentifier(_))));
    }

    #[test]
    fn univariate_placeholder() {
        let e = parse_univariate("f^2/2", "f").unwrap();
        assert_eq!(e, parse("x^2/2").unwrap());
        assert!(parse_univariate("x + f", "f").is_err());
        assert_eq!(crate::expr::RenamedX(&e, "f").to_string(), "f^2/2");
    }

    #[test]
    fn parse_errors() {
        assert!(parse("((").is_err());
        assert!(parse("x +").is_err());
        assert!(parse("x $ y").is_err());
        assert!(parse("x y").is_err());
    }

    #[test]
    fn printer_keeps_structure() {
        for s in [
            "x - (y - 1)",
            "x/(y*x)",
            "(x^2)^(1/2)",
            "x*(-y)",
            "-(x + y)",
            "2^(1/2)*x",
            "(3/2)^(1/3)",
            "x + (-3/2)*y",
            "F(x - y)^(-2)",
        ] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }
}
