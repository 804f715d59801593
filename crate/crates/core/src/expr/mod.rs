//! Immutable symbolic expressions over the plane coordinates `x`, `y`.
//!
//! Constants and exponents are exact rationals. Opaque `Func` nodes stand
//! for user-declared functions of one argument (`Ebar(f)`, `psi(2*x+y)`);
//! their derivative is the primed function, `Func("F'", arg) * arg'`, and
//! their values are supplied at evaluation time through [`Bindings`].

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::scalar::{int, Rational};

mod equiv;
mod eval;
pub(crate) mod normal;
mod parse;

pub use equiv::{equiv, Decision, EquivOptions, EquivReport, DEFAULT_SEED};
pub use eval::{Binding, Bindings, EvalError};
pub use parse::{parse, parse_univariate, parse_with, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Const(Rational),
    Var(Var),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Rational),
    Func(Arc<str>, Expr),
}

/// Shared, immutable expression tree.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(q: Rational) -> Self {
        Expr::from_node(Node::Const(q))
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(int(n))
    }

    pub fn rat(n: i64, d: i64) -> Self {
        Expr::constant(crate::scalar::rat(n, d))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn var(v: Var) -> Self {
        Expr::from_node(Node::Var(v))
    }

    pub fn x() -> Self {
        Expr::var(Var::X)
    }

    pub fn y() -> Self {
        Expr::var(Var::Y)
    }

    pub fn func(name: &str, arg: Expr) -> Self {
        Expr::from_node(Node::Func(Arc::from(name), arg))
    }

    pub fn pow(&self, q: Rational) -> Self {
        Expr::from_node(Node::Pow(self.clone(), q))
    }

    pub fn powi(&self, n: i64) -> Self {
        self.pow(int(n))
    }

    pub fn sqr(&self) -> Self {
        self.powi(2)
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self.node() {
            Node::Const(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        self.as_const().is_some_and(|q| q.is_zero())
    }

    pub fn is_one_const(&self) -> bool {
        self.as_const().is_some_and(|q| q.is_one())
    }

    /// Exact partial derivative. The result is not normalized.
    pub fn diff(&self, v: Var) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(v, &mut memo)
    }

    fn diff_memo(&self, v: Var, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.ptr()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(w) => {
                if *w == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => neg_s(a.diff_memo(v, memo)),
            Node::Add(a, b) => add_s(a.diff_memo(v, memo), b.diff_memo(v, memo)),
            Node::Sub(a, b) => sub_s(a.diff_memo(v, memo), b.diff_memo(v, memo)),
            Node::Mul(a, b) => {
                let da = a.diff_memo(v, memo);
                let db = b.diff_memo(v, memo);
                add_s(mul_s(da, b.clone()), mul_s(a.clone(), db))
            }
            Node::Div(a, b) => {
                let da = a.diff_memo(v, memo);
                let db = b.diff_memo(v, memo);
                let num = sub_s(mul_s(da, b.clone()), mul_s(a.clone(), db));
                if num.is_zero_const() {
                    Expr::zero()
                } else {
                    Expr::from_node(Node::Div(num, b.sqr()))
                }
            }
            Node::Pow(a, q) => {
                let da = a.diff_memo(v, memo);
                if q.is_zero() || da.is_zero_const() {
                    Expr::zero()
                } else {
                    let lowered = if (q - Rational::one()).is_zero() {
                        Expr::one()
                    } else {
                        a.pow(q - Rational::one())
                    };
                    mul_s(mul_s(Expr::constant(q.clone()), lowered), da)
                }
            }
            Node::Func(name, arg) => {
                let da = arg.diff_memo(v, memo);
                if da.is_zero_const() {
                    Expr::zero()
                } else {
                    mul_s(Expr::func(&format!("{name}'"), arg.clone()), da)
                }
            }
        };
        memo.insert(self.ptr(), d.clone());
        d
    }

    /// Canonical form; see [`normal`] for the rules.
    pub fn normalize(&self) -> Expr {
        normal::Poly::from_expr(self).to_expr()
    }

    /// True when the normal form is the zero constant.
    pub fn is_zero(&self) -> bool {
        normal::Poly::from_expr(self).is_zero()
    }

    /// True when the normal form only involves `x`, `y` with rational
    /// exponents (no opaque functions, no irreducible powers of sums).
    pub fn is_polynomial(&self) -> bool {
        normal::Poly::from_expr(self).is_plain()
    }

    /// Coefficients of the normal form keyed by `(exponent of x, exponent
    /// of y)`; `None` when opaque functions or non-monomial powers remain.
    pub fn xy_coefficients(&self) -> Option<std::collections::BTreeMap<(Rational, Rational), Rational>> {
        normal::Poly::from_expr(self).xy_terms()
    }

    pub fn eval<T: crate::Scalar>(&self, x: T, y: T, bindings: &Bindings<T>) -> Result<T, EvalError> {
        eval::eval(self, x, y, bindings)
    }

    pub fn eval_f64(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        eval::eval(self, x, y, &Bindings::new())
    }

    /// Replaces every occurrence of `v` by `value`.
    pub fn subst(&self, v: Var, value: &Expr) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(v, value, &mut memo)
    }

    fn subst_memo(&self, v: Var, value: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr()) {
            return e.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(w) => {
                if *w == v {
                    value.clone()
                } else {
                    self.clone()
                }
            }
            Node::Neg(a) => -a.subst_memo(v, value, memo),
            Node::Add(a, b) => a.subst_memo(v, value, memo) + b.subst_memo(v, value, memo),
            Node::Sub(a, b) => a.subst_memo(v, value, memo) - b.subst_memo(v, value, memo),
            Node::Mul(a, b) => a.subst_memo(v, value, memo) * b.subst_memo(v, value, memo),
            Node::Div(a, b) => a.subst_memo(v, value, memo) / b.subst_memo(v, value, memo),
            Node::Pow(a, q) => a.subst_memo(v, value, memo).pow(q.clone()),
            Node::Func(name, a) => Expr::from_node(Node::Func(name.clone(), a.subst_memo(v, value, memo))),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Simultaneous substitution of both coordinates.
    pub fn subst_xy(&self, x: &Expr, y: &Expr) -> Expr {
        // route through a placeholder-free two-step: x first, then y on the
        // original y occurrences only
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(Var::X) => x.clone(),
            Node::Var(Var::Y) => y.clone(),
            Node::Neg(a) => -a.subst_xy(x, y),
            Node::Add(a, b) => a.subst_xy(x, y) + b.subst_xy(x, y),
            Node::Sub(a, b) => a.subst_xy(x, y) - b.subst_xy(x, y),
            Node::Mul(a, b) => a.subst_xy(x, y) * b.subst_xy(x, y),
            Node::Div(a, b) => a.subst_xy(x, y) / b.subst_xy(x, y),
            Node::Pow(a, q) => a.subst_xy(x, y).pow(q.clone()),
            Node::Func(name, a) => Expr::from_node(Node::Func(name.clone(), a.subst_xy(x, y))),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(w) => *w == v,
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => a.depends_on(v),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Names of all opaque functions referenced, sorted.
    pub fn func_names(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_funcs(&mut out);
        out.into_iter().collect()
    }

    fn collect_funcs(&self, out: &mut std::collections::BTreeSet<String>) {
        match self.node() {
            Node::Const(_) | Node::Var(_) => {}
            Node::Neg(a) | Node::Pow(a, _) => a.collect_funcs(out),
            Node::Func(n, a) => {
                out.insert(n.to_string());
                a.collect_funcs(out);
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_funcs(out);
                b.collect_funcs(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => 1 + a.node_count(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

fn add_s(a: Expr, b: Expr) -> Expr {
    if a.is_zero_const() {
        b
    } else if b.is_zero_const() {
        a
    } else {
        a + b
    }
}

fn sub_s(a: Expr, b: Expr) -> Expr {
    if b.is_zero_const() {
        a
    } else if a.is_zero_const() {
        -b
    } else {
        a - b
    }
}

fn neg_s(a: Expr) -> Expr {
    if a.is_zero_const() {
        a
    } else {
        -a
    }
}

fn mul_s(a: Expr, b: Expr) -> Expr {
    if a.is_zero_const() || b.is_zero_const() {
        Expr::zero()
    } else if a.is_one_const() {
        b
    } else if b.is_one_const() {
        a
    } else {
        a * b
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $node:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::from_node(Node::$node(self, rhs))
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::from_node(Node::$node(self.clone(), rhs.clone()))
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::from_node(Node::$node(self, rhs.clone()))
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::from_node(Node::$node(self.clone(), rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::from_node(Node::Neg(self))
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::from_node(Node::Neg(self.clone()))
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(q: Rational) -> Self {
        Expr::constant(q)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_expr(self, "x", f)
    }
}

/// Display adapter printing the coordinate `x` under another name.
pub struct RenamedX<'a>(pub &'a Expr, pub &'a str);

impl fmt::Display for RenamedX<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_expr(self.0, self.1, f)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn power_rule() {
        let d = p("x*y^2").diff(Var::Y).normalize();
        assert_eq!(d, p("2*x*y").normalize());
    }

    #[test]
    fn rational_exponent_derivative() {
        let m = rat(-1, 5);
        let e = Expr::x() * Expr::y().pow(m.clone());
        assert_eq!(e.diff(Var::X).normalize(), Expr::y().pow(m).normalize());
    }

    #[test]
    fn func_chain_rule() {
        let f = p("x*y^2");
        let e = Expr::func("Ebar", f.clone());
        let d = e.diff(Var::X).normalize();
        let expected = (Expr::func("Ebar'", f.clone()) * f.diff(Var::X)).normalize();
        assert_eq!(d, expected);
        assert_eq!(d.func_names(), vec!["Ebar'".to_string()]);
    }

    #[test]
    fn subst_constant() {
        let e = p("x^2 + x*y").subst(Var::Y, &Expr::int(3)).normalize();
        assert_eq!(e, p("x^2 + 3*x").normalize());
    }

    #[test]
    fn subst_both_coordinates_simultaneously() {
        let e = p("x - 2*y").subst_xy(&Expr::y(), &Expr::x()).normalize();
        assert_eq!(e, p("y - 2*x").normalize());
    }
}
