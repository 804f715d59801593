use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

use super::{Expr, Node, Var};
use crate::scalar::{is_integer, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{what} at ({x}, {y})")]
    Domain { what: &'static str, x: f64, y: f64 },
    #[error("no binding for function {0:?}")]
    UnboundFunction(String),
}

impl EvalError {
    pub fn is_domain(&self) -> bool {
        matches!(self, EvalError::Domain { .. })
    }
}

pub type Binding<T> = Arc<dyn Fn(T) -> Result<T, EvalError> + Send + Sync>;

/// Numeric implementations of the opaque functions in an expression.
#[derive(Clone)]
pub struct Bindings<T> {
    funcs: HashMap<String, Binding<T>>,
}

impl<T> Default for Bindings<T> {
    fn default() -> Self {
        Bindings { funcs: HashMap::new() }
    }
}

impl<T> std::fmt::Debug for Bindings<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<_> = self.funcs.keys().collect();
        names.sort();
        f.debug_struct("Bindings").field("names", &names).finish()
    }
}

impl<T: Scalar> Bindings<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<F>(&mut self, name: &str, f: F)
    where
        F: Fn(T) -> Result<T, EvalError> + Send + Sync + 'static,
    {
        self.funcs.insert(name.to_string(), Arc::new(f));
    }

    pub fn with<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(T) -> Result<T, EvalError> + Send + Sync + 'static,
    {
        self.insert(name, f);
        self
    }

    /// Binds `name` to `body`, an expression in the placeholder `x`, and also
    /// binds `name'`, `name''`, ... up to `derivatives` primes.
    pub fn insert_expr(&mut self, name: &str, body: &Expr, derivatives: usize) {
        let mut current = body.normalize();
        let mut label = name.to_string();
        for k in 0..=derivatives {
            let e = current.clone();
            self.funcs.insert(label.clone(), Arc::new(move |u: T| eval(&e, u, T::zero(), &Bindings::<T>::new())));
            if k < derivatives {
                current = current.diff(Var::X).normalize();
                label.push('\'');
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Binding<T>> {
        self.funcs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.funcs.contains_key(name)
    }

    pub fn extend(&mut self, other: &Bindings<T>) {
        for (k, v) in &other.funcs {
            self.funcs.insert(k.clone(), v.clone());
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<_> = self.funcs.keys().cloned().collect();
        v.sort();
        v
    }
}

pub(crate) fn eval<T: Scalar>(e: &Expr, x: T, y: T, b: &Bindings<T>) -> Result<T, EvalError> {
    let dom = |what| EvalError::Domain { what, x: x.to_f64().unwrap_or(f64::NAN), y: y.to_f64().unwrap_or(f64::NAN) };
    let go = |a: &Expr| eval(a, x, y, b);
    match e.node() {
        Node::Const(q) => Ok(T::from_rational(q)),
        Node::Var(Var::X) => Ok(x),
        Node::Var(Var::Y) => Ok(y),
        Node::Neg(a) => Ok(-go(a)?),
        Node::Add(a, c) => Ok(go(a)? + go(c)?),
        Node::Sub(a, c) => Ok(go(a)? - go(c)?),
        Node::Mul(a, c) => Ok(go(a)? * go(c)?),
        Node::Div(a, c) => {
            let d = go(c)?;
            if d == T::zero() {
                return Err(dom("division by zero"));
            }
            Ok(go(a)? / d)
        }
        Node::Pow(a, q) => {
            let v = go(a)?;
            pow(v, q).ok_or_else(|| {
                if v == T::zero() {
                    dom("zero raised to a negative power")
                } else {
                    dom("fractional power of a negative base")
                }
            })
        }
        Node::Func(name, a) => {
            let f = b.get(name).ok_or_else(|| EvalError::UnboundFunction(name.to_string()))?;
            let v = go(a)?;
            f(v)
        }
    }
}

fn pow<T: Scalar>(v: T, q: &Rational) -> Option<T> {
    if v == T::zero() && q.is_negative() {
        return None;
    }
    if is_integer(q) {
        if let Some(n) = q.to_i32() {
            return Some(v.powi(n));
        }
    }
    if v < T::zero() {
        return None;
    }
    Some(v.powf(T::from_rational(q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn basics() {
        let e = parse("x^2 + y^2").unwrap();
        assert_eq!(e.eval_f64(3.0, 4.0).unwrap(), 25.0);
        let e = parse("x*y^(-1/5)").unwrap();
        assert_eq!(e.eval_f64(1.0, 1.0).unwrap(), 1.0);
        assert!(e.eval_f64(1.0, -1.0).unwrap_err().is_domain());
        assert!(parse("1/(x-1)").unwrap().eval_f64(1.0, 0.0).unwrap_err().is_domain());
    }

    #[test]
    fn unbound_and_bound_functions() {
        let e = parse("G(y/x)").unwrap();
        assert_eq!(e.eval_f64(1.0, 1.0), Err(EvalError::UnboundFunction("G".into())));
        let mut b = Bindings::<f64>::new();
        b.insert_expr("G", &parse("1/(1 + x^2)").unwrap(), 1);
        assert_eq!(e.eval(2.0, 2.0, &b).unwrap(), 0.5);
        let d = parse("G'(x)").unwrap();
        assert_eq!(d.eval(1.0, 0.0, &b).unwrap(), -0.5);
    }

    #[test]
    fn generic_over_f32() {
        let e = parse("x*y + 1/2").unwrap();
        let v: f32 = e.eval(2.0f32, 3.0f32, &Bindings::new()).unwrap();
        assert_eq!(v, 6.5);
    }
}
