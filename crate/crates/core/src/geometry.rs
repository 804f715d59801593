//! Curve families `f(x, y) = c` and the vector fields attached to them.

use std::fmt;

use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::expr::{parse, Bindings, EvalError, Expr, ParseError, Var};
use crate::scalar::{format_rational, parse_rational, Rational};

/// Side of the grid used to check that `f` has no critical points.
pub const GRADIENT_GRID: usize = 17;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid domain {0:?}")]
    InvalidDomain(Rect),
    #[error("grad f vanishes near ({x}, {y})")]
    CriticalPoint { x: f64, y: f64 },
    #[error("metric is singular (det g = 0)")]
    SingularMetric,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// A family of curves `f(x, y) = c` with its derivative jet.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveFamily {
    f: Expr,
    fx: Expr,
    fy: Expr,
    fxx: Expr,
    fxy: Expr,
    fyy: Expr,
    domain: Rect,
}

impl CurveFamily {
    /// Builds the family and checks `|grad f| > 0` on a sample grid.
    pub fn new(f: Expr, domain: Rect) -> Result<Self, GeometryError> {
        let fam = Self::new_unchecked(f, domain)?;
        let b = Bindings::new();
        for (x, y) in domain.grid(GRADIENT_GRID) {
            let gx = fam.fx.eval(x, y, &b)?;
            let gy = fam.fy.eval(x, y, &b)?;
            let n = gx.hypot(gy);
            if !(n > 1e-12) {
                return Err(GeometryError::CriticalPoint { x, y });
            }
        }
        Ok(fam)
    }

    /// Builds the family without sampling the gradient.
    pub fn new_unchecked(f: Expr, domain: Rect) -> Result<Self, GeometryError> {
        if !domain.is_valid() {
            return Err(GeometryError::InvalidDomain(domain));
        }
        let f = f.normalize();
        let fx = f.diff(Var::X).normalize();
        let fy = f.diff(Var::Y).normalize();
        let fxx = fx.diff(Var::X).normalize();
        let fxy = fx.diff(Var::Y).normalize();
        let fyy = fy.diff(Var::Y).normalize();
        Ok(CurveFamily { f, fx, fy, fxx, fxy, fyy, domain })
    }

    pub fn parse(f: &str, domain: Rect) -> Result<Self, GeometryError> {
        Self::new(parse(f)?, domain)
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }
    pub fn fx(&self) -> &Expr {
        &self.fx
    }
    pub fn fy(&self) -> &Expr {
        &self.fy
    }
    pub fn fxx(&self) -> &Expr {
        &self.fxx
    }
    pub fn fxy(&self) -> &Expr {
        &self.fxy
    }
    pub fn fyy(&self) -> &Expr {
        &self.fyy
    }
    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn with_domain(&self, domain: Rect) -> Result<Self, GeometryError> {
        Self::new(self.f.clone(), domain)
    }

    pub fn to_json(&self) -> FamilyJson {
        FamilyJson { f: self.f.to_string(), domain: self.domain }
    }
}

/// Wire form `{"f": "<infix>", "domain": [[x0, x1], [y0, y1]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub f: String,
    pub domain: Rect,
}

impl TryFrom<FamilyJson> for CurveFamily {
    type Error = GeometryError;
    fn try_from(j: FamilyJson) -> Result<Self, Self::Error> {
        CurveFamily::parse(&j.f, j.domain)
    }
}

impl Serialize for CurveFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CurveFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = FamilyJson::deserialize(d)?;
        CurveFamily::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// Constant symmetric 2x2 multiplier.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Metric2<S> {
    pub g11: S,
    pub g12: S,
    pub g22: S,
}

impl<S: Num + Clone> Metric2<S> {
    /// Rejects singular matrices.
    pub fn new(g11: S, g12: S, g22: S) -> Result<Self, GeometryError> {
        let g = Metric2 { g11, g12, g22 };
        if g.is_singular() {
            Err(GeometryError::SingularMetric)
        } else {
            Ok(g)
        }
    }

    pub fn new_unchecked(g11: S, g12: S, g22: S) -> Self {
        Metric2 { g11, g12, g22 }
    }

    pub fn identity() -> Self {
        Metric2 { g11: S::one(), g12: S::zero(), g22: S::one() }
    }

    pub fn diag(g11: S, g22: S) -> Self {
        Metric2 { g11, g12: S::zero(), g22 }
    }

    pub fn det(&self) -> S {
        self.g11.clone() * self.g22.clone() - self.g12.clone() * self.g12.clone()
    }

    pub fn is_singular(&self) -> bool {
        self.det().is_zero()
    }

    /// `g(u, w)` for component pairs.
    pub fn inner(&self, u: (S, S), w: (S, S)) -> S {
        self.g11.clone() * u.0.clone() * w.0.clone()
            + self.g12.clone() * (u.0 * w.1.clone() + u.1.clone() * w.0)
            + self.g22.clone() * u.1 * w.1
    }

    /// `g * (u1, u2)`.
    pub fn apply(&self, u: (S, S)) -> (S, S) {
        (
            self.g11.clone() * u.0.clone() + self.g12.clone() * u.1.clone(),
            self.g12.clone() * u.0 + self.g22.clone() * u.1,
        )
    }

    /// The metric with the coordinates swapped.
    pub fn transposed(&self) -> Self {
        Metric2 { g11: self.g22.clone(), g12: self.g12.clone(), g22: self.g11.clone() }
    }
}

impl Metric2<Rational> {
    pub fn to_f64(&self) -> Metric2<f64> {
        let c = |q: &Rational| q.to_f64().unwrap_or(f64::NAN);
        Metric2 { g11: c(&self.g11), g12: c(&self.g12), g22: c(&self.g22) }
    }

    pub fn entries(&self) -> (Expr, Expr, Expr) {
        (Expr::constant(self.g11.clone()), Expr::constant(self.g12.clone()), Expr::constant(self.g22.clone()))
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        if self.is_singular() {
            Err(GeometryError::SingularMetric)
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Metric2<Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", format_rational(&self.g11), format_rational(&self.g12), format_rational(&self.g22))
    }
}

/// Serializes as `["g11", "g12", "g22"]`.
impl Serialize for Metric2<Rational> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [format_rational(&self.g11), format_rational(&self.g12), format_rational(&self.g22)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Metric2<Rational> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: [String; 3] = Deserialize::deserialize(d)?;
        let p = |s: &str| parse_rational(s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")));
        Ok(Metric2 { g11: p(&v[0])?, g12: p(&v[1])?, g22: p(&v[2])? })
    }
}

impl Serialize for Metric2<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.g11, self.g12, self.g22].serialize(s)
    }
}

/// A vector field `c1 d/dx + c2 d/dy` with expression components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldExpr {
    pub c1: Expr,
    pub c2: Expr,
}

impl VectorFieldExpr {
    pub fn new(c1: Expr, c2: Expr) -> Self {
        VectorFieldExpr { c1, c2 }
    }

    /// Directional derivative of `u`, normalized.
    pub fn apply(&self, u: &Expr) -> Expr {
        (&self.c1 * u.diff(Var::X) + &self.c2 * u.diff(Var::Y)).normalize()
    }

    /// `g(self, other)` for a rational metric, normalized.
    pub fn inner(&self, g: &Metric2<Rational>, other: &VectorFieldExpr) -> Expr {
        let (g11, g12, g22) = g.entries();
        (g11 * &self.c1 * &other.c1 + g12 * (&self.c1 * &other.c2 + &self.c2 * &other.c1) + g22 * &self.c2 * &other.c2)
            .normalize()
    }

    pub fn eval(&self, x: f64, y: f64, b: &Bindings<f64>) -> Result<(f64, f64), EvalError> {
        Ok((self.c1.eval(x, y, b)?, self.c2.eval(x, y, b)?))
    }
}

/// `2 f_x f_y f_xy - f_x^2 f_yy - f_y^2 f_xx`.
pub fn delta(fam: &CurveFamily) -> Expr {
    let two = Expr::int(2);
    (two * &fam.fx * &fam.fy * &fam.fxy - fam.fx.sqr() * &fam.fyy - fam.fy.sqr() * &fam.fxx).normalize()
}

/// Tangent field `(f_y, -f_x)`.
pub fn z0(fam: &CurveFamily) -> VectorFieldExpr {
    VectorFieldExpr::new(fam.fy.clone(), (-&fam.fx).normalize())
}

/// The g-orthogonal companion `(g22 f_x - g12 f_y, g11 f_y - g12 f_x)`.
pub fn z0_perp(fam: &CurveFamily, g: &Metric2<Rational>) -> Result<VectorFieldExpr, GeometryError> {
    g.check()?;
    let (g11, g12, g22) = g.entries();
    Ok(VectorFieldExpr::new(
        (&g22 * &fam.fx - &g12 * &fam.fy).normalize(),
        (&g11 * &fam.fy - &g12 * &fam.fx).normalize(),
    ))
}

/// `(Z0(f_y), -Z0(f_x))`.
pub fn nabla_z0_z0(fam: &CurveFamily) -> VectorFieldExpr {
    let z = z0(fam);
    VectorFieldExpr::new(z.apply(&fam.fy), (-z.apply(&fam.fx)).normalize())
}

/// `g(Z0, Z0) = g11 f_y^2 - 2 g12 f_x f_y + g22 f_x^2`.
pub fn g_norm_z0(fam: &CurveFamily, g: &Metric2<Rational>) -> Expr {
    let (g11, g12, g22) = g.entries();
    (g11 * fam.fy.sqr() - Expr::int(2) * g12 * &fam.fx * &fam.fy + g22 * fam.fx.sqr()).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn fam(s: &str) -> CurveFamily {
        CurveFamily::parse(s, Rect::square(0.5, 2.0)).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert!(delta(&fam("y")).is_zero());
        let m = rat(2, 1);
        let f = Expr::x() * Expr::y().pow(m.clone());
        let d = delta(&CurveFamily::new(f, Rect::square(0.5, 2.0)).unwrap());
        let expected = Expr::constant(&m * (&m + int(1))) * Expr::x() * Expr::y().pow(int(3) * &m - int(2));
        assert_eq!(d, expected.normalize());
    }

    #[test]
    fn z0_and_friends() {
        let f = fam("x*y");
        let z = z0(&f);
        assert_eq!((z.c1.to_string(), z.c2.to_string()), ("x".into(), "-y".into()));
        assert!(z.apply(f.f()).is_zero());
        let n = nabla_z0_z0(&f);
        assert_eq!((n.c1.to_string(), n.c2.to_string()), ("x".into(), "y".into()));
        assert_eq!(g_norm_z0(&fam("y"), &Metric2::new(int(3), int(1), int(2)).unwrap()), Expr::int(3));
    }

    #[test]
    fn singular_metric_rejected() {
        assert_eq!(Metric2::new(int(1), int(1), int(1)), Err(GeometryError::SingularMetric));
        let g = Metric2::new_unchecked(int(2), int(2), int(2));
        assert!(z0_perp(&fam("x*y"), &g).is_err());
    }

    #[test]
    fn critical_points_rejected() {
        let e = CurveFamily::parse("x^2 + y^2", Rect::square(-1.0, 1.0)).unwrap_err();
        assert!(matches!(e, GeometryError::CriticalPoint { .. }));
    }

    #[test]
    fn family_json_round_trip() {
        let f = fam("x*y^(-1/5)");
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"f":"x*y^(-1/5)","domain":[[0.5,2.0],[0.5,2.0]]}"#);
        let back: CurveFamily = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
