//! Admissible forces for a family and orbit-equation residuals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::expr::{parse, Bindings, EvalError, Expr, ParseError, Var};
use crate::geometry::{delta, CurveFamily, Metric2};
use crate::scalar::Scalar;

/// Side of the grid on which the sign of eta is reported.
pub const ETA_GRID: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForcesError {
    #[error("Delta vanishes identically: the family consists of straight lines")]
    StraightLineFamily,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Position-dependent force `(X, Y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceField {
    pub x: Expr,
    pub y: Expr,
}

impl ForceField {
    pub fn new(x: Expr, y: Expr) -> Self {
        ForceField { x, y }
    }

    pub fn parse(x: &str, y: &str) -> Result<Self, ParseError> {
        Ok(ForceField { x: parse(x)?, y: parse(y)? })
    }

    pub fn zero() -> Self {
        ForceField::new(Expr::zero(), Expr::zero())
    }

    pub fn normalized(&self) -> Self {
        ForceField { x: self.x.normalize(), y: self.y.normalize() }
    }

    pub fn eval<T: Scalar>(&self, x: T, y: T, b: &Bindings<T>) -> Result<(T, T), EvalError> {
        Ok((self.x.eval(x, y, b)?, self.y.eval(x, y, b)?))
    }

    /// `(X_x, X_y, Y_x, Y_y)`, normalized.
    pub fn jacobian(&self) -> [Expr; 4] {
        [
            self.x.diff(Var::X).normalize(),
            self.x.diff(Var::Y).normalize(),
            self.y.diff(Var::X).normalize(),
            self.y.diff(Var::Y).normalize(),
        ]
    }
}

#[derive(Serialize, Deserialize)]
struct ForceJson {
    #[serde(rename = "X")]
    x: Expr,
    #[serde(rename = "Y")]
    y: Expr,
}

impl Serialize for ForceField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ForceJson { x: self.x.clone(), y: self.y.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ForceField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = ForceJson::deserialize(d)?;
        Ok(ForceField { x: j.x, y: j.y })
    }
}

/// Sign of eta on a cell-centred grid, row-major in `y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub domain: Rect,
    pub n: usize,
    pub positive: usize,
    pub nonpositive: usize,
    pub undefined: usize,
    /// `1` where eta > 0, `-1` where eta <= 0, `0` where it cannot be evaluated.
    pub signs: Vec<i8>,
}

impl PositivityReport {
    pub fn all_positive(&self) -> bool {
        self.positive == self.n * self.n
    }
}

/// `eta = h^2` together with where it is positive.
#[derive(Clone, Debug)]
pub struct EtaField {
    pub eta: Expr,
    pub positivity: Option<PositivityReport>,
}

impl EtaField {
    /// Samples the sign of eta over `domain`.
    pub fn new(eta: Expr, domain: Rect, b: &Bindings<f64>) -> Self {
        let eta = eta.normalize();
        let mut report =
            PositivityReport { domain, n: ETA_GRID, positive: 0, nonpositive: 0, undefined: 0, signs: Vec::new() };
        for (x, y) in domain.grid(ETA_GRID) {
            let s = match eta.eval(x, y, b) {
                Ok(v) if v > 0.0 => {
                    report.positive += 1;
                    1
                }
                Ok(v) if v.is_finite() => {
                    report.nonpositive += 1;
                    -1
                }
                _ => {
                    report.undefined += 1;
                    0
                }
            };
            report.signs.push(s);
        }
        EtaField { eta, positivity: Some(report) }
    }

    pub fn unsampled(eta: Expr) -> Self {
        EtaField { eta: eta.normalize(), positivity: None }
    }
}

/// Forces whose orbits include the family for the given eta:
/// `X = 1/2 (eta_x f_y^2 - eta_y f_x f_y) + eta (f_y f_xy - f_x f_yy)`,
/// `Y = 1/2 (-eta_x f_x f_y + eta_y f_x^2) + eta (f_x f_xy - f_y f_xx)`.
pub fn dainelli_forces(fam: &CurveFamily, eta: &EtaField) -> ForceField {
    let e = &eta.eta;
    let ex = e.diff(Var::X);
    let ey = e.diff(Var::Y);
    let (fx, fy) = (fam.fx(), fam.fy());
    let half = Expr::rat(1, 2);
    let x = &half * (&ex * fy.sqr() - &ey * fx * fy) + e * (fy * fam.fxy() - fx * fam.fyy());
    let y = &half * (-(&ex * fx * fy) + &ey * fx.sqr()) + e * (fx * fam.fxy() - fy * fam.fxx());
    ForceField { x: x.normalize(), y: y.normalize() }
}

/// Solves `f_x X + f_y Y = eta Delta` for eta.
pub fn eta_from_forces(fam: &CurveFamily, ff: &ForceField) -> Result<Expr, ForcesError> {
    let d = delta(fam);
    if d.is_zero() {
        return Err(ForcesError::StraightLineFamily);
    }
    Ok(((fam.fx() * &ff.x + fam.fy() * &ff.y) / d).normalize())
}

/// An orbit written as a graph `y(x)` with derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitJet<T> {
    pub x: T,
    pub y: T,
    pub dy: T,
    pub d2y: T,
    pub d3y: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KasnerSample<T> {
    pub residual: T,
    /// `1 +` the sum of the magnitudes of the terms of the residual.
    pub scale: T,
}

impl<T: Scalar> KasnerSample<T> {
    pub fn relative(&self) -> T {
        self.residual.abs() / self.scale
    }
}

/// Reusable evaluator for the third-order orbit equation of a force field.
pub struct KasnerEvaluator {
    ff: ForceField,
    jac: [Expr; 4],
}

impl KasnerEvaluator {
    pub fn new(ff: &ForceField) -> Self {
        KasnerEvaluator { ff: ff.clone(), jac: ff.jacobian() }
    }

    fn jac_at<T: Scalar>(&self, x: T, y: T, b: &Bindings<T>) -> Result<[T; 4], EvalError> {
        Ok([
            self.jac[0].eval(x, y, b)?,
            self.jac[1].eval(x, y, b)?,
            self.jac[2].eval(x, y, b)?,
            self.jac[3].eval(x, y, b)?,
        ])
    }

    /// `y'''(Y - y'X) - y''(Y_x + y'(Y_y - X_x) - y'^2 X_y) + 3 y''^2 X`.
    pub fn residual<T: Scalar>(&self, j: &OrbitJet<T>, b: &Bindings<T>) -> Result<KasnerSample<T>, EvalError> {
        let (fx, fy) = self.ff.eval(j.x, j.y, b)?;
        let [xx, xy, yx, yy] = self.jac_at(j.x, j.y, b)?;
        let three = T::lit(3.0);
        let t1 = j.d3y * (fy - j.dy * fx);
        let t2 = j.d2y * (yx + j.dy * (yy - xx) - j.dy * j.dy * xy);
        let t3 = three * j.d2y * j.d2y * fx;
        Ok(KasnerSample { residual: t1 - t2 + t3, scale: T::one() + t1.abs() + t2.abs() + t3.abs() })
    }

    /// Orbit jet at a phase-space point using `x'' = X`, `y'' = Y`. Returns
    /// `None` at near-vertical tangents (`|vx| < 1e-6 * speed`).
    pub fn jet_from_state<T: Scalar>(
        &self,
        (x, y, vx, vy): (T, T, T, T),
        b: &Bindings<T>,
    ) -> Result<Option<OrbitJet<T>>, EvalError> {
        let speed = vx.hypot(vy);
        if !(vx.abs() >= T::lit(1e-6) * speed) || speed == T::zero() {
            return Ok(None);
        }
        let (fx, fy) = self.ff.eval(x, y, b)?;
        let [xx, xy, yx, yy] = self.jac_at(x, y, b)?;
        let ax = fx;
        let ay = fy;
        let jx = xx * vx + xy * vy;
        let jy = yx * vx + yy * vy;
        let w = ay * vx - vy * ax;
        let dy = vy / vx;
        let d2y = w / vx.powi(3);
        let d2y_dt = (jy * vx - vy * jx) / vx.powi(3) - T::lit(3.0) * w * ax / vx.powi(4);
        Ok(Some(OrbitJet { x, y, dy, d2y, d3y: d2y_dt / vx }))
    }
}

/// Residual of the orbit equation at each jet.
pub fn kasner_residual<T: Scalar>(
    ff: &ForceField,
    orbit: &[OrbitJet<T>],
    b: &Bindings<T>,
) -> Result<Vec<KasnerSample<T>>, EvalError> {
    let k = KasnerEvaluator::new(ff);
    orbit.iter().map(|j| k.residual(j, b)).collect()
}

/// Energy form of the orbit equation for forces `g (X, Y) = -grad V`:
/// `(e - V) y'' - q/2 [y' (g22 V_x - g12 V_y) + g12 V_x - g11 V_y] / det g`
/// with `q = g11 + 2 g12 y' + g22 y'^2`. For the identity metric this is
/// `(e - V) y'' - 1/2 (1 + y'^2)(y' V_x - V_y)`.
pub fn kasner_energy_residual<T: Scalar>(
    v: &Expr,
    e: T,
    g: &Metric2<f64>,
    orbit: &[OrbitJet<T>],
    b: &Bindings<T>,
) -> Result<Vec<KasnerSample<T>>, EvalError> {
    let vx = v.diff(Var::X).normalize();
    let vy = v.diff(Var::Y).normalize();
    let (g11, g12, g22) = (T::lit(g.g11), T::lit(g.g12), T::lit(g.g22));
    let det = g11 * g22 - g12 * g12;
    let half = T::lit(0.5);
    orbit
        .iter()
        .map(|j| {
            let pv = v.eval(j.x, j.y, b)?;
            let px = vx.eval(j.x, j.y, b)?;
            let py = vy.eval(j.x, j.y, b)?;
            let q = g11 + T::lit(2.0) * g12 * j.dy + g22 * j.dy * j.dy;
            let lhs = (e - pv) * j.d2y;
            let rhs = half * q * (j.dy * (g22 * px - g12 * py) + g12 * px - g11 * py) / det;
            Ok(KasnerSample { residual: lhs - rhs, scale: T::one() + lhs.abs() + rhs.abs() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn fam(s: &str) -> CurveFamily {
        CurveFamily::parse(s, Rect::square(0.5, 2.0)).unwrap()
    }

    #[test]
    fn straight_lines_forces() {
        let eta = EtaField::unsampled(parse("x^2").unwrap());
        let ff = dainelli_forces(&fam("y"), &eta);
        assert_eq!((ff.x.to_string(), ff.y.to_string()), ("x".into(), "0".into()));
        assert_eq!(eta_from_forces(&fam("y"), &ff), Err(ForcesError::StraightLineFamily));
    }

    #[test]
    fn hyperbola_round_trip() {
        let f = fam("x*y");
        let ff = dainelli_forces(&f, &EtaField::unsampled(Expr::one()));
        assert_eq!((ff.x.to_string(), ff.y.to_string()), ("x".into(), "y".into()));
        assert_eq!(eta_from_forces(&f, &ff).unwrap(), Expr::one());
    }

    #[test]
    fn circle_energy_form() {
        let v = parse("(x^2 + y^2)/2").unwrap();
        let x: f64 = 0.6;
        let y = (1.0 - x * x).sqrt();
        let jet = OrbitJet { x, y, dy: -x / y, d2y: -1.0 / y.powi(3), d3y: -3.0 * x / y.powi(5) };
        let r = kasner_energy_residual(&v, 1.0, &Metric2::identity(), &[jet], &Bindings::new()).unwrap();
        assert!(r[0].residual.abs() < 1e-12);
        let ff = ForceField::parse("-x", "-y").unwrap();
        let r = kasner_residual(&ff, &[jet], &Bindings::new()).unwrap();
        assert!(r[0].relative() < 1e-12);
    }

    #[test]
    fn eta_sign_grid() {
        let e = EtaField::new(parse("x - 1").unwrap(), Rect::square(0.0, 2.0), &Bindings::new());
        let p = e.positivity.unwrap();
        assert_eq!(p.positive, 32 * 16);
        assert_eq!(p.nonpositive, 32 * 16);
    }
}
