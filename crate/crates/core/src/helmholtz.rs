//! Variational multipliers, potentials, and the Szebehely-type residuals.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::expr::normal::{Atom, Mono, Poly};
use crate::expr::{parse_univariate, Bindings, EvalError, Expr, ParseError, RenamedX, Var};
use crate::forces::{EtaField, ForceField};
use crate::geometry::{delta, g_norm_z0, z0, z0_perp, CurveFamily, GeometryError, Metric2};
use crate::scalar::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HelmholtzError {
    #[error("metric is singular (det g = 0)")]
    SingularMetric,
    #[error("forces are not variational for this metric; residual {residual}")]
    NotIntegrable { residual: Expr },
    #[error("no symbolic antiderivative: {0}")]
    QuadratureUnsupported(String),
    #[error("potential is singular at the base point")]
    SingularBasePoint,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<GeometryError> for HelmholtzError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Eval(e) => HelmholtzError::Eval(e),
            _ => HelmholtzError::SingularMetric,
        }
    }
}

/// Restricted energy as a function of `f`.
#[derive(Clone, Debug, PartialEq)]
pub enum EnergyProfile {
    /// Opaque `name(f)`; the user binds `name` and `name'`.
    Named(String),
    /// A formula in one variable; stored with `x` as placeholder.
    Formula(Expr),
    /// A field in `x`, `y` assumed constant on each curve.
    Field(Expr),
}

impl EnergyProfile {
    /// `Ebar(f) = f`.
    pub fn identity() -> Self {
        EnergyProfile::Formula(Expr::x())
    }

    /// `Ebar(f)` as a field on the plane.
    pub fn value(&self, fam: &CurveFamily) -> Expr {
        match self {
            EnergyProfile::Named(n) => Expr::func(n, fam.f().clone()),
            EnergyProfile::Formula(body) => body.subst(Var::X, fam.f()).normalize(),
            EnergyProfile::Field(e) => e.clone(),
        }
    }

    /// `Ebar'(f)` as a field on the plane.
    pub fn derivative(&self, fam: &CurveFamily) -> Expr {
        match self {
            EnergyProfile::Named(n) => Expr::func(&format!("{n}'"), fam.f().clone()),
            EnergyProfile::Formula(body) => body.diff(Var::X).subst(Var::X, fam.f()).normalize(),
            EnergyProfile::Field(e) => {
                let num = e.diff(Var::X) * fam.fx() + e.diff(Var::Y) * fam.fy();
                (num / (fam.fx().sqr() + fam.fy().sqr())).normalize()
            }
        }
    }

    /// A bare identifier other than `f` names an opaque function; anything
    /// else is a formula in `f`.
    pub fn parse(s: &str) -> Result<Self, ParseError> {
        let t = s.trim();
        let ident = !t.is_empty()
            && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !t.starts_with(|c: char| c.is_ascii_digit());
        if ident && t != "f" {
            return Ok(EnergyProfile::Named(t.to_string()));
        }
        Ok(EnergyProfile::Formula(parse_univariate(t, "f")?))
    }
}

impl fmt::Display for EnergyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyProfile::Named(n) => f.write_str(n),
            EnergyProfile::Formula(b) => write!(f, "{}", RenamedX(b, "f")),
            EnergyProfile::Field(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EnergyJson {
    Text(String),
    Field { field: Expr },
}

impl Serialize for EnergyProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EnergyProfile::Field(e) => EnergyJson::Field { field: e.clone() }.serialize(s),
            _ => EnergyJson::Text(self.to_string()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for EnergyProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match EnergyJson::deserialize(d)? {
            EnergyJson::Text(t) => EnergyProfile::parse(&t).map_err(serde::de::Error::custom),
            EnergyJson::Field { field } => Ok(EnergyProfile::Field(field)),
        }
    }
}

/// A potential together with the multiplier and energy data it came with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSolution {
    #[serde(rename = "V")]
    pub v: Expr,
    pub g: Metric2<Rational>,
    pub eta: Expr,
    pub ebar: EnergyProfile,
}

/// The three terms `g12 (Y_y - X_x)`, `-g22 Y_x`, `g11 X_y`.
pub fn constant_multiplier_terms(g: &Metric2<Rational>, ff: &ForceField) -> Result<Vec<Expr>, HelmholtzError> {
    g.check()?;
    let [xx, xy, yx, yy] = ff.jacobian();
    let (g11, g12, g22) = g.entries();
    Ok(vec![g12 * (yy - xx), -(g22 * yx), g11 * xy])
}

/// `g12 (Y_y - X_x) - g22 Y_x + g11 X_y`, normalized.
pub fn constant_multiplier_residual(g: &Metric2<Rational>, ff: &ForceField) -> Result<Expr, HelmholtzError> {
    Ok(sum(constant_multiplier_terms(g, ff)?))
}

fn sum(terms: Vec<Expr>) -> Expr {
    terms.into_iter().fold(Expr::zero(), |a, t| a + t).normalize()
}

/// `(-(g11 X + g12 Y), -(g12 X + g22 Y))`, the gradient a potential must have.
pub fn potential_gradient(g: &Metric2<Rational>, ff: &ForceField) -> (Expr, Expr) {
    let (g11, g12, g22) = g.entries();
    ((-(&g11 * &ff.x + &g12 * &ff.y)).normalize(), (-(&g12 * &ff.x + &g22 * &ff.y)).normalize())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub v: Expr,
    pub base_point: (Rational, Rational),
    /// The x-first and y-first quadrature paths gave the same expression.
    pub path_independent: bool,
}

fn depends(p: &Poly, v: Var) -> bool {
    p.terms().any(|(m, _)| m.keys().any(|a| atom_depends(a, v)))
}

fn atom_depends(a: &Atom, v: Var) -> bool {
    match a {
        Atom::X => v == Var::X,
        Atom::Y => v == Var::Y,
        Atom::Func(_, p) | Atom::Base(p) => depends(p, v),
    }
}

fn coord_atom(v: Var) -> Atom {
    match v {
        Var::X => Atom::X,
        Var::Y => Atom::Y,
    }
}

fn term_poly(m: Mono, c: Rational) -> Poly {
    let mut p = Poly::zero();
    p.add_term(m, c);
    p
}

/// Antiderivative in `v` of a normal form: powers of `v` other than -1,
/// and primed functions of an argument linear in `v`.
fn antiderivative(p: &Poly, v: Var) -> Result<Expr, HelmholtzError> {
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        let mut rest = Mono::new();
        let mut dep = Vec::new();
        for (a, e) in m {
            if atom_depends(a, v) {
                dep.push((a, e));
            } else {
                rest.insert(a.clone(), e.clone());
            }
        }
        let term = match dep.as_slice() {
            [] => {
                rest.insert(coord_atom(v), Rational::one());
                term_poly(rest, c.clone())
            }
            [(a, e)] if **a == coord_atom(v) => {
                let k = *e + Rational::one();
                if k.is_zero() {
                    return Err(HelmholtzError::QuadratureUnsupported(format!(
                        "1/{} has a logarithmic antiderivative",
                        v.name()
                    )));
                }
                rest.insert(coord_atom(v), k.clone());
                term_poly(rest, c / k)
            }
            [(Atom::Func(name, arg), e)] if e.is_one() && name.ends_with('\'') => {
                let arg_e = arg.to_expr();
                let slope = Poly::from_expr(&arg_e.diff(v));
                let alpha = slope.as_constant().filter(|a| !a.is_zero()).ok_or_else(|| {
                    HelmholtzError::QuadratureUnsupported(format!("argument of {name} is not linear in {}", v.name()))
                })?;
                let base = &name[..name.len() - 1];
                rest.insert(Atom::Func(Arc::from(base), arg.clone()), Rational::one());
                term_poly(rest, c / alpha)
            }
            _ => {
                let t = term_poly(m.clone(), c.clone()).to_expr();
                return Err(HelmholtzError::QuadratureUnsupported(format!("term {t} in d{}", v.name())));
            }
        };
        out = out.add(&term);
    }
    Ok(out.to_expr())
}

fn singular(p: &Poly) -> bool {
    p.terms().any(|(m, _)| {
        m.keys().any(|a| match a {
            Atom::Base(s) => s.is_zero() || singular(s),
            Atom::Func(_, s) => singular(s),
            _ => false,
        })
    })
}

fn at(e: &Expr, v: Var, q: &Rational) -> Result<Expr, HelmholtzError> {
    let p = Poly::from_expr(&e.subst(v, &Expr::constant(q.clone())));
    if singular(&p) {
        return Err(HelmholtzError::SingularBasePoint);
    }
    Ok(p.to_expr())
}

/// `int_a^v P dv` at fixed other coordinate.
fn definite(integrand: &Expr, v: Var, a: &Rational) -> Result<Expr, HelmholtzError> {
    let anti = antiderivative(&Poly::from_expr(integrand), v)?;
    Ok((&anti - at(&anti, v, a)?).normalize())
}

/// Potential `V` with `g (X, Y) = -grad V` and `V(base) = 0`, by quadrature
/// along axis-parallel paths.
pub fn potential_from_forces(
    g: &Metric2<Rational>,
    ff: &ForceField,
    base: (Rational, Rational),
) -> Result<Potential, HelmholtzError> {
    let residual = constant_multiplier_residual(g, ff)?;
    if !residual.is_zero() {
        return Err(HelmholtzError::NotIntegrable { residual });
    }
    let (p, q) = potential_gradient(g, ff);
    let (x0, y0) = &base;
    // x-first: along y = y0, then vertically
    let along_x = definite(&at(&p, Var::Y, y0)?, Var::X, x0)?;
    let v1 = (along_x + definite(&q, Var::Y, y0)?).normalize();
    let along_y = definite(&at(&q, Var::X, x0)?, Var::Y, y0)?;
    let v2 = (along_y + definite(&p, Var::X, x0)?).normalize();
    let path_independent = (&v1 - &v2).is_zero();
    let exact = (v1.diff(Var::X) - &p).is_zero() && (v1.diff(Var::Y) - &q).is_zero();
    if !exact {
        return Err(HelmholtzError::NotIntegrable { residual });
    }
    Ok(Potential { v: v1, base_point: base, path_independent })
}

/// Potential with the base point at the domain's lower-left corner.
pub fn potential_on_domain(g: &Metric2<Rational>, ff: &ForceField, domain: &Rect) -> Result<Potential, HelmholtzError> {
    let q = |v: f64| Rational::from_float(v).unwrap_or_default();
    potential_from_forces(g, ff, (q(domain.x0), q(domain.y0)))
}

/// Potential sampled on a grid when no symbolic antiderivative exists.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialGrid {
    pub domain: Rect,
    /// Nodes per axis, endpoints included.
    pub n: usize,
    /// `values[j * n + i]` is V at `(x_i, y_j)`, with V = 0 at the lower-left node.
    pub values: Vec<f64>,
}

impl PotentialGrid {
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let d = &self.domain;
        let s = (self.n - 1) as f64;
        (d.x0 + (d.x1 - d.x0) * i as f64 / s, d.y0 + (d.y1 - d.y0) * j as f64 / s)
    }
}

fn simpson(f: impl Fn(f64) -> Result<f64, EvalError>, a: f64, b: f64, n: usize) -> Result<f64, EvalError> {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a)? + f(b)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * k as f64)?;
    }
    Ok(s * h / 3.0)
}

/// x-first composite Simpson quadrature of `-g (X, Y)` on an `n x n` node grid.
pub fn numeric_potential(
    g: &Metric2<Rational>,
    ff: &ForceField,
    domain: &Rect,
    n: usize,
    b: &Bindings<f64>,
) -> Result<PotentialGrid, HelmholtzError> {
    g.check()?;
    let n = n.max(2);
    let (p, q) = potential_gradient(g, ff);
    let mut grid = PotentialGrid { domain: *domain, n, values: vec![0.0; n * n] };
    for j in 0..n {
        for i in 0..n {
            let (x, y) = grid.node(i, j);
            let along_x = simpson(|s| p.eval(s, domain.y0, b), domain.x0, x, 32)?;
            let along_y = simpson(|t| q.eval(x, t, b), domain.y0, y, 32)?;
            grid.values[j * n + i] = along_x + along_y;
        }
    }
    Ok(grid)
}

/// The terms `Z0perp(V)` and `2 (Ebar(f) - V) det g / g(Z0, Z0) * Delta`.
pub fn szebehely_terms(
    fam: &CurveFamily,
    v: &Expr,
    g: &Metric2<Rational>,
    ebar: &EnergyProfile,
) -> Result<Vec<Expr>, HelmholtzError> {
    let zp = z0_perp(fam, g)?;
    let det = Expr::constant(g.det());
    let coeff = Expr::int(2) * (ebar.value(fam) - v) * det / g_norm_z0(fam, g);
    Ok(vec![zp.apply(v), coeff * delta(fam)])
}

/// `Z0perp(V) + 2 (Ebar(f) - V) det g / g(Z0, Z0) * Delta`, normalized.
pub fn szebehely_residual(
    fam: &CurveFamily,
    v: &Expr,
    g: &Metric2<Rational>,
    ebar: &EnergyProfile,
) -> Result<Expr, HelmholtzError> {
    Ok(sum(szebehely_terms(fam, v, g, ebar)?))
}

/// The terms `Z0perp(eta)`, `2 eta (g22 f_xx - 2 g12 f_xy + g11 f_yy)`, `-2 Ebar'(f)`.
pub fn eta_pde_terms(
    fam: &CurveFamily,
    eta: &EtaField,
    g: &Metric2<Rational>,
    ebar: &EnergyProfile,
) -> Result<Vec<Expr>, HelmholtzError> {
    let zp = z0_perp(fam, g)?;
    let (g11, g12, g22) = g.entries();
    let trace = g22 * fam.fxx() - Expr::int(2) * g12 * fam.fxy() + g11 * fam.fyy();
    let e = &eta.eta;
    Ok(vec![zp.apply(e), Expr::int(2) * e * trace, -(Expr::int(2) * ebar.derivative(fam))])
}

/// `Z0perp(eta) + 2 eta (g22 f_xx - 2 g12 f_xy + g11 f_yy) - 2 Ebar'(f)`, normalized.
pub fn eta_pde_residual(
    fam: &CurveFamily,
    eta: &EtaField,
    g: &Metric2<Rational>,
    ebar: &EnergyProfile,
) -> Result<Expr, HelmholtzError> {
    Ok(sum(eta_pde_terms(fam, eta, g, ebar)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    /// The residual normalized to the zero expression.
    Exact,
    /// Only sampled; see the recorded magnitudes.
    Sampled,
}

/// Outcome of checking that a sum of terms vanishes: exact normalization
/// first, then sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub confidence: Confidence,
    pub samples: usize,
    /// Sample points where some term could not be evaluated.
    pub skipped: usize,
    pub max_abs: f64,
    /// max `|sum| / (1 + sum of |term|)`.
    pub max_relative: f64,
    /// The normalized residual.
    pub residual: Expr,
}

impl Assessment {
    pub fn passes(&self, tol_rel: f64, tol_abs: f64) -> bool {
        match self.confidence {
            Confidence::Exact => true,
            Confidence::Sampled => self.samples > self.skipped && (self.max_relative <= tol_rel || self.max_abs <= tol_abs),
        }
    }
}

/// Checks `sum(terms) = 0`, sampling `n` seeded points of `domain` when
/// normalization alone does not settle it.
pub fn assess(terms: &[Expr], domain: &Rect, b: &Bindings<f64>, n: usize, seed: u64) -> Assessment {
    let residual = sum(terms.to_vec());
    let mut out = Assessment { confidence: Confidence::Exact, samples: 0, skipped: 0, max_abs: 0.0, max_relative: 0.0, residual };
    if out.residual.is_zero() {
        return out;
    }
    out.confidence = Confidence::Sampled;
    let terms: Vec<Expr> = terms.iter().map(Expr::normalize).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let (x, y) = domain.sample(&mut rng);
        out.samples += 1;
        let vals: Result<Vec<f64>, EvalError> = terms.iter().map(|t| t.eval(x, y, b)).collect();
        match vals {
            Ok(v) if v.iter().all(|t| t.is_finite()) => {
                let s: f64 = v.iter().sum();
                let scale: f64 = 1.0 + v.iter().map(|t| t.abs()).sum::<f64>();
                out.max_abs = out.max_abs.max(s.abs());
                out.max_relative = out.max_relative.max(s.abs() / scale);
            }
            _ => out.skipped += 1,
        }
    }
    out
}

/// Unit-multiplier Szebehely form
/// `f_x V_x + f_y V_y + 2 (Ebar(f) - V) / (f_x^2 + f_y^2) * Delta`, normalized.
pub fn classical_szebehely_residual(fam: &CurveFamily, v: &Expr, ebar: &EnergyProfile) -> Expr {
    let (fx, fy) = (fam.fx(), fam.fy());
    let grad = fx * v.diff(Var::X) + fy * v.diff(Var::Y);
    let coeff = Expr::int(2) * (ebar.value(fam) - v) / (fx.sqr() + fy.sqr());
    (grad + coeff * delta(fam)).normalize()
}

/// `f_x eta_x + f_y eta_y + 2 eta (f_xx + f_yy) - 2 Ebar'(f)`, normalized.
pub fn classical_eta_residual(fam: &CurveFamily, eta: &EtaField, ebar: &EnergyProfile) -> Expr {
    let e = &eta.eta;
    let lhs = fam.fx() * e.diff(Var::X) + fam.fy() * e.diff(Var::Y) + Expr::int(2) * e * (fam.fxx() + fam.fyy());
    (lhs - Expr::int(2) * ebar.derivative(fam)).normalize()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedEnergy {
    /// `1/2 eta g(Z0, Z0) + V`.
    pub ebar: Expr,
    /// `Z0` applied to it; zero when it is a function of `f`.
    pub z0_defect: Expr,
}

pub fn restricted_energy(fam: &CurveFamily, eta: &EtaField, v: &Expr, g: &Metric2<Rational>) -> RestrictedEnergy {
    let ebar = (Expr::rat(1, 2) * &eta.eta * g_norm_z0(fam, g) + v).normalize();
    let z0_defect = z0(fam).apply(&ebar);
    RestrictedEnergy { ebar, z0_defect }
}

/// Right-hand side of a second-order system `x'' = F(x, y, u, v)`.
#[derive(Clone)]
pub enum Sode {
    PositionOnly(ForceField, Bindings<f64>),
    General(Arc<dyn Fn([f64; 4]) -> Result<[f64; 2], EvalError> + Send + Sync>),
}

impl Sode {
    pub fn eval(&self, z: [f64; 4]) -> Result<[f64; 2], EvalError> {
        match self {
            Sode::PositionOnly(ff, b) => {
                let (a, c) = ff.eval(z[0], z[1], b)?;
                Ok([a, c])
            }
            Sode::General(f) => f(z),
        }
    }
}

/// Candidate multiplier on phase space.
#[derive(Clone)]
pub enum MultiplierField {
    Constant(Metric2<f64>),
    /// Returns `[g11, g12, g22]`.
    Field(Arc<dyn Fn([f64; 4]) -> Result<[f64; 3], EvalError> + Send + Sync>),
}

impl MultiplierField {
    fn eval(&self, z: [f64; 4]) -> Result<[[f64; 2]; 2], EvalError> {
        let [a, b, c] = match self {
            MultiplierField::Constant(g) => [g.g11, g.g12, g.g22],
            MultiplierField::Field(f) => f(z)?,
        };
        Ok([[a, b], [b, c]])
    }
}

/// Box in phase space `(x, y) x (u, v)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhaseBox {
    pub position: Rect,
    pub velocity: Rect,
}

#[derive(Clone, Debug, Serialize)]
pub struct HelmholtzReport {
    pub samples: usize,
    /// Conditions on `Gamma(g)` and on velocity derivatives of `g` hold
    /// by construction (position-only forces, constant multiplier).
    pub structural: bool,
    pub max_gamma_condition: f64,
    pub max_velocity_condition: f64,
    pub max_phi_condition: f64,
    /// Same, divided by `1 +` the magnitudes of the terms on both sides.
    pub max_phi_relative: f64,
    pub per_sample: Vec<[f64; 3]>,
}

const FD_STEP: f64 = 1e-5;

fn step(v: f64) -> f64 {
    FD_STEP * v.abs().max(1.0)
}

fn partial<const N: usize>(
    f: &dyn Fn([f64; 4]) -> Result<[f64; N], EvalError>,
    z: [f64; 4],
    k: usize,
) -> Result<[f64; N], EvalError> {
    let h = step(z[k]);
    let mut zp = z;
    let mut zm = z;
    zp[k] += h;
    zm[k] -= h;
    let (a, b) = (f(zp)?, f(zm)?);
    Ok(std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * h)))
}

/// Evaluates the three Helmholtz conditions at random phase-space points
/// with central differences.
pub fn full_helmholtz_residuals(
    sode: &Sode,
    g: &MultiplierField,
    region: &PhaseBox,
    samples: usize,
    seed: u64,
) -> Result<HelmholtzReport, EvalError> {
    let structural = matches!((sode, g), (Sode::PositionOnly(..), MultiplierField::Constant(_)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let force = |z: [f64; 4]| sode.eval(z);
    // Gamma^i_j = -1/2 dF^i/du^j, flattened as [G11, G12, G21, G22]
    let gamma = |z: [f64; 4]| -> Result<[f64; 4], EvalError> {
        let du = partial(&force, z, 2)?;
        let dv = partial(&force, z, 3)?;
        Ok([-0.5 * du[0], -0.5 * dv[0], -0.5 * du[1], -0.5 * dv[1]])
    };
    let metric = |z: [f64; 4]| -> Result<[f64; 3], EvalError> {
        let m = g.eval(z)?;
        Ok([m[0][0], m[0][1], m[1][1]])
    };
    // derivative along the flow: d/ds h(z + s * (u, v, F1, F2))
    fn along<const N: usize>(
        h: &dyn Fn([f64; 4]) -> Result<[f64; N], EvalError>,
        z: [f64; 4],
        w: [f64; 4],
    ) -> Result<[f64; N], EvalError> {
        let norm = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok([0.0; N]);
        }
        let scale = z.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let s = FD_STEP * scale / norm;
        let zp: [f64; 4] = std::array::from_fn(|i| z[i] + s * w[i]);
        let zm: [f64; 4] = std::array::from_fn(|i| z[i] - s * w[i]);
        let (a, b) = (h(zp)?, h(zm)?);
        Ok(std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * s)))
    }

    let mut report = HelmholtzReport {
        samples,
        structural,
        max_gamma_condition: 0.0,
        max_velocity_condition: 0.0,
        max_phi_condition: 0.0,
        max_phi_relative: 0.0,
        per_sample: Vec::with_capacity(samples),
    };
    for _ in 0..samples {
        let (x, y) = region.position.sample(&mut rng);
        let (u, v) = region.velocity.sample(&mut rng);
        let z = [x, y, u, v];
        let gm = g.eval(z)?;
        let f = force(z)?;
        let w = [u, v, f[0], f[1]];
        let gam = gamma(z)?;
        let gmat = [[gam[0], gam[1]], [gam[2], gam[3]]];

        let (c3, c4) = if structural {
            (0.0, 0.0)
        } else {
            let dg = along(&metric, z, w)?;
            let dg = [[dg[0], dg[1]], [dg[1], dg[2]]];
            let mut c3 = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    let rhs: f64 = (0..2).map(|k| gm[i][k] * gmat[k][j] + gm[j][k] * gmat[k][i]).sum();
                    c3 = c3.max((dg[i][j] - rhs).abs());
                }
            }
            let gu = partial(&metric, z, 2)?;
            let gv = partial(&metric, z, 3)?;
            // dg_i1/dv - dg_i2/du for i = 1, 2
            let c4 = (gv[0] - gu[1]).abs().max((gv[1] - gu[2]).abs());
            (c3, c4)
        };

        // Phi^i_j = -dF^i/dx^j - Gamma^i_k Gamma^k_j - Gamma(Gamma^i_j)
        let fx = partial(&force, z, 0)?;
        let fy = partial(&force, z, 1)?;
        let dfdx = [[fx[0], fy[0]], [fx[1], fy[1]]];
        let dgam = if structural { [0.0; 4] } else { along(&gamma, z, w)? };
        let dgam = [[dgam[0], dgam[1]], [dgam[2], dgam[3]]];
        let mut phi = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let gg: f64 = (0..2).map(|k| gmat[i][k] * gmat[k][j]).sum();
                phi[i][j] = -dfdx[i][j] - gg - dgam[i][j];
            }
        }
        // g_1j Phi^j_2 = g_2j Phi^j_1
        let lhs: f64 = (0..2).map(|j| gm[0][j] * phi[j][1]).sum();
        let rhs: f64 = (0..2).map(|j| gm[1][j] * phi[j][0]).sum();
        let mag: f64 = (0..2).map(|j| (gm[0][j] * phi[j][1]).abs() + (gm[1][j] * phi[j][0]).abs()).sum();
        let c5 = (lhs - rhs).abs();

        report.max_gamma_condition = report.max_gamma_condition.max(c3);
        report.max_velocity_condition = report.max_velocity_condition.max(c4);
        report.max_phi_condition = report.max_phi_condition.max(c5);
        report.max_phi_relative = report.max_phi_relative.max(c5 / (1.0 + mag));
        report.per_sample.push([c3, c4, c5]);
    }
    Ok(report)
}

/// Checks `g (X, Y) = -grad V` by sampling, for potentials involving
/// opaque functions. Returns the largest relative defect.
pub fn sampled_gradient_defect(
    g: &Metric2<Rational>,
    ff: &ForceField,
    v: &Expr,
    domain: &Rect,
    b: &Bindings<f64>,
    n: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    let (p, q) = potential_gradient(g, ff);
    let vx = v.diff(Var::X).normalize();
    let vy = v.diff(Var::Y).normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (x, y) = domain.sample(&mut rng);
        for (a, c) in [(&vx, &p), (&vy, &q)] {
            let (a, c) = (a.eval(x, y, b)?, c.eval(x, y, b)?);
            worst = worst.max((a - c).abs() / (1.0 + a.abs().max(c.abs())));
        }
    }
    Ok(worst)
}

/// Look-up helper for rational-valued named parameters.
pub fn param_map(pairs: &[(&str, Rational)]) -> HashMap<String, Expr> {
    pairs.iter().map(|(k, v)| (k.to_string(), Expr::constant(v.clone()))).collect()
}

/// Parses an expression using named rational parameters.
pub fn parse_params(s: &str, pairs: &[(&str, Rational)]) -> Result<Expr, ParseError> {
    crate::expr::parse_with(s, &param_map(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::scalar::int;

    fn ff(x: &str, y: &str) -> ForceField {
        ForceField::parse(x, y).unwrap()
    }

    #[test]
    fn curl_obstruction() {
        let id = Metric2::identity();
        assert!(constant_multiplier_residual(&id, &ff("x", "y")).unwrap().is_zero());
        assert_eq!(constant_multiplier_residual(&id, &ff("y", "0")).unwrap(), Expr::one());
    }

    #[test]
    fn harmonic_potential() {
        let p = potential_from_forces(&Metric2::identity(), &ff("x", "y"), (int(0), int(0))).unwrap();
        assert_eq!(p.v, parse("-x^2/2 - y^2/2").unwrap().normalize());
        assert!(p.path_independent);
    }

    #[test]
    fn base_point_shifts_constant() {
        let p = potential_from_forces(&Metric2::identity(), &ff("-1", "0"), (int(2), int(0))).unwrap();
        assert_eq!(p.v, parse("x - 2").unwrap());
    }

    #[test]
    fn log_is_unsupported() {
        let e = potential_from_forces(&Metric2::identity(), &ff("1/x", "0"), (int(1), int(0))).unwrap_err();
        assert!(matches!(e, HelmholtzError::QuadratureUnsupported(_)));
        let grid =
            numeric_potential(&Metric2::identity(), &ff("1/x", "0"), &Rect::square(1.0, 2.0), 3, &Bindings::new())
                .unwrap();
        let expect = -(1.5f64).ln();
        assert!((grid.values[1] - expect).abs() < 1e-8);
    }

    #[test]
    fn energy_profile_forms() {
        assert_eq!(EnergyProfile::parse("Ebar").unwrap(), EnergyProfile::Named("Ebar".into()));
        assert_eq!(EnergyProfile::parse("f").unwrap(), EnergyProfile::identity());
        let p = EnergyProfile::parse("f^2/2").unwrap();
        assert_eq!(p.to_string(), "f^2/2");
        let fam = CurveFamily::parse("x*y", Rect::square(0.5, 2.0)).unwrap();
        assert_eq!(p.derivative(&fam), parse("x*y").unwrap());
        let field = EnergyProfile::Field(parse("x^2*y^2").unwrap());
        assert_eq!(field.derivative(&fam), parse("2*x*y").unwrap().normalize());
    }

    #[test]
    fn helmholtz_sanity() {
        let region = PhaseBox { position: Rect::square(-1.0, 1.0), velocity: Rect::square(-1.0, 1.0) };
        let id = MultiplierField::Constant(Metric2::identity());
        let r = full_helmholtz_residuals(&Sode::PositionOnly(ff("-x", "-y"), Bindings::new()), &id, &region, 20, 1)
            .unwrap();
        assert!(r.structural && r.max_phi_condition < 1e-8);
        let r = full_helmholtz_residuals(&Sode::PositionOnly(ff("y", "0"), Bindings::new()), &id, &region, 20, 1)
            .unwrap();
        // Phi = -dF/dx, so the defect is |g_1j Phi^j_2 - g_2j Phi^j_1| = 1
        assert!(r.per_sample.iter().all(|s| (s[2] - 1.0).abs() < 1e-8));
    }

    #[test]
    fn damped_general_system() {
        // linear damping has no constant multiplier
        let k = 0.3;
        let sode = Sode::General(Arc::new(move |z: [f64; 4]| Ok([-z[0] - 2.0 * k * z[2], -z[1] - 2.0 * k * z[3]])));
        let region = PhaseBox { position: Rect::square(-1.0, 1.0), velocity: Rect::square(-1.0, 1.0) };
        let r = full_helmholtz_residuals(&sode, &MultiplierField::Constant(Metric2::identity()), &region, 10, 2)
            .unwrap();
        assert!(!r.structural);
        assert!((r.max_gamma_condition - 2.0 * k).abs() < 1e-6);
    }
}
