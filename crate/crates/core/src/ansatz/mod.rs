//! Case analysis for the family `x y^m = c` with forces that are
//! quadratic plus cubic in `x`, `y`.
//!
//! Everything here is exact. Equations are built as Laurent polynomials in
//! the coefficients, the metric entries and (optionally) `m`, then handed
//! to a branching eliminator.

pub mod catalogue;
pub mod poly;
pub mod solver;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::expr::{Expr, Var};
use crate::forces::{dainelli_forces, EtaField, ForceField};
use crate::geometry::{CurveFamily, Metric2};
use crate::helmholtz::{constant_multiplier_residual, potential_from_forces, potential_gradient, restricted_energy, HelmholtzError};
use crate::scalar::{format_rational, parse_rational, rat, Rational};

pub use catalogue::{catalogue, CatalogueEntry};
use poly::{MPoly, RatFn, Sym};
use solver::{Preference, System};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnsatzError {
    #[error("exponent m = {0} is excluded (the curves are straight lines)")]
    ExcludedExponent(String),
    #[error("no nonsingular multiplier exists for this branch")]
    NoMultiplier,
    #[error("free parameter {0} makes a denominator vanish or the metric singular")]
    BadFreeParameter(String),
    #[error("unknown free parameter {0}")]
    UnknownParameter(String),
    #[error("unknown case {0}")]
    UnknownCase(String),
    #[error("this operation needs a numeric exponent")]
    SymbolicExponent,
    #[error(transparent)]
    Helmholtz(#[from] HelmholtzError),
}

/// The exponent `m`, either a value or kept symbolic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exponent {
    Value(Rational),
    Symbolic,
}

impl Exponent {
    pub fn value(&self) -> Option<&Rational> {
        match self {
            Exponent::Value(q) => Some(q),
            Exponent::Symbolic => None,
        }
    }

    fn poly(&self) -> MPoly {
        match self {
            Exponent::Value(q) => MPoly::constant(q.clone()),
            Exponent::Symbolic => MPoly::var(Sym::M),
        }
    }

    fn check(&self) -> Result<(), AnsatzError> {
        match self {
            Exponent::Value(q) if q.is_zero() || *q == -Rational::one() => {
                Err(AnsatzError::ExcludedExponent(format_rational(q)))
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "symbolic" {
            return Ok(Exponent::Symbolic);
        }
        parse_rational(s).map(Exponent::Value).ok_or_else(|| format!("bad exponent {s:?}"))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Value(q) => f.write_str(&format_rational(q)),
            Exponent::Symbolic => f.write_str("symbolic"),
        }
    }
}

/// Values excluded for every case.
pub fn excluded_exponents() -> [Rational; 2] {
    [Rational::zero(), -Rational::one()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `g12 = 0`, `g22 = 1`.
    Diagonal,
    /// `g12 = 1`.
    NonDiagonal,
}

impl Layout {
    fn metric_polys(self) -> [MPoly; 3] {
        match self {
            Layout::Diagonal => [MPoly::var(Sym::G11), MPoly::zero(), MPoly::one()],
            Layout::NonDiagonal => [MPoly::var(Sym::G11), MPoly::one(), MPoly::var(Sym::G22)],
        }
    }

    fn metric_unknowns(self) -> &'static [Sym] {
        match self {
            Layout::Diagonal => &[Sym::G11],
            Layout::NonDiagonal => &[Sym::G11, Sym::G22],
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Layout::Diagonal => "diagonal",
            Layout::NonDiagonal => "nondiagonal",
        }
    }
}

/// Coefficients of
/// `X = b1 y^3 + b2 y^2 x + b3 y x^2 + b4 x^3 + a1 y^2 + a2 y x + a3 x^2` and
/// `Y = r1 y^3 + r2 y^2 x + r3 y x^2 + r4 x^3 + s1 y^2 + s2 y x + s3 x^2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnsatzCoeffs {
    pub m: Rational,
    values: BTreeMap<Sym, Rational>,
}

impl AnsatzCoeffs {
    pub fn new(m: Rational) -> Self {
        AnsatzCoeffs { m, values: Sym::COEFFS.iter().map(|s| (*s, Rational::zero())).collect() }
    }

    pub fn get(&self, name: &str) -> Option<&Rational> {
        self.values.get(&Sym::from_name(name)?)
    }

    pub fn set(&mut self, name: &str, q: Rational) -> Result<(), AnsatzError> {
        match Sym::from_name(name).filter(|s| s.is_coeff()) {
            Some(s) => {
                self.values.insert(s, q);
                Ok(())
            }
            None => Err(AnsatzError::UnknownParameter(name.to_string())),
        }
    }

    fn sym(&self, s: Sym) -> &Rational {
        &self.values[&s]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Rational)> {
        Sym::COEFFS.iter().map(move |s| (s.name(), &self.values[s]))
    }

    pub fn family(&self) -> Expr {
        Expr::x() * Expr::y().pow(self.m.clone())
    }

    pub fn forces(&self) -> ForceField {
        let term = |s: Sym, ex: i64, ey: i64| Expr::constant(self.sym(s).clone()) * Expr::x().powi(ex) * Expr::y().powi(ey);
        let x = term(Sym::B1, 0, 3)
            + term(Sym::B2, 1, 2)
            + term(Sym::B3, 2, 1)
            + term(Sym::B4, 3, 0)
            + term(Sym::A1, 0, 2)
            + term(Sym::A2, 1, 1)
            + term(Sym::A3, 2, 0);
        let y = term(Sym::R1, 0, 3)
            + term(Sym::R2, 1, 2)
            + term(Sym::R3, 2, 1)
            + term(Sym::R4, 3, 0)
            + term(Sym::S1, 0, 2)
            + term(Sym::S2, 1, 1)
            + term(Sym::S3, 2, 0);
        ForceField::new(x, y).normalized()
    }

    /// `eta = (y X + m x Y) / (m (m + 1) x y^(2m - 1))`.
    pub fn eta(&self) -> Expr {
        let ff = self.forces();
        let m = Expr::constant(self.m.clone());
        let p = Expr::y() * &ff.x + &m * Expr::x() * &ff.y;
        let den = &m * (&m + Expr::one()) * Expr::x() * Expr::y().pow(rat(2, 1) * &self.m - Rational::one());
        (p / den).normalize()
    }

    /// The same system with `x` and `y` exchanged: exponent `1/m`.
    pub fn swapped(&self) -> AnsatzCoeffs {
        use Sym::*;
        let pairs = [(B1, R4), (B2, R3), (B3, R2), (B4, R1), (A1, S3), (A2, S2), (A3, S1)];
        let mut out = AnsatzCoeffs::new(self.m.recip());
        for (a, b) in pairs {
            out.values.insert(a, self.sym(b).clone());
            out.values.insert(b, self.sym(a).clone());
        }
        out
    }
}

impl Serialize for AnsatzCoeffs {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(15))?;
        map.serialize_entry("m", &format_rational(&self.m))?;
        for (k, v) in self.iter() {
            map.serialize_entry(k, &format_rational(v))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AnsatzCoeffs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        let q = |k: &str| -> Result<Rational, D::Error> {
            let s = raw.get(k).ok_or_else(|| serde::de::Error::custom(format!("missing {k}")))?;
            parse_rational(s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s:?}")))
        };
        let mut c = AnsatzCoeffs::new(q("m")?);
        for s in Sym::COEFFS {
            c.values.insert(s, q(s.name())?);
        }
        Ok(c)
    }
}

fn xy_mono(c: Sym, ex: i32, ey: i32) -> MPoly {
    MPoly::var(c).shift(Sym::X, ex).shift(Sym::Y, ey)
}

/// Symbolic force components.
fn force_polys() -> (MPoly, MPoly) {
    use Sym::*;
    let x = [(B1, 0, 3), (B2, 1, 2), (B3, 2, 1), (B4, 3, 0), (A1, 0, 2), (A2, 1, 1), (A3, 2, 0)];
    let y = [(R1, 0, 3), (R2, 1, 2), (R3, 2, 1), (R4, 3, 0), (S1, 0, 2), (S2, 1, 1), (S3, 2, 0)];
    let sum = |ts: &[(Sym, i32, i32)]| ts.iter().fold(MPoly::zero(), |acc, (c, ex, ey)| acc.add(&xy_mono(*c, *ex, *ey)));
    (sum(&x), sum(&y))
}

/// `2(m+1) y X - (m x P_x - y P_y + (m+1) P)` with `P = y X + m x Y`; it
/// vanishes identically exactly when `X` is the Dainelli force of the
/// `eta` that `P` defines, and then `Y` is too.
fn eta_defect(m: &MPoly) -> MPoly {
    let (x, y) = force_polys();
    let (vx, vy) = (MPoly::var(Sym::X), MPoly::var(Sym::Y));
    let m1 = m.add(&MPoly::one());
    let p = vy.mul(&x).add(&m.mul(&vx).mul(&y));
    let lhs = MPoly::int(2).mul(&m1).mul(&vy).mul(&x);
    let rhs = m.mul(&vx).mul(&p.diff(Sym::X)).sub(&vy.mul(&p.diff(Sym::Y))).add(&m1.mul(&p));
    lhs.sub(&rhs)
}

/// `g12 (Y_y - X_x) - g22 Y_x + g11 X_y`.
fn multiplier_defect(layout: Layout) -> MPoly {
    let (x, y) = force_polys();
    let [g11, g12, g22] = layout.metric_polys();
    g12.mul(&y.diff(Sym::Y).sub(&x.diff(Sym::X))).sub(&g22.mul(&y.diff(Sym::X))).add(&g11.mul(&x.diff(Sym::Y)))
}

/// One of the combinations `{1,2,3} x {a,b,c}` read off the extreme
/// monomials of the eta matching.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructuralCase {
    pub label: String,
    /// `None` when `m` stays unspecified.
    #[serde(serialize_with = "ser_opt_rational")]
    pub m: Option<Rational>,
    /// Coefficients forced to vanish.
    pub zero: Vec<String>,
    /// Coefficients left arbitrary so far.
    pub open: Vec<String>,
}

fn ser_opt_rational<S: serde::Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match q {
        Some(q) => s.serialize_str(&format_rational(q)),
        None => s.serialize_none(),
    }
}

/// A linear relation from the eta matching.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    /// The relation as `poly = 0`.
    pub equation: MPoly,
    /// Solved for a `Y` coefficient when its factor does not vanish.
    pub solved: Option<(Sym, RatFn)>,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.solved {
            Some((s, v)) => write!(f, "{s} = {v}"),
            None => write!(f, "{} = 0", self.equation),
        }
    }
}

impl Serialize for Relation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaConsistency {
    pub cases: Vec<StructuralCase>,
    pub relations: Vec<Relation>,
}

/// The four extreme monomials: which coefficient each one controls, and
/// which label it opens.
const EXTREMES: [((i32, i32), Sym, &str); 4] =
    [((0, 4), Sym::B1, "a"), ((0, 3), Sym::A1, "b"), ((4, 0), Sym::R4, "1"), ((3, 0), Sym::S3, "2")];

/// Splits the eta matching into the case table and the remaining linear
/// relations.
pub fn eta_consistency_cases(m: &Exponent) -> Result<EtaConsistency, AnsatzError> {
    m.check()?;
    let eqs = eta_defect(&Exponent::Symbolic.poly()).collect_xy();
    let excluded = excluded_exponents();
    // values of m that open each extreme coefficient
    let mut opens: Vec<(Sym, &str, Vec<Rational>)> = Vec::new();
    for (key, c, label) in EXTREMES {
        let mult = eqs[&key].coeff(c, 1);
        let (u, shift) = mult.to_upoly(Sym::M).expect("multiplier is univariate in m");
        let mut roots: Vec<Rational> = u.rational_roots();
        if shift < 0 {
            roots.push(Rational::zero());
        }
        roots.retain(|r| !excluded.contains(r));
        opens.push((c, label, roots));
    }
    let outer: Vec<(&str, Option<(Sym, &Rational)>)> = vec![
        ("1", Some((opens[2].0, &opens[2].2[0]))),
        ("2", Some((opens[3].0, &opens[3].2[0]))),
        ("3", None),
    ];
    let inner: Vec<(&str, Option<(Sym, &Rational)>)> = vec![
        ("a", Some((opens[0].0, &opens[0].2[0]))),
        ("b", Some((opens[1].0, &opens[1].2[0]))),
        ("c", None),
    ];
    let extremes: Vec<Sym> = EXTREMES.iter().map(|e| e.1).collect();
    let mut cases = Vec::new();
    for (ol, o) in &outer {
        for (il, i) in &inner {
            let pins: Vec<&Rational> = [o, i].iter().filter_map(|p| p.map(|(_, r)| r)).collect();
            if pins.windows(2).any(|w| w[0] != w[1]) {
                continue;
            }
            let pinned = pins.first().map(|r| (*r).clone());
            let matches = match (m.value(), &pinned) {
                (Some(v), Some(p)) => v == p,
                // an unspecified value avoids every pinned one
                (Some(v), None) => !opens.iter().any(|(_, _, rs)| rs.contains(v)),
                (None, _) => true,
            };
            if !matches {
                continue;
            }
            let open: Vec<Sym> = [o, i].iter().filter_map(|p| p.map(|(s, _)| s)).collect();
            cases.push(StructuralCase {
                label: format!("{ol}{il}"),
                m: pinned,
                zero: extremes.iter().filter(|s| !open.contains(s)).map(|s| s.name().to_string()).collect(),
                open: open.iter().map(|s| s.name().to_string()).collect(),
            });
        }
    }
    let mp = m.poly();
    let numeric = eta_defect(&mp).collect_xy();
    let mut relations = Vec::new();
    for (key, e) in &numeric {
        if EXTREMES.iter().any(|x| x.0 == *key) {
            continue;
        }
        let target = [Sym::R1, Sym::R2, Sym::R3, Sym::S1, Sym::S2].into_iter().find(|s| e.contains(*s));
        let solved = target.and_then(|s| {
            let a = e.coeff(s, 1);
            if a.is_zero() {
                return None;
            }
            Some((s, RatFn::new(e.coeff(s, 0).neg(), a)))
        });
        relations.push(Relation { equation: e.monic(), solved });
    }
    Ok(EtaConsistency { cases, relations })
}

/// Coefficients pinned to zero and coefficients kept as free parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assumptions {
    pub zero: Vec<Sym>,
    pub free: Vec<Sym>,
}

/// One solution family of the multiplier condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub layout: Layout,
    pub m: Exponent,
    /// Coefficient values and metric entries in terms of the free symbols.
    pub values: BTreeMap<Sym, RatFn>,
    pub free: Vec<Sym>,
    /// Coefficients that came out zero, including assumed ones.
    pub forced_zero: Vec<Sym>,
}

impl Branch {
    pub fn metric(&self) -> [RatFn; 3] {
        let [a, b, c] = self.layout.metric_polys();
        let pick = |p: MPoly, s: Sym| if p.contains(s) { self.values[&s].clone() } else { RatFn::from_poly(p) };
        [pick(a, Sym::G11), pick(b, Sym::G12), pick(c, Sym::G22)]
    }

    fn det(&self) -> RatFn {
        let [a, b, c] = self.metric();
        a.mul(&c).sub(&b.mul(&b))
    }

    /// Binds the free symbols; unbound ones default to 1.
    pub fn instantiate(&self, values: &BTreeMap<Sym, Rational>) -> Result<(AnsatzCoeffs, Metric2<Rational>), AnsatzError> {
        let m = match &self.m {
            Exponent::Value(q) => q.clone(),
            Exponent::Symbolic => values.get(&Sym::M).cloned().ok_or(AnsatzError::SymbolicExponent)?,
        };
        let at = |s: Sym| -> Rational {
            if s == Sym::M {
                return m.clone();
            }
            values.get(&s).cloned().unwrap_or_else(Rational::one)
        };
        let eval = |s: Sym, f: &RatFn| f.eval(&at).ok_or_else(|| AnsatzError::BadFreeParameter(s.name().to_string()));
        let mut coeffs = AnsatzCoeffs::new(m.clone());
        for s in Sym::COEFFS {
            coeffs.values.insert(s, eval(s, &self.values[&s])?);
        }
        let [a, b, c] = self.metric();
        let g = Metric2::new(eval(Sym::G11, &a)?, eval(Sym::G12, &b)?, eval(Sym::G22, &c)?)
            .map_err(|_| AnsatzError::BadFreeParameter(self.free.iter().map(|s| s.name()).collect::<Vec<_>>().join(",")))?;
        Ok((coeffs, g))
    }

    /// Each nonzero value as text.
    pub fn relations(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for s in Sym::COEFFS {
            let v = &self.values[&s];
            if !self.free.contains(&s) && !v.is_zero() {
                out.insert(s.name().to_string(), v.to_string());
            }
        }
        for (s, v) in [Sym::G11, Sym::G12, Sym::G22].into_iter().zip(self.metric()) {
            out.insert(s.name().to_string(), v.to_string());
        }
        out
    }
}

/// The eta matching and the multiplier condition, coefficient by
/// coefficient in `x`, `y`, with pinned zeros substituted.
fn equations(m: &Exponent, layout: Layout, assume: &Assumptions) -> (Vec<MPoly>, Vec<MPoly>) {
    let zero = RatFn::zero();
    let pin = |p: MPoly| -> Vec<MPoly> {
        p.collect_xy()
            .into_values()
            .map(|mut e| {
                for s in &assume.zero {
                    e = e.subst(*s, &zero).num;
                }
                e
            })
            .filter(|e| !e.is_zero())
            .collect()
    };
    (pin(eta_defect(&m.poly())), pin(multiplier_defect(layout)))
}

fn system(m: &Exponent, layout: Layout, assume: &Assumptions) -> System {
    let (mut eqs, mult) = equations(m, layout, assume);
    eqs.extend(mult);
    let mut params: BTreeSet<Sym> = assume.free.iter().copied().collect();
    if matches!(m, Exponent::Symbolic) {
        params.insert(Sym::M);
    }
    let unknowns = Sym::COEFFS
        .iter()
        .chain(layout.metric_unknowns())
        .copied()
        .filter(|s| !params.contains(s) && !assume.zero.contains(s))
        .collect();
    System { eqs, unknowns, params }
}

/// All nonsingular, nontrivial solution families of the multiplier
/// condition for the given layout, in exploration order.
pub fn solve_metric(m: &Exponent, layout: Layout, assume: &Assumptions) -> Result<Vec<Branch>, AnsatzError> {
    m.check()?;
    let sys = system(m, layout, assume);
    let (sols, _) = solver::solve(&sys, &Preference::default());
    let mut out: Vec<Branch> = Vec::new();
    for sol in sols {
        let mut values = sol.values;
        for s in &assume.zero {
            values.insert(*s, RatFn::zero());
        }
        let free: Vec<Sym> = sol.params.iter().copied().filter(|s| *s != Sym::M).collect();
        if Sym::COEFFS.iter().all(|s| values[s].is_zero()) {
            continue;
        }
        let forced_zero = Sym::COEFFS.iter().copied().filter(|s| values[s].is_zero()).collect();
        let b = Branch { layout, m: m.clone(), values, free, forced_zero };
        if b.det().is_zero() {
            continue;
        }
        if !out.contains(&b) {
            out.push(b);
        }
    }
    if out.is_empty() {
        return Err(AnsatzError::NoMultiplier);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Reproduces a published case.
    Published,
    /// Worked out here.
    Derived,
    /// Immediate from the definitions.
    Trivial,
}

/// One fully resolved solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub name: String,
    pub layout: Layout,
    pub origin: Origin,
    pub coeffs: AnsatzCoeffs,
    pub g: Metric2<Rational>,
    #[serde(rename = "V")]
    pub v: Expr,
    pub free_params: Vec<String>,
    #[serde(with = "param_map")]
    pub params: BTreeMap<String, Rational>,
    /// Coefficients and metric entries in terms of the free parameters.
    #[serde(default)]
    pub relations: BTreeMap<String, String>,
}

mod param_map {
    use super::*;
    pub fn serialize<S: serde::Serializer>(m: &BTreeMap<String, Rational>, s: S) -> Result<S::Ok, S::Error> {
        let t: BTreeMap<&String, String> = m.iter().map(|(k, v)| (k, format_rational(v))).collect();
        t.serialize(s)
    }
    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Rational>, D::Error> {
        let t = BTreeMap::<String, String>::deserialize(d)?;
        t.into_iter()
            .map(|(k, v)| parse_rational(&v).map(|q| (k, q)).ok_or_else(|| serde::de::Error::custom(format!("bad rational {v:?}"))))
            .collect()
    }
}

impl CaseRecord {
    /// `x y^m` on the positive quadrant patch used for checks.
    pub fn family(&self, domain: Rect) -> CurveFamily {
        CurveFamily::new_unchecked(self.coeffs.family(), domain).expect("x y^m has a valid jet")
    }

    pub fn forces(&self) -> ForceField {
        self.coeffs.forces()
    }

    pub fn eta(&self) -> Expr {
        self.coeffs.eta()
    }

    /// The record of the family with `x` and `y` exchanged.
    pub fn swapped(&self) -> CaseRecord {
        CaseRecord {
            name: format!("{}-swapped", self.name),
            layout: self.layout,
            origin: Origin::Derived,
            coeffs: self.coeffs.swapped(),
            g: Metric2::new_unchecked(self.g.g22.clone(), self.g.g12.clone(), self.g.g11.clone()),
            v: self.v.subst_xy(&Expr::y(), &Expr::x()).normalize(),
            free_params: Vec::new(),
            params: BTreeMap::new(),
            relations: BTreeMap::new(),
        }
    }
}

/// Builds a record from a branch and parameter values, computing `V` by
/// quadrature with base point at the origin.
pub fn record_from_branch(
    name: &str,
    origin: Origin,
    branch: &Branch,
    values: &BTreeMap<Sym, Rational>,
) -> Result<CaseRecord, AnsatzError> {
    let (coeffs, g) = branch.instantiate(values)?;
    let pot = potential_from_forces(&g, &coeffs.forces(), (Rational::zero(), Rational::zero()))?;
    let params = branch
        .free
        .iter()
        .map(|s| (s.name().to_string(), values.get(s).cloned().unwrap_or_else(Rational::one)))
        .collect();
    Ok(CaseRecord {
        name: name.to_string(),
        layout: branch.layout,
        origin,
        coeffs,
        g,
        v: pot.v,
        free_params: branch.free.iter().map(|s| s.name().to_string()).collect(),
        params,
        relations: branch.relations(),
    })
}

/// Resolves a catalogued case. Unlisted free parameters default to 1.
pub fn reproduce_case(name: &str, values: &[(&str, Rational)]) -> Result<CaseRecord, AnsatzError> {
    let entry = catalogue::lookup(name).ok_or_else(|| AnsatzError::UnknownCase(name.to_string()))?;
    let mut bound = BTreeMap::new();
    for (k, v) in values {
        let s = Sym::from_name(k).filter(|s| entry.free.contains(s) || *s == Sym::M && entry.m.is_none());
        match s {
            Some(s) => {
                bound.insert(s, v.clone());
            }
            None => return Err(AnsatzError::UnknownParameter(k.to_string())),
        }
    }
    let m = match &entry.m {
        Some(q) => Exponent::Value(q.clone()),
        None => {
            bound.entry(Sym::M).or_insert_with(|| entry.default_m.clone());
            Exponent::Symbolic
        }
    };
    let branch = entry.branch(&m)?;
    record_from_branch(name, entry.origin, &branch, &bound)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    /// Offending expression when the check fails.
    pub detail: Option<String>,
}

impl Check {
    fn from_zero(e: &Expr) -> Check {
        let z = e.normalize();
        Check { passed: z.is_zero(), detail: (!z.is_zero()).then(|| z.to_string()) }
    }
}

/// Exact checks on a record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseVerification {
    /// The forces are the Dainelli forces of the eta they define.
    pub eta_consistent: Check,
    /// The multiplier condition residual is the zero polynomial.
    pub multiplier: Check,
    /// `g (X, Y) = -grad V`.
    pub potential: Check,
    /// The restricted energy is a function of `f`.
    pub restricted_energy: Check,
}

impl CaseVerification {
    pub fn passed(&self) -> bool {
        self.eta_consistent.passed && self.multiplier.passed && self.potential.passed && self.restricted_energy.passed
    }
}

pub fn verify_case_record(rec: &CaseRecord) -> CaseVerification {
    let fam = rec.family(Rect::square(0.5, 2.0));
    let ff = rec.forces();
    let eta = EtaField::unsampled(rec.eta());
    let d = dainelli_forces(&fam, &eta);
    let eta_consistent = {
        let dx = (&d.x - &ff.x).normalize();
        let dy = (&d.y - &ff.y).normalize();
        let ok = dx.is_zero() && dy.is_zero();
        Check { passed: ok, detail: (!ok).then(|| format!("X: {dx}; Y: {dy}")) }
    };
    let multiplier = match constant_multiplier_residual(&rec.g, &ff) {
        Ok(r) => Check::from_zero(&r),
        Err(e) => Check { passed: false, detail: Some(e.to_string()) },
    };
    let (p, q) = potential_gradient(&rec.g, &ff);
    let potential = {
        let dx = (rec.v.diff(Var::X) - p).normalize();
        let dy = (rec.v.diff(Var::Y) - q).normalize();
        let ok = dx.is_zero() && dy.is_zero();
        Check { passed: ok, detail: (!ok).then(|| format!("V_x: {dx}; V_y: {dy}")) }
    };
    let re = restricted_energy(&fam, &eta, &rec.v, &rec.g);
    CaseVerification { eta_consistent, multiplier, potential, restricted_energy: Check::from_zero(&re.z0_defect) }
}

/// Outcome of the special-value search on the non-diagonal generic branch.
#[derive(Clone, Debug, Serialize)]
pub struct SpecialExponents {
    /// Rational zeros and poles of every coefficient of the reduced system.
    #[serde(serialize_with = "ser_rationals")]
    pub candidates: Vec<Rational>,
    /// Values where solving the eta relations for `r_i`, `s_i` fails.
    #[serde(serialize_with = "ser_rationals")]
    pub degenerate: Vec<Rational>,
    /// Candidates at which the branch structure differs from a generic value.
    #[serde(serialize_with = "ser_rationals")]
    pub special: Vec<Rational>,
}

fn ser_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    let t: Vec<String> = v.iter().map(format_rational).collect();
    t.serialize(s)
}

fn coefficient_roots(p: &MPoly, out: &mut BTreeSet<Rational>) {
    if let Some((u, shift)) = p.to_upoly(Sym::M) {
        out.extend(u.rational_roots());
        if shift < 0 {
            out.insert(Rational::zero());
        }
    }
}

/// Shape of a solution set: free symbols and forced zeros of each branch.
fn signature(m: &Exponent, layout: Layout, assume: &Assumptions) -> BTreeSet<(Vec<Sym>, Vec<Sym>)> {
    match solve_metric(m, layout, assume) {
        Ok(bs) => bs.into_iter().map(|b| (b.free, b.forced_zero)).collect(),
        Err(_) => BTreeSet::new(),
    }
}

/// Finds the exponents at which the non-diagonal generic branch (`r4 = s3 =
/// a1 = b1 = 0`) changes shape.
pub fn discover_special_exponents() -> SpecialExponents {
    let assume = Assumptions { zero: vec![Sym::R4, Sym::S3, Sym::A1, Sym::B1], free: Vec::new() };
    let (eta_eqs, mult) = equations(&Exponent::Symbolic, Layout::NonDiagonal, &assume);
    // eliminate r_i, s_i through the eta relations, recording pivots
    let mut degenerate = BTreeSet::new();
    let mut subs: Vec<(Sym, RatFn)> = Vec::new();
    for e in &eta_eqs {
        if let Some(s) = [Sym::R1, Sym::R2, Sym::R3, Sym::S1, Sym::S2].into_iter().find(|s| e.contains(*s)) {
            let a = e.coeff(s, 1);
            coefficient_roots(&a, &mut degenerate);
            subs.push((s, RatFn::new(e.coeff(s, 0).neg(), a)));
        }
    }
    let rest = mult;
    let mut candidates = BTreeSet::new();
    for e in rest {
        let mut r = RatFn::from_poly(e);
        for (s, v) in &subs {
            r = r.subst(*s, v);
        }
        coefficient_roots(&r.den, &mut candidates);
        // group the numerator by its monomials in the non-m symbols
        let mut groups: BTreeMap<Vec<i32>, MPoly> = BTreeMap::new();
        for (mono, c) in r.num.terms() {
            let key: Vec<i32> = Sym::ALL.iter().map(|s| if *s == Sym::M { 0 } else { mono[s.index()] }).collect();
            let single = MPoly::monomial(Sym::M, mono[Sym::M.index()]).scale(c);
            let g = groups.entry(key).or_default();
            *g = g.add(&single);
        }
        for g in groups.values() {
            coefficient_roots(g, &mut candidates);
        }
    }
    let excluded = excluded_exponents();
    let generic = signature(&Exponent::Value(rat(7, 5)), Layout::NonDiagonal, &assume);
    let special = candidates
        .iter()
        .filter(|c| !excluded.contains(c) && !degenerate.contains(c))
        .filter(|c| signature(&Exponent::Value((*c).clone()), Layout::NonDiagonal, &assume) != generic)
        .cloned()
        .collect();
    SpecialExponents { candidates: candidates.into_iter().collect(), degenerate: degenerate.into_iter().collect(), special }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excluded_values() {
        assert!(matches!(eta_consistency_cases(&Exponent::Value(rat(0, 1))), Err(AnsatzError::ExcludedExponent(_))));
        assert!(matches!(eta_consistency_cases(&Exponent::Value(rat(-1, 1))), Err(AnsatzError::ExcludedExponent(_))));
    }

    #[test]
    fn symbolic_case_table() {
        let r = eta_consistency_cases(&Exponent::Symbolic).unwrap();
        let labels: Vec<(&str, Option<Rational>)> = r.cases.iter().map(|c| (c.label.as_str(), c.m.clone())).collect();
        assert_eq!(
            labels,
            vec![
                ("1c", Some(rat(-1, 5))),
                ("2c", Some(rat(-1, 4))),
                ("3a", Some(rat(-5, 1))),
                ("3b", Some(rat(-4, 1))),
                ("3c", None),
            ]
        );
    }

    #[test]
    fn generic_value_gives_3c() {
        let r = eta_consistency_cases(&Exponent::Value(rat(2, 1))).unwrap();
        assert_eq!(r.cases.len(), 1);
        assert_eq!(r.cases[0].label, "3c");
        let r1 = r.relations.iter().find_map(|x| x.solved.as_ref().filter(|(s, _)| *s == Sym::R1)).unwrap();
        assert_eq!(r1.1, RatFn::var(Sym::B2));
    }
}
