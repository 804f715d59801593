//! Built-in scenarios: concrete parameter choices for the worked examples,
//! each with a launch point and the values it is expected to reproduce.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{reproduce_case, AnsatzError, CaseRecord, Origin};
use crate::domain::Rect;
use crate::expr::{parse_with, Bindings, EvalError, Expr, ParseError, Var};
use crate::forces::{dainelli_forces, EtaField, ForceField};
use crate::geometry::{CurveFamily, GeometryError, Metric2};
use crate::helmholtz::{
    assess, constant_multiplier_terms, eta_pde_terms, potential_from_forces, restricted_energy, sampled_gradient_defect,
    szebehely_terms, Assessment, EnergyProfile, HelmholtzError, PotentialSolution,
};
use crate::scalar::{format_rational, parse_rational, Rational, Scalar};
use crate::verify::{launch_orbit, orbit_invariants, Controls, DriftReport, OrbitTrace, VerifyError};

/// Number of derivatives bound for every scenario function.
const FUNCTION_JETS: usize = 3;

const BUILTIN: &[(&str, &str)] = &[
    ("straight-lines", include_str!("../scenarios/straight-lines.json")),
    ("xym-case1", include_str!("../scenarios/xym-case1.json")),
    ("xym-case2", include_str!("../scenarios/xym-case2.json")),
    ("xym-case3a", include_str!("../scenarios/xym-case3a.json")),
    ("xym-case3b", include_str!("../scenarios/xym-case3b.json")),
    ("xym-case3c-generic", include_str!("../scenarios/xym-case3c-generic.json")),
    ("xym-m1", include_str!("../scenarios/xym-m1.json")),
    ("xym-m1over2", include_str!("../scenarios/xym-m1over2.json")),
    ("xym-m1over3-derived", include_str!("../scenarios/xym-m1over3-derived.json")),
    ("conics", include_str!("../scenarios/conics.json")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}; known: {known}", known = scenario_names().join(", "))]
    UnknownScenario(String),
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("in {field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error("bad rational {0:?}")]
    BadRational(String),
    #[error("scenario needs either a record or a system")]
    Incomplete,
    #[error("stored record differs from the one the case engine produces")]
    StaleRecord,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Helmholtz(#[from] HelmholtzError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A bound univariate function; `body` is in `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub body: String,
}

/// Explicit data for scenarios not taken from the case engine. Every string
/// may use the scenario parameters; `ebar` is a formula in `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDef {
    pub f: String,
    pub g: [String; 3],
    pub eta: String,
    /// Computed by quadrature from the forces when absent.
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
    pub ebar: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub value: String,
    pub origin: Origin,
}

/// On-disk form of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub description: String,
    pub origin: Origin,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    #[serde(default)]
    pub functions: Vec<FunctionDef>,
    pub domain: Rect,
    pub point: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<CaseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDef>,
    #[serde(default)]
    pub expected: BTreeMap<String, Expected>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub origin: Origin,
    pub params: BTreeMap<String, Rational>,
    /// Bodies with `x` standing for the argument.
    pub functions: Vec<(String, Expr)>,
    pub fam: CurveFamily,
    pub solution: PotentialSolution,
    pub forces: ForceField,
    pub record: Option<CaseRecord>,
    pub point: (f64, f64),
    pub expected: BTreeMap<String, Expected>,
}

/// Residual checks of a scenario.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioCheck {
    pub multiplier: Assessment,
    pub szebehely: Assessment,
    pub eta_pde: Assessment,
    /// Largest relative defect of `g (X, Y) = -grad V`.
    pub gradient: f64,
    pub eta_at_point: f64,
}

impl ScenarioCheck {
    pub fn passes(&self, tol_rel: f64, tol_abs: f64) -> bool {
        self.multiplier.passes(tol_rel, tol_abs)
            && self.szebehely.passes(tol_rel, tol_abs)
            && self.eta_pde.passes(tol_rel, tol_abs)
            && self.gradient <= tol_rel
            && self.eta_at_point > 0.0
    }
}

pub fn scenario_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_json(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

pub fn load_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let json = builtin_json(name).ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
    Scenario::from_json(json)
}

fn rational(s: &str) -> Result<Rational, ScenarioError> {
    parse_rational(s).ok_or_else(|| ScenarioError::BadRational(s.to_string()))
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        Self::from_file(serde_json::from_str(json)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut params = BTreeMap::new();
        for (k, v) in &file.parameters {
            params.insert(k.clone(), rational(v)?);
        }
        let mut subs: HashMap<String, Expr> = params.iter().map(|(k, v)| (k.clone(), Expr::constant(v.clone()))).collect();
        let parse = |field: &str, src: &str, subs: &HashMap<String, Expr>| {
            parse_with(src, subs).map_err(|source| ScenarioError::Parse { field: field.to_string(), source })
        };
        let mut functions = Vec::new();
        {
            let mut zs = subs.clone();
            zs.insert("z".into(), Expr::x());
            for fd in &file.functions {
                functions.push((fd.name.clone(), parse(&fd.name, &fd.body, &zs)?.normalize()));
            }
        }
        let mut sc = Scenario {
            name: file.name.clone(),
            description: file.description.clone(),
            origin: file.origin,
            params,
            functions,
            fam: CurveFamily::new_unchecked(Expr::y(), file.domain)?,
            solution: PotentialSolution {
                v: Expr::zero(),
                g: Metric2::identity(),
                eta: Expr::zero(),
                ebar: EnergyProfile::identity(),
            },
            forces: ForceField::zero(),
            record: None,
            point: (file.point[0], file.point[1]),
            expected: file.expected.clone(),
        };
        match (&file.record, &file.system) {
            (Some(rec), _) => {
                let pairs: Vec<(&str, Rational)> = rec.params.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
                if reproduce_case(&rec.name, &pairs)? != *rec {
                    return Err(ScenarioError::StaleRecord);
                }
                sc.fam = rec.family(file.domain);
                let eta = EtaField::unsampled(rec.eta());
                let re = restricted_energy(&sc.fam, &eta, &rec.v, &rec.g);
                sc.solution =
                    PotentialSolution { v: rec.v.clone(), g: rec.g.clone(), eta: eta.eta, ebar: EnergyProfile::Field(re.ebar) };
                sc.forces = rec.forces();
                sc.record = Some(rec.clone());
            }
            (None, Some(sys)) => {
                sc.fam = CurveFamily::new_unchecked(parse("f", &sys.f, &subs)?, file.domain)?;
                let g = Metric2::new(rational(&sys.g[0])?, rational(&sys.g[1])?, rational(&sys.g[2])?)?;
                let eta = EtaField::unsampled(parse("eta", &sys.eta, &subs)?);
                sc.forces = dainelli_forces(&sc.fam, &eta).normalized();
                let v = match &sys.v {
                    Some(src) => parse("V", src, &subs)?.normalize(),
                    None => potential_from_forces(&g, &sc.forces, (Rational::zero(), Rational::zero()))?.v,
                };
                subs.insert("f".into(), Expr::x());
                let ebar = EnergyProfile::Formula(parse("ebar", &sys.ebar, &subs)?.normalize());
                sc.solution = PotentialSolution { v, g, eta: eta.eta, ebar };
            }
            (None, None) => return Err(ScenarioError::Incomplete),
        }
        Ok(sc)
    }

    /// Numeric bindings of every scenario function and its first few
    /// derivatives. Later functions may call earlier ones.
    pub fn bindings<T: Scalar>(&self) -> Bindings<T> {
        let mut b = Bindings::<T>::new();
        for (name, body) in &self.functions {
            let prev = b.clone();
            let mut current = body.clone();
            let mut label = name.clone();
            for k in 0..=FUNCTION_JETS {
                let e = current.clone();
                let env = prev.clone();
                b.insert(&label, move |u: T| e.eval(u, T::zero(), &env));
                if k < FUNCTION_JETS {
                    current = current.diff(Var::X).normalize();
                    label.push('\'');
                }
            }
        }
        b
    }

    pub fn domain(&self) -> Rect {
        self.fam.domain()
    }

    pub fn eta_field(&self) -> EtaField {
        EtaField::new(self.solution.eta.clone(), self.domain(), &self.bindings())
    }

    /// `Ebar(c)` for a family value `c`.
    pub fn ebar_at(&self, c: f64) -> Option<f64> {
        match &self.solution.ebar {
            EnergyProfile::Formula(body) => body.eval(c, 0.0, &self.bindings()).ok(),
            _ => None,
        }
    }

    pub fn check(&self, samples: usize, seed: u64) -> Result<ScenarioCheck, ScenarioError> {
        let b = self.bindings::<f64>();
        let sol = &self.solution;
        let eta = EtaField::unsampled(sol.eta.clone());
        let d = self.domain();
        Ok(ScenarioCheck {
            multiplier: assess(&constant_multiplier_terms(&sol.g, &self.forces)?, &d, &b, samples, seed),
            szebehely: assess(&szebehely_terms(&self.fam, &sol.v, &sol.g, &sol.ebar)?, &d, &b, samples, seed),
            eta_pde: assess(&eta_pde_terms(&self.fam, &eta, &sol.g, &sol.ebar)?, &d, &b, samples, seed),
            gradient: sampled_gradient_defect(&sol.g, &self.forces, &sol.v, &d, &b, samples, seed)?,
            eta_at_point: sol.eta.eval(self.point.0, self.point.1, &b)?,
        })
    }

    /// Integrates from `point` with `speed` times the admissible velocity.
    pub fn launch(&self, point: (f64, f64), speed: f64, t_end: f64, controls: &Controls) -> Result<OrbitTrace<f64>, ScenarioError> {
        let controls = Controls { domain: controls.domain.or(Some(self.domain())), ..*controls };
        if !controls.domain.is_some_and(|d| d.contains(point.0, point.1)) {
            return Err(VerifyError::OutsideDomain { x: point.0, y: point.1 }.into());
        }
        let b = self.bindings();
        Ok(launch_orbit(&self.fam, &self.eta_field(), &self.forces, point, speed, t_end, &controls, &b)?)
    }

    pub fn drift(&self, trace: &OrbitTrace<f64>) -> Result<DriftReport, ScenarioError> {
        let b = self.bindings();
        let first = &trace.samples[0];
        let c0 = self.fam.f().eval(first.x, first.y, &b)?;
        Ok(orbit_invariants(trace, &self.fam, &self.solution.g.to_f64(), &self.solution.v, self.ebar_at(c0), &b)?)
    }

    /// The expected entries that disagree with the bound solution. `V` is
    /// compared up to a constant, the rest exactly.
    pub fn expected_mismatches(&self) -> Result<Vec<String>, ScenarioError> {
        let mut subs: HashMap<String, Expr> =
            self.params.iter().map(|(k, v)| (k.clone(), Expr::constant(v.clone()))).collect();
        let mut bad = Vec::new();
        for (q, e) in &self.expected {
            let got = match q.as_str() {
                "V" | "eta" => {
                    let want = parse_with(&e.value, &subs)
                        .map_err(|source| ScenarioError::Parse { field: q.clone(), source })?;
                    let have = if q == "V" { &self.solution.v } else { &self.solution.eta };
                    let diff = have - &want;
                    if q == "V" {
                        diff.diff(Var::X).is_zero() && diff.diff(Var::Y).is_zero()
                    } else {
                        diff.is_zero()
                    }
                }
                "g" => self.solution.g.to_string() == e.value,
                "ebar" => {
                    subs.insert("f".into(), Expr::x());
                    let want = parse_with(&e.value, &subs)
                        .map_err(|source| ScenarioError::Parse { field: q.clone(), source })?;
                    subs.remove("f");
                    match &self.solution.ebar {
                        EnergyProfile::Formula(body) => (body - &want).is_zero(),
                        EnergyProfile::Field(field) => (field - &want.subst(Var::X, self.fam.f())).is_zero(),
                        EnergyProfile::Named(_) => false,
                    }
                }
                _ => continue,
            };
            if !got {
                bad.push(q.clone());
            }
        }
        Ok(bad)
    }

    /// The parameters as `name = value` strings.
    pub fn parameter_summary(&self) -> Vec<String> {
        self.params.iter().map(|(k, v)| format!("{k} = {}", format_rational(v))).collect()
    }

    /// Launch point as floats, checked against the domain.
    pub fn point_in_domain(&self) -> bool {
        self.domain().contains(self.point.0, self.point.1)
    }
}
