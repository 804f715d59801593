use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use idk_core::ansatz::{self, catalogue, record_from_branch, reproduce_case, verify_case_record, Assumptions, CaseRecord, Origin};
use idk_core::expr::{parse_with, ParseError};
use idk_core::forces::{dainelli_forces, eta_from_forces};
use idk_core::helmholtz::{
    assess, constant_multiplier_terms, eta_pde_terms, potential_on_domain, restricted_energy, szebehely_terms, Assessment,
};
use idk_core::scalar::{format_rational, parse_rational};
use idk_core::scenarios::{load_scenario, ScenarioError};
use idk_core::verify::{kasner_along_trace, Controls, Sidecar};
use idk_core::{EnergyProfile, Error, EtaField, Exponent, ExitCode, Expr, ForceField, Layout, Metric, Rect, Scenario};

#[derive(Parser)]
#[command(name = "idk", version, about = "Constant-multiplier inverse problem for planar curve families")]
struct Cli {
    #[command(flatten)]
    opts: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Relative tolerance for sampled checks.
    #[arg(long, default_value_t = 1e-9, global = true)]
    tol_rel: f64,
    /// Absolute tolerance for sampled checks.
    #[arg(long, default_value_t = 1e-12, global = true)]
    tol_abs: f64,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Forces tracing the family for a given eta.
    Forces {
        #[arg(long)]
        f: String,
        #[arg(long)]
        eta: String,
        #[command(flatten)]
        params: Params,
    },
    /// Multiplier, Szebehely and eta residuals for a force field.
    Check(CheckArgs),
    /// Runs the case engine for the family x y^m.
    Ansatz(AnsatzArgs),
    /// Integrates an orbit of a scenario and reports drifts.
    Orbit(OrbitArgs),
    /// Lists the built-in scenarios.
    Scenarios,
}

#[derive(Args, Clone, Default)]
struct Params {
    /// Named rational parameter, `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", allow_hyphen_values = true)]
    param: Vec<String>,
}

#[derive(Args)]
struct CheckArgs {
    /// Built-in scenario; replaces the explicit inputs.
    #[arg(long, conflicts_with_all = ["f", "x", "y"])]
    scenario: Option<String>,
    /// Scenario JSON file.
    #[arg(long, conflicts_with_all = ["f", "x", "y", "scenario"])]
    file: Option<PathBuf>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long = "X", id = "x")]
    x: Option<String>,
    #[arg(long = "Y", id = "y")]
    y: Option<String>,
    /// `g11,g12,g22`.
    #[arg(long, default_value = "1,0,1", allow_hyphen_values = true)]
    g: String,
    /// Defaults to the eta the forces determine.
    #[arg(long)]
    eta: Option<String>,
    /// Restricted energy as a formula in `f`; defaults to the one the
    /// potential determines.
    #[arg(long)]
    ebar: Option<String>,
    /// `x0,x1,y0,y1`.
    #[arg(long, default_value = "0.5,2,0.5,2", allow_hyphen_values = true)]
    domain: String,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[command(flatten)]
    params: Params,
}

#[derive(Args)]
struct AnsatzArgs {
    /// Exponent, `p/q` or `symbolic`.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "special")]
    m: Option<String>,
    #[arg(long, conflicts_with = "nondiagonal")]
    diagonal: bool,
    #[arg(long)]
    nondiagonal: bool,
    /// Reports the exponents at which the non-diagonal generic branch changes shape.
    #[arg(long, conflicts_with_all = ["m", "diagonal", "nondiagonal"])]
    special: bool,
    #[command(flatten)]
    params: Params,
}

#[derive(Args)]
struct OrbitArgs {
    #[arg(long, required_unless_present = "file")]
    scenario: Option<String>,
    #[arg(long, conflicts_with = "scenario")]
    file: Option<PathBuf>,
    /// Launch point `x,y`; defaults to the scenario's.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long = "T", default_value_t = 1.0, allow_hyphen_values = true)]
    t: f64,
    /// Multiplies the admissible launch speed.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Fixed-step RK4 with this step instead of the adaptive integrator.
    #[arg(long)]
    rk4: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Largest acceptable relative f-drift.
    #[arg(long, default_value_t = 1e-6)]
    max_drift: f64,
}

enum Failure {
    Core(Error),
    Usage(String),
}

macro_rules! core_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Core(e.into())
            }
        }
    )*};
}

core_failure!(
    Error,
    ParseError,
    idk_core::expr::EvalError,
    idk_core::geometry::GeometryError,
    idk_core::forces::ForcesError,
    idk_core::helmholtz::HelmholtzError,
    ansatz::AnsatzError,
    idk_core::verify::VerifyError,
    ScenarioError
);

struct Output {
    body: String,
    code: ExitCode,
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Forces { f, eta, params } => cmd_forces(&cli.opts, f, eta, params),
        Command::Check(a) => cmd_check(&cli.opts, a),
        Command::Ansatz(a) => cmd_ansatz(&cli.opts, a),
        Command::Orbit(a) => cmd_orbit(&cli.opts, a),
        Command::Scenarios => cmd_scenarios(&cli.opts),
    };
    let (body, code) = match result {
        Ok(o) => (Some(o.body), o.code),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            (None, e.exit_code())
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            (None, ExitCode::Parse)
        }
    };
    if let Some(body) = body {
        match &cli.opts.out {
            Some(p) => {
                if let Err(e) = fs::write(p, body) {
                    eprintln!("error: writing {}: {e}", p.display());
                    return ProcessExit::from(ExitCode::Domain.code() as u8);
                }
            }
            None => print!("{body}"),
        }
    }
    ProcessExit::from(code.code() as u8)
}

fn params(p: &Params) -> Result<HashMap<String, Expr>, Failure> {
    let mut out = HashMap::new();
    for kv in &p.param {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("expected name=value, got {kv:?}")))?;
        let q = parse_rational(v.trim()).ok_or_else(|| Failure::Usage(format!("bad rational {v:?}")))?;
        out.insert(k.trim().to_string(), Expr::constant(q));
    }
    Ok(out)
}

fn expr(src: &str, subs: &HashMap<String, Expr>) -> Result<Expr, ParseError> {
    Ok(parse_with(src, subs)?.normalize())
}

fn floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], Failure> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(what, s))?;
    v.try_into().map_err(|_| bad(what, s))
}

fn bad(what: &str, s: &str) -> Failure {
    Failure::Usage(format!("bad {what} {s:?}"))
}

fn metric(s: &str) -> Result<Metric, Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let q: Vec<_> = parts.iter().map(|p| parse_rational(p)).collect::<Option<_>>().ok_or_else(|| bad("metric", s))?;
    let [a, b, c]: [_; 3] = q.try_into().map_err(|_| bad("metric", s))?;
    // a singular matrix is reported by the checks themselves
    Ok(Metric::new_unchecked(a, b, c))
}

fn domain(s: &str) -> Result<Rect, Failure> {
    let [x0, x1, y0, y1] = floats::<4>(s, "domain")?;
    let r = Rect::from([[x0, x1], [y0, y1]]);
    if !r.is_valid() {
        return Err(bad("domain", s));
    }
    Ok(r)
}

fn json_out(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_out(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn cmd_forces(opts: &Global, f: &str, eta: &str, p: &Params) -> Result<Output, Failure> {
    let subs = params(p)?;
    let fam = idk_core::CurveFamily::new_unchecked(expr(f, &subs)?, Rect::square(-1.0, 1.0))?;
    let eta = EtaField::unsampled(expr(eta, &subs)?);
    let ff = dainelli_forces(&fam, &eta).normalized();
    let body = match opts.format {
        Format::Json => json_out(json!({ "X": ff.x.to_string(), "Y": ff.y.to_string(), "seed": opts.seed })),
        Format::Csv => csv_out(&["X", "Y"], &[vec![ff.x.to_string(), ff.y.to_string()]]),
    };
    Ok(Output { body, code: ExitCode::Pass })
}

fn assessment_row(name: &str, a: &Assessment, opts: &Global) -> Vec<String> {
    vec![
        name.to_string(),
        format!("{:?}", a.confidence).to_lowercase(),
        a.samples.to_string(),
        a.skipped.to_string(),
        format!("{:e}", a.max_abs),
        format!("{:e}", a.max_relative),
        a.passes(opts.tol_rel, opts.tol_abs).to_string(),
    ]
}

fn assessment_json(a: &Assessment, opts: &Global) -> Value {
    let mut v = serde_json::to_value(a).expect("serializable");
    v["passed"] = json!(a.passes(opts.tol_rel, opts.tol_abs));
    v
}

fn scenario_from(name: Option<&String>, file: Option<&PathBuf>) -> Result<Scenario, Failure> {
    match (name, file) {
        (Some(n), _) => Ok(load_scenario(n)?),
        (None, Some(p)) => Ok(Scenario::from_path(p)?),
        (None, None) => Err(Failure::Core(ScenarioError::Incomplete.into())),
    }
}

fn cmd_check(opts: &Global, a: &CheckArgs) -> Result<Output, Failure> {
    if a.scenario.is_some() || a.file.is_some() {
        return check_scenario(opts, &scenario_from(a.scenario.as_ref(), a.file.as_ref())?, a.samples);
    }
    let subs = params(&a.params)?;
    let need = |o: &Option<String>, flag: &str| o.clone().ok_or_else(|| Failure::Usage(format!("--{flag} is required")));
    let dom = domain(&a.domain)?;
    let fam = idk_core::CurveFamily::new_unchecked(expr(&need(&a.f, "f")?, &subs)?, dom)?;
    let ff = ForceField::new(expr(&need(&a.x, "X")?, &subs)?, expr(&need(&a.y, "Y")?, &subs)?);
    let g = metric(&a.g)?;
    let b = idk_core::FBindings::new();
    let mult = assess(&constant_multiplier_terms(&g, &ff)?, &dom, &b, a.samples, opts.seed);
    let eta = match &a.eta {
        Some(s) => expr(s, &subs)?,
        None => eta_from_forces(&fam, &ff)?,
    };
    let eta = EtaField::unsampled(eta);
    let mut rows = vec![assessment_row("multiplier", &mult, opts)];
    let mut passed = mult.passes(opts.tol_rel, opts.tol_abs);
    let mut report = json!({ "seed": opts.seed, "g": g, "eta": eta.eta, "multiplier": assessment_json(&mult, opts) });
    // the remaining checks need a potential, which exists only when the multiplier condition holds
    let pot = if mult.confidence == idk_core::helmholtz::Confidence::Exact { potential_on_domain(&g, &ff, &dom).ok() } else { None };
    match pot {
        Some(pot) => {
            let re = restricted_energy(&fam, &eta, &pot.v, &g);
            let ebar = match &a.ebar {
                Some(s) => EnergyProfile::parse(s)?,
                None => EnergyProfile::Field(re.ebar.clone()),
            };
            let sz = assess(&szebehely_terms(&fam, &pot.v, &g, &ebar)?, &dom, &b, a.samples, opts.seed);
            let ep = assess(&eta_pde_terms(&fam, &eta, &g, &ebar)?, &dom, &b, a.samples, opts.seed);
            let zd = assess(&[re.z0_defect.clone()], &dom, &b, a.samples, opts.seed);
            for (n, x) in [("szebehely", &sz), ("eta_pde", &ep), ("restricted_energy", &zd)] {
                rows.push(assessment_row(n, x, opts));
                passed &= x.passes(opts.tol_rel, opts.tol_abs);
                report[n] = assessment_json(x, opts);
            }
            report["V"] = json!(pot.v);
            report["ebar"] = json!(ebar);
        }
        None => {
            passed = false;
            report["V"] = Value::Null;
        }
    }
    report["passed"] = json!(passed);
    Ok(Output { body: check_body(opts, report, &rows), code: if passed { ExitCode::Pass } else { ExitCode::ResidualFailure } })
}

fn check_body(opts: &Global, report: Value, rows: &[Vec<String>]) -> String {
    match opts.format {
        Format::Json => json_out(report),
        Format::Csv => csv_out(&["check", "confidence", "samples", "skipped", "max_abs", "max_relative", "passed"], rows),
    }
}

fn check_scenario(opts: &Global, sc: &Scenario, samples: usize) -> Result<Output, Failure> {
    let c = sc.check(samples, opts.seed)?;
    let passed = c.passes(opts.tol_rel, opts.tol_abs);
    let rows = vec![
        assessment_row("multiplier", &c.multiplier, opts),
        assessment_row("szebehely", &c.szebehely, opts),
        assessment_row("eta_pde", &c.eta_pde, opts),
    ];
    let report = json!({
        "seed": opts.seed,
        "scenario": sc.name,
        "g": sc.solution.g,
        "V": sc.solution.v,
        "eta": sc.solution.eta,
        "ebar": sc.solution.ebar,
        "multiplier": assessment_json(&c.multiplier, opts),
        "szebehely": assessment_json(&c.szebehely, opts),
        "eta_pde": assessment_json(&c.eta_pde, opts),
        "gradient_defect": c.gradient,
        "eta_at_point": c.eta_at_point,
        "passed": passed,
    });
    Ok(Output { body: check_body(opts, report, &rows), code: if passed { ExitCode::Pass } else { ExitCode::ResidualFailure } })
}

fn layouts(a: &AnsatzArgs) -> Vec<Layout> {
    match (a.diagonal, a.nondiagonal) {
        (true, _) => vec![Layout::Diagonal],
        (_, true) => vec![Layout::NonDiagonal],
        _ => vec![Layout::Diagonal, Layout::NonDiagonal],
    }
}

fn cmd_ansatz(opts: &Global, a: &AnsatzArgs) -> Result<Output, Failure> {
    if a.special {
        let s = ansatz::discover_special_exponents();
        let mut v = serde_json::to_value(&s).expect("serializable");
        v["seed"] = json!(opts.seed);
        return Ok(Output { body: json_out(v), code: ExitCode::Pass });
    }
    let m: Exponent = a.m.as_deref().unwrap_or_default().parse().map_err(Failure::Usage)?;
    let mut values = BTreeMap::new();
    for (k, v) in params(&a.params)? {
        values.insert(k, v.as_const().cloned().expect("parameters are constants"));
    }
    let mut records: Vec<CaseRecord> = Vec::new();
    for layout in layouts(a) {
        let entries: Vec<_> = catalogue()
            .iter()
            .filter(|e| e.layout == layout && e.m.as_ref() == m.value())
            .collect();
        if !entries.is_empty() {
            for e in entries {
                let pairs: Vec<(&str, _)> =
                    values.iter().filter(|(k, _)| e.free.iter().any(|s| s.name() == k.as_str()) || (k.as_str() == "m" && e.m.is_none())).map(|(k, v)| (k.as_str(), v.clone())).collect();
                records.push(reproduce_case(e.name, &pairs)?);
            }
            continue;
        }
        let Exponent::Value(q) = &m else { continue };
        let assume = Assumptions { zero: Vec::new(), free: Vec::new() };
        let branches = ansatz::solve_metric(&m, layout, &assume)?;
        let bound = values
            .iter()
            .filter_map(|(k, v)| ansatz::poly::Sym::from_name(k).map(|s| (s, v.clone())))
            .collect();
        for (i, br) in branches.iter().enumerate() {
            let name = format!("m={}-{}-{}", format_rational(q), layout.tag(), i + 1);
            // branches that a unit choice of free parameters makes singular are skipped
            if let Ok(r) = record_from_branch(&name, Origin::Derived, br, &bound) {
                records.push(r);
            }
        }
    }
    if records.is_empty() {
        return Err(Failure::Core(ansatz::AnsatzError::NoMultiplier.into()));
    }
    let checks: Vec<_> = records.iter().map(verify_case_record).collect();
    let ok = checks.iter().all(|c| c.passed());
    let body = match opts.format {
        Format::Json => {
            let list: Vec<Value> = records
                .iter()
                .zip(&checks)
                .map(|(r, c)| {
                    let mut v = serde_json::to_value(r).expect("serializable");
                    v["eta"] = json!(r.eta().normalize());
                    v["verification"] = serde_json::to_value(c).expect("serializable");
                    v
                })
                .collect();
            json_out(json!({ "seed": opts.seed, "m": m.to_string(), "records": list }))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .zip(&checks)
                .map(|(r, c)| {
                    vec![
                        r.name.clone(),
                        r.layout.tag().to_string(),
                        format!("{:?}", r.origin).to_lowercase(),
                        format_rational(&r.g.g11),
                        format_rational(&r.g.g12),
                        format_rational(&r.g.g22),
                        r.v.to_string(),
                        c.passed().to_string(),
                    ]
                })
                .collect();
            csv_out(&["name", "layout", "origin", "g11", "g12", "g22", "V", "verified"], &rows)
        }
    };
    Ok(Output { body, code: if ok { ExitCode::Pass } else { ExitCode::ResidualFailure } })
}

fn cmd_orbit(opts: &Global, a: &OrbitArgs) -> Result<Output, Failure> {
    let sc = scenario_from(a.scenario.as_ref(), a.file.as_ref())?;
    let point = match &a.point {
        Some(s) => {
            let [x, y] = floats::<2>(s, "point")?;
            (x, y)
        }
        None => sc.point,
    };
    let controls = match a.rk4 {
        Some(dt) => Controls::rk4(dt),
        None => Controls::adaptive(a.rtol, a.atol),
    };
    let trace = sc.launch(point, a.speed, a.t, &controls)?;
    let drift = sc.drift(&trace)?;
    let kasner = kasner_along_trace(&trace, &sc.forces, &sc.bindings())?;
    let ok = drift.f_drift <= a.max_drift;
    let sidecar = Sidecar { meta: trace.meta.clone(), drift: Some(drift.clone()), kasner: Some(kasner), seed: opts.seed };
    let mut report = serde_json::to_value(&sidecar).expect("serializable");
    report["scenario"] = json!(sc.name);
    report["ebar_c0"] = json!(sc.ebar_at(drift.c0));
    report["passed"] = json!(ok);
    let body = match opts.format {
        Format::Csv => {
            if let Some(p) = &opts.out {
                write_sidecar(p, &report)?;
            } else {
                eprint!("{}", json_out(report));
            }
            trace.to_csv_string()
        }
        Format::Json => {
            if let Some(p) = &opts.out {
                // the trace goes next to the report
                let csv = p.with_extension("csv");
                fs::write(&csv, trace.to_csv_string()).map_err(|e| Failure::Usage(format!("writing {}: {e}", csv.display())))?;
                report["trace"] = json!(csv.display().to_string());
            } else {
                report["samples"] = serde_json::to_value(&trace.samples).expect("serializable");
            }
            json_out(report)
        }
    };
    Ok(Output { body, code: if ok { ExitCode::Pass } else { ExitCode::ResidualFailure } })
}

fn write_sidecar(p: &std::path::Path, report: &Value) -> Result<(), Failure> {
    let side = p.with_extension("json");
    fs::write(&side, json_out(report.clone())).map_err(|e| Failure::Usage(format!("writing {}: {e}", side.display())))
}

fn cmd_scenarios(opts: &Global) -> Result<Output, Failure> {
    let mut rows = Vec::new();
    let mut list = Vec::new();
    for n in idk_core::scenarios::scenario_names() {
        let sc = load_scenario(n)?;
        let origin = format!("{:?}", sc.origin).to_lowercase();
        rows.push(vec![n.to_string(), origin.clone(), sc.fam.f().to_string(), sc.description.clone()]);
        list.push(json!({ "name": n, "origin": origin, "f": sc.fam.f(), "description": sc.description }));
    }
    let body = match opts.format {
        Format::Json => json_out(json!({ "seed": opts.seed, "scenarios": list })),
        Format::Csv => csv_out(&["name", "origin", "f", "description"], &rows),
    };
    Ok(Output { body, code: ExitCode::Pass })
}
