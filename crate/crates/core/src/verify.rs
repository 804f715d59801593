//! Orbit integration of `x'' = X`, `y'' = Y` and the diagnostics that tie
//! orbits back to the curve family.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::expr::{Bindings, EvalError, Expr};
use crate::forces::{EtaField, ForceField, KasnerEvaluator};
use crate::geometry::{CurveFamily, Metric2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("eta = {eta} is not positive at ({x}, {y}): no real orbit of the family passes through this point")]
    NegativeEta { x: f64, y: f64, eta: f64 },
    #[error("initial point ({x}, {y}) lies outside the integration domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("adaptive step {h:e} fell below the floor at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("time span must be finite and nonempty")]
    EmptySpan,
    #[error("invalid integrator controls: {0}")]
    BadControls(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Phase-space state `(x, y, vx, vy)`.
pub type State<T> = [T; 4];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Integrator {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with error control on the fifth-order solution.
    DormandPrince { rtol: f64, atol: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::DormandPrince { rtol: 1e-9, atol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub integrator: Integrator,
    /// Integration stops cleanly when the orbit leaves this rectangle.
    pub domain: Option<Rect>,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Controls { integrator: Integrator::default(), domain: None, max_steps: 1_000_000 }
    }
}

impl Controls {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Controls { integrator: Integrator::DormandPrince { rtol, atol }, ..Controls::default() }
    }

    pub fn rk4(dt: f64) -> Self {
        Controls { integrator: Integrator::Rk4 { dt }, ..Controls::default() }
    }

    pub fn within(mut self, domain: Rect) -> Self {
        self.domain = Some(domain);
        self
    }

    fn check(&self) -> Result<(), VerifyError> {
        let ok = match self.integrator {
            Integrator::Rk4 { dt } => dt.is_finite() && dt > 0.0,
            Integrator::DormandPrince { rtol, atol } => rtol > 0.0 && atol > 0.0 && rtol.is_finite() && atol.is_finite(),
        };
        if ok && self.max_steps > 0 {
            Ok(())
        } else {
            Err(VerifyError::BadControls(format!("{:?}", self.integrator)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    pub vx: T,
    pub vy: T,
}

impl<T: Scalar> TraceSample<T> {
    fn new(t: T, z: State<T>) -> Self {
        TraceSample { t, x: z[0], y: z[1], vx: z[2], vy: z[3] }
    }

    pub fn state(&self) -> State<T> {
        [self.x, self.y, self.vx, self.vy]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub integrator: Integrator,
    pub initial: [f64; 4],
    pub t_span: [f64; 2],
    /// Family value at the launch point, when launched from one.
    pub c0: Option<f64>,
    /// The orbit left the domain (or its forces became undefined) before the end of the span.
    pub truncated: bool,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace<T> {
    pub samples: Vec<TraceSample<T>>,
    pub meta: TraceMeta,
}

impl<T: Scalar + Serialize> OrbitTrace<T> {
    /// CSV with header `t,x,y,vx,vy`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for s in &self.samples {
            wr.serialize(s)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

impl<T: Scalar> OrbitTrace<T> {
    pub fn last(&self) -> &TraceSample<T> {
        self.samples.last().expect("trace has the initial sample")
    }
}

/// Velocity `sign * sqrt(eta) * (f_y, -f_x)` at a point, tangent to the
/// curve through it with the speed the energy relation fixes.
pub fn initial_velocity<T: Scalar>(
    fam: &CurveFamily,
    eta: &EtaField,
    (x0, y0): (T, T),
    sign: T,
    b: &Bindings<T>,
) -> Result<(T, T), VerifyError> {
    let e = eta.eta.eval(x0, y0, b)?;
    if !(e > T::zero()) {
        return Err(VerifyError::NegativeEta {
            x: x0.to_f64().unwrap_or(f64::NAN),
            y: y0.to_f64().unwrap_or(f64::NAN),
            eta: e.to_f64().unwrap_or(f64::NAN),
        });
    }
    let h = e.sqrt() * sign.signum();
    let fx = fam.fx().eval(x0, y0, b)?;
    let fy = fam.fy().eval(x0, y0, b)?;
    Ok((h * fy, -(h * fx)))
}

struct Rhs<'a, T> {
    ff: &'a ForceField,
    b: &'a Bindings<T>,
}

impl<T: Scalar> Rhs<'_, T> {
    fn eval(&self, z: &State<T>) -> Result<State<T>, EvalError> {
        let (ax, ay) = self.ff.eval(z[0], z[1], self.b)?;
        let out = [z[2], z[3], ax, ay];
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            let c = |v: T| v.to_f64().unwrap_or(f64::NAN);
            Err(EvalError::Domain { what: "non-finite force", x: c(z[0]), y: c(z[1]) })
        }
    }
}

fn axpy<T: Scalar>(z: &State<T>, h: T, terms: &[(T, &State<T>)]) -> State<T> {
    std::array::from_fn(|i| z[i] + h * terms.iter().fold(T::zero(), |acc, (c, k)| acc + *c * k[i]))
}

fn inside<T: Scalar>(domain: &Option<Rect>, z: &State<T>) -> bool {
    let finite = z.iter().all(|v| v.is_finite());
    match domain {
        None => finite,
        Some(d) => finite && d.contains(z[0].to_f64().unwrap_or(f64::NAN), z[1].to_f64().unwrap_or(f64::NAN)),
    }
}

fn rk4_step<T: Scalar>(rhs: &Rhs<T>, z: &State<T>, k1: &State<T>, h: T) -> Result<State<T>, EvalError> {
    let half = T::lit(0.5);
    let k2 = rhs.eval(&axpy(z, h, &[(half, k1)]))?;
    let k3 = rhs.eval(&axpy(z, h, &[(half, &k2)]))?;
    let k4 = rhs.eval(&axpy(z, h, &[(T::one(), &k3)]))?;
    let sixth = T::lit(1.0 / 6.0);
    let third = T::lit(1.0 / 3.0);
    Ok(axpy(z, h, &[(sixth, k1), (third, &k2), (third, &k3), (sixth, &k4)]))
}

// Dormand-Prince 5(4) tableau; the forces do not depend on t, so the nodes are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand-Prince attempt: the fifth-order state and the error estimate.
fn dp_step<T: Scalar>(rhs: &Rhs<T>, z: &State<T>, k1: &State<T>, h: T) -> Result<(State<T>, State<T>), EvalError> {
    let mut k: Vec<State<T>> = vec![*k1];
    for stage in 1..7 {
        let terms: Vec<(T, &State<T>)> = (0..stage).map(|j| (T::lit(A[stage][j]), &k[j])).collect();
        let zs = axpy(z, h, &terms);
        k.push(rhs.eval(&zs)?);
    }
    let hi: Vec<(T, &State<T>)> = (0..7).map(|j| (T::lit(B5[j]), &k[j])).collect();
    let z5 = axpy(z, h, &hi);
    let err: State<T> = std::array::from_fn(|i| h * (0..7).fold(T::zero(), |acc, j| acc + T::lit(B5[j] - B4[j]) * k[j][i]));
    Ok((z5, err))
}

/// Integrates from `ic` over `t_span` (which may run backwards). Leaving the
/// domain, or reaching a point where the forces are undefined, ends the
/// trace early and sets `meta.truncated`.
pub fn integrate_orbit<T: Scalar>(
    ff: &ForceField,
    b: &Bindings<T>,
    ic: State<T>,
    (t0, t1): (T, T),
    controls: &Controls,
) -> Result<OrbitTrace<T>, VerifyError> {
    controls.check()?;
    let span = t1 - t0;
    if !span.is_finite() || span == T::zero() {
        return Err(VerifyError::EmptySpan);
    }
    if !inside(&controls.domain, &ic) {
        return Err(VerifyError::OutsideDomain { x: ic[0].to_f64().unwrap_or(f64::NAN), y: ic[1].to_f64().unwrap_or(f64::NAN) });
    }
    let rhs = Rhs { ff, b };
    let f64_of = |v: T| v.to_f64().unwrap_or(f64::NAN);
    let mut meta = TraceMeta {
        integrator: controls.integrator,
        initial: ic.map(f64_of),
        t_span: [f64_of(t0), f64_of(t1)],
        c0: None,
        truncated: false,
        accepted: 0,
        rejected: 0,
    };
    let mut samples = vec![TraceSample::new(t0, ic)];
    let dir = span.signum();
    let mut t = t0;
    let mut z = ic;
    let mut k1 = rhs.eval(&z)?;
    let remaining = |t: T| (t1 - t) * dir;

    match controls.integrator {
        Integrator::Rk4 { dt } => {
            let n = (f64_of(span.abs()) / dt).ceil().max(1.0) as usize;
            let h = span / T::lit(n as f64);
            for i in 1..=n {
                if i > controls.max_steps {
                    meta.truncated = true;
                    break;
                }
                let next = match rk4_step(&rhs, &z, &k1, h) {
                    Ok(s) => s,
                    Err(e) if e.is_domain() => {
                        meta.truncated = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                };
                let tn = if i == n { t1 } else { t0 + h * T::lit(i as f64) };
                if !inside(&controls.domain, &next) {
                    meta.truncated = true;
                    break;
                }
                match rhs.eval(&next) {
                    Ok(k) => k1 = k,
                    Err(e) if e.is_domain() => {
                        meta.truncated = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
                z = next;
                t = tn;
                meta.accepted += 1;
                samples.push(TraceSample::new(t, z));
            }
        }
        Integrator::DormandPrince { rtol, atol } => {
            let (rtol, atol) = (T::lit(rtol), T::lit(atol));
            let floor = T::lit(1e-14) * span.abs();
            let mut h = span.abs() * T::lit(1e-3);
            let (safety, fmin, fmax) = (T::lit(0.9), T::lit(0.2), T::lit(5.0));
            while remaining(t) > T::zero() {
                if meta.accepted + meta.rejected >= controls.max_steps {
                    meta.truncated = true;
                    break;
                }
                let last = h >= remaining(t);
                if last {
                    h = remaining(t);
                }
                let attempt = match dp_step(&rhs, &z, &k1, h * dir) {
                    Ok(r) => Some(r),
                    Err(e) if e.is_domain() => None,
                    Err(e) => return Err(e.into()),
                };
                let Some((next, err)) = attempt else {
                    // a stage left the region where the forces are defined
                    meta.rejected += 1;
                    h = h * T::lit(0.25);
                    if h < floor {
                        meta.truncated = true;
                        break;
                    }
                    continue;
                };
                let norm = (0..4).fold(T::zero(), |m, i| {
                    let sc = atol + rtol * z[i].abs().max(next[i].abs());
                    m.max((err[i] / sc).abs())
                });
                if !norm.is_finite() || norm > T::one() {
                    meta.rejected += 1;
                    let f = if norm.is_finite() { (safety * norm.powf(T::lit(-0.2))).max(fmin) } else { fmin };
                    h = h * f;
                    if h < floor {
                        return Err(VerifyError::StepUnderflow { t: f64_of(t), h: f64_of(h) });
                    }
                    continue;
                }
                if !inside(&controls.domain, &next) {
                    meta.truncated = true;
                    break;
                }
                match rhs.eval(&next) {
                    Ok(k) => k1 = k,
                    Err(e) if e.is_domain() => {
                        meta.truncated = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
                t = if last { t1 } else { t + h * dir };
                z = next;
                meta.accepted += 1;
                samples.push(TraceSample::new(t, z));
                let f = if norm == T::zero() { fmax } else { (safety * norm.powf(T::lit(-0.2))).min(fmax).max(fmin) };
                h = h * f;
            }
        }
    }
    Ok(OrbitTrace { samples, meta })
}

/// Launches from a point with `speed * initial_velocity` and integrates.
#[allow(clippy::too_many_arguments)]
pub fn launch_orbit<T: Scalar>(
    fam: &CurveFamily,
    eta: &EtaField,
    ff: &ForceField,
    point: (T, T),
    speed: T,
    t_end: T,
    controls: &Controls,
    b: &Bindings<T>,
) -> Result<OrbitTrace<T>, VerifyError> {
    let (vx, vy) = initial_velocity(fam, eta, point, T::one(), b)?;
    let ic = [point.0, point.1, vx * speed, vy * speed];
    let mut trace = integrate_orbit(ff, b, ic, (T::zero(), t_end), controls)?;
    trace.meta.c0 = fam.f().eval(point.0, point.1, b)?.to_f64();
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub samples: usize,
    pub c0: f64,
    pub e0: f64,
    /// max `|f - c0| / (1 + |c0|)`.
    pub f_drift: f64,
    /// max `|E - E0| / (1 + |E0|)`.
    pub energy_drift: f64,
    /// max `|E - Ebar(c0)|`, when the restricted energy is known.
    pub ebar_defect: Option<f64>,
    /// max `|vx f_x + vy f_y| / (|v| |grad f|)`.
    pub tangency: f64,
}

/// `E = 1/2 g(v, v) + V`.
pub fn energy<T: Scalar>(g: &Metric2<f64>, v: &Expr, s: &TraceSample<T>, b: &Bindings<T>) -> Result<T, EvalError> {
    let (g11, g12, g22) = (T::lit(g.g11), T::lit(g.g12), T::lit(g.g22));
    let kin = T::lit(0.5) * (g11 * s.vx * s.vx + T::lit(2.0) * g12 * s.vx * s.vy + g22 * s.vy * s.vy);
    Ok(kin + v.eval(s.x, s.y, b)?)
}

/// Drift of the family value and the energy along a trace.
pub fn orbit_invariants<T: Scalar>(
    trace: &OrbitTrace<T>,
    fam: &CurveFamily,
    g: &Metric2<f64>,
    v: &Expr,
    ebar: Option<T>,
    b: &Bindings<T>,
) -> Result<DriftReport, EvalError> {
    let first = &trace.samples[0];
    let c0 = fam.f().eval(first.x, first.y, b)?;
    let e0 = energy(g, v, first, b)?;
    let (mut fd, mut ed, mut bd, mut tg) = (T::zero(), T::zero(), T::zero(), T::zero());
    for s in &trace.samples {
        let f = fam.f().eval(s.x, s.y, b)?;
        fd = fd.max((f - c0).abs() / (T::one() + c0.abs()));
        let e = energy(g, v, s, b)?;
        ed = ed.max((e - e0).abs() / (T::one() + e0.abs()));
        if let Some(eb) = ebar {
            bd = bd.max((e - eb).abs());
        }
        let fx = fam.fx().eval(s.x, s.y, b)?;
        let fy = fam.fy().eval(s.x, s.y, b)?;
        let scale = s.vx.hypot(s.vy) * fx.hypot(fy);
        if scale > T::zero() {
            tg = tg.max((s.vx * fx + s.vy * fy).abs() / scale);
        }
    }
    let c = |v: T| v.to_f64().unwrap_or(f64::NAN);
    Ok(DriftReport {
        samples: trace.samples.len(),
        c0: c(c0),
        e0: c(e0),
        f_drift: c(fd),
        energy_drift: c(ed),
        ebar_defect: ebar.map(|_| c(bd)),
        tangency: c(tg),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KasnerAlong {
    pub evaluated: usize,
    /// Samples at near-vertical tangents, where `y(x)` is not a graph.
    pub skipped: usize,
    pub max_abs: f64,
    /// max residual divided by its scale.
    pub max_relative: f64,
}

/// Third-order orbit equation along a trace, with the jets taken from the
/// forces rather than from differencing the samples.
pub fn kasner_along_trace<T: Scalar>(trace: &OrbitTrace<T>, ff: &ForceField, b: &Bindings<T>) -> Result<KasnerAlong, EvalError> {
    let k = KasnerEvaluator::new(ff);
    let mut out = KasnerAlong { evaluated: 0, skipped: 0, max_abs: 0.0, max_relative: 0.0 };
    for s in &trace.samples {
        match k.jet_from_state((s.x, s.y, s.vx, s.vy), b)? {
            None => out.skipped += 1,
            Some(j) => {
                let r = k.residual(&j, b)?;
                out.evaluated += 1;
                out.max_abs = out.max_abs.max(r.residual.abs().to_f64().unwrap_or(f64::NAN));
                out.max_relative = out.max_relative.max(r.relative().to_f64().unwrap_or(f64::NAN));
            }
        }
    }
    Ok(out)
}

/// Metadata and drifts written next to a CSV trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub meta: TraceMeta,
    pub drift: Option<DriftReport>,
    pub kasner: Option<KasnerAlong>,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn no_b() -> Bindings<f64> {
        Bindings::new()
    }

    #[test]
    fn free_particle_is_a_line() {
        let ff = ForceField::zero();
        let tr = integrate_orbit(&ff, &no_b(), [0.0, 0.0, 1.0, 1.0], (0.0, 2.0), &Controls::default()).unwrap();
        let s = tr.last();
        assert!((s.t - 2.0).abs() < 1e-15);
        assert!((s.x - 2.0).abs() < 1e-12 && (s.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_solution() {
        let ff = ForceField::parse("x", "y").unwrap();
        for c in [Controls::default(), Controls::rk4(1e-3)] {
            let tr = integrate_orbit(&ff, &no_b(), [1.0, 1.0, 1.0, -1.0], (0.0, 1.0), &c).unwrap();
            let s = tr.last();
            assert!((s.x - 1f64.exp()).abs() < 1e-8, "{c:?} {}", s.x);
            assert!((s.y - (-1f64).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn hyperbola_launch_velocity() {
        let fam = CurveFamily::parse("x*y", Rect::square(0.1, 3.0)).unwrap();
        let eta = EtaField::unsampled(Expr::one());
        let v = initial_velocity(&fam, &eta, (1.0, 1.0), 1.0, &no_b()).unwrap();
        assert_eq!(v, (1.0, -1.0));
        let w = initial_velocity(&fam, &eta, (1.0, 1.0), -1.0, &no_b()).unwrap();
        assert_eq!(w, (-1.0, 1.0));
    }

    #[test]
    fn negative_eta_rejected() {
        let fam = CurveFamily::parse("x*y", Rect::square(0.1, 3.0)).unwrap();
        let eta = EtaField::unsampled(parse("x - 2").unwrap());
        let err = initial_velocity(&fam, &eta, (1.0, 1.0), 1.0, &no_b()).unwrap_err();
        assert!(matches!(err, VerifyError::NegativeEta { .. }));
    }

    #[test]
    fn domain_exit_truncates() {
        let ff = ForceField::zero();
        let c = Controls::default().within(Rect::square(-1.0, 1.0));
        let tr = integrate_orbit(&ff, &no_b(), [0.0, 0.0, 1.0, 0.0], (0.0, 5.0), &c).unwrap();
        assert!(tr.meta.truncated);
        assert!(tr.last().x <= 1.0);
        let err = integrate_orbit(&ff, &no_b(), [2.0, 0.0, 1.0, 0.0], (0.0, 1.0), &c).unwrap_err();
        assert!(matches!(err, VerifyError::OutsideDomain { .. }));
    }

    #[test]
    fn undefined_forces_truncate() {
        // y^(1/2) is undefined below the axis
        let ff = ForceField::parse("0", "y^(1/2)").unwrap();
        let tr = integrate_orbit(&ff, &no_b(), [0.0, 1.0, 0.0, -3.0], (0.0, 5.0), &Controls::default()).unwrap();
        assert!(tr.meta.truncated);
        assert!(tr.last().y >= 0.0);
    }

    #[test]
    fn csv_header_and_rows() {
        let tr = integrate_orbit(&ForceField::zero(), &no_b(), [0.0, 0.0, 1.0, 0.0], (0.0, 1.0), &Controls::rk4(0.5)).unwrap();
        let csv = tr.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x,y,vx,vy"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn single_precision_runs() {
        let ff = ForceField::parse("-x", "-y").unwrap();
        let tr = integrate_orbit(&ff, &Bindings::<f32>::new(), [1.0f32, 0.0, 0.0, 1.0], (0.0, 1.0), &Controls::rk4(0.01)).unwrap();
        let s = tr.last();
        assert!((s.x - 1f32.cos()).abs() < 1e-4);
    }
}
