use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::normal::{Atom, Poly};
use super::{Bindings, EvalError, Expr};
use crate::domain::Rect;
use crate::scalar::is_integer;

use num_traits::Signed;

pub const DEFAULT_SEED: u64 = 0x1d_2024;

#[derive(Clone, Debug)]
pub struct EquivOptions {
    pub samples: usize,
    pub seed: u64,
    pub rel_tol: f64,
    pub resample_attempts: usize,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions { samples: 64, seed: DEFAULT_SEED, rel_tol: 1e-9, resample_attempts: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Decided from the normal form of the difference.
    Exact,
    /// Decided by pseudo-random sampling.
    Sampled,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivReport {
    pub equal: bool,
    pub decision: Decision,
    pub seed: Option<u64>,
    pub samples: usize,
    /// Largest `|e1 - e2| / (1 + max(|e1|, |e2|))` seen while sampling.
    pub max_defect: f64,
    pub worst_point: Option<(f64, f64)>,
}

/// Rational functions of the coordinates only: a nonzero normal form of
/// this shape is a nonzero function, so no sampling is needed.
fn decidable(p: &Poly) -> bool {
    p.terms().all(|(m, _)| {
        m.iter().all(|(a, e)| match a {
            Atom::X | Atom::Y => true,
            Atom::Base(s) => is_integer(e) && e.is_negative() && decidable(s),
            Atom::Func(..) => false,
        })
    })
}

/// Equivalence of two expressions on `domain`: exact when the normal form
/// of the difference settles it, sampled otherwise.
pub fn equiv(
    e1: &Expr,
    e2: &Expr,
    domain: &Rect,
    bindings: &Bindings<f64>,
    opts: &EquivOptions,
) -> Result<EquivReport, EvalError> {
    let diff = Poly::from_expr(&(e1 - e2));
    if diff.is_zero() || decidable(&diff) {
        return Ok(EquivReport {
            equal: diff.is_zero(),
            decision: Decision::Exact,
            seed: None,
            samples: 0,
            max_defect: if diff.is_zero() { 0.0 } else { f64::INFINITY },
            worst_point: None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut max_defect = 0.0f64;
    let mut worst = None;
    let mut equal = true;
    for _ in 0..opts.samples {
        let mut attempt = 0;
        let (pt, a, b) = loop {
            let (x, y) = domain.sample(&mut rng);
            match (e1.eval(x, y, bindings), e2.eval(x, y, bindings)) {
                (Ok(a), Ok(b)) => break ((x, y), a, b),
                (Err(e), _) | (_, Err(e)) => {
                    if !e.is_domain() || attempt >= opts.resample_attempts {
                        return Err(e);
                    }
                    attempt += 1;
                }
            }
        };
        let defect = (a - b).abs() / (1.0 + a.abs().max(b.abs()));
        if !(defect <= opts.rel_tol) {
            equal = false;
        }
        if !(defect <= max_defect) {
            max_defect = defect;
            worst = Some(pt);
        }
    }
    Ok(EquivReport {
        equal,
        decision: Decision::Sampled,
        seed: Some(opts.seed),
        samples: opts.samples,
        max_defect,
        worst_point: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn check(a: &str, b: &str, d: Rect) -> EquivReport {
        equiv(&parse(a).unwrap(), &parse(b).unwrap(), &d, &Bindings::new(), &EquivOptions::default()).unwrap()
    }

    #[test]
    fn difference_of_squares_is_exact() {
        let r = check("x^2 - y^2", "(x - y)*(x + y)", Rect::square(1.0, 2.0));
        assert!(r.equal);
        assert_eq!(r.decision, Decision::Exact);
    }

    #[test]
    fn tiny_offset_is_detected_exactly() {
        let r = check("x", "x + 1e-6", Rect::square(0.0, 1.0));
        assert!(!r.equal);
        assert_eq!(r.decision, Decision::Exact);
    }

    #[test]
    fn even_root_falls_back_to_sampling() {
        let r = check("(x^2)^(1/2)", "x", Rect::square(0.5, 2.0));
        assert!(r.equal);
        assert_eq!(r.decision, Decision::Sampled);
        assert_eq!(r.seed, Some(DEFAULT_SEED));
        let r = check("(x^2)^(1/2)", "x", Rect::square(-2.0, -0.5));
        assert!(!r.equal);
    }

    #[test]
    fn singular_everywhere_is_an_error() {
        let e = parse("(x - x + y - y)^(-1) + F(x)").unwrap();
        let b = Bindings::new().with("F", Ok);
        let r = equiv(&e, &Expr::zero(), &Rect::square(0.0, 1.0), &b, &EquivOptions::default());
        assert!(r.is_err());
    }
}
