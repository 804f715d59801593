//! Branching elimination for the low-degree systems of the case analysis.
//!
//! Parameters are symbols left free and treated as generic: a polynomial
//! in parameters alone is nonzero unless it is the zero polynomial.

use std::collections::{BTreeMap, BTreeSet};

use super::poly::{MPoly, RatFn, Sym};
use crate::scalar::Rational;

/// Order in which unknowns are eliminated, and the reverse order in which
/// stuck unknowns are promoted to parameters.
#[derive(Clone, Debug)]
pub struct Preference {
    pub solve: Vec<Sym>,
    pub promote: Vec<Sym>,
}

impl Default for Preference {
    fn default() -> Self {
        use Sym::*;
        Preference {
            solve: vec![R1, R2, R3, R4, S1, S2, S3, G11, G22, G12, B4, B3, B1, A3, A1, B2, A2],
            promote: vec![B2, A2, A3, B4, B3, A1, B1, R4, S3, R1, R2, R3, S1, S2, G11, G22, G12],
        }
    }
}

#[derive(Clone, Debug)]
pub struct System {
    pub eqs: Vec<MPoly>,
    pub unknowns: BTreeSet<Sym>,
    pub params: BTreeSet<Sym>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Every unknown and parameter, expressed in the parameters.
    pub values: BTreeMap<Sym, RatFn>,
    pub params: BTreeSet<Sym>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub branches: usize,
    pub infeasible: usize,
    /// Branches abandoned because a root was irrational.
    pub irrational: usize,
    /// Branches the rules could not reduce.
    pub stuck: usize,
}

#[derive(Clone, Debug)]
struct State {
    eqs: Vec<MPoly>,
    unknowns: BTreeSet<Sym>,
    params: BTreeSet<Sym>,
    nonzero: BTreeSet<Sym>,
    values: BTreeMap<Sym, RatFn>,
    /// Parameters of the system as posed; the rest were promoted.
    declared: BTreeSet<Sym>,
    /// Promoted symbols that an equation later pinned down.
    pinned: BTreeSet<Sym>,
}

const MAX_BRANCHES: usize = 4096;

pub fn solve(sys: &System, pref: &Preference) -> (Vec<Solution>, SolveStats) {
    let st = State {
        eqs: sys.eqs.clone(),
        unknowns: sys.unknowns.clone(),
        params: sys.params.clone(),
        nonzero: BTreeSet::new(),
        values: sys.params.iter().map(|s| (*s, RatFn::var(*s))).collect(),
        declared: sys.params.clone(),
        pinned: BTreeSet::new(),
    };
    let mut out = Vec::new();
    let mut stats = SolveStats::default();
    let mut stack = vec![st];
    while let Some(st) = stack.pop() {
        stats.branches += 1;
        if stats.branches > MAX_BRANCHES {
            stats.stuck += 1;
            break;
        }
        match step(st, pref) {
            Step::Done(sol) => {
                if !out.contains(&sol) {
                    out.push(sol);
                }
            }
            Step::Infeasible => stats.infeasible += 1,
            Step::Irrational => stats.irrational += 1,
            Step::Stuck => stats.stuck += 1,
            // pushed in reverse so the first alternative is explored first
            Step::Branch(v, dropped) => {
                stats.irrational += dropped;
                stack.extend(v.into_iter().rev());
            }
        }
    }
    (out, stats)
}

enum Step {
    Done(Solution),
    Infeasible,
    Irrational,
    Stuck,
    /// Alternatives, plus the number of irrational roots left out.
    Branch(Vec<State>, usize),
}

fn rank(list: &[Sym], s: Sym) -> usize {
    list.iter().position(|v| *v == s).unwrap_or(list.len())
}

impl State {
    fn only_params(&self, p: &MPoly) -> bool {
        p.vars().iter().all(|v| !self.unknowns.contains(v))
    }

    /// `false` when the value makes a recorded expression singular.
    fn assign(&mut self, u: Sym, value: RatFn) -> bool {
        self.unknowns.remove(&u);
        let mut next = Vec::with_capacity(self.eqs.len());
        for e in &self.eqs {
            match e.try_subst(u, &value) {
                Some(r) => next.push(r.num),
                None => return false,
            }
        }
        self.eqs = next;
        for v in self.values.values_mut() {
            match v.try_subst(u, &value) {
                Some(r) => *v = r,
                None => return false,
            }
        }
        self.values.insert(u, value);
        true
    }

    fn promote(&mut self, u: Sym) {
        self.unknowns.remove(&u);
        self.params.insert(u);
        self.values.insert(u, RatFn::var(u));
    }

    /// Drops trivial equations and factors that are nonzero by assumption.
    /// An equation left in parameters alone turns the promoted ones it
    /// involves back into unknowns. `false` when an equation can never hold.
    fn tidy(&mut self) -> bool {
        'again: loop {
            let mut keep = Vec::new();
            let mut nz: BTreeSet<Sym> = self.params.clone();
            nz.extend(self.nonzero.iter().copied());
            for e in &self.eqs {
                if e.is_zero() {
                    continue;
                }
                let e = e.primitive_in(&nz);
                if self.only_params(&e) {
                    let promoted: Vec<Sym> = e.vars().into_iter().filter(|v| self.params.contains(v) && !self.declared.contains(v)).collect();
                    if promoted.is_empty() {
                        return false;
                    }
                    for u in promoted {
                        self.params.remove(&u);
                        self.unknowns.insert(u);
                        self.pinned.insert(u);
                    }
                    continue 'again;
                }
                if !keep.contains(&e) {
                    keep.push(e);
                }
            }
            self.eqs = keep;
            return true;
        }
    }

    fn finish(mut self) -> Step {
        for u in self.unknowns.clone() {
            self.promote(u);
        }
        for s in &self.nonzero {
            if self.values.get(s).is_some_and(|v| v.is_zero()) {
                return Step::Infeasible;
            }
        }
        Step::Done(Solution { values: self.values, params: self.params })
    }
}

fn step(mut st: State, pref: &Preference) -> Step {
    loop {
        if !st.tidy() {
            return Step::Infeasible;
        }
        if st.eqs.is_empty() {
            return st.finish();
        }
        // linear in an unknown whose coefficient involves parameters only
        let mut best: Option<(usize, usize, Sym)> = None;
        for (i, e) in st.eqs.iter().enumerate() {
            for u in e.vars() {
                if !st.unknowns.contains(&u) || e.max_exp(u) != 1 || e.min_exp(u) != 0 {
                    continue;
                }
                if !st.only_params(&e.coeff(u, 1)) {
                    continue;
                }
                let r = rank(&pref.solve, u);
                if best.is_none_or(|(_, br, _)| r < br) {
                    best = Some((i, r, u));
                }
            }
        }
        if let Some((i, _, u)) = best {
            let e = &st.eqs[i];
            let a = e.coeff(u, 1);
            let b = e.coeff(u, 0);
            let value = RatFn::new(b.neg(), a);
            if !st.assign(u, value) {
                return Step::Infeasible;
            }
            continue;
        }
        // an unknown dividing every term: it vanishes or the cofactor does
        for e in &st.eqs {
            for u in e.vars() {
                if st.unknowns.contains(&u) && e.min_exp(u) > 0 {
                    let mut zero = st.clone();
                    let mut other = st.clone();
                    other.nonzero.insert(u);
                    let mut alts = Vec::new();
                    if zero.assign(u, RatFn::zero()) {
                        alts.push(zero);
                    }
                    alts.push(other);
                    return Step::Branch(alts, 0);
                }
            }
        }
        // a univariate equation with numeric coefficients
        for e in &st.eqs {
            let vars = e.vars();
            if vars.len() == 1 {
                let u = *vars.iter().next().unwrap();
                if let Some((p, _)) = e.to_upoly(u) {
                    let roots: Vec<Rational> = p.rational_roots();
                    let deg_left = p.distinct_roots() - roots.len();
                    if roots.is_empty() {
                        return if deg_left > 0 { Step::Irrational } else { Step::Infeasible };
                    }
                    let branches = roots
                        .into_iter()
                        .filter_map(|r| {
                            let mut b = st.clone();
                            b.assign(u, RatFn::constant(r)).then_some(b)
                        })
                        .collect();
                    return Step::Branch(branches, usize::from(deg_left > 0));
                }
            }
        }
        // promote the most parameter-like unknown
        let present: BTreeSet<Sym> = st.eqs.iter().flat_map(|e| e.vars()).filter(|v| st.unknowns.contains(v)).collect();
        let present: BTreeSet<Sym> = present.into_iter().filter(|v| !st.pinned.contains(v)).collect();
        match pref.promote.iter().find(|s| present.contains(s) && !st.nonzero.contains(s)) {
            Some(&u) => {
                let mut zero = st.clone();
                let mut other = st.clone();
                other.promote(u);
                let mut alts = Vec::new();
                if zero.assign(u, RatFn::zero()) {
                    alts.push(zero);
                }
                alts.push(other);
                return Step::Branch(alts, 0);
            }
            None => {
                if let Some(&u) = pref.promote.iter().find(|s| present.contains(s)) {
                    st.nonzero.remove(&u);
                    st.promote(u);
                    continue;
                }
                return Step::Stuck;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn v(s: Sym) -> MPoly {
        MPoly::var(s)
    }

    #[test]
    fn bilinear_with_declared_parameters() {
        // 30 b4 - 2 g11 b2 = 0, g11 a2 = 0
        let eqs = vec![
            v(Sym::B4).scale(&rat(30, 1)).sub(&v(Sym::G11).mul(&v(Sym::B2)).scale(&rat(2, 1))),
            v(Sym::G11).mul(&v(Sym::A2)),
        ];
        let sys = System {
            eqs,
            unknowns: [Sym::G11, Sym::A2].into(),
            params: [Sym::B2, Sym::B4].into(),
        };
        let (sols, _) = solve(&sys, &Preference::default());
        assert_eq!(sols.len(), 1);
        let g = &sols[0].values[&Sym::G11];
        let expect = RatFn::new(v(Sym::B4).scale(&rat(15, 1)), v(Sym::B2));
        assert_eq!(g, &expect);
        assert!(sols[0].values[&Sym::A2].is_zero());
    }

    #[test]
    fn product_branches() {
        let sys = System { eqs: vec![v(Sym::B3).mul(&v(Sym::G22))], unknowns: [Sym::B3, Sym::G22].into(), params: BTreeSet::new() };
        let (sols, _) = solve(&sys, &Preference::default());
        assert_eq!(sols.len(), 2);
    }

    #[test]
    fn irrational_roots_are_counted() {
        // g11^2 - 15 = 0
        let sys = System {
            eqs: vec![v(Sym::G11).mul(&v(Sym::G11)).sub(&MPoly::int(15))],
            unknowns: [Sym::G11].into(),
            params: BTreeSet::new(),
        };
        let (sols, stats) = solve(&sys, &Preference::default());
        assert!(sols.is_empty());
        assert_eq!(stats.irrational, 1);
    }
}
