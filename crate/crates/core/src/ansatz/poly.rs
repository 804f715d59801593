//! Sparse Laurent polynomials over Q in the fixed symbol set of the ansatz,
//! rational functions built from them, and dense univariate helpers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::scalar::{format_rational, Rational};

/// Every symbol the case analysis can mention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    X,
    Y,
    M,
    B1,
    B2,
    B3,
    B4,
    A1,
    A2,
    A3,
    R1,
    R2,
    R3,
    R4,
    S1,
    S2,
    S3,
    G11,
    G12,
    G22,
}

pub const NSYM: usize = 20;

impl Sym {
    pub const ALL: [Sym; NSYM] = [
        Sym::X,
        Sym::Y,
        Sym::M,
        Sym::B1,
        Sym::B2,
        Sym::B3,
        Sym::B4,
        Sym::A1,
        Sym::A2,
        Sym::A3,
        Sym::R1,
        Sym::R2,
        Sym::R3,
        Sym::R4,
        Sym::S1,
        Sym::S2,
        Sym::S3,
        Sym::G11,
        Sym::G12,
        Sym::G22,
    ];

    /// The fourteen force coefficients in display order.
    pub const COEFFS: [Sym; 14] = [
        Sym::B1,
        Sym::B2,
        Sym::B3,
        Sym::B4,
        Sym::A1,
        Sym::A2,
        Sym::A3,
        Sym::R1,
        Sym::R2,
        Sym::R3,
        Sym::R4,
        Sym::S1,
        Sym::S2,
        Sym::S3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Sym::X => "x",
            Sym::Y => "y",
            Sym::M => "m",
            Sym::B1 => "b1",
            Sym::B2 => "b2",
            Sym::B3 => "b3",
            Sym::B4 => "b4",
            Sym::A1 => "a1",
            Sym::A2 => "a2",
            Sym::A3 => "a3",
            Sym::R1 => "r1",
            Sym::R2 => "r2",
            Sym::R3 => "r3",
            Sym::R4 => "r4",
            Sym::S1 => "s1",
            Sym::S2 => "s2",
            Sym::S3 => "s3",
            Sym::G11 => "g11",
            Sym::G12 => "g12",
            Sym::G22 => "g22",
        }
    }

    pub fn from_name(s: &str) -> Option<Sym> {
        Sym::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn is_coeff(self) -> bool {
        Sym::COEFFS.contains(&self)
    }

    pub fn is_metric(self) -> bool {
        matches!(self, Sym::G11 | Sym::G12 | Sym::G22)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type Mono = [i32; NSYM];

const ONE_MONO: Mono = [0; NSYM];

/// Laurent polynomial with rational coefficients.
#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct MPoly {
    terms: BTreeMap<Mono, Rational>,
}

impl MPoly {
    pub fn zero() -> Self {
        MPoly::default()
    }

    pub fn one() -> Self {
        MPoly::constant(Rational::one())
    }

    pub fn constant(q: Rational) -> Self {
        let mut p = MPoly::zero();
        p.add_term(ONE_MONO, q);
        p
    }

    pub fn int(n: i64) -> Self {
        MPoly::constant(Rational::from_integer(n.into()))
    }

    pub fn var(s: Sym) -> Self {
        MPoly::monomial(s, 1)
    }

    pub fn monomial(s: Sym, e: i32) -> Self {
        let mut m = ONE_MONO;
        m[s.index()] = e;
        let mut p = MPoly::zero();
        p.add_term(m, Rational::one());
        p
    }

    fn add_term(&mut self, m: Mono, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rational)> {
        self.terms.iter()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&ONE_MONO).cloned(),
            _ => None,
        }
    }

    /// Largest term in lex order on the exponent arrays.
    pub fn leading(&self) -> Option<(&Mono, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for s in Sym::ALL {
                if m[s.index()] != 0 {
                    out.insert(s);
                }
            }
        }
        out
    }

    pub fn contains(&self, s: Sym) -> bool {
        self.terms.keys().any(|m| m[s.index()] != 0)
    }

    pub fn max_exp(&self, s: Sym) -> i32 {
        self.terms.keys().map(|m| m[s.index()]).max().unwrap_or(0)
    }

    pub fn min_exp(&self, s: Sym) -> i32 {
        self.terms.keys().map(|m| m[s.index()]).min().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly { terms: self.terms.iter().map(|(m, q)| (*m, q * c)).collect() }
    }

    pub fn neg(&self) -> Self {
        MPoly { terms: self.terms.iter().map(|(m, q)| (*m, -q)).collect() }
    }

    pub fn add(&self, o: &MPoly) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(*m, c.clone());
        }
        r
    }

    pub fn sub(&self, o: &MPoly) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &MPoly) -> Self {
        let mut r = MPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let mut m = *ma;
                for i in 0..NSYM {
                    m[i] += mb[i];
                }
                r.add_term(m, ca * cb);
            }
        }
        r
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut r = MPoly::one();
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    /// Multiplies by `s^e`.
    pub fn shift(&self, s: Sym, e: i32) -> Self {
        MPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut m = *m;
                    m[s.index()] += e;
                    (m, c.clone())
                })
                .collect(),
        }
    }

    pub fn diff(&self, s: Sym) -> Self {
        let mut r = MPoly::zero();
        for (m, c) in &self.terms {
            let e = m[s.index()];
            if e != 0 {
                let mut n = *m;
                n[s.index()] -= 1;
                r.add_term(n, c * Rational::from_integer(e.into()));
            }
        }
        r
    }

    /// Coefficient of `s^k`, as a polynomial free of `s`.
    pub fn coeff(&self, s: Sym, k: i32) -> Self {
        let mut r = MPoly::zero();
        for (m, c) in &self.terms {
            if m[s.index()] == k {
                let mut n = *m;
                n[s.index()] = 0;
                r.add_term(n, c.clone());
            }
        }
        r
    }

    /// Groups terms by their exponents in `x` and `y`.
    pub fn collect_xy(&self) -> BTreeMap<(i32, i32), MPoly> {
        let mut out: BTreeMap<(i32, i32), MPoly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let key = (m[Sym::X.index()], m[Sym::Y.index()]);
            let mut n = *m;
            n[Sym::X.index()] = 0;
            n[Sym::Y.index()] = 0;
            out.entry(key).or_default().add_term(n, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Substitutes a constant for `s`.
    pub fn subst_const(&self, s: Sym, q: &Rational) -> Self {
        let mut r = MPoly::zero();
        for (m, c) in &self.terms {
            let e = m[s.index()];
            let mut n = *m;
            n[s.index()] = 0;
            let f = if e >= 0 { num_traits::pow(q.clone(), e as usize) } else { num_traits::pow(q.recip(), (-e) as usize) };
            r.add_term(n, c * f);
        }
        r
    }

    /// Substitutes a rational function for `s`.
    pub fn subst(&self, s: Sym, value: &RatFn) -> RatFn {
        self.try_subst(s, value).expect("substitution divides by zero")
    }

    /// `None` when `value` is zero and `s` occurs with a negative exponent.
    pub fn try_subst(&self, s: Sym, value: &RatFn) -> Option<RatFn> {
        if !self.contains(s) {
            return Some(RatFn::from_poly(self.clone()));
        }
        let lo = self.min_exp(s);
        if lo < 0 && value.is_zero() {
            return None;
        }
        let hi = self.max_exp(s);
        // sum_k c_k (N/D)^k = sum_k c_k N^(k-lo) D^(hi-k) * N^lo / D^hi
        let (n, d) = (&value.num, &value.den);
        let mut acc = MPoly::zero();
        for k in lo..=hi {
            let ck = self.coeff(s, k);
            if ck.is_zero() {
                continue;
            }
            acc = acc.add(&ck.mul(&n.pow((k - lo) as u32)).mul(&d.pow((hi - k) as u32)));
        }
        let base = RatFn::new(acc, d.pow((hi - lo) as u32));
        let e = lo.unsigned_abs();
        let lead = RatFn::new(n.pow(e), d.pow(e));
        Some(if lo >= 0 { base.mul(&lead) } else { base.div(&lead) })
    }

    /// Evaluates with every symbol assigned. `None` on division by zero.
    pub fn eval(&self, at: &dyn Fn(Sym) -> Rational) -> Option<Rational> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for s in Sym::ALL {
                let e = m[s.index()];
                if e == 0 {
                    continue;
                }
                let v = at(s);
                if e < 0 && v.is_zero() {
                    return None;
                }
                t *= if e > 0 { num_traits::pow(v, e as usize) } else { num_traits::pow(v.recip(), (-e) as usize) };
            }
            acc += t;
        }
        Some(acc)
    }

    /// Per-symbol minimum exponent over all terms.
    pub fn mono_content(&self) -> Mono {
        let mut out = ONE_MONO;
        for s in Sym::ALL {
            out[s.index()] = self.min_exp(s);
        }
        out
    }

    /// Divides by a monomial.
    pub fn div_mono(&self, m: &Mono) -> Self {
        MPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| {
                    let mut n = *k;
                    for i in 0..NSYM {
                        n[i] -= m[i];
                    }
                    (n, c.clone())
                })
                .collect(),
        }
    }

    /// Scales so the leading coefficient is 1.
    pub fn monic(&self) -> Self {
        match self.leading() {
            Some((_, c)) => self.scale(&c.recip()),
            None => MPoly::zero(),
        }
    }

    /// Removes the monomial content in the given symbols and makes the
    /// result monic.
    pub fn primitive_in(&self, syms: &BTreeSet<Sym>) -> Self {
        let mut m = self.mono_content();
        for s in Sym::ALL {
            if !syms.contains(&s) {
                m[s.index()] = 0;
            }
        }
        self.div_mono(&m).monic()
    }

    /// Univariate view in `s` when no other symbol occurs.
    pub fn to_upoly(&self, s: Sym) -> Option<(UPoly, i32)> {
        if self.vars().iter().any(|v| *v != s) {
            return None;
        }
        let lo = self.min_exp(s);
        let hi = self.max_exp(s);
        let mut c = vec![Rational::zero(); (hi - lo + 1) as usize];
        for (m, q) in &self.terms {
            c[(m[s.index()] - lo) as usize] = q.clone();
        }
        Some((UPoly::new(c), lo))
    }

    pub fn from_upoly(p: &UPoly, s: Sym) -> Self {
        let mut r = MPoly::zero();
        for (k, c) in p.coeffs().iter().enumerate() {
            let mut m = ONE_MONO;
            m[s.index()] = k as i32;
            r.add_term(m, c.clone());
        }
        r
    }

    /// Exact quotient when `d` divides `self` as ordinary polynomials.
    pub fn div_exact(&self, d: &MPoly) -> Option<MPoly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(MPoly::zero());
        }
        let bound: usize = 64 * (self.len() + 1);
        let (dm, dc) = d.leading().map(|(m, c)| (*m, c.clone()))?;
        let mut rem = self.clone();
        let mut q = MPoly::zero();
        for _ in 0..bound {
            let Some((rm, rc)) = rem.leading().map(|(m, c)| (*m, c.clone())) else {
                return Some(q);
            };
            let mut t = ONE_MONO;
            for i in 0..NSYM {
                t[i] = rm[i] - dm[i];
                // keep exponents inside the range the dividend spans
                let lo = self.min_exp(Sym::ALL[i]) - d.min_exp(Sym::ALL[i]);
                let hi = self.max_exp(Sym::ALL[i]) - d.max_exp(Sym::ALL[i]);
                if t[i] < lo || t[i] > hi {
                    return None;
                }
            }
            let mut step = MPoly::zero();
            step.add_term(t, &rc / &dc);
            q = q.add(&step);
            rem = rem.sub(&step.mul(d));
        }
        None
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let factors: Vec<String> = Sym::ALL
                .iter()
                .filter(|s| m[s.index()] != 0)
                .map(|s| match m[s.index()] {
                    1 => s.name().to_string(),
                    e if e < 0 => format!("{}^({e})", s.name()),
                    e => format!("{}^{e}", s.name()),
                })
                .collect();
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let coef = format_rational(&a);
            let coef = if a.is_integer() { coef } else { format!("({coef})") };
            match (factors.is_empty(), a.is_one()) {
                (true, _) => f.write_str(&coef)?,
                (false, true) => f.write_str(&factors.join("*"))?,
                (false, false) => write!(f, "{coef}*{}", factors.join("*"))?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Quotient of Laurent polynomials; the denominator carries no monomial
/// content and has leading coefficient 1.
#[derive(Clone, Debug)]
pub struct RatFn {
    pub num: MPoly,
    pub den: MPoly,
}

impl RatFn {
    pub fn new(num: MPoly, den: MPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return RatFn::zero();
        }
        let content = den.mono_content();
        let den = den.div_mono(&content);
        let num = num.div_mono(&content);
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        let (num, den) = (num.scale(&lc.recip()), den.scale(&lc.recip()));
        if den.is_monomial() {
            return RatFn { num, den };
        }
        if let Some(q) = num.div_exact(&den) {
            return RatFn { num: q, den: MPoly::one() };
        }
        // cancel a common factor when the denominator is univariate
        let vars = den.vars();
        if vars.len() == 1 {
            let s = *vars.iter().next().unwrap();
            if let Some((du, 0)) = den.to_upoly(s) {
                let mut g = du.clone();
                let shift = num.min_exp(s).min(0);
                let num0 = num.shift(s, -shift);
                // a factor of den in Q[s] must divide every group of num
                // sharing the same monomial in the other symbols
                let by_rest = group_by_rest(&num0, s);
                for u in by_rest.values() {
                    g = g.gcd(u);
                    if g.degree() == 0 {
                        break;
                    }
                }
                if g.degree() > 0 {
                    let gp = MPoly::from_upoly(&g, s);
                    if let (Some(n2), Some(d2)) = (num0.div_exact(&gp), den.div_exact(&gp)) {
                        return RatFn::new(n2.shift(s, shift), d2);
                    }
                }
            }
        }
        RatFn { num, den }
    }

    pub fn zero() -> Self {
        RatFn { num: MPoly::zero(), den: MPoly::one() }
    }

    pub fn one() -> Self {
        RatFn::from_poly(MPoly::one())
    }

    pub fn from_poly(p: MPoly) -> Self {
        RatFn { num: p, den: MPoly::one() }
    }

    pub fn constant(q: Rational) -> Self {
        RatFn::from_poly(MPoly::constant(q))
    }

    pub fn var(s: Sym) -> Self {
        RatFn::from_poly(MPoly::var(s))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        let d = self.den.as_constant()?;
        Some(self.num.as_constant()? / d)
    }

    pub fn add(&self, o: &RatFn) -> RatFn {
        if self.den == o.den {
            return RatFn::new(self.num.add(&o.num), self.den.clone());
        }
        RatFn::new(self.num.mul(&o.den).add(&o.num.mul(&self.den)), self.den.mul(&o.den))
    }

    pub fn neg(&self) -> RatFn {
        RatFn { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, o: &RatFn) -> RatFn {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &RatFn) -> RatFn {
        RatFn::new(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    pub fn div(&self, o: &RatFn) -> RatFn {
        assert!(!o.is_zero(), "division by zero rational function");
        RatFn::new(self.num.mul(&o.den), self.den.mul(&o.num))
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut v = self.num.vars();
        v.extend(self.den.vars());
        v
    }

    pub fn contains(&self, s: Sym) -> bool {
        self.num.contains(s) || self.den.contains(s)
    }

    pub fn subst(&self, s: Sym, value: &RatFn) -> RatFn {
        self.try_subst(s, value).expect("substitution divides by zero")
    }

    /// `None` when the denominator vanishes after substitution.
    pub fn try_subst(&self, s: Sym, value: &RatFn) -> Option<RatFn> {
        if !self.contains(s) {
            return Some(self.clone());
        }
        let d = self.den.try_subst(s, value)?;
        if d.is_zero() {
            return None;
        }
        Some(self.num.try_subst(s, value)?.div(&d))
    }

    pub fn subst_const(&self, s: Sym, q: &Rational) -> Option<RatFn> {
        let d = self.den.subst_const(s, q);
        if d.is_zero() {
            return None;
        }
        Some(RatFn::new(self.num.subst_const(s, q), d))
    }

    /// `None` when the denominator vanishes at the point.
    pub fn eval(&self, at: &dyn Fn(Sym) -> Rational) -> Option<Rational> {
        let d = self.den.eval(at)?;
        if d.is_zero() {
            return None;
        }
        Some(self.num.eval(at)? / d)
    }
}

fn group_by_rest(p: &MPoly, s: Sym) -> BTreeMap<Mono, UPoly> {
    let mut groups: BTreeMap<Mono, BTreeMap<i32, Rational>> = BTreeMap::new();
    for (m, c) in p.terms() {
        let mut rest = *m;
        rest[s.index()] = 0;
        groups.entry(rest).or_default().insert(m[s.index()], c.clone());
    }
    groups
        .into_iter()
        .map(|(k, cs)| {
            let hi = cs.keys().max().copied().unwrap_or(0);
            let mut v = vec![Rational::zero(); (hi + 1) as usize];
            for (e, c) in cs {
                v[e as usize] = c;
            }
            (k, UPoly::new(v))
        })
        .collect()
}

impl PartialEq for RatFn {
    fn eq(&self, o: &RatFn) -> bool {
        self.num.mul(&o.den) == o.num.mul(&self.den)
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.as_constant().is_some_and(|d| d.is_one()) {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &MPoly| if p.len() > 1 { format!("({p})") } else { p.to_string() };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

/// Dense univariate polynomial over Q, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UPoly {
    c: Vec<Rational>,
}

impl UPoly {
    pub fn new(mut c: Vec<Rational>) -> Self {
        while c.last().is_some_and(|q| q.is_zero()) {
            c.pop();
        }
        UPoly { c }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.c.iter().rev().fold(Rational::zero(), |acc, q| acc * t + q)
    }

    fn monic(&self) -> UPoly {
        match self.c.last() {
            Some(l) => UPoly::new(self.c.iter().map(|q| q / l).collect()),
            None => self.clone(),
        }
    }

    pub fn rem(&self, d: &UPoly) -> UPoly {
        let mut r = self.c.clone();
        let dl = d.c.last().expect("division by zero polynomial").clone();
        while r.len() >= d.c.len() && !r.is_empty() {
            let k = r.len() - d.c.len();
            let q = r.last().unwrap() / &dl;
            for (i, dc) in d.c.iter().enumerate() {
                r[k + i] -= &q * dc;
            }
            r.pop();
            while r.last().is_some_and(|q| q.is_zero()) {
                r.pop();
            }
        }
        UPoly::new(r)
    }

    pub fn gcd(&self, o: &UPoly) -> UPoly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(self.c.iter().enumerate().skip(1).map(|(k, q)| q * Rational::from_integer((k as i64).into())).collect())
    }

    /// Number of distinct complex roots.
    pub fn distinct_roots(&self) -> usize {
        if self.degree() == 0 {
            return 0;
        }
        self.degree() - self.gcd(&self.derivative()).degree()
    }

    /// Distinct rational roots, ascending.
    pub fn rational_roots(&self) -> Vec<Rational> {
        let mut roots = BTreeSet::new();
        if self.c.is_empty() {
            return Vec::new();
        }
        let lead_zeros = self.c.iter().take_while(|q| q.is_zero()).count();
        if lead_zeros > 0 {
            roots.insert(Rational::zero());
        }
        let c = &self.c[lead_zeros..];
        if c.len() > 1 {
            let lcm = c.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            let ints: Vec<BigInt> = c.iter().map(|q| (q * Rational::from_integer(lcm.clone())).to_integer()).collect();
            let p_divs = divisors(&ints[0].abs());
            let q_divs = divisors(&ints[ints.len() - 1].abs());
            for p in &p_divs {
                for q in &q_divs {
                    for sign in [1, -1] {
                        let r = Rational::new(p * BigInt::from(sign), q.clone());
                        if self.eval(&r).is_zero() {
                            roots.insert(r);
                        }
                    }
                }
            }
        }
        roots.into_iter().collect()
    }
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut d = BigInt::one();
    while &d * &d <= *n {
        if (n % &d).is_zero() {
            out.push(d.clone());
            let e = n / &d;
            if e != d {
                out.push(e);
            }
        }
        d += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn m() -> MPoly {
        MPoly::var(Sym::M)
    }

    #[test]
    fn roots_of_factored_cubic() {
        // (2m + 3)(m - 2)(3m) = 6m^3 - 3m^2 - 18m
        let p = UPoly::new(vec![rat(0, 1), rat(-18, 1), rat(-3, 1), rat(6, 1)]);
        assert_eq!(p.rational_roots(), vec![rat(-3, 2), rat(0, 1), rat(2, 1)]);
    }

    #[test]
    fn ratfn_cancels_univariate_factor() {
        let num = m().sub(&MPoly::int(2)).mul(&MPoly::var(Sym::B2));
        let den = m().sub(&MPoly::int(2)).mul(&m().add(&MPoly::int(1)));
        let r = RatFn::new(num, den);
        assert_eq!(r.den, m().add(&MPoly::int(1)));
        assert_eq!(r.num, MPoly::var(Sym::B2));
    }

    #[test]
    fn substitution_into_laurent_terms() {
        // b2 / b4 with b4 := 2 b2
        let p = MPoly::var(Sym::B2).mul(&MPoly::monomial(Sym::B4, -1));
        let v = RatFn::from_poly(MPoly::var(Sym::B2).scale(&rat(2, 1)));
        assert_eq!(p.subst(Sym::B4, &v), RatFn::constant(rat(1, 2)));
    }

    #[test]
    fn exact_division() {
        let a = m().add(&MPoly::one());
        let b = m().sub(&MPoly::var(Sym::B3));
        assert_eq!(a.mul(&b).div_exact(&b), Some(a.clone()));
        assert_eq!(a.div_exact(&b), None);
    }
}

#[cfg(test)]
mod arith_checks {
    use super::*;
    use crate::scalar::rat;

    fn at(s: Sym) -> Rational {
        rat(3 + 2 * s.index() as i64, 7 + s.index() as i64)
    }

    #[test]
    fn ratfn_ops_agree_with_evaluation() {
        let m = MPoly::var(Sym::M);
        let b3 = MPoly::var(Sym::B3);
        let b4 = MPoly::var(Sym::B4);
        let f = RatFn::new(m.mul(&b3).mul(&b3).sub(&m.mul(&m)).mul(&MPoly::monomial(Sym::B4, -1)), m.sub(&MPoly::constant(rat(1, 3))));
        let g = RatFn::new(b3.add(&m), m.mul(&m).sub(&MPoly::one()).mul(&MPoly::monomial(Sym::M, -1)));
        let ev = |r: &RatFn| r.eval(&at).unwrap();
        assert_eq!(ev(&f.add(&g)), ev(&f) + ev(&g));
        assert_eq!(ev(&f.mul(&g)), ev(&f) * ev(&g));
        assert_eq!(ev(&f.div(&g)), ev(&f) / ev(&g));
        let h = b4.mul(&b3).add(&m.mul(&b4).mul(&b4));
        let sub = h.subst(Sym::B4, &f);
        let at2 = |s: Sym| if s == Sym::B4 { ev(&f) } else { at(s) };
        assert_eq!(ev(&sub), h.eval(&at2).unwrap());
    }
}
