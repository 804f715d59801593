//! Named cases with the free coefficients they are stated in.

use std::sync::OnceLock;

use super::poly::Sym;
use super::{solve_metric, AnsatzError, Assumptions, Branch, Exponent, Layout, Origin};
use crate::scalar::{rat, Rational};

#[derive(Clone, Debug)]
pub struct CatalogueEntry {
    pub name: &'static str,
    /// `None` for the cases where `m` stays unspecified.
    pub m: Option<Rational>,
    /// Exponent used when a record is made from an unspecified-`m` case.
    pub default_m: Rational,
    pub layout: Layout,
    pub free: Vec<Sym>,
    /// Coefficients set to zero before solving.
    pub zero: Vec<Sym>,
    pub origin: Origin,
}

impl CatalogueEntry {
    pub fn assumptions(&self) -> Assumptions {
        Assumptions { zero: self.zero.clone(), free: self.free.clone() }
    }

    /// The branch whose free symbols are exactly the declared ones.
    pub fn branch(&self, m: &Exponent) -> Result<Branch, AnsatzError> {
        let mut want = self.free.clone();
        want.sort();
        solve_metric(m, self.layout, &self.assumptions())?
            .into_iter()
            .find(|b| {
                let mut f = b.free.clone();
                f.sort();
                f == want
            })
            .ok_or(AnsatzError::NoMultiplier)
    }
}

fn entry(name: &'static str, m: Option<(i64, i64)>, layout: Layout, free: &[Sym], zero: &[Sym], origin: Origin) -> CatalogueEntry {
    CatalogueEntry {
        name,
        m: m.map(|(p, q)| rat(p, q)),
        default_m: rat(3, 2),
        layout,
        free: free.to_vec(),
        zero: zero.to_vec(),
        origin,
    }
}

/// Every catalogued case, in the order the analysis visits them:
/// 1, 2, 3a, 3b, 3c, then the special values of 3c, diagonal first.
pub fn catalogue() -> &'static [CatalogueEntry] {
    static CAT: OnceLock<Vec<CatalogueEntry>> = OnceLock::new();
    CAT.get_or_init(|| {
        use Layout::{Diagonal as D, NonDiagonal as N};
        use Origin::{Derived, Published};
        use Sym::*;
        vec![
            entry("Case1-diagonal", Some((-1, 5)), D, &[B2, B4], &[], Published),
            entry("Case1-nondiagonal", Some((-1, 5)), N, &[B2, A2, A3], &[], Published),
            entry("Case2-diagonal", Some((-1, 4)), D, &[B2, B4, A2], &[], Published),
            entry("Case2-nondiagonal", Some((-1, 4)), N, &[B2, A2, A3], &[], Published),
            entry("Case3a-diagonal", Some((-5, 1)), D, &[B2, B4], &[], Published),
            entry("Case3a-nondiagonal", Some((-5, 1)), N, &[B1, A2, A3], &[], Published),
            entry("Case3b-diagonal", Some((-4, 1)), D, &[A1, A3, B2], &[], Published),
            entry("Case3b-nondiagonal", Some((-4, 1)), N, &[A1, A2, B2], &[], Published),
            entry("Case3c-generic-diagonal", None, D, &[B2, B4], &[], Published),
            entry("Case3c-generic-nondiagonal-quadratic", None, N, &[A2, A3], &[], Published),
            entry("Case3c-generic-nondiagonal-cubic", None, N, &[B3, B4], &[A2, A3], Published),
            entry("Case3c-m1-diagonal", Some((1, 1)), D, &[R1, B4, G11], &[], Published),
            entry("Case3c-m1-nondiagonal", Some((1, 1)), N, &[A2, A3, B3], &[], Published),
            entry("Case3c-m1/2-diagonal", Some((1, 2)), D, &[B2, B4, S1], &[], Published),
            entry("Case3c-m1/2-nondiagonal", Some((1, 2)), N, &[A3, B2, B3], &[], Published),
            entry("Case3c-m1/3-diagonal", Some((1, 3)), D, &[B2, B4], &[], Derived),
            entry("Case3c-m1/3-nondiagonal", Some((1, 3)), N, &[B2, B4, R2], &[], Derived),
        ]
    })
}

pub fn lookup(name: &str) -> Option<&'static CatalogueEntry> {
    catalogue().iter().find(|e| e.name == name)
}
