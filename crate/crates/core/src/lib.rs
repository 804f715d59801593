//! Inverse problem for planar families of orbits: given a family
//! `f(x, y) = c`, find forces that trace it and decide when those forces
//! derive from a potential for some constant multiplier `g`.
//!
//! Symbolic layers work over exact rationals. Numeric layers are generic
//! over [`Scalar`]; the aliases below fix them to `f64`.

pub mod ansatz;
pub mod domain;
pub mod error;
pub mod expr;
pub mod forces;
pub mod geometry;
pub mod helmholtz;
pub mod scalar;
pub mod scenarios;
pub mod verify;

pub use ansatz::{CaseRecord, Exponent, Layout};
pub use domain::Rect;
pub use error::{Error, ExitCode};
pub use expr::{Bindings, Expr, Var};
pub use forces::{EtaField, ForceField};
pub use geometry::{CurveFamily, Metric2};
pub use helmholtz::{EnergyProfile, PotentialSolution};
pub use scalar::{Rational, Scalar};
pub use scenarios::{load_scenario, Scenario};

/// Exact constant multiplier.
pub type Metric = Metric2<Rational>;
/// Numeric constant multiplier.
pub type MetricF64 = Metric2<f64>;
pub type Trace = verify::OrbitTrace<f64>;
pub type Sample = verify::TraceSample<f64>;
pub type Jet = forces::OrbitJet<f64>;
pub type FBindings = Bindings<f64>;
