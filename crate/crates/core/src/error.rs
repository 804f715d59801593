//! One error type over every module, with the process exit code each
//! failure maps to.

use thiserror::Error;

use crate::ansatz::AnsatzError;
use crate::expr::{EvalError, ParseError};
use crate::forces::ForcesError;
use crate::geometry::GeometryError;
use crate::helmholtz::HelmholtzError;
use crate::scenarios::ScenarioError;
use crate::verify::VerifyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Forces(#[from] ForcesError),
    #[error(transparent)]
    Helmholtz(#[from] HelmholtzError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Pass = 0,
    ResidualFailure = 1,
    Parse = 2,
    Domain = 3,
    Excluded = 4,
    Infeasible = 5,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

fn eval_code(e: &EvalError) -> ExitCode {
    match e {
        EvalError::Domain { .. } => ExitCode::Domain,
        EvalError::UnboundFunction(_) => ExitCode::Parse,
    }
}

fn helmholtz_code(e: &HelmholtzError) -> ExitCode {
    match e {
        HelmholtzError::NotIntegrable { .. } => ExitCode::ResidualFailure,
        HelmholtzError::Eval(e) => eval_code(e),
        HelmholtzError::SingularMetric | HelmholtzError::QuadratureUnsupported(_) | HelmholtzError::SingularBasePoint => {
            ExitCode::Domain
        }
    }
}

fn ansatz_code(e: &AnsatzError) -> ExitCode {
    match e {
        AnsatzError::ExcludedExponent(_) => ExitCode::Excluded,
        AnsatzError::NoMultiplier => ExitCode::ResidualFailure,
        AnsatzError::BadFreeParameter(_) => ExitCode::Domain,
        AnsatzError::UnknownParameter(_) | AnsatzError::UnknownCase(_) | AnsatzError::SymbolicExponent => ExitCode::Parse,
        AnsatzError::Helmholtz(e) => helmholtz_code(e),
    }
}

fn verify_code(e: &VerifyError) -> ExitCode {
    match e {
        VerifyError::NegativeEta { .. } | VerifyError::OutsideDomain { .. } => ExitCode::Infeasible,
        VerifyError::StepUnderflow { .. } => ExitCode::Domain,
        VerifyError::EmptySpan | VerifyError::BadControls(_) => ExitCode::Parse,
        VerifyError::Eval(e) => eval_code(e),
    }
}

fn geometry_code(e: &GeometryError) -> ExitCode {
    match e {
        GeometryError::Parse(_) => ExitCode::Parse,
        GeometryError::Eval(e) => eval_code(e),
        GeometryError::InvalidDomain(_) | GeometryError::CriticalPoint { .. } | GeometryError::SingularMetric => ExitCode::Domain,
    }
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Parse(_) => ExitCode::Parse,
            Error::Eval(e) => eval_code(e),
            Error::Geometry(e) => geometry_code(e),
            Error::Forces(ForcesError::StraightLineFamily) => ExitCode::Excluded,
            Error::Forces(ForcesError::Parse(_)) => ExitCode::Parse,
            Error::Forces(ForcesError::Eval(e)) => eval_code(e),
            Error::Helmholtz(e) => helmholtz_code(e),
            Error::Ansatz(e) => ansatz_code(e),
            Error::Verify(e) => verify_code(e),
            Error::Scenario(e) => match e {
                ScenarioError::StaleRecord => ExitCode::ResidualFailure,
                ScenarioError::Geometry(e) => geometry_code(e),
                ScenarioError::Ansatz(e) => ansatz_code(e),
                ScenarioError::Helmholtz(e) => helmholtz_code(e),
                ScenarioError::Verify(e) => verify_code(e),
                ScenarioError::Eval(e) => eval_code(e),
                ScenarioError::UnknownScenario(_)
                | ScenarioError::Json(_)
                | ScenarioError::Io(_)
                | ScenarioError::Parse { .. }
                | ScenarioError::BadRational(_)
                | ScenarioError::Incomplete => ExitCode::Parse,
            },
        }
    }
}
