use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max |m - m^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (||U^dagger U - I||_2 = {0:e})")]
    NotUnitary(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("relative entropy diverges: support of rho is not contained in support of sigma")]
    SupportViolation,

    #[error("steady state is not unique: {0}")]
    DegenerateNullSpace(String),

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("positivity violated at t = {t}: minimum eigenvalue {min_eigenvalue:e}")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },

    #[error("entropy budget did not converge before horizon t = {0}")]
    HorizonExceeded(f64),

    #[error("argument outside the domain of the bound function: x = {0}")]
    BoundDomain(f64),

    #[error("relative work error undefined: mean work {0:e} is zero")]
    ZeroMeanWork(f64),

    #[error("v bounds undefined for purity {0} (needs 6*gamma - 2 >= 0)")]
    PurityTooLow(f64),
}
