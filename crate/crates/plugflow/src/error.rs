use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({r}, {z}) outside the rectangle [1,3]x[-2,2]")]
    Domain { r: f64, z: f64 },
    #[error("({r_prime}, {theta_prime}) outside the insertion domain L{index}")]
    OffDomain {
        index: usize,
        r_prime: f64,
        theta_prime: f64,
    },
    #[error("point not on entry face {index}: residual {residual:e}")]
    OffFace { index: usize, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("event location failed in [{t0}, {t1}]: {msg}")]
    EventLocation { t0: f64, t1: f64, msg: String },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
