use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// The depth or step budget was exceeded; results are never truncated silently.
    #[error("fuel exhausted: {0}")]
    FuelExhausted(String),

    #[error("pole order {order} exceeds the configured limit {limit}")]
    PoleOrderLimit { order: u32, limit: u32 },

    #[error("invalid module: {0}")]
    InvalidModule(String),

    #[error("section is not a member of {class}")]
    NotMember { class: &'static str },
}
