use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("monotonicity violated: {0}")]
    Monotone(String),
    #[error("contour constraint violated: {0}")]
    Constraint(String),
    #[error("pole hit: {0}")]
    Pole(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
