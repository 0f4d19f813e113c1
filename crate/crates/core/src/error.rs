use alloc::string::String;

/// Errors raised by the numerical core.
///
/// Contract violations are caller mistakes (bad shapes, invalid ids, stepping a
/// finished episode). Non-finite values are hard failures: nothing is clamped.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value in {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },
    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! contract {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err($crate::error::Error::Contract(alloc::format!($($arg)*)));
        }
    };
}
pub(crate) use contract;

/// Fails with [`Error::NonFinite`] if any element is NaN or infinite.
pub fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite {
            what,
            detail: alloc::format!("index {i} = {}", values[i]),
        }),
    }
}
