//! Fixed-precision p-adic integers, vectors, truncated series and Mahler
//! series. Values live in `Z/p^K` with their valuation cached; `p >= 3`.

mod context;
mod mahler;
mod scalar;
mod series;
mod vector;

use thiserror::Error;

pub use context::PadicContext;
pub use mahler::{binomial_mod, binomial_row, binomial_u64, forward_differences, mahler_evaluate, MahlerRecord, MahlerSeries};
pub use scalar::{PadicScalar, PrecisionLedger, PrecisionLoss, Valuation};
pub use series::{compose_map, Monomial, TruncatedSeries, MAX_VARS};
pub use vector::PadicVector;

pub(crate) use scalar::inverse_mod;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PadicError {
    #[error("{0} is not an odd prime")]
    InvalidPrime(u64),
    #[error("precision must be at least 1")]
    InvalidPrecision,
    #[error("value is not p-integral")]
    NotIntegral,
    #[error("context mismatch: Z/{}^{} vs Z/{}^{}", left.0, left.1, right.0, right.1)]
    ContextMismatch { left: (u64, u32), right: (u64, u32) },
    #[error("value is not a unit")]
    NotAUnit,
    #[error("division by zero at working precision")]
    DivisionByZero,
    #[error("inexact division: dividend valuation {dividend}, divisor valuation {divisor}")]
    InexactDivision { dividend: Valuation, divisor: u32 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("binomial C(n, {k}) needs more than {precision} digits (v_p(k!) = {lost})")]
    BinomialPrecision { k: u64, precision: u32, lost: u64 },
}
