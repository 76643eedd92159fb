use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use super::PadicError;
use crate::arith::is_prime;

/// Working ring `Z/p^K`: a prime `p >= 3` and an absolute precision `K`.
///
/// Contexts are shared behind `Arc` and never mutated. Two contexts are
/// interchangeable when prime and precision agree.
#[derive(Clone, Serialize)]
pub struct PadicContext {
    prime: u64,
    precision: u32,
    #[serde(skip)]
    modulus: BigUint,
}

impl PadicContext {
    pub fn new(prime: u64, precision: u32) -> Result<Arc<Self>, PadicError> {
        if prime < 3 || !is_prime(prime) {
            return Err(PadicError::InvalidPrime(prime));
        }
        if precision == 0 {
            return Err(PadicError::InvalidPrecision);
        }
        let modulus = BigUint::from(prime).pow(precision);
        Ok(Arc::new(PadicContext {
            prime,
            precision,
            modulus,
        }))
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `p^K`.
    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn with_precision(&self, precision: u32) -> Result<Arc<Self>, PadicError> {
        PadicContext::new(self.prime, precision)
    }

    pub fn pow_p(&self, e: u32) -> BigUint {
        if e == 0 {
            BigUint::one()
        } else {
            BigUint::from(self.prime).pow(e)
        }
    }

    pub fn same_ring(&self, other: &PadicContext) -> bool {
        self.prime == other.prime && self.precision == other.precision
    }

    /// Modulus fits a machine word with room for a `u128` product.
    pub(crate) fn word_modulus(&self) -> Option<u64> {
        let bits = self.modulus.bits();
        if bits <= 62 {
            Some(self.modulus.iter_u64_digits().next().unwrap_or(0))
        } else {
            None
        }
    }
}

impl PartialEq for PadicContext {
    fn eq(&self, other: &Self) -> bool {
        self.same_ring(other)
    }
}

impl Eq for PadicContext {}

impl fmt::Debug for PadicContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z/{}^{}", self.prime, self.precision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(PadicContext::new(2, 5), Err(PadicError::InvalidPrime(2))));
        assert!(matches!(PadicContext::new(9, 5), Err(PadicError::InvalidPrime(9))));
        assert!(matches!(PadicContext::new(5, 0), Err(PadicError::InvalidPrecision)));
    }

    #[test]
    fn modulus_is_prime_power() {
        let ctx = PadicContext::new(5, 3).unwrap();
        assert_eq!(ctx.modulus(), &BigUint::from(125u32));
        assert_eq!(ctx.word_modulus(), Some(125));
        let big = PadicContext::new(5, 64).unwrap();
        assert_eq!(big.word_modulus(), None);
    }
}
