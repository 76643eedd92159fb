//! Small integer helpers shared across modules: primality, prime ranges,
//! factorization of denominators, modular inverses on machine words.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5] {
        if n % q == 0 {
            return n == q;
        }
    }
    let mut d = 7u64;
    let mut step = [4u64, 2, 4, 2, 4, 6, 2, 6].iter().cycle();
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += step.next().unwrap();
    }
    true
}

/// Primes in the closed interval `[lo, hi]`.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(2)..=hi).filter(|&n| is_prime(n)).collect()
}

/// Prime factors of a big integer, found by trial division.
///
/// Denominators in problem files are small, so trial division up to the
/// square root (with a cap) is enough; a cofactor that survives the cap is
/// reported as-is if it fits in a `u64`.
pub fn prime_factors(n: &BigUint) -> Vec<u64> {
    let mut out = Vec::new();
    let mut m = n.clone();
    if m.is_zero() {
        return out;
    }
    let mut d = 2u64;
    while m > BigUint::one() && d < 10_000_000 {
        let db = BigUint::from(d);
        if &db * &db > m {
            break;
        }
        if (&m % &db).is_zero() {
            out.push(d);
            while (&m % &db).is_zero() {
                m /= &db;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > BigUint::one() {
        if let Some(v) = m.to_u64() {
            out.push(v);
        }
    }
    out
}

pub fn mod_pow_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

#[inline]
pub fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn inv_mod_u64(a: u64, m: u64) -> Option<u64> {
    let g = (a as i128).extended_gcd(&(m as i128));
    if g.gcd != 1 {
        return None;
    }
    Some(g.x.rem_euclid(m as i128) as u64)
}

/// Reduce a signed big integer into `[0, m)`.
pub fn reduce_bigint(x: &BigInt, m: &BigUint) -> BigUint {
    let mb = BigInt::from(m.clone());
    let r = x.mod_floor(&mb);
    r.to_biguint().expect("mod_floor is non-negative")
}

pub fn reduce_bigint_u64(x: &BigInt, m: u64) -> u64 {
    let r = x.mod_floor(&BigInt::from(m));
    r.to_u64().expect("residue fits")
}

/// p-adic valuation of a nonzero big integer.
pub fn valuation_bigint(x: &BigInt, p: u64) -> Option<u32> {
    if x.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut m = x.abs();
    while (&m % &pb).is_zero() {
        m /= &pb;
        v += 1;
    }
    Some(v)
}

/// Exponent of `p` in `k!` (Legendre's formula).
pub fn factorial_valuation(k: u64, p: u64) -> u64 {
    let mut v = 0;
    let mut q = k;
    while q > 0 {
        q /= p;
        v += q;
    }
    v
}

pub fn lcm_u64(a: u64, b: u64) -> u64 {
    a / a.gcd(&b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        assert_eq!(primes_in_range(1, 30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(is_prime(2_147_483_647));
        assert!(!is_prime(2_147_483_649));
    }

    #[test]
    fn legendre() {
        assert_eq!(factorial_valuation(10, 2), 8);
        assert_eq!(factorial_valuation(25, 5), 6);
        assert_eq!(factorial_valuation(3, 3), 1);
    }

    #[test]
    fn factors_of_denominators() {
        assert_eq!(prime_factors(&BigUint::from(360u32)), vec![2, 3, 5]);
        assert_eq!(prime_factors(&BigUint::from(1u32)), Vec::<u64>::new());
    }

    #[test]
    fn inverses() {
        assert_eq!(inv_mod_u64(2, 5), Some(3));
        assert_eq!(inv_mod_u64(5, 25), None);
        assert_eq!(mod_pow_u64(2, 4, 5), 1);
    }
}
