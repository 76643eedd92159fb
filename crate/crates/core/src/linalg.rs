//! Square matrices over `Z/m` for a word-sized modulus, and over `Z/p^K`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod_u64, mul_mod_u64};
use crate::padic::{PadicContext, PadicScalar, TruncatedSeries, Valuation};

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModMatrix {
    n: usize,
    modulus: u64,
    data: Vec<u64>,
}

impl ModMatrix {
    pub fn zero(n: usize, modulus: u64) -> Self {
        ModMatrix {
            n,
            modulus,
            data: vec![0; n * n],
        }
    }

    pub fn identity(n: usize, modulus: u64) -> Self {
        let mut m = Self::zero(n, modulus);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u64>], modulus: u64) -> Self {
        let n = rows.len();
        let mut m = Self::zero(n, modulus);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "square matrix");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v % modulus);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.n + j] = v % self.modulus;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zero(self.n, self.modulus);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut acc: u128 = 0;
                for k in 0..self.n {
                    acc += self.get(i, k) as u128 * other.get(k, j) as u128;
                }
                out.data[i * self.n + j] = (acc % self.modulus as u128) as u64;
            }
        }
        out
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::identity(self.n, self.modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn is_idempotent(&self) -> bool {
        &self.mul(self) == self
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n, self.modulus)
    }

    /// Determinant by Gaussian elimination; the modulus must be prime.
    pub fn det(&self) -> u64 {
        let m = self.modulus;
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1u64;
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| a[r * n + col] != 0) else {
                return 0;
            };
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                det = (m - det) % m;
            }
            let pv = a[col * n + col];
            det = mul_mod_u64(det, pv, m);
            let inv = inv_mod_u64(pv, m).expect("prime modulus");
            for r in col + 1..n {
                let factor = mul_mod_u64(a[r * n + col], inv, m);
                if factor == 0 {
                    continue;
                }
                for j in col..n {
                    let sub = mul_mod_u64(factor, a[col * n + j], m);
                    a[r * n + j] = (a[r * n + j] + m - sub) % m;
                }
            }
        }
        det
    }
}

impl fmt::Debug for ModMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} mod {}", self.rows(), self.modulus)
    }
}

/// Square matrix over `Z/p^K`.
#[derive(Clone, PartialEq)]
pub struct PadicMatrix {
    ctx: Arc<PadicContext>,
    n: usize,
    data: Vec<BigUint>,
}

impl PadicMatrix {
    pub fn zero(ctx: &Arc<PadicContext>, n: usize) -> Self {
        PadicMatrix {
            ctx: Arc::clone(ctx),
            n,
            data: vec![BigUint::zero(); n * n],
        }
    }

    pub fn identity(ctx: &Arc<PadicContext>, n: usize) -> Self {
        let mut m = Self::zero(ctx, n);
        for i in 0..n {
            m.data[i * n + i] = BigUint::from(1u32);
        }
        m
    }

    /// Linear part of a map given as `N` series.
    pub fn linear_part(series: &[TruncatedSeries]) -> Self {
        let n = series.len();
        let ctx = series[0].context().clone();
        let mut m = Self::zero(&ctx, n);
        for (i, s) in series.iter().enumerate() {
            for j in 0..n {
                let mut e = vec![0u32; n];
                e[j] = 1;
                m.data[i * n + j] = s.coeff(&e).residue().clone();
            }
        }
        m
    }

    pub fn from_mod_matrix(ctx: &Arc<PadicContext>, a: &ModMatrix) -> Self {
        let n = a.size();
        let mut m = Self::zero(ctx, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = BigUint::from(a.get(i, j));
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> PadicScalar {
        PadicScalar::from_residue(&self.ctx, self.data[i * self.n + j].clone())
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigUint {
        &self.data[i * self.n + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let modulus = self.ctx.modulus();
        let mut out = Self::zero(&self.ctx, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigUint::zero();
                for k in 0..n {
                    acc += &self.data[i * n + k] * &other.data[k * n + j];
                }
                out.data[i * n + j] = acc % modulus;
            }
        }
        out
    }

    /// `a * self + b * other` with small integer weights (possibly negative).
    pub fn combine(&self, a: i64, other: &Self, b: i64) -> Self {
        let modulus = self.ctx.modulus();
        let lift = |w: i64| -> BigUint {
            if w >= 0 {
                BigUint::from(w as u64) % modulus
            } else {
                (modulus - BigUint::from(w.unsigned_abs()) % modulus) % modulus
            }
        };
        let (wa, wb) = (lift(a), lift(b));
        let mut out = Self::zero(&self.ctx, self.n);
        for (slot, (x, y)) in out.data.iter_mut().zip(self.data.iter().zip(&other.data)) {
            *slot = (x * &wa + y * &wb) % modulus;
        }
        out
    }

    pub fn reduce_mod_p(&self) -> ModMatrix {
        let p = self.ctx.prime();
        let pb = BigUint::from(p);
        let mut m = ModMatrix::zero(self.n, p);
        for i in 0..self.n {
            for j in 0..self.n {
                let r = &self.data[i * self.n + j] % &pb;
                m.set(i, j, r.iter_u64_digits().next().unwrap_or(0));
            }
        }
        m
    }

    /// Minimum entry valuation.
    pub fn valuation(&self) -> Valuation {
        self.data
            .iter()
            .map(|x| PadicScalar::from_residue(&self.ctx, x.clone()).valuation())
            .min()
            .unwrap_or(Valuation::Infinite)
    }

    /// Lifts an idempotent-mod-`p` matrix to the unique idempotent over
    /// `Z/p^K` congruent to it, by the iteration `e -> 3e^2 - 2e^3`, which
    /// doubles the precision of `e^2 = e` at each step.
    pub fn idempotent_lift(&self) -> Self {
        let mut e = self.clone();
        let target = self.ctx.precision();
        let mut good = 1u32;
        loop {
            let e2 = e.mul(&e);
            if e2 == e {
                return e;
            }
            let e3 = e2.mul(&e);
            e = e2.combine(3, &e3, -2);
            good = good.saturating_mul(2);
            if good >= 2 * target + 2 {
                return e;
            }
        }
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.data[i * self.n + j].to_string()).collect())
            .collect()
    }
}

impl fmt::Debug for PadicMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} ({:?})", self.rows(), self.ctx)
    }
}
