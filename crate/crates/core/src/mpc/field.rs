use rand::{Rng, RngCore};

use super::MpcError;

/// Exponents `b` for which `2^b - 1` is prime and fits in a `u128`.
pub const MERSENNE_EXPONENTS: [u32; 5] = [31, 61, 89, 107, 127];

/// The prime field of integers modulo the Mersenne prime `2^bits - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Field {
    bits: u32,
    modulus: u128,
}

impl Field {
    pub fn mersenne(bits: u32) -> Result<Self, MpcError> {
        if !MERSENNE_EXPONENTS.contains(&bits) {
            return Err(MpcError::InvalidParams(format!(
                "field bits must be one of {MERSENNE_EXPONENTS:?}, got {bits}"
            )));
        }
        Ok(Field {
            bits,
            modulus: (1u128 << bits) - 1,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    /// Reduces any `u128` into `[0, p)`.
    pub fn reduce(&self, x: u128) -> u128 {
        let p = self.modulus;
        let mut s = x;
        while s >> self.bits != 0 {
            s = (s & p) + (s >> self.bits);
        }
        if s == p {
            0
        } else {
            s
        }
    }

    pub fn add(&self, a: u128, b: u128) -> u128 {
        // a, b < 2^127, so the sum cannot overflow
        self.reduce(a + b)
    }

    pub fn sub(&self, a: u128, b: u128) -> u128 {
        self.add(a, self.neg(b))
    }

    pub fn neg(&self, a: u128) -> u128 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    pub fn mul(&self, a: u128, b: u128) -> u128 {
        let (hi, lo) = widening_mul(a, b);
        // x = hi * 2^128 + lo; fold the bits above `bits` back down
        let low = lo & self.modulus;
        let high = (hi << (128 - self.bits)) | (lo >> self.bits);
        self.reduce(low + high)
    }

    pub fn sum(&self, values: impl IntoIterator<Item = u128>) -> u128 {
        values.into_iter().fold(0, |acc, v| self.add(acc, v))
    }

    /// Embeds a signed integer; negatives map to `p - |v|`.
    pub fn from_i128(&self, v: i128) -> u128 {
        let m = self.reduce(v.unsigned_abs());
        if v < 0 {
            self.neg(m)
        } else {
            m
        }
    }

    /// Centered lift of `a` to `(-p/2, p/2]`.
    pub fn lift_centered(&self, a: u128) -> i128 {
        if a > self.modulus / 2 {
            -((self.modulus - a) as i128)
        } else {
            a as i128
        }
    }

    /// Uniform element of `[0, p)` by rejection sampling.
    pub fn random(&self, rng: &mut (impl RngCore + ?Sized)) -> u128 {
        loop {
            let x: u128 = rng.random::<u128>() & self.modulus;
            if x < self.modulus {
                return x;
            }
        }
    }
}

/// Full 256-bit product as `(high, low)` words.
fn widening_mul(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & MASK);
    let (b1, b0) = (b >> 64, b & MASK);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & MASK) + (p10 & MASK);
    let lo = (p00 & MASK) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}
