// SPDX-License-Identifier: Apache-2.0

//! Arithmetic in GF(2^k), 1 ≤ k ≤ 16.
//!
//! Elements are bit-coded polynomials: bit `i` of the value is the
//! coefficient of `x^i`. Addition is XOR, multiplication is a carry-less
//! product reduced modulo the field polynomial. No lookup tables are used,
//! so results do not depend on any precomputation.
//!
//! Default polynomials (bit-coded, degree exactly `k`):
//!
//! | k | polynomial | k | polynomial |
//! |---|------------|---|------------|
//! | 1 | x (0x2) | 9 | x⁹+x⁴+1 (0x211) |
//! | 2 | x²+x+1 (0x7) | 10 | x¹⁰+x³+1 (0x409) |
//! | 3 | x³+x+1 (0xB) | 11 | x¹¹+x²+1 (0x805) |
//! | 4 | x⁴+x+1 (0x13) | 12 | x¹²+x³+1 (0x1009) |
//! | 5 | x⁵+x²+1 (0x25) | 13 | x¹³+x⁴+x³+x+1 (0x201B) |
//! | 6 | x⁶+x+1 (0x43) | 14 | x¹⁴+x⁵+1 (0x4021) |
//! | 7 | x⁷+x+1 (0x83) | 15 | x¹⁵+x+1 (0x8003) |
//! | 8 | x⁸+x⁴+x³+x+1 (0x11B) | 16 | x¹⁶+x⁵+x³+x+1 (0x1002B) |

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_DEGREE: u32 = 16;

const DEFAULT_POLYS: [u32; 16] = [
    0x2, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11B, 0x211, 0x409, 0x805, 0x1009, 0x201B, 0x4021,
    0x8003, 0x1002B,
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("extension degree {0} out of range 1..=16")]
    DegreeOutOfRange(u32),
    #[error("polynomial {poly:#x} has degree {actual:?}, expected {expected}")]
    DegreeMismatch {
        poly: u32,
        expected: u32,
        actual: Option<u32>,
    },
    #[error("polynomial {0:#x} is reducible over GF(2)")]
    Reducible(u32),
    #[error("q = {0} is not a power of two in 2..=65536")]
    NotBinary(u64),
    #[error("element {value} out of range for GF({q})")]
    ElementOutOfRange { value: u32, q: u32 },
    #[error("division by zero")]
    DivisionByZero,
}

/// An element of GF(2^k), stored as its bit-coded residue polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Wraps a raw value without range checking; use [`FieldSpec::element`]
    /// when the value comes from outside.
    pub const fn from_raw(value: u32) -> Self {
        FieldElement(value)
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A validated description of GF(2^k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "FieldSpecRecord", into = "FieldSpecRecord")]
pub struct FieldSpec {
    k: u32,
    poly: u32,
}

#[derive(Serialize, Deserialize)]
struct FieldSpecRecord {
    k: u32,
    poly: u32,
}

impl TryFrom<FieldSpecRecord> for FieldSpec {
    type Error = FieldError;

    fn try_from(r: FieldSpecRecord) -> Result<Self, FieldError> {
        FieldSpec::with_poly(r.k, r.poly)
    }
}

impl From<FieldSpec> for FieldSpecRecord {
    fn from(f: FieldSpec) -> Self {
        FieldSpecRecord { k: f.k, poly: f.poly }
    }
}

fn degree(p: u32) -> Option<u32> {
    (p != 0).then(|| 31 - p.leading_zeros())
}

/// Remainder of `a` modulo `b` as GF(2) polynomials.
fn poly_rem(mut a: u64, b: u64) -> u64 {
    let db = 63 - b.leading_zeros();
    while a != 0 && 63 - a.leading_zeros() >= db {
        a ^= b << (63 - a.leading_zeros() - db);
    }
    a
}

fn is_irreducible(poly: u32) -> bool {
    let Some(d) = degree(poly) else { return false };
    if d <= 1 {
        return d == 1;
    }
    // any factorization has a factor of degree ≤ d/2
    (2u64..(1u64 << (d / 2 + 1))).all(|divisor| poly_rem(poly as u64, divisor) != 0)
}

impl FieldSpec {
    /// GF(2^k) with the pinned default polynomial.
    pub fn new(k: u32) -> Result<Self, FieldError> {
        if !(1..=MAX_DEGREE).contains(&k) {
            return Err(FieldError::DegreeOutOfRange(k));
        }
        Self::with_poly(k, DEFAULT_POLYS[(k - 1) as usize])
    }

    pub fn with_poly(k: u32, poly: u32) -> Result<Self, FieldError> {
        if !(1..=MAX_DEGREE).contains(&k) {
            return Err(FieldError::DegreeOutOfRange(k));
        }
        if degree(poly) != Some(k) {
            return Err(FieldError::DegreeMismatch {
                poly,
                expected: k,
                actual: degree(poly),
            });
        }
        if !is_irreducible(poly) {
            return Err(FieldError::Reducible(poly));
        }
        Ok(FieldSpec { k, poly })
    }

    /// GF(q) with the default polynomial; `q` must be 2^k with 1 ≤ k ≤ 16.
    pub fn from_order(q: u64) -> Result<Self, FieldError> {
        if q < 2 || !q.is_power_of_two() || q > 1 << MAX_DEGREE {
            return Err(FieldError::NotBinary(q));
        }
        Self::new(q.trailing_zeros())
    }

    pub fn gf2() -> Self {
        FieldSpec { k: 1, poly: 0x2 }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    pub fn q(&self) -> u32 {
        1 << self.k
    }

    pub fn is_prime(&self) -> bool {
        self.k == 1
    }

    pub fn element(&self, value: u32) -> Result<FieldElement, FieldError> {
        if value >= self.q() {
            return Err(FieldError::ElementOutOfRange { value, q: self.q() });
        }
        Ok(FieldElement(value))
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q()).map(FieldElement)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if self.k == 1 {
            return FieldElement(a.0 & b.0);
        }
        let (mut x, mut y) = (a.0 as u64, b.0 as u64);
        let mut acc = 0u64;
        while y != 0 {
            if y & 1 == 1 {
                acc ^= x;
            }
            x <<= 1;
            y >>= 1;
        }
        FieldElement(poly_rem(acc, self.poly as u64) as u32)
    }

    pub fn pow(&self, a: FieldElement, mut exp: u64) -> FieldElement {
        let mut base = a;
        let mut acc = FieldElement::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via a^(q-2).
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        Ok(self.pow(a, self.q() as u64 - 2))
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.q())
    }
}
