//! Prime-field residues with a runtime modulus.
//!
//! Curves here are discovered at runtime, so the modulus travels with each
//! element instead of living in a type parameter. Moduli are machine words
//! (< 2^61); intermediate products go through u128.

use crate::error::{Error, Result};

/// A residue in `F_m` for a runtime modulus `m`.
///
/// The same type serves both the scalar field `F_p` (key vectors, linear
/// systems) and the coordinate field `F_q` (curve points). Mixing moduli in
/// one operation is a caller bug and panics; fallible entry points that can
/// receive untrusted operands do their own checks first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    /// Reduces `value` into `[0, modulus)`.
    pub fn new(value: u64, modulus: u64) -> Self {
        debug_assert!(modulus >= 2, "modulus must be at least 2");
        FieldElement {
            value: value % modulus,
            modulus,
        }
    }

    pub fn zero(modulus: u64) -> Self {
        FieldElement { value: 0, modulus }
    }

    pub fn one(modulus: u64) -> Self {
        FieldElement::new(1, modulus)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn check_same(&self, other: &FieldElement) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ParameterMismatch(format!(
                "operands live in different fields: F_{} vs F_{}",
                self.modulus, other.modulus
            )));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &FieldElement) -> FieldElement {
        self.check_same(rhs).expect("field op on mixed moduli");
        let sum = (self.value as u128 + rhs.value as u128) % self.modulus as u128;
        FieldElement {
            value: sum as u64,
            modulus: self.modulus,
        }
    }

    pub fn sub(&self, rhs: &FieldElement) -> FieldElement {
        self.check_same(rhs).expect("field op on mixed moduli");
        let m = self.modulus as u128;
        let diff = (self.value as u128 + m - rhs.value as u128) % m;
        FieldElement {
            value: diff as u64,
            modulus: self.modulus,
        }
    }

    pub fn neg(&self) -> FieldElement {
        if self.value == 0 {
            *self
        } else {
            FieldElement {
                value: self.modulus - self.value,
                modulus: self.modulus,
            }
        }
    }

    pub fn mul(&self, rhs: &FieldElement) -> FieldElement {
        self.check_same(rhs).expect("field op on mixed moduli");
        let prod = (self.value as u128 * rhs.value as u128) % self.modulus as u128;
        FieldElement {
            value: prod as u64,
            modulus: self.modulus,
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(&self) -> Result<FieldElement> {
        if self.value == 0 {
            return Err(Error::ZeroInverse {
                modulus: self.modulus,
            });
        }
        // Extended Euclid on (value, modulus); the modulus is prime so any
        // nonzero residue is invertible.
        let (mut r0, mut r1) = (self.modulus as i128, self.value as i128);
        let (mut s0, mut s1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        debug_assert_eq!(r0, 1, "modulus must be prime");
        let m = self.modulus as i128;
        let inv = ((s0 % m) + m) % m;
        Ok(FieldElement {
            value: inv as u64,
            modulus: self.modulus,
        })
    }

    pub fn div(&self, rhs: &FieldElement) -> Result<FieldElement> {
        self.check_same(rhs)?;
        Ok(self.mul(&rhs.inv()?))
    }

    pub fn pow(&self, mut exp: u64) -> FieldElement {
        let mut base = *self;
        let mut acc = FieldElement::one(self.modulus);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            exp >>= 1;
        }
        acc
    }
}

impl std::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl std::ops::Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        FieldElement::add(&self, &rhs)
    }
}

impl std::ops::Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        FieldElement::sub(&self, &rhs)
    }
}

impl std::ops::Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        FieldElement::mul(&self, &rhs)
    }
}

impl std::ops::Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement::neg(&self)
    }
}

/// Deterministic Miller-Rabin, valid for all u64 inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    // These witnesses are enough for every n < 3.3 * 10^24.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}
