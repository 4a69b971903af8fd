//! Prime-field arithmetic and p-adic binomial coefficients.
//!
//! Binomial coefficients of p-adic integers are computed digit-wise through
//! Lucas' theorem, extended to all of `ℤ_(p)` (rationals with denominator
//! prime to p) via the eventually periodic base-p digit stream of such a
//! rational. Digit expansions and extended-Euclid rational reconstruction
//! translate between the digit view and the rational view of an exponent.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("{0} is not a prime number")]
    NotPrime(u64),
    #[error("denominator {den} is divisible by p = {p}")]
    DenominatorDivisibleByP { den: u64, p: u64 },
    #[error("level {level} too low for denominator bound {bound}: need p^(level+1) > 2*bound^2")]
    LevelTooLow { level: usize, bound: u64 },
    #[error("p^(level+1) does not fit the working integer width (level {0})")]
    LevelOverflow(usize),
    #[error("arithmetic context mismatch: p = {0} vs p = {1}")]
    ContextMismatch(u64, u64),
    #[error("rational overflow in exponent arithmetic")]
    RationalOverflow,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Arithmetic context fixing the prime p. Every operation on values produced
/// under one context must be given the same context; mixing contexts is a
/// hard error where detectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, PadicError> {
        if is_prime(p) {
            Ok(PrimeField { p })
        } else {
            Err(PadicError::NotPrime(p))
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn ensure_same(&self, other: &PrimeField) -> Result<(), PadicError> {
        if self.p == other.p {
            Ok(())
        } else {
            Err(PadicError::ContextMismatch(self.p, other.p))
        }
    }

    pub fn reduce_i64(&self, n: i64) -> u64 {
        n.rem_euclid(self.p as i64) as u64
    }

    pub fn reduce_i128(&self, n: i128) -> u64 {
        n.rem_euclid(self.p as i128) as u64
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.p
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.p - b % self.p) % self.p
    }

    pub fn neg(&self, a: u64) -> u64 {
        (self.p - a % self.p) % self.p
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.p as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse of a nonzero residue.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(a % self.p != 0, "inverse of zero mod {}", self.p);
        self.pow(a, self.p - 2)
    }

    /// Binomial coefficient of two base-p digits (both in `[0, p)`).
    fn binom_digit(&self, a: u64, b: u64) -> u64 {
        if b > a {
            return 0;
        }
        // a < p, so no factor below is divisible by p.
        let mut num = 1u64;
        let mut den = 1u64;
        for i in 0..b {
            num = self.mul(num, a - i);
            den = self.mul(den, i + 1);
        }
        self.mul(num, self.inv(den.max(1)))
    }

    /// `binom(n, k) mod p` for an arbitrary integer upper argument.
    pub fn binom_int(&self, n: i64, k: u64) -> u64 {
        self.binom(&ExponentRational::from_int(n), k)
            .expect("integer denominators are prime to p")
    }

    /// Lucas' theorem for `alpha ∈ ℤ_(p)`: the product over base-p digits of
    /// k paired with the digit stream of alpha.
    pub fn binom(&self, alpha: &ExponentRational, k: u64) -> Result<u64, PadicError> {
        let mut digits = DigitStream::new(*self, alpha)?;
        let mut k = k;
        let mut acc = 1u64;
        loop {
            let a = digits.next_digit();
            let b = k % self.p;
            acc = self.mul(acc, self.binom_digit(a, b));
            if acc == 0 {
                return Ok(0);
            }
            k /= self.p;
            if k == 0 {
                return Ok(acc);
            }
        }
    }
}

/// A rational exponent `a/b` with `gcd(a, b) = 1` and `b > 0`. Whether b is
/// prime to p is checked at the point of use against the ambient context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentRational {
    num: i64,
    den: u64,
}

impl ExponentRational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 {
            (-num, (-den) as u64)
        } else {
            (num, den as u64)
        };
        let g = gcd(num.unsigned_abs(), den).max(1);
        ExponentRational {
            num: num / g as i64,
            den: den / g,
        }
    }

    pub fn from_int(n: i64) -> Self {
        ExponentRational { num: n, den: 1 }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn floor(&self) -> i64 {
        self.num.div_euclid(self.den as i64)
    }

    /// Representative of the class of `self` mod ℤ in `[0, 1)`.
    pub fn fractional_part(&self) -> ExponentRational {
        self.sub_int(self.floor())
    }

    pub fn add_int(&self, n: i64) -> ExponentRational {
        ExponentRational {
            num: self.num + n * self.den as i64,
            den: self.den,
        }
    }

    pub fn sub_int(&self, n: i64) -> ExponentRational {
        self.add_int(-n)
    }

    pub fn checked_add(&self, other: &ExponentRational) -> Result<ExponentRational, PadicError> {
        let num = (self.num as i128) * other.den as i128 + (other.num as i128) * self.den as i128;
        let den = self.den as i128 * other.den as i128;
        Self::from_i128(num, den)
    }

    pub fn checked_sub(&self, other: &ExponentRational) -> Result<ExponentRational, PadicError> {
        self.checked_add(&ExponentRational {
            num: -other.num,
            den: other.den,
        })
    }

    pub fn checked_mul(&self, other: &ExponentRational) -> Result<ExponentRational, PadicError> {
        let num = self.num as i128 * other.num as i128;
        let den = self.den as i128 * other.den as i128;
        Self::from_i128(num, den)
    }

    fn from_i128(num: i128, den: i128) -> Result<ExponentRational, PadicError> {
        fn gcd128(a: i128, b: i128) -> i128 {
            if b == 0 {
                a
            } else {
                gcd128(b, a % b)
            }
        }
        let g = gcd128(num.abs(), den).max(1);
        let (num, den) = (num / g, den / g);
        if num > i64::MAX as i128 || num < i64::MIN as i128 || den > u64::MAX as i128 {
            return Err(PadicError::RationalOverflow);
        }
        Ok(ExponentRational {
            num: num as i64,
            den: den as u64,
        })
    }
}

impl fmt::Display for ExponentRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Lazy base-p digit stream of a localized rational, materialized by repeated
/// "subtract digit, divide by p". The stream is eventually periodic and the
/// intermediate numerators stay bounded by `max(|num|, (p-1)·den)`.
struct DigitStream {
    field: PrimeField,
    num: i64,
    den: i64,
}

impl DigitStream {
    fn new(field: PrimeField, alpha: &ExponentRational) -> Result<Self, PadicError> {
        if alpha.den % field.p == 0 {
            return Err(PadicError::DenominatorDivisibleByP {
                den: alpha.den,
                p: field.p,
            });
        }
        Ok(DigitStream {
            field,
            num: alpha.num,
            den: alpha.den as i64,
        })
    }

    fn next_digit(&mut self) -> u64 {
        let p = self.field.p;
        let num_res = self.field.reduce_i64(self.num);
        let den_inv = self.field.inv(self.field.reduce_i64(self.den));
        let c = self.field.mul(num_res, den_inv);
        self.num = (self.num - c as i64 * self.den) / p as i64;
        c
    }
}

/// Truncated base-p expansion `(c_0, …, c_M)` of a p-adic integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PadicDigits {
    digits: Vec<u64>,
}

impl PadicDigits {
    pub fn new(digits: Vec<u64>, field: &PrimeField) -> Self {
        assert!(!digits.is_empty());
        assert!(digits.iter().all(|&d| d < field.p()));
        PadicDigits { digits }
    }

    pub fn level(&self) -> usize {
        self.digits.len() - 1
    }

    pub fn digit(&self, n: usize) -> u64 {
        self.digits[n]
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// `Σ c_n p^n`, the value mod `p^(M+1)`.
    pub fn value(&self, field: &PrimeField) -> i128 {
        let mut acc = 0i128;
        for &c in self.digits.iter().rev() {
            acc = acc * field.p() as i128 + c as i128;
        }
        acc
    }
}

impl fmt::Display for PadicDigits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Base-p digits `(c_0, …, c_M)` of `alpha` with `Σ c_n p^n ≡ alpha mod p^(M+1)`.
pub fn digits(
    field: &PrimeField,
    alpha: &ExponentRational,
    level: usize,
) -> Result<PadicDigits, PadicError> {
    let mut stream = DigitStream::new(*field, alpha)?;
    let digits = (0..=level).map(|_| stream.next_digit()).collect();
    Ok(PadicDigits { digits })
}

fn modulus(field: &PrimeField, level: usize) -> Result<i128, PadicError> {
    let mut m = 1i128;
    for _ in 0..=level {
        m = m
            .checked_mul(field.p() as i128)
            .ok_or(PadicError::LevelOverflow(level))?;
    }
    Ok(m)
}

/// Extended-Euclid rational reconstruction of a digit vector against the
/// modulus `p^(M+1)`. Returns the unique `a/b` with `|a| ≤ bound`,
/// `0 < b ≤ bound`, `p ∤ b` congruent to the digit value, or `None` if no
/// such rational exists. Ambiguity is ruled out by the precondition
/// `p^(M+1) > 2·bound²`, checked here.
pub fn rational_reconstruct(
    field: &PrimeField,
    d: &PadicDigits,
    denom_bound: u64,
) -> Result<Option<ExponentRational>, PadicError> {
    let level = d.level();
    let m = modulus(field, level)?;
    let bound = denom_bound as i128;
    if m <= 2 * bound * bound {
        return Err(PadicError::LevelTooLow {
            level,
            bound: denom_bound,
        });
    }
    let v = d.value(field);
    let (mut r0, mut r1) = (m, v);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1.abs() > bound {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    // Invariant: r1 ≡ t1 * v mod m.
    let (a, b) = if t1 < 0 { (-r1, -t1) } else { (r1, t1) };
    if b == 0 || b > bound || a.abs() > bound {
        return Ok(None);
    }
    let g = gcd(a.unsigned_abs() as u64, b as u64).max(1);
    if g != 1 || (b as u64) % field.p() == 0 {
        return Ok(None);
    }
    Ok(Some(ExponentRational {
        num: a as i64,
        den: b as u64,
    }))
}

/// Both sides of the addition formula
/// `binom(α+β, n) = Σ_{a+b=n} binom(α, a)·binom(β, b)` reduced mod p.
pub fn vandermonde_check(
    field: &PrimeField,
    alpha: &ExponentRational,
    beta: &ExponentRational,
    n: u64,
) -> Result<(u64, u64), PadicError> {
    let lhs = field.binom(&alpha.checked_add(beta)?, n)?;
    let mut rhs = 0u64;
    for a in 0..=n {
        let term = field.mul(field.binom(alpha, a)?, field.binom(beta, n - a)?);
        rhs = field.add(rhs, term);
    }
    Ok((lhs, rhs))
}

/// Both sides of the product identity
/// `binom(α·β, p^d) = Σ_{a+b=d} binom(α, p^a)·binom(β, p^b)` reduced mod p.
pub fn product_check(
    field: &PrimeField,
    alpha: &ExponentRational,
    beta: &ExponentRational,
    d: u32,
) -> Result<(u64, u64), PadicError> {
    let p = field.p();
    let lhs = field.binom(&alpha.checked_mul(beta)?, p.pow(d))?;
    let mut rhs = 0u64;
    for a in 0..=d {
        let term = field.mul(
            field.binom(alpha, p.pow(a))?,
            field.binom(beta, p.pow(d - a))?,
        );
        rhs = field.add(rhs, term);
    }
    Ok((lhs, rhs))
}
