//! Exact rational numbers with an inline fast path.
//!
//! Values that fit in `i64/i64` are stored inline; anything larger spills
//! into a boxed `BigRational`. The representation is canonical, so derived
//! structural equality is value equality.

use alloc::boxed::Box;
use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone)]
enum Repr {
    /// numerator, denominator > 0, coprime, both in `-i64::MAX..=i64::MAX`
    Small(i64, i64),
    Big(Box<BigRational>),
}

/// An exact rational number.
#[derive(Clone)]
pub struct Scalar(Repr);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseScalarError(pub String);

impl fmt::Display for ParseScalarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid rational literal `{}`", self.0)
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            core::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

#[inline]
fn fits(v: i128) -> bool {
    v >= -(i64::MAX as i128) && v <= i64::MAX as i128
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Scalar(Repr::Small(1, 1))
    }

    pub fn from_int(n: i64) -> Self {
        if n == i64::MIN {
            return Self::from_big(BigRational::from_integer(BigInt::from(n)));
        }
        Scalar(Repr::Small(n, 1))
    }

    /// `num/den`; panics on a zero denominator.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Self {
        let (mut n, mut d) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd_u128(n.unsigned_abs(), d as u128);
        if g > 1 {
            n /= g as i128;
            d /= g as i128;
        }
        if fits(n) && fits(d) {
            Scalar(Repr::Small(n as i64, d as i64))
        } else {
            Scalar(Repr::Big(Box::new(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))))
        }
    }

    pub fn from_big(r: BigRational) -> Self {
        if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
            if n != i64::MIN && d != i64::MIN {
                return Scalar(Repr::Small(n, d));
            }
        }
        Scalar(Repr::Big(Box::new(r)))
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(b) => b.denom().clone(),
        }
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        matches!(self.0, Repr::Small(_, 1)) || matches!(&self.0, Repr::Big(b) if b.is_integer())
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(b) => b.is_negative(),
        }
    }

    /// Sign as -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(n, _) => n.signum() as i32,
            Repr::Big(b) => {
                if b.is_negative() {
                    -1
                } else if b.is_zero() {
                    0
                } else {
                    1
                }
            }
        }
    }

    pub fn to_i64(&self) -> Option<i64> {
        match self.0 {
            Repr::Small(n, 1) => Some(n),
            _ => None,
        }
    }

    pub fn recip(&self) -> Option<Scalar> {
        match &self.0 {
            Repr::Small(0, _) => None,
            Repr::Small(n, d) => {
                if *n < 0 {
                    Some(Scalar(Repr::Small(-*d, -*n)))
                } else {
                    Some(Scalar(Repr::Small(*d, *n)))
                }
            }
            Repr::Big(b) => Some(Self::from_big(b.recip())),
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn pow(&self, e: i32) -> Scalar {
        let base = if e < 0 { self.recip().expect("zero to a negative power") } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc = Scalar::one();
        let mut b = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &b;
            }
            k >>= 1;
            if k > 0 {
                b = &b * &b;
            }
        }
        acc
    }

    fn big_op(&self, rhs: &Scalar, f: impl FnOnce(BigRational, BigRational) -> BigRational) -> Scalar {
        Self::from_big(f(self.to_big(), rhs.to_big()))
    }
}

fn gcd_u128(a: u128, b: u128) -> u128 {
    if a <= u64::MAX as u128 && b <= u64::MAX as u128 {
        return gcd_u64(a as u64, b as u64) as u128;
    }
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn add_small(n1: i64, d1: i64, n2: i64, d2: i64) -> Scalar {
    if d1 == 1 && d2 == 1 {
        let s = n1 as i128 + n2 as i128;
        if fits(s) {
            return Scalar(Repr::Small(s as i64, 1));
        }
        return Scalar::from_i128(s, 1);
    }
    let g = gcd_u64(d1 as u64, d2 as u64) as i64;
    if g == 1 {
        let n = n1 as i128 * d2 as i128 + n2 as i128 * d1 as i128;
        let d = d1 as i128 * d2 as i128;
        if fits(n) && fits(d) {
            return Scalar(Repr::Small(n as i64, d as i64));
        }
        return Scalar::from_i128(n, d);
    }
    let t = n1 as i128 * (d2 / g) as i128 + n2 as i128 * (d1 / g) as i128;
    if t == 0 {
        return Scalar::zero();
    }
    let g2 = gcd_u64((t.unsigned_abs() % g as u128) as u64, g as u64) as i128;
    let n = t / g2;
    let d = (d1 / g) as i128 * (d2 as i128 / g2);
    if fits(n) && fits(d) {
        Scalar(Repr::Small(n as i64, d as i64))
    } else {
        Scalar::from_i128(n, d)
    }
}

fn mul_small(n1: i64, d1: i64, n2: i64, d2: i64) -> Scalar {
    if n1 == 0 || n2 == 0 {
        return Scalar::zero();
    }
    let (mut n1, mut d1, mut n2, mut d2) = (n1, d1, n2, d2);
    if d2 != 1 {
        let g = gcd_u64(n1.unsigned_abs(), d2 as u64) as i64;
        if g > 1 {
            n1 /= g;
            d2 /= g;
        }
    }
    if d1 != 1 {
        let g = gcd_u64(n2.unsigned_abs(), d1 as u64) as i64;
        if g > 1 {
            n2 /= g;
            d1 /= g;
        }
    }
    let n = n1 as i128 * n2 as i128;
    let d = d1 as i128 * d2 as i128;
    if fits(n) && fits(d) {
        Scalar(Repr::Small(n as i64, d as i64))
    } else {
        Scalar(Repr::Big(Box::new(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))))
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    #[inline]
    fn add(self, rhs: &Scalar) -> Scalar {
        match (&self.0, &rhs.0) {
            (Repr::Small(0, _), _) => rhs.clone(),
            (_, Repr::Small(0, _)) => self.clone(),
            (Repr::Small(a, b), Repr::Small(c, d)) => add_small(*a, *b, *c, *d),
            _ => self.big_op(rhs, |x, y| x + y),
        }
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    #[inline]
    fn sub(self, rhs: &Scalar) -> Scalar {
        match (&self.0, &rhs.0) {
            (_, Repr::Small(0, _)) => self.clone(),
            (Repr::Small(a, b), Repr::Small(c, d)) => add_small(*a, *b, -*c, *d),
            _ => self.big_op(rhs, |x, y| x - y),
        }
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    #[inline]
    fn mul(self, rhs: &Scalar) -> Scalar {
        match (&self.0, &rhs.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => mul_small(*a, *b, *c, *d),
            (Repr::Small(0, _), _) | (_, Repr::Small(0, _)) => Scalar::zero(),
            _ => self.big_op(rhs, |x, y| x * y),
        }
    }
}

impl<'a> Div<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Scalar) -> Scalar {
        self * &rhs.recip().expect("division by zero")
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match &self.0 {
            Repr::Small(n, d) => Scalar(Repr::Small(-*n, *d)),
            Repr::Big(b) => Scalar::from_big(-(**b).clone()),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            #[inline]
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            #[inline]
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Scalar> for &'a Scalar {
            type Output = Scalar;
            #[inline]
            fn $m(self, rhs: Scalar) -> Scalar {
                self.$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

impl AddAssign<&Scalar> for Scalar {
    #[inline]
    fn add_assign(&mut self, rhs: &Scalar) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Scalar> for Scalar {
    #[inline]
    fn add_assign(&mut self, rhs: Scalar) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<i32> for Scalar {
    fn from(n: i32) -> Self {
        Scalar::from_int(n as i64)
    }
}

impl From<usize> for Scalar {
    fn from(n: usize) -> Self {
        Scalar::from_i128(n as i128, 1)
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => a == c && b == d,
            (Repr::Big(x), Repr::Big(y)) => x == y,
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl Hash for Scalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(n, d) => {
                n.hash(state);
                d.hash(state);
            }
            Repr::Big(b) => b.hash(state),
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128)),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Display for Scalar {
    /// Always `p/q`, even for integers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, d) => write!(f, "{}/{}", n, d),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{}", n),
            _ => fmt::Display::fmt(self, f),
        }
    }
}

impl FromStr for Scalar {
    type Err = ParseScalarError;

    /// Accepts `p`, `p/q`, and decimal literals such as `-1.25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseScalarError(String::from(s));
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Scalar::from_big(BigRational::new(n, d)));
        }
        if let Some((ip, fp)) = t.split_once('.') {
            if fp.is_empty() || !fp.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let neg = ip.starts_with('-');
            let ip_digits = ip.trim_start_matches(['-', '+']);
            if !ip_digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let mut digits = String::from(ip_digits);
            digits.push_str(fp);
            let mut n: BigInt = digits.parse().map_err(|_| err())?;
            if neg {
                n = -n;
            }
            let d = num_traits::pow(BigInt::from(10), fp.len());
            return Ok(Scalar::from_big(BigRational::new(n, d)));
        }
        let n: BigInt = t.parse().map_err(|_| err())?;
        Ok(Scalar::from_big(BigRational::from_integer(n)))
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl Zero for Scalar {
    fn zero() -> Self {
        Scalar::zero()
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
}

impl One for Scalar {
    fn one() -> Self {
        Scalar::one()
    }
}

/// Binomial coefficient as an exact scalar.
pub fn binomial(n: u32, k: u32) -> Scalar {
    if k > n {
        return Scalar::zero();
    }
    let mut acc = Scalar::one();
    for i in 0..k {
        acc = &acc * &Scalar::ratio((n - i) as i64, (i + 1) as i64);
    }
    acc
}

/// `m!` as an exact scalar.
pub fn factorial(m: u32) -> Scalar {
    let mut acc = Scalar::one();
    for i in 2..=m {
        acc = &acc * &Scalar::from_int(i as i64);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn big(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn canonical_form() {
        let s = Scalar::ratio(6, -4);
        assert_eq!(s.to_string(), "-3/2");
        assert_eq!(Scalar::ratio(0, -7), Scalar::zero());
        assert_eq!(Scalar::from_int(5).to_string(), "5/1");
    }

    #[test]
    fn overflow_spills_and_returns() {
        let a = Scalar::from_int(i64::MAX);
        let b = &a + &Scalar::one();
        assert_eq!(b.numer(), BigInt::from(i64::MAX) + 1);
        let c = &b - &Scalar::one();
        assert_eq!(c, a);
        assert!(matches!(c.0, Repr::Small(..)));
        let sq = &a * &a;
        assert_eq!(&sq / &a, a);
    }

    #[test]
    fn parse_forms() {
        assert_eq!("3/4".parse::<Scalar>().unwrap(), Scalar::ratio(3, 4));
        assert_eq!("-1.25".parse::<Scalar>().unwrap(), Scalar::ratio(-5, 4));
        assert_eq!("12".parse::<Scalar>().unwrap(), Scalar::from_int(12));
        assert!("1/0".parse::<Scalar>().is_err());
        assert!("x".parse::<Scalar>().is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), Scalar::from_int(20));
        assert_eq!(factorial(5), Scalar::from_int(120));
    }

    fn arb() -> impl Strategy<Value = (i64, i64)> {
        (any::<i64>().prop_filter("min", |v| *v != i64::MIN), 1i64..=i64::MAX)
    }

    proptest! {
        #[test]
        fn field_ops_match_bigrational((a, b) in arb(), (c, d) in arb()) {
            let x = Scalar::ratio(a, b);
            let y = Scalar::ratio(c, d);
            prop_assert_eq!((&x + &y).to_big(), big(a, b) + big(c, d));
            prop_assert_eq!((&x - &y).to_big(), big(a, b) - big(c, d));
            prop_assert_eq!((&x * &y).to_big(), big(a, b) * big(c, d));
            if c != 0 {
                prop_assert_eq!((&x / &y).to_big(), big(a, b) / big(c, d));
            }
            prop_assert_eq!(x.cmp(&y), big(a, b).cmp(&big(c, d)));
        }

        #[test]
        fn display_roundtrip((a, b) in arb()) {
            let x = Scalar::ratio(a, b);
            prop_assert_eq!(x.to_string().parse::<Scalar>().unwrap(), x);
        }
    }
}
