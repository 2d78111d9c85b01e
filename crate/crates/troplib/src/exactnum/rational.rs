use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

/// Exact rational number, stored in lowest terms with positive denominator.
///
/// Serializes as the string `"p/q"` (or `"p"` when the denominator is 1);
/// parsing additionally accepts decimal literals like `"0.35"`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

impl Rat {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_int(n: i64) -> Self {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Rat(BigRational::from_integer(n))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        Rat(BigRational::new(num, den))
    }

    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        if self.0.is_negative() {
            -1
        } else if self.0.is_zero() {
            0
        } else {
            1
        }
    }

    pub fn abs(&self) -> Self {
        Rat(self.0.abs())
    }

    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn ceil_int(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    /// Exact integer value, if the denominator is 1.
    pub fn to_integer(&self) -> Option<BigInt> {
        if self.0.is_integer() {
            Some(self.0.to_integer())
        } else {
            None
        }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(self.0.recip())
    }

    pub fn pow(&self, exp: i32) -> Self {
        Rat(self.0.pow(exp))
    }

    pub fn min2(a: &Rat, b: &Rat) -> Rat {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn max2(a: &Rat, b: &Rat) -> Rat {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    /// Least `m > 0` with `m * self` integral; 1 for integers.
    pub fn denom_scale(&self) -> BigInt {
        self.0.denom().clone()
    }

    /// Decimal expansion truncated toward minus infinity to `digits` places.
    /// Used for byte-stable SVG output.
    pub fn to_decimal(&self, digits: u32) -> String {
        let scale = BigInt::from(10u32).pow(digits);
        let scaled = (&self.0 * BigRational::from_integer(scale.clone()))
            .floor()
            .to_integer();
        let neg = scaled.is_negative();
        let mag = scaled.magnitude().clone();
        let (int_part, frac_part) = mag.div_rem(&scale.magnitude().clone());
        let frac_str = format!("{:0>width$}", frac_part.to_string(), width = digits as usize);
        let frac_trimmed = frac_str.trim_end_matches('0');
        let mut s = String::new();
        if neg {
            s.push('-');
        }
        s.push_str(&int_part.to_string());
        if !frac_trimmed.is_empty() {
            s.push('.');
            s.push_str(frac_trimmed);
        }
        s
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRatError(String);

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParseRatError(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let num = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let den = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            return Ok(Rat(BigRational::new(num, den)));
        }
        if let Some((i, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let neg = i.starts_with('-');
            let int_part = if i == "-" || i.is_empty() {
                BigInt::zero()
            } else {
                BigInt::from_str(i).map_err(|_| bad())?
            };
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            let frac_part = BigInt::from_str(frac).map_err(|_| bad())?;
            let mag = int_part.abs() * &scale + frac_part;
            let signed = if neg { -mag } else { mag };
            return Ok(Rat(BigRational::new(signed, scale)));
        }
        let n = BigInt::from_str(s).map_err(|_| bad())?;
        Ok(Rat(BigRational::from_integer(n)))
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(de::Error::custom)
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((&self.0).$method(rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div<&Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / &rhs.0)
    }
}

impl Div<Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        (&self).div(&rhs)
    }
}

impl Div<&Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        (&self).div(rhs)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, rhs: &Rat) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, rhs: &Rat) {
        self.0 *= &rhs.0;
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, r| acc + r)
    }
}

impl Sum<Rat> for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, r| acc + r)
    }
}

/// Least common multiple of the denominators of a family of rationals.
pub fn lcm_denominators<'a>(items: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    let mut l = BigInt::one();
    for r in items {
        l = l.lcm(r.denom());
    }
    l
}

/// Rational upper bound on the square root of a non-negative rational:
/// `isqrt(p q) / q` when `p q` is a perfect square, else one more, for
/// `x = p/q`.
pub fn sqrt_upper(x: &Rat) -> Rat {
    if !x.is_positive() {
        return Rat::zero();
    }
    let p = x.numer().magnitude().clone();
    let q = x.denom().magnitude().clone();
    let pq = &p * &q;
    let mut root = pq.sqrt();
    if &root * &root != pq {
        root += 1u32;
    }
    Rat::from_big(BigInt::from(root), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(r("3/6").to_string(), "1/2");
        assert_eq!(r("-4/2").to_string(), "-2");
        assert_eq!(r("0.35"), r("7/20"));
        assert_eq!(r("-0.1"), r("-1/10"));
        assert_eq!(r("5").to_string(), "5");
        assert!("1/0".parse::<Rat>().is_err());
        assert!("a".parse::<Rat>().is_err());
    }

    #[test]
    fn arithmetic_basics() {
        let a = r("1/3");
        let b = r("1/6");
        assert_eq!(&a + &b, r("1/2"));
        assert_eq!(&a - &b, r("1/6"));
        assert_eq!(&a * &b, r("1/18"));
        assert_eq!(&a / &b, r("2"));
        assert_eq!(-&a, r("-1/3"));
        assert_eq!(r("7/3").floor_int(), 2.into());
        assert_eq!(r("-7/3").floor_int(), (-3).into());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(r("1/2").to_decimal(12), "0.5");
        assert_eq!(r("-1/3").to_decimal(6), "-0.333334");
        assert_eq!(r("2").to_decimal(12), "2");
    }

    #[test]
    fn serde_round_trip() {
        let a = r("-22/7");
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "\"-22/7\"");
        let back: Rat = serde_json::from_str(&s).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn lcm_of_denominators() {
        let xs = [r("1/4"), r("5/6"), r("3")];
        assert_eq!(lcm_denominators(xs.iter()), 12.into());
    }
}
