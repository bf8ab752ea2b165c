//! Scalar arithmetic over the field Q(sqrt 2).
//!
//! Every quantity that shows up in the Bell functionals and the gamma
//! construction lives in Q(sqrt 2): entries are dyadic rationals times an
//! optional factor of sqrt 2, local bounds are sqrt 2 itself, and so on.
//! Representing values as `u + v*sqrt2` with big rationals `u`, `v` keeps
//! identities exact; the `Float` variant is for quantities that genuinely
//! leave the field (modified chained functionals, quantum correlations,
//! Bernstein tails).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// An element `u + v * sqrt(2)` of Q(sqrt 2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QRoot2 {
    u: BigRational,
    v: BigRational,
}

impl QRoot2 {
    pub fn new(u: BigRational, v: BigRational) -> Self {
        QRoot2 { u, v }
    }

    pub fn zero() -> Self {
        QRoot2 { u: BigRational::zero(), v: BigRational::zero() }
    }

    pub fn one() -> Self {
        QRoot2 { u: BigRational::one(), v: BigRational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        QRoot2 { u: BigRational::from_integer(BigInt::from(n)), v: BigRational::zero() }
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        QRoot2 { u: BigRational::new(BigInt::from(num), BigInt::from(den)), v: BigRational::zero() }
    }

    /// `sqrt(2)^k` for any integer `k`, including negative.
    pub fn sqrt2_pow(k: i64) -> Self {
        let half = k.div_euclid(2);
        let odd = k.rem_euclid(2) == 1;
        let mag = if half >= 0 {
            BigRational::from_integer(BigInt::one() << (half as usize))
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << ((-half) as usize))
        };
        if odd {
            QRoot2 { u: BigRational::zero(), v: mag }
        } else {
            QRoot2 { u: mag, v: BigRational::zero() }
        }
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.u
    }

    pub fn sqrt2_part(&self) -> &BigRational {
        &self.v
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.v.is_zero()
    }

    /// Exact sign. For mixed-sign components, compares `u^2` against `2 v^2`;
    /// this is decisive because `sqrt 2` is irrational.
    pub fn signum(&self) -> Ordering {
        let su = sign_of(&self.u);
        let sv = sign_of(&self.v);
        match (su, sv) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
            (Ordering::Less, Ordering::Less) => Ordering::Less,
            (lead, _) => {
                let d = &self.u * &self.u - BigRational::from_integer(BigInt::from(2)) * &self.v * &self.v;
                match lead {
                    Ordering::Greater => sign_of(&d),
                    _ => sign_of(&d).reverse(),
                }
            }
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() == Ordering::Less {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.u) + rational_to_f64(&self.v) * std::f64::consts::SQRT_2
    }

    /// Multiplicative inverse via the conjugate: `1/(u+v r) = (u-v r)/(u^2-2v^2)`.
    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.u * &self.u - BigRational::from_integer(BigInt::from(2)) * &self.v * &self.v;
        debug_assert!(!norm.is_zero());
        Some(QRoot2 { u: &self.u / &norm, v: -(&self.v / &norm) })
    }

    /// If the value equals `sqrt(2)^k` for some integer `k`, returns `k`.
    pub fn as_sqrt2_pow(&self) -> Option<i64> {
        let (part, odd) = if self.v.is_zero() {
            (&self.u, false)
        } else if self.u.is_zero() {
            (&self.v, true)
        } else {
            return None;
        };
        if sign_of(part) != Ordering::Greater {
            return None;
        }
        let t = pow2_exponent(part)?;
        Some(if odd { 2 * t + 1 } else { 2 * t })
    }
}

fn sign_of(q: &BigRational) -> Ordering {
    if q.is_zero() {
        Ordering::Equal
    } else if q.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// `q == 2^t` exactly, for integer `t` of either sign.
fn pow2_exponent(q: &BigRational) -> Option<i64> {
    let num = q.numer();
    let den = q.denom();
    if num.sign() != Sign::Plus {
        return None;
    }
    let num_pow = big_pow2_log(num)?;
    let den_pow = big_pow2_log(den)?;
    Some(num_pow - den_pow)
}

fn big_pow2_log(n: &BigInt) -> Option<i64> {
    let (sign, mag) = n.clone().into_parts();
    if sign != Sign::Plus || mag.count_ones() != 1 {
        return None;
    }
    Some(mag.trailing_zeros().unwrap() as i64)
}

fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

impl Add for QRoot2 {
    type Output = QRoot2;
    fn add(self, rhs: QRoot2) -> QRoot2 {
        QRoot2 { u: self.u + rhs.u, v: self.v + rhs.v }
    }
}

impl Sub for QRoot2 {
    type Output = QRoot2;
    fn sub(self, rhs: QRoot2) -> QRoot2 {
        QRoot2 { u: self.u - rhs.u, v: self.v - rhs.v }
    }
}

impl Mul for QRoot2 {
    type Output = QRoot2;
    fn mul(self, rhs: QRoot2) -> QRoot2 {
        let two = BigRational::from_integer(BigInt::from(2));
        QRoot2 {
            u: &self.u * &rhs.u + two * &self.v * &rhs.v,
            v: &self.u * &rhs.v + &self.v * &rhs.u,
        }
    }
}

impl Neg for QRoot2 {
    type Output = QRoot2;
    fn neg(self) -> QRoot2 {
        QRoot2 { u: -self.u, v: -self.v }
    }
}

impl fmt::Display for QRoot2 {
    /// Canonical form: `u`, `v*sqrt2`, or `u+v*sqrt2` / `u-|v|*sqrt2`,
    /// with each rational in lowest terms.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.v.is_zero() {
            return write!(f, "{}", self.u);
        }
        let sqrt_part = |f: &mut fmt::Formatter<'_>, v: &BigRational| -> fmt::Result {
            if v.is_one() {
                write!(f, "sqrt2")
            } else {
                write!(f, "{}*sqrt2", v)
            }
        };
        if self.u.is_zero() {
            if self.v.is_negative() {
                write!(f, "-")?;
            }
            return sqrt_part(f, &self.v.abs());
        }
        write!(f, "{}", self.u)?;
        write!(f, "{}", if self.v.is_negative() { "-" } else { "+" })?;
        sqrt_part(f, &self.v.abs())
    }
}

impl FromStr for QRoot2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::parse("empty scalar"));
        }
        // Split an optional sqrt2 term off the tail. The split point is a
        // '+' or '-' that is not the leading sign character.
        let bytes = s.as_bytes();
        let mut split = None;
        for i in 1..bytes.len() {
            if bytes[i] == b'+' || bytes[i] == b'-' {
                if bytes[i - 1] == b'/' || bytes[i - 1] == b'*' {
                    continue;
                }
                split = Some(i);
                break;
            }
        }
        match split {
            Some(i) => {
                let u = parse_rational(&s[..i])?;
                let v = parse_sqrt2_term(&s[i..])?
                    .ok_or_else(|| Error::parse(format!("expected sqrt2 term in `{s}`")))?;
                Ok(QRoot2 { u, v })
            }
            None => {
                if let Some(v) = parse_sqrt2_term(s)? {
                    Ok(QRoot2 { u: BigRational::zero(), v })
                } else {
                    Ok(QRoot2 { u: parse_rational(s)?, v: BigRational::zero() })
                }
            }
        }
    }
}

fn parse_rational(s: &str) -> Result<BigRational, Error> {
    let s = s.trim();
    match s.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.trim().parse().map_err(|_| Error::parse(format!("bad numerator in `{s}`")))?;
            let den: BigInt = den.trim().parse().map_err(|_| Error::parse(format!("bad denominator in `{s}`")))?;
            if den.is_zero() {
                return Err(Error::parse(format!("zero denominator in `{s}`")));
            }
            Ok(BigRational::new(num, den))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| Error::parse(format!("bad integer `{s}`")))?;
            Ok(BigRational::from_integer(n))
        }
    }
}

/// Parses `[coef*]sqrt2` with optional leading sign; `Ok(None)` when the
/// string contains no sqrt2 token at all.
fn parse_sqrt2_term(s: &str) -> Result<Option<BigRational>, Error> {
    let s = s.trim();
    if !s.contains("sqrt2") {
        return Ok(None);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest.trim()),
        None => (1, s.strip_prefix('+').unwrap_or(s).trim()),
    };
    let coef = match body.strip_suffix("sqrt2") {
        Some("") => BigRational::one(),
        Some(head) => {
            let head = head.trim();
            let head = head.strip_suffix('*').ok_or_else(|| Error::parse(format!("malformed sqrt2 term `{s}`")))?;
            parse_rational(head)?
        }
        None => return Err(Error::parse(format!("malformed sqrt2 term `{s}`"))),
    };
    Ok(Some(if sign < 0 { -coef } else { coef }))
}

/// Numeric mode of a computation or a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

/// A number that is either exact in Q(sqrt 2) or an f64.
///
/// Arithmetic between two exact values stays exact; anything touching a
/// float collapses to float. Comparisons are exact in the exact/exact case.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(QRoot2),
    Float(f64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(QRoot2::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(QRoot2::one())
    }

    pub fn int(n: i64) -> Self {
        Scalar::Exact(QRoot2::from_int(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(QRoot2::ratio(num, den))
    }

    pub fn sqrt2_pow(k: i64) -> Self {
        Scalar::Exact(QRoot2::sqrt2_pow(k))
    }

    pub fn from_rational(q: BigRational) -> Self {
        Scalar::Exact(QRoot2::new(q, BigRational::zero()))
    }

    pub fn float(x: f64) -> Self {
        Scalar::Float(x)
    }

    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Exact(_) => Mode::Exact,
            Scalar::Float(_) => Mode::Float,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => q.to_f64(),
            Scalar::Float(x) => *x,
        }
    }

    /// Degrade to the float representation.
    pub fn to_float(&self) -> Scalar {
        Scalar::Float(self.to_f64())
    }

    pub fn as_exact(&self) -> Option<&QRoot2> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Float(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_zero(),
            Scalar::Float(x) => *x == 0.0,
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q.abs()),
            Scalar::Float(x) => Scalar::Float(x.abs()),
        }
    }

    pub fn signum(&self) -> Ordering {
        match self {
            Scalar::Exact(q) => q.signum(),
            Scalar::Float(x) => x.partial_cmp(&0.0).unwrap_or(Ordering::Equal),
        }
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Option<Scalar> {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                b.recip().map(|r| Scalar::Exact(a.clone() * r))
            }
            _ => {
                let d = rhs.to_f64();
                if d == 0.0 {
                    None
                } else {
                    Some(Scalar::Float(self.to_f64() / d))
                }
            }
        }
    }

    pub fn max_of(a: Scalar, b: Scalar) -> Scalar {
        if b > a {
            b
        } else {
            a
        }
    }

    /// Absolute difference `|self - other|` as f64; drives tolerance checks.
    pub fn abs_diff_f64(&self, other: &Scalar) -> f64 {
        (self.clone() - other.clone()).abs().to_f64()
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            (a, b) => Scalar::Float(a.to_f64() + b.to_f64()),
        }
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            (a, b) => Scalar::Float(a.to_f64() - b.to_f64()),
        }
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            (a, b) => Scalar::Float(a.to_f64() * b.to_f64()),
        }
    }
}

impl Div for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        self.checked_div(&rhs).expect("scalar division by zero")
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(-q),
            Scalar::Float(x) => Scalar::Float(-x),
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            (a, b) => a.to_f64() == b.to_f64(),
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some((a.clone() - b.clone()).signum()),
            (a, b) => a.to_f64().partial_cmp(&b.to_f64()),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) => write!(f, "{q}"),
            Scalar::Float(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Scalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(Scalar::Exact(s.parse()?))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            Scalar::Exact(q) => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("exact", &q.to_string())?;
                map.serialize_entry("approx", &q.to_f64())?;
                map.end()
            }
            Scalar::Float(x) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("approx", x)?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
            Obj { exact: Option<String>, approx: Option<f64> },
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(x) => Ok(Scalar::Float(x)),
            Repr::Str(s) => s.parse().map_err(D::Error::custom),
            Repr::Obj { exact: Some(s), .. } => s.parse().map_err(D::Error::custom),
            Repr::Obj { exact: None, approx: Some(x) } => Ok(Scalar::Float(x)),
            Repr::Obj { exact: None, approx: None } => Err(D::Error::custom("scalar object needs `exact` or `approx`")),
        }
    }
}
