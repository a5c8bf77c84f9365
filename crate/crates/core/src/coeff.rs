//! Coefficient rings for invariant polynomials.
//!
//! Polynomials are generic over [`Coefficient`], implemented for exact complex
//! rationals ([`CRational`]) and double-precision complex numbers.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact complex rational number.
pub type CRational = Complex<BigRational>;

/// Field operations needed by polynomial arithmetic and chart substitution.
pub trait Coefficient:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// True for exact arithmetic, where equality tests are decisive.
    const EXACT: bool;

    fn conj(&self) -> Self;
    fn from_i64(x: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn imag_unit() -> Self;
    fn to_c64(&self) -> Complex64;

    /// The exact value, when the ring is exact.
    fn to_exact(&self) -> Option<CRational>;

    /// Zero test; floating coefficients compare against `tol`.
    fn is_negligible(&self, tol: f64) -> bool;
}

impl Coefficient for CRational {
    const EXACT: bool = true;

    fn conj(&self) -> Self {
        Complex::conj(self)
    }

    fn from_i64(x: i64) -> Self {
        Complex::new(BigRational::from_integer(x.into()), BigRational::zero())
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(
            BigRational::new(num.into(), den.into()),
            BigRational::zero(),
        )
    }

    fn imag_unit() -> Self {
        Complex::new(BigRational::zero(), BigRational::one())
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    fn to_exact(&self) -> Option<CRational> {
        Some(self.clone())
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }
}

impl Coefficient for Complex64 {
    const EXACT: bool = false;

    fn conj(&self) -> Self {
        Complex::conj(self)
    }

    fn from_i64(x: i64) -> Self {
        Complex64::new(x as f64, 0.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }

    fn imag_unit() -> Self {
        Complex64::i()
    }

    fn to_c64(&self) -> Complex64 {
        *self
    }

    fn to_exact(&self) -> Option<CRational> {
        None
    }

    fn is_negligible(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator/denominator beyond f64 range: scale down both
        let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000);
        let n = (x.numer() >> shift).to_f64().unwrap_or(0.0);
        let d = (x.denom() >> shift).to_f64().unwrap_or(1.0);
        n / d
    })
}

/// Parses `"3"`, `"-1/2"`, `"0.25"`, `"1/2i"`, `"-i"`, `"1/3+2i"`, `"0.1-0.5i"`.
pub fn parse_complex_rational(s: &str) -> Result<CRational> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse("empty coefficient".into()));
    }
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex::new(parse_rational(&s)?, BigRational::zero()));
    };
    let split = body
        .char_indices()
        .filter(|&(k, c)| k > 0 && (c == '+' || c == '-'))
        .map(|(k, _)| k)
        .last();
    let (re, im) = match split {
        Some(k) => (parse_rational(&body[..k])?, &body[k..]),
        None => (BigRational::zero(), body),
    };
    let im = match im {
        "" | "+" => BigRational::one(),
        "-" => -BigRational::one(),
        other => parse_rational(other)?,
    };
    Ok(Complex::new(re, im))
}

/// Parses an integer, a fraction `p/q`, or a finite decimal, exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.parse().map_err(|_| bad())?;
        let q: BigInt = q.parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let whole: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().map_err(|_| bad())?
        };
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let frac: BigInt = frac.parse().map_err(|_| bad())?;
        let mag = BigRational::new(whole * &scale + frac, scale);
        return Ok(if negative { -mag } else { mag });
    }
    Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?))
}

/// Inverse of [`parse_complex_rational`] on canonical forms.
pub fn format_complex_rational(c: &CRational) -> String {
    let im = |x: &BigRational| {
        if x.is_one() {
            "i".to_string()
        } else if (-x).is_one() {
            "-i".to_string()
        } else {
            format!("{x}i")
        }
    };
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => c.re.to_string(),
        (true, false) => im(&c.im),
        (false, false) => {
            let sign = if c.im.is_positive() { "+" } else { "" };
            format!("{}{sign}{}", c.re, im(&c.im))
        }
    }
}
