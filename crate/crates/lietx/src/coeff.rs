//! Series coefficients: complex doubles, or Gaussian rationals for exact runs.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// Coefficients with modulus below this are dropped from sparse storage in
/// float mode.
pub const PRUNE_EPS: f64 = 1e-14;

/// Arithmetic mode of a computation. Exact mode keeps every coefficient as a
/// pair of arbitrary-precision rationals and never rounds.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Exact,
}

/// Complex number with rational real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    fn zero() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }
}

/// A single series coefficient in either arithmetic mode.
///
/// Binary operations require both operands in the same mode; mixing modes is
/// a programming error and panics.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeff {
    F(Complex64),
    Q(GaussRat),
}

impl Coeff {
    pub fn mode(&self) -> Mode {
        match self {
            Coeff::F(_) => Mode::Float,
            Coeff::Q(_) => Mode::Exact,
        }
    }

    pub fn zero(mode: Mode) -> Self {
        match mode {
            Mode::Float => Coeff::F(Complex64::new(0.0, 0.0)),
            Mode::Exact => Coeff::Q(GaussRat::zero()),
        }
    }

    pub fn one(mode: Mode) -> Self {
        Coeff::from_int(1, mode)
    }

    pub fn from_int(n: i64, mode: Mode) -> Self {
        match mode {
            Mode::Float => Coeff::F(Complex64::new(n as f64, 0.0)),
            Mode::Exact => Coeff::Q(GaussRat {
                re: BigRational::from_integer(BigInt::from(n)),
                im: BigRational::zero(),
            }),
        }
    }

    pub fn from_f64(re: f64, im: f64) -> Self {
        Coeff::F(Complex64::new(re, im))
    }

    /// Exact coefficient `re_n/re_d + (im_n/im_d) i`.
    pub fn from_ratio(re_n: i64, re_d: i64, im_n: i64, im_d: i64) -> Self {
        Coeff::Q(GaussRat {
            re: BigRational::new(BigInt::from(re_n), BigInt::from(re_d)),
            im: BigRational::new(BigInt::from(im_n), BigInt::from(im_d)),
        })
    }

    pub fn from_big(re: BigRational, im: BigRational) -> Self {
        Coeff::Q(GaussRat { re, im })
    }

    pub fn to_c64(&self) -> Complex64 {
        match self {
            Coeff::F(c) => *c,
            Coeff::Q(q) => Complex64::new(
                q.re.to_f64().unwrap_or(f64::NAN),
                q.im.to_f64().unwrap_or(f64::NAN),
            ),
        }
    }

    pub fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }

    pub fn is_exact_zero(&self) -> bool {
        match self {
            Coeff::F(c) => c.re == 0.0 && c.im == 0.0,
            Coeff::Q(q) => q.re.is_zero() && q.im.is_zero(),
        }
    }

    /// Storage pruning test: exact zero in exact mode, |c| < 1e-14 in float.
    pub fn is_negligible(&self) -> bool {
        match self {
            Coeff::F(c) => c.norm() < PRUNE_EPS,
            Coeff::Q(q) => q.re.is_zero() && q.im.is_zero(),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Coeff::F(c) => Coeff::F(-c),
            Coeff::Q(q) => Coeff::Q(GaussRat {
                re: -q.re.clone(),
                im: -q.im.clone(),
            }),
        }
    }

    /// Real part, as a coefficient of the same mode.
    pub fn real_part(&self) -> Self {
        match self {
            Coeff::F(c) => Coeff::F(Complex64::new(c.re, 0.0)),
            Coeff::Q(q) => Coeff::Q(GaussRat {
                re: q.re.clone(),
                im: BigRational::zero(),
            }),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            Coeff::F(c) => Coeff::F(c.conj()),
            Coeff::Q(q) => Coeff::Q(GaussRat {
                re: q.re.clone(),
                im: -q.im.clone(),
            }),
        }
    }

    /// Multiplication by the imaginary unit.
    pub fn mul_i(&self) -> Self {
        match self {
            Coeff::F(c) => Coeff::F(Complex64::new(-c.im, c.re)),
            Coeff::Q(q) => Coeff::Q(GaussRat {
                re: -q.im.clone(),
                im: q.re.clone(),
            }),
        }
    }

    pub fn add(&self, other: &Coeff) -> Self {
        match (self, other) {
            (Coeff::F(a), Coeff::F(b)) => Coeff::F(a + b),
            (Coeff::Q(a), Coeff::Q(b)) => Coeff::Q(GaussRat {
                re: &a.re + &b.re,
                im: &a.im + &b.im,
            }),
            _ => panic!("mixed-mode coefficient arithmetic"),
        }
    }

    pub fn sub(&self, other: &Coeff) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Coeff) -> Self {
        match (self, other) {
            (Coeff::F(a), Coeff::F(b)) => Coeff::F(a * b),
            (Coeff::Q(a), Coeff::Q(b)) => Coeff::Q(GaussRat {
                re: &a.re * &b.re - &a.im * &b.im,
                im: &a.re * &b.im + &a.im * &b.re,
            }),
            _ => panic!("mixed-mode coefficient arithmetic"),
        }
    }

    pub fn div(&self, other: &Coeff) -> Self {
        match (self, other) {
            (Coeff::F(a), Coeff::F(b)) => Coeff::F(a / b),
            (Coeff::Q(a), Coeff::Q(b)) => {
                let den = &b.re * &b.re + &b.im * &b.im;
                assert!(!den.is_zero(), "exact division by zero");
                Coeff::Q(GaussRat {
                    re: (&a.re * &b.re + &a.im * &b.im) / &den,
                    im: (&a.im * &b.re - &a.re * &b.im) / &den,
                })
            }
            _ => panic!("mixed-mode coefficient arithmetic"),
        }
    }

    /// Scale by an exact rational weight. The weight stays exact in exact
    /// mode and is converted once in float mode.
    pub fn scale_br(&self, w: &BigRational) -> Self {
        match self {
            Coeff::F(c) => Coeff::F(c * w.to_f64().expect("rational weight representable")),
            Coeff::Q(q) => Coeff::Q(GaussRat {
                re: &q.re * w,
                im: &q.im * w,
            }),
        }
    }

    /// Integer power, exact in exact mode. Negative exponents invert.
    pub fn powi(&self, n: i64) -> Self {
        let mode = self.mode();
        if n == 0 {
            return Coeff::one(mode);
        }
        let base = if n < 0 {
            Coeff::one(mode).div(self)
        } else {
            self.clone()
        };
        let mut acc = Coeff::one(mode);
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::F(c) => write!(f, "{}{:+}i", c.re, c.im),
            Coeff::Q(q) => write!(f, "{}{:+}i", q.re, q.im),
        }
    }
}

/// Exact rational weight `n/d` used by operator recursions.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Serialized form: floats as JSON numbers, exact parts as "p/q" strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PartRepr {
    Num(f64),
    Str(String),
}

#[derive(Serialize, Deserialize)]
struct CoeffRepr {
    re: PartRepr,
    im: PartRepr,
}

impl Serialize for Coeff {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            Coeff::F(c) => CoeffRepr {
                re: PartRepr::Num(c.re),
                im: PartRepr::Num(c.im),
            },
            Coeff::Q(q) => CoeffRepr {
                re: PartRepr::Str(q.re.to_string()),
                im: PartRepr::Str(q.im.to_string()),
            },
        };
        repr.serialize(s)
    }
}

fn part_to_rational<E: DeError>(p: &PartRepr) -> Result<BigRational, E> {
    match p {
        PartRepr::Str(s) => {
            BigRational::from_str(s).map_err(|_| E::custom(format!("bad rational `{s}`")))
        }
        PartRepr::Num(x) => {
            if x.fract() == 0.0 && x.abs() < 9e15 {
                Ok(BigRational::from_integer(BigInt::from(*x as i64)))
            } else {
                Err(E::custom("exact coefficients must be integers or \"p/q\" strings"))
            }
        }
    }
}

impl Coeff {
    /// Deserialize with a target mode; integers are accepted in both modes.
    pub fn deserialize_in_mode<'de, D: Deserializer<'de>>(
        d: D,
        mode: Mode,
    ) -> Result<Self, D::Error> {
        let repr = CoeffRepr::deserialize(d)?;
        match mode {
            Mode::Float => {
                let get = |p: &PartRepr| -> Result<f64, D::Error> {
                    match p {
                        PartRepr::Num(x) => Ok(*x),
                        PartRepr::Str(s) => BigRational::from_str(s)
                            .ok()
                            .and_then(|r| r.to_f64())
                            .ok_or_else(|| D::Error::custom(format!("bad number `{s}`"))),
                    }
                };
                Ok(Coeff::from_f64(get(&repr.re)?, get(&repr.im)?))
            }
            Mode::Exact => Ok(Coeff::Q(GaussRat {
                re: part_to_rational(&repr.re)?,
                im: part_to_rational(&repr.im)?,
            })),
        }
    }
}

impl<'de> Deserialize<'de> for Coeff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CoeffRepr::deserialize(d)?;
        match (&repr.re, &repr.im) {
            (PartRepr::Num(re), PartRepr::Num(im)) => Ok(Coeff::from_f64(*re, *im)),
            _ => Ok(Coeff::Q(GaussRat {
                re: part_to_rational(&repr.re)?,
                im: part_to_rational(&repr.im)?,
            })),
        }
    }
}
