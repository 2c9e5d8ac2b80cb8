//! Exact numbers of the form `c * sqrt(r)` with rational `c` and `r > 0`.
//!
//! Correlations, skewnesses and normalized tree cumulants are products of
//! rationals and square roots of rationals, so this closed set under
//! multiplication is enough to compare them exactly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{exact_sqrt, Rational, Scalar};

#[derive(Clone, Debug)]
pub struct Radical {
    coef: Rational,
    radicand: Rational,
}

impl Radical {
    pub fn from_rational(r: Rational) -> Self {
        Radical {
            coef: r,
            radicand: Rational::one(),
        }
        .normalized()
    }

    /// `sqrt(r)`; fails for negative `r`.
    pub fn sqrt(r: &Rational) -> Result<Self> {
        if r.is_negative() {
            return Err(Error::InvalidArgument(format!("square root of negative {r}")));
        }
        if r.is_zero() {
            return Ok(Self::from_rational(Rational::zero()));
        }
        Ok(Radical {
            coef: Rational::one(),
            radicand: r.clone(),
        }
        .normalized())
    }

    fn normalized(mut self) -> Self {
        if self.coef.is_zero() {
            self.radicand = Rational::one();
        } else if let Some(s) = exact_sqrt(&self.radicand) {
            self.coef = &self.coef * s;
            self.radicand = Rational::one();
        }
        self
    }

    pub fn coefficient(&self) -> &Rational {
        &self.coef
    }

    pub fn radicand(&self) -> &Rational {
        &self.radicand
    }

    pub fn is_zero(&self) -> bool {
        self.coef.is_zero()
    }

    pub fn signum(&self) -> Ordering {
        self.coef.cmp(&Rational::zero())
    }

    /// The square, always rational.
    pub fn square(&self) -> Rational {
        &self.coef * &self.coef * &self.radicand
    }

    /// The value as a rational when the radicand is a perfect square.
    pub fn as_rational(&self) -> Option<Rational> {
        exact_sqrt(&self.radicand).map(|s| &self.coef * s)
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Degenerate("reciprocal of zero".into()));
        }
        // 1/(c sqrt r) = sqrt(r) / (c r)
        Ok(Radical {
            coef: Rational::one() / (&self.coef * &self.radicand),
            radicand: self.radicand.clone(),
        }
        .normalized())
    }

    pub fn pow(&self, exp: usize) -> Self {
        let mut acc = Radical::from_rational(Rational::one());
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    pub fn to_f64(&self) -> f64 {
        self.coef.to_f64() * self.radicand.to_f64().sqrt()
    }
}

impl PartialEq for Radical {
    fn eq(&self, other: &Self) -> bool {
        self.signum() == other.signum() && self.square() == other.square()
    }
}

impl<'a> Mul<&'a Radical> for &'a Radical {
    type Output = Radical;
    fn mul(self, rhs: &'a Radical) -> Radical {
        Radical {
            coef: &self.coef * &rhs.coef,
            radicand: &self.radicand * &rhs.radicand,
        }
        .normalized()
    }
}

impl Mul for Radical {
    type Output = Radical;
    fn mul(self, rhs: Radical) -> Radical {
        &self * &rhs
    }
}

impl Div for Radical {
    type Output = Result<Radical>;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Radical) -> Result<Radical> {
        Ok(&self * &rhs.recip()?)
    }
}

impl fmt::Display for Radical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand.is_one() {
            write!(f, "{}", crate::scalar::format_rational(&self.coef))
        } else {
            write!(
                f,
                "{}*sqrt({})",
                crate::scalar::format_rational(&self.coef),
                crate::scalar::format_rational(&self.radicand)
            )
        }
    }
}
