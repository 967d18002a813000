use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use super::field::{format_rational, AlgebraicNumber};
use super::poly::rat_to_f64;

/// Arithmetic used by measures and certificates: exact (`AlgebraicNumber`) or floating (`f64`).
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn from_rational(q: &BigRational) -> Self;

    fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_rational(&BigRational::new(n.into(), d.into()))
    }

    fn to_f64(&self) -> f64;

    fn cmp_value(&self, other: &Self) -> Ordering;

    fn is_positive(&self) -> bool {
        self.cmp_value(&Self::zero()) == Ordering::Greater
    }

    fn lt(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Less
    }

    fn le(&self, other: &Self) -> bool {
        self.cmp_value(other) != Ordering::Greater
    }

    /// Equality up to rounding in floating mode; exact equality otherwise.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;

    /// Serialized form: a string `"n/d"` for rationals, a coefficient array for field elements,
    /// a number for floats.
    fn to_json(&self) -> Value;

    fn sum<'a, I: IntoIterator<Item = &'a Self>>(items: I) -> Self
    where
        Self: 'a,
    {
        items.into_iter().fold(Self::zero(), |acc, x| acc + x.clone())
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(q: &BigRational) -> Self {
        rat_to_f64(q)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn cmp_value(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol * self.abs().max(other.abs()).max(1.0)
    }

    fn to_json(&self) -> Value {
        json!(self)
    }
}

impl Scalar for AlgebraicNumber {
    const EXACT: bool = true;

    fn from_rational(q: &BigRational) -> Self {
        AlgebraicNumber::rational(q.clone())
    }

    fn to_f64(&self) -> f64 {
        AlgebraicNumber::to_f64(self)
    }

    fn cmp_value(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn approx_eq(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn to_json(&self) -> Value {
        match self.as_rational() {
            Some(q) => json!(format_rational(q)),
            None => {
                let n = self.field().map_or(1, |f| f.degree());
                Value::Array(self.coeffs(n).iter().map(|q| json!(format_rational(q))).collect())
            }
        }
    }
}
