use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::poly::{rat_to_f64, Poly};
use crate::error::{Error, Result};

const MAX_REFINEMENTS: usize = 256;

/// `Q[x]/(p)` for a monic irreducible `p` of degree at least 2, with a designated real root
/// tracked by a rational isolating interval.
#[derive(Debug)]
pub struct NumberField {
    min_poly: Poly,
    interval: RwLock<(BigRational, BigRational)>,
    approx: f64,
}

impl NumberField {
    /// Field generated by the real root of `min_poly` closest to `near`.
    pub fn new(min_poly: &Poly, near: f64) -> Result<Arc<NumberField>> {
        let p = min_poly.monic();
        if p.deg() < 2 {
            return Err(Error::InvalidParameter("number field needs degree at least 2".into()));
        }
        let roots = p.isolate_real_roots();
        let (lo, hi) = roots
            .into_iter()
            .min_by(|a, b| {
                let da = (0.5 * (rat_to_f64(&a.0) + rat_to_f64(&a.1)) - near).abs();
                let db = (0.5 * (rat_to_f64(&b.0) + rat_to_f64(&b.1)) - near).abs();
                da.total_cmp(&db)
            })
            .ok_or_else(|| Error::InvalidParameter(format!("{p} has no real root")))?;
        if lo == hi {
            return Err(Error::Reducible(format!("{p} has the rational root {lo}")));
        }
        let field = NumberField { min_poly: p, interval: RwLock::new((lo, hi)), approx: 0.0 };
        field.refine_until(|lo, hi| rat_to_f64(&(hi - lo)) < 1e-40 * (1.0 + rat_to_f64(lo).abs()));
        let approx = {
            let g = field.interval.read().expect("interval lock");
            rat_to_f64(&((&g.0 + &g.1) / BigRational::from_integer(2.into())))
        };
        Ok(Arc::new(NumberField { approx, ..field }))
    }

    pub fn degree(&self) -> usize {
        self.min_poly.deg()
    }

    pub fn min_poly(&self) -> &Poly {
        &self.min_poly
    }

    pub fn root_approx(&self) -> f64 {
        self.approx
    }

    pub fn isolating_interval(&self) -> (BigRational, BigRational) {
        self.interval.read().expect("interval lock").clone()
    }

    /// Roots of the minimal polynomial, the designated one first.
    pub fn conjugates(&self) -> Vec<Complex64> {
        let mut z = self.min_poly.complex_roots();
        let i = z
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - self.approx).norm().total_cmp(&(b.1 - self.approx).norm()))
            .map(|(i, _)| i)
            .expect("at least one root");
        z.remove(i);
        z.insert(0, Complex64::new(self.approx, 0.0));
        z
    }

    fn bisect_once(&self) {
        let mut g = self.interval.write().expect("interval lock");
        let mid = (&g.0 + &g.1) / BigRational::from_integer(2.into());
        let vm = self.min_poly.eval(&mid);
        if vm.is_zero() {
            g.0 = mid.clone();
            g.1 = mid;
            return;
        }
        let vlo = self.min_poly.eval(&g.0);
        if vlo.is_positive() == vm.is_positive() {
            g.0 = mid;
        } else {
            g.1 = mid;
        }
    }

    fn refine_until(&self, done: impl Fn(&BigRational, &BigRational) -> bool) {
        loop {
            {
                let g = self.interval.read().expect("interval lock");
                if done(&g.0, &g.1) {
                    return;
                }
            }
            self.bisect_once();
        }
    }

    pub fn same(a: &Arc<NumberField>, b: &Arc<NumberField>) -> bool {
        Arc::ptr_eq(a, b) || (a.min_poly == b.min_poly && a.approx == b.approx)
    }

    pub fn generator(self: &Arc<Self>) -> AlgebraicNumber {
        AlgebraicNumber::from_coeffs(self, vec![BigRational::zero(), BigRational::one()])
    }

    pub fn element(self: &Arc<Self>, coeffs: Vec<BigRational>) -> AlgebraicNumber {
        AlgebraicNumber::from_coeffs(self, coeffs)
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Rational(BigRational),
    Field(Arc<NumberField>, Vec<BigRational>),
}

/// Exact element of `Q` or of a real number field `Q(β)`.
///
/// Field elements are stored as polynomials in `β` of degree below the field degree; an element
/// whose representation is constant collapses to a plain rational, so `0` and `1` need no field.
#[derive(Clone, Debug)]
pub struct AlgebraicNumber(Repr);

impl AlgebraicNumber {
    pub fn rational(q: BigRational) -> Self {
        AlgebraicNumber(Repr::Rational(q))
    }

    pub fn from_int(n: i64) -> Self {
        Self::rational(BigRational::from_integer(n.into()))
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        Self::rational(BigRational::new(n.into(), d.into()))
    }

    pub fn from_coeffs(field: &Arc<NumberField>, coeffs: Vec<BigRational>) -> Self {
        let mut c = if coeffs.len() > field.degree() {
            Poly::new(coeffs).rem(&field.min_poly).coeffs().to_vec()
        } else {
            coeffs
        };
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        match c.len() {
            0 => Self::rational(BigRational::zero()),
            1 => Self::rational(c.pop().expect("one coefficient")),
            _ => AlgebraicNumber(Repr::Field(field.clone(), c)),
        }
    }

    pub fn field(&self) -> Option<&Arc<NumberField>> {
        match &self.0 {
            Repr::Rational(_) => None,
            Repr::Field(f, _) => Some(f),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match &self.0 {
            Repr::Rational(q) => Some(q),
            Repr::Field(..) => None,
        }
    }

    /// Coefficients in the power basis `1, β, β², ...`, padded to `len`.
    pub fn coeffs(&self, len: usize) -> Vec<BigRational> {
        let mut c = match &self.0 {
            Repr::Rational(q) => vec![q.clone()],
            Repr::Field(_, c) => c.clone(),
        };
        c.resize(len.max(c.len()), BigRational::zero());
        c
    }

    fn poly(&self) -> Poly {
        match &self.0 {
            Repr::Rational(q) => Poly::constant(q.clone()),
            Repr::Field(_, c) => Poly::new(c.clone()),
        }
    }

    fn merged_field(&self, other: &Self) -> Option<Arc<NumberField>> {
        match (self.field(), other.field()) {
            (Some(a), Some(b)) => {
                assert!(NumberField::same(a, b), "arithmetic across different number fields");
                Some(a.clone())
            }
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        }
    }

    pub fn is_zero_exact(&self) -> bool {
        matches!(&self.0, Repr::Rational(q) if q.is_zero())
    }

    pub fn inverse(&self) -> Self {
        match &self.0 {
            Repr::Rational(q) => {
                assert!(!q.is_zero(), "inverse of zero");
                Self::rational(q.recip())
            }
            Repr::Field(f, c) => {
                let (g, s, _) = Poly::ext_gcd(&Poly::new(c.clone()), &f.min_poly);
                assert_eq!(g.deg(), 0, "minimal polynomial is not irreducible");
                Self::from_coeffs(f, s.coeffs().to_vec())
            }
        }
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::from_int(1);
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &b;
            }
            b = &b * &b;
            e >>= 1;
        }
        acc
    }

    /// Double approximation; when the power-basis evaluation cancels badly (large coefficients
    /// of alternating sign) the enclosure is refined until both ends round to the same double,
    /// so the result does not depend on earlier refinements.
    pub fn to_f64(&self) -> f64 {
        let (f, c) = match &self.0 {
            Repr::Rational(q) => return rat_to_f64(q),
            Repr::Field(f, c) => (f, c),
        };
        let b = f.approx;
        let value = c.iter().rev().fold(0.0, |acc, q| acc * b + rat_to_f64(q));
        let scale = c.iter().enumerate().map(|(i, q)| rat_to_f64(q).abs() * b.abs().powi(i as i32)).sum::<f64>();
        if value.abs() >= 8.0 * scale.max(f64::MIN_POSITIVE) * 1e-3 || !value.is_finite() {
            return value;
        }
        let p = Poly::new(c.clone());
        for _ in 0..16 * MAX_REFINEMENTS {
            let (lo, hi) = f.isolating_interval();
            if lo == hi {
                return rat_to_f64(&p.eval(&lo));
            }
            let (a, bb) = p.eval_interval(&lo, &hi);
            let (af, bf) = (rat_to_f64(&a), rat_to_f64(&bb));
            if af == bf {
                return af;
            }
            f.bisect_once();
        }
        value
    }

    /// Value of the same polynomial at another root `z` of the minimal polynomial.
    pub fn eval_at(&self, z: Complex64) -> Complex64 {
        match &self.0 {
            Repr::Rational(q) => Complex64::new(rat_to_f64(q), 0.0),
            Repr::Field(_, c) => c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, q| acc * z + rat_to_f64(q)),
        }
    }

    /// Exact sign, resolved by a floating estimate with error bound and, failing that, by
    /// refining the isolating interval of the generator.
    pub fn try_signum(&self) -> Result<Ordering> {
        let (f, c) = match &self.0 {
            Repr::Rational(q) => return Ok(q.cmp(&BigRational::zero())),
            Repr::Field(f, c) => (f, c),
        };
        let b = f.approx;
        let mut value = 0.0f64;
        let mut scale = 0.0f64;
        for (i, q) in c.iter().enumerate().rev() {
            let qf = rat_to_f64(q);
            value = value * b + qf;
            scale += qf.abs() * b.abs().powi(i as i32) * (i as f64 + 2.0);
        }
        let err = scale * 1e-14;
        if value.is_finite() && err.is_finite() && value.abs() > err {
            return Ok(if value > 0.0 { Ordering::Greater } else { Ordering::Less });
        }
        let p = Poly::new(c.clone());
        // a nonzero element is bounded below by a power of its coefficient height
        let bits: u64 = c.iter().map(|q| q.numer().bits() + q.denom().bits()).sum();
        let limit = MAX_REFINEMENTS.max(2 * f.degree() * bits as usize + 64);
        for _ in 0..limit {
            let (lo, hi) = f.isolating_interval();
            if lo == hi {
                return Ok(p.eval(&lo).cmp(&BigRational::zero()));
            }
            let (a, bb) = p.eval_interval(&lo, &hi);
            if a.is_positive() {
                return Ok(Ordering::Greater);
            }
            if bb.is_negative() {
                return Ok(Ordering::Less);
            }
            f.bisect_once();
        }
        Err(Error::SignUndetermined)
    }

    pub fn signum(&self) -> Ordering {
        self.try_signum().expect("sign of a nonzero algebraic number")
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// `⌊self⌋`, exact.
    pub fn try_floor(&self) -> Result<BigInt> {
        if let Repr::Rational(q) = &self.0 {
            return Ok(q.floor().to_integer());
        }
        let approx = self.to_f64().floor();
        let mut k = if approx.is_finite() {
            BigInt::from(approx as i64)
        } else {
            return Err(Error::SignUndetermined);
        };
        loop {
            let diff = self - &Self::rational(BigRational::from_integer(k.clone()));
            if diff.try_signum()? == Ordering::Less {
                k -= 1;
                continue;
            }
            let diff1 = &diff - &Self::from_int(1);
            if diff1.try_signum()? != Ordering::Less {
                k += 1;
                continue;
            }
            return Ok(k);
        }
    }

    pub fn floor(&self) -> BigInt {
        self.try_floor().expect("floor of an algebraic number")
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl PartialEq for AlgebraicNumber {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Rational(a), Repr::Rational(b)) => a == b,
            (Repr::Field(_, a), Repr::Field(_, b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for AlgebraicNumber {}

impl std::hash::Hash for AlgebraicNumber {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Rational(q) => q.hash(state),
            Repr::Field(_, c) => c.hash(state),
        }
    }
}

impl PartialOrd for AlgebraicNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl Ord for AlgebraicNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

impl<'a> Add<&'a AlgebraicNumber> for &'a AlgebraicNumber {
    type Output = AlgebraicNumber;
    fn add(self, o: &AlgebraicNumber) -> AlgebraicNumber {
        if let (Repr::Rational(a), Repr::Rational(b)) = (&self.0, &o.0) {
            return AlgebraicNumber::rational(a + b);
        }
        let f = self.merged_field(o).expect("field element");
        let n = f.degree();
        let (a, b) = (self.coeffs(n), o.coeffs(n));
        AlgebraicNumber::from_coeffs(&f, a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }
}

impl<'a> Sub<&'a AlgebraicNumber> for &'a AlgebraicNumber {
    type Output = AlgebraicNumber;
    fn sub(self, o: &AlgebraicNumber) -> AlgebraicNumber {
        if let (Repr::Rational(a), Repr::Rational(b)) = (&self.0, &o.0) {
            return AlgebraicNumber::rational(a - b);
        }
        let f = self.merged_field(o).expect("field element");
        let n = f.degree();
        let (a, b) = (self.coeffs(n), o.coeffs(n));
        AlgebraicNumber::from_coeffs(&f, a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

impl<'a> Mul<&'a AlgebraicNumber> for &'a AlgebraicNumber {
    type Output = AlgebraicNumber;
    fn mul(self, o: &AlgebraicNumber) -> AlgebraicNumber {
        match (&self.0, &o.0) {
            (Repr::Rational(a), Repr::Rational(b)) => AlgebraicNumber::rational(a * b),
            (Repr::Rational(q), Repr::Field(f, c)) | (Repr::Field(f, c), Repr::Rational(q)) => {
                AlgebraicNumber::from_coeffs(f, c.iter().map(|x| x * q).collect())
            }
            (Repr::Field(f, _), Repr::Field(..)) => {
                let f = f.clone();
                let _ = self.merged_field(o);
                let prod = &self.poly() * &o.poly();
                AlgebraicNumber::from_coeffs(&f, prod.rem(&f.min_poly).coeffs().to_vec())
            }
        }
    }
}

impl<'a> Div<&'a AlgebraicNumber> for &'a AlgebraicNumber {
    type Output = AlgebraicNumber;
    fn div(self, o: &AlgebraicNumber) -> AlgebraicNumber {
        if let (Repr::Rational(a), Repr::Rational(b)) = (&self.0, &o.0) {
            return AlgebraicNumber::rational(a / b);
        }
        self * &o.inverse()
    }
}

impl Neg for &AlgebraicNumber {
    type Output = AlgebraicNumber;
    fn neg(self) -> AlgebraicNumber {
        match &self.0 {
            Repr::Rational(q) => AlgebraicNumber::rational(-q),
            Repr::Field(f, c) => AlgebraicNumber(Repr::Field(f.clone(), c.iter().map(|x| -x).collect())),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for AlgebraicNumber {
            type Output = AlgebraicNumber;
            fn $m(self, o: AlgebraicNumber) -> AlgebraicNumber {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for AlgebraicNumber {
    type Output = AlgebraicNumber;
    fn neg(self) -> AlgebraicNumber {
        -&self
    }
}

impl Zero for AlgebraicNumber {
    fn zero() -> Self {
        Self::from_int(0)
    }
    fn is_zero(&self) -> bool {
        self.is_zero_exact()
    }
}

impl One for AlgebraicNumber {
    fn one() -> Self {
        Self::from_int(1)
    }
}

impl fmt::Display for AlgebraicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Rational(q) => write!(f, "{q}"),
            Repr::Field(_, c) => write!(f, "{}", Poly::new(c.clone()).to_string().replace('x', "b")),
        }
    }
}

/// Rational with small denominator, as `"n/d"` or `"n"`.
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Malformed(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            if let Ok(n) = s.parse::<BigInt>() {
                return Ok(BigRational::from_integer(n));
            }
            // plain decimals are read exactly, so "0.9" is 9/10 rather than the nearest double
            if let Some((int, frac)) = s.split_once('.') {
                if !frac.is_empty() && frac.bytes().all(|b| b.is_ascii_digit()) {
                    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
                    return Ok(BigRational::new(digits, BigInt::from(10).pow(frac.len() as u32)));
                }
            }
            let x: f64 = s.parse().map_err(|_| bad())?;
            BigRational::from_float(x).ok_or_else(bad)
        }
    }
}
