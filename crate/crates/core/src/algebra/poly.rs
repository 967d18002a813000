use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| if q.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

pub fn rat_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Univariate polynomial with rational coefficients, lowest degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<BigRational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect())
    }

    /// Coefficients listed from the highest degree down, e.g. `[1, -1, -1]` is `x^2 - x - 1`.
    pub fn from_i64_desc(coeffs: &[i64]) -> Self {
        let mut c = coeffs.to_vec();
        c.reverse();
        Poly::from_i64(&c)
    }

    pub fn from_bigint(coeffs: &[BigInt]) -> Self {
        Poly::new(coeffs.iter().map(|c| BigRational::from_integer(c.clone())).collect())
    }

    pub fn constant(c: BigRational) -> Self {
        Poly::new(vec![c])
    }

    pub fn x() -> Self {
        Poly::from_i64(&[0, 1])
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::from_i64(&[1])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn deg(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn lead(&self) -> BigRational {
        self.coeffs.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_monic(&self) -> bool {
        self.lead().is_one()
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.lead();
        Poly::new(self.coeffs.iter().map(|c| c / &l).collect())
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    pub fn integer_coeffs(&self) -> Option<Vec<BigInt>> {
        self.coeffs.iter().map(|c| c.is_integer().then(|| c.to_integer())).collect()
    }

    /// Integer coefficients, highest degree first (inverse of `from_i64_desc`).
    pub fn to_i64_desc(&self) -> Option<Vec<i64>> {
        let mut v: Vec<i64> = self
            .coeffs
            .iter()
            .map(|c| if c.is_integer() { c.to_integer().to_i64() } else { None })
            .collect::<Option<_>>()?;
        v.reverse();
        Some(v)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + rat_to_f64(c))
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + rat_to_f64(c))
    }

    /// Enclosure of the values on the interval `[lo, hi]` by interval Horner evaluation.
    pub fn eval_interval(&self, lo: &BigRational, hi: &BigRational) -> (BigRational, BigRational) {
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            let products = [&a * lo, &a * hi, &b * lo, &b * hi];
            let mut mn = products[0].clone();
            let mut mx = products[0].clone();
            for p in &products[1..] {
                if *p < mn {
                    mn = p.clone();
                }
                if *p > mx {
                    mx = p.clone();
                }
            }
            a = mn + c;
            b = mx + c;
        }
        (a, b)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.deg();
        let dl = d.lead();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![BigRational::zero(); r.len() - dd];
        for i in (0..q.len()).rev() {
            let c = &r[i + dd] / &dl;
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    r[i + j] = &r[i + j] - &c * dc;
                }
            }
            q[i] = c;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    pub fn rem(&self, d: &Poly) -> Poly {
        self.div_rem(d).1
    }

    /// Monic greatest common divisor.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `(g, s, t)` with `s*a + t*b = g`, `g` monic.
    pub fn ext_gcd(a: &Poly, b: &Poly) -> (Poly, Poly, Poly) {
        let (mut r0, mut r1) = (a.clone(), b.clone());
        let (mut s0, mut s1) = (Poly::one(), Poly::zero());
        let (mut t0, mut t1) = (Poly::zero(), Poly::one());
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(&r1);
            let s2 = &s0 - &(&q * &s1);
            let t2 = &t0 - &(&q * &t1);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s2;
            t0 = t1;
            t1 = t2;
        }
        let l = r0.lead();
        let inv = BigRational::one() / l;
        (r0.scale(&inv), s0.scale(&inv), t0.scale(&inv))
    }

    /// `p / gcd(p, p')`, monic.
    pub fn square_free(&self) -> Poly {
        let g = Poly::gcd(self, &self.derivative());
        self.div_rem(&g).0.monic()
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::one(), |acc, _| &acc * self)
    }

    /// Polynomial with the variable negated: `p(-x)`.
    pub fn compose_neg(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c } else { c.clone() })
                .collect(),
        )
    }

    /// Reciprocal polynomial `x^deg p(1/x)`.
    pub fn reversed(&self) -> Poly {
        let mut c = self.coeffs.clone();
        c.reverse();
        Poly::new(c)
    }

    fn sturm_sequence(&self) -> Vec<Poly> {
        let mut seq = vec![self.clone(), self.derivative()];
        while !seq.last().expect("nonempty").is_zero() {
            let n = seq.len();
            let r = seq[n - 2].rem(&seq[n - 1]);
            seq.push(-&r);
        }
        seq.pop();
        seq
    }

    fn sign_changes(seq: &[Poly], x: &BigRational) -> usize {
        let mut count = 0;
        let mut prev = 0i8;
        for p in seq {
            let v = p.eval(x);
            let s = if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            };
            if s != 0 {
                if prev != 0 && s != prev {
                    count += 1;
                }
                prev = s;
            }
        }
        count
    }

    /// Number of distinct real roots in the half-open interval `(lo, hi]`.
    pub fn count_real_roots(&self, lo: &BigRational, hi: &BigRational) -> usize {
        let seq = self.sturm_sequence();
        Self::sign_changes(&seq, lo).saturating_sub(Self::sign_changes(&seq, hi))
    }

    pub fn cauchy_bound(&self) -> BigRational {
        let l = self.lead().abs();
        let m = self.coeffs[..self.coeffs.len().saturating_sub(1)]
            .iter()
            .map(|c| c.abs() / &l)
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        m + BigRational::one()
    }

    /// Disjoint intervals `[lo, hi]`, each containing exactly one real root, in increasing order.
    /// A degenerate interval `lo == hi` marks an exact rational root; otherwise the polynomial
    /// changes sign strictly between the endpoints.
    pub fn isolate_real_roots(&self) -> Vec<(BigRational, BigRational)> {
        let p = self.square_free();
        if p.deg() == 0 {
            return Vec::new();
        }
        let seq = p.sturm_sequence();
        let b = p.cauchy_bound();
        let mut out = Vec::new();
        let mut stack = vec![(-b.clone(), b)];
        while let Some((lo, hi)) = stack.pop() {
            let n = Self::sign_changes(&seq, &lo) - Self::sign_changes(&seq, &hi);
            if n == 0 {
                continue;
            }
            if p.eval(&hi).is_zero() {
                out.push((hi.clone(), hi.clone()));
                if n > 1 {
                    let mid = (&lo + &hi) / BigRational::from_integer(2.into());
                    stack.push((lo, mid.clone()));
                    stack.push((mid, hi));
                }
                continue;
            }
            if n == 1 {
                let mut lo2 = lo.clone();
                let mut step = &hi - &lo;
                while p.eval(&lo2).is_zero() || Self::sign_changes(&seq, &lo2) - Self::sign_changes(&seq, &hi) != 1 {
                    step /= BigRational::from_integer(2.into());
                    lo2 = &lo + &step;
                }
                out.push((lo2, hi));
                continue;
            }
            let mid = (&lo + &hi) / BigRational::from_integer(2.into());
            stack.push((lo, mid.clone()));
            stack.push((mid, hi));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.dedup();
        out
    }

    /// All complex roots with multiplicity (Aberth–Ehrlich iteration, Newton polished).
    pub fn complex_roots(&self) -> Vec<Complex64> {
        let n = self.deg();
        if n == 0 {
            return Vec::new();
        }
        let c: Vec<Complex64> = self.monic().coeffs.iter().map(|q| Complex64::new(rat_to_f64(q), 0.0)).collect();
        let eval = |z: Complex64| -> (Complex64, Complex64) {
            let mut p = Complex64::new(0.0, 0.0);
            let mut dp = Complex64::new(0.0, 0.0);
            for a in c.iter().rev() {
                dp = dp * z + p;
                p = p * z + a;
            }
            (p, dp)
        };
        let radius = c[..n].iter().map(|a| a.norm()).fold(0.0, f64::max) + 1.0;
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
            .collect();
        for _ in 0..2000 {
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let (p, dp) = eval(z[i]);
                if p.norm() == 0.0 {
                    continue;
                }
                let ratio = p / dp;
                let sum: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
                let w = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
                if w.is_finite() {
                    z[i] -= w;
                    moved = moved.max(w.norm() / z[i].norm().max(1.0));
                }
            }
            if moved < 1e-16 {
                break;
            }
        }
        z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        z
    }

    /// Radii `r_i` such that every disk `|z - z_i| <= r_i` contains a root (Weierstrass/Gerschgorin
    /// inclusion for simple roots), computed from the approximations `z`.
    pub fn inclusion_radii(&self, z: &[Complex64]) -> Vec<f64> {
        let n = z.len();
        let m = self.monic();
        (0..n)
            .map(|i| {
                let p = m.eval_complex(z[i]);
                let denom: Complex64 = (0..n).filter(|&j| j != i).map(|j| z[i] - z[j]).product();
                let w = (p / denom).norm();
                let r = n as f64 * w;
                r * (1.0 + 1e-9) + 1e-300
            })
            .collect()
    }

    /// Monic integer factor of the lowest degree (at least 1) that vanishes at the root `z[idx]`,
    /// searched over subsets of the numerical roots and confirmed by exact division.
    pub fn factor_containing(&self, roots: &[Complex64], idx: usize, max_degree: usize) -> Option<Poly> {
        let n = roots.len();
        for d in 1..=max_degree.min(n) {
            let mut chosen = vec![idx];
            if let Some(f) = self.search_factor(roots, &mut chosen, 0, d) {
                return Some(f);
            }
        }
        None
    }

    fn search_factor(&self, roots: &[Complex64], chosen: &mut Vec<usize>, from: usize, d: usize) -> Option<Poly> {
        if chosen.len() == d {
            return self.try_factor(roots, chosen);
        }
        for j in from..roots.len() {
            if chosen.contains(&j) {
                continue;
            }
            chosen.push(j);
            if let Some(f) = self.search_factor(roots, chosen, j + 1, d) {
                return Some(f);
            }
            chosen.pop();
        }
        None
    }

    fn try_factor(&self, roots: &[Complex64], chosen: &[usize]) -> Option<Poly> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &j in chosen {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * roots[j];
            }
            c = next;
        }
        let mut ints = Vec::with_capacity(c.len());
        for a in &c {
            let r = a.re.round();
            let tol = 1e-6 * (1.0 + a.re.abs());
            if (a.re - r).abs() > tol || a.im.abs() > tol || !r.is_finite() {
                return None;
            }
            ints.push(BigInt::from(r as i64));
        }
        let f = Poly::from_bigint(&ints);
        if self.rem(&f).is_zero() {
            Some(f)
        } else {
            None
        }
    }

    /// Smallest-degree nontrivial monic integer factor of a monic integer polynomial, if any.
    pub fn proper_factor(&self, max_degree: usize) -> Option<Poly> {
        let n = self.deg();
        if n < 2 {
            return None;
        }
        let roots = self.complex_roots();
        for d in 1..=max_degree.min(n / 2) {
            let mut chosen = Vec::new();
            if let Some(f) = self.search_any(&roots, &mut chosen, 0, d) {
                return Some(f);
            }
        }
        None
    }

    fn search_any(&self, roots: &[Complex64], chosen: &mut Vec<usize>, from: usize, d: usize) -> Option<Poly> {
        if chosen.len() == d {
            return self.try_factor(roots, chosen);
        }
        for j in from..roots.len() {
            chosen.push(j);
            if let Some(f) = self.search_any(roots, chosen, j + 1, d) {
                return Some(f);
            }
            chosen.pop();
        }
        None
    }
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![BigRational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let show_coeff = !a.is_one() || i == 0;
            if show_coeff {
                write!(f, "{a}")?;
                if i > 0 {
                    write!(f, "*")?;
                }
            }
            match i {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_and_gcd() {
        let a = Poly::from_i64_desc(&[1, 0, -1]);
        let b = Poly::from_i64_desc(&[1, -1]);
        let (q, r) = a.div_rem(&b);
        assert_eq!(q, Poly::from_i64_desc(&[1, 1]));
        assert!(r.is_zero());
        assert_eq!(Poly::gcd(&a, &Poly::from_i64_desc(&[1, 2, 1])), Poly::from_i64_desc(&[1, 1]));
        let (g, s, t) = Poly::ext_gcd(&Poly::from_i64_desc(&[1, -1, -1]), &Poly::from_i64_desc(&[2, 1]));
        assert!(g.deg() == 0);
        let lhs = &(&s * &Poly::from_i64_desc(&[1, -1, -1])) + &(&t * &Poly::from_i64_desc(&[2, 1]));
        assert_eq!(lhs, Poly::one());
    }

    #[test]
    fn sturm_isolates_golden_roots() {
        let p = Poly::from_i64_desc(&[1, -1, -1]);
        let roots = p.isolate_real_roots();
        assert_eq!(roots.len(), 2);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let (lo, hi) = &roots[1];
        assert!(rat_to_f64(lo) < phi && phi < rat_to_f64(hi));
        assert_eq!(p.count_real_roots(&rat(0, 1), &rat(2, 1)), 1);
    }

    #[test]
    fn rational_root_is_degenerate_interval() {
        let p = Poly::from_i64_desc(&[1, -3, 2]);
        let roots = p.isolate_real_roots();
        assert_eq!(roots, vec![(rat(1, 1), rat(1, 1)), (rat(2, 1), rat(2, 1))]);
    }

    #[test]
    fn aberth_finds_tribonacci_roots() {
        let p = Poly::from_i64_desc(&[1, -1, -1, -1]);
        let z = p.complex_roots();
        for r in &z {
            assert!(p.eval_complex(*r).norm() < 1e-12);
        }
        let radii = p.inclusion_radii(&z);
        assert!(radii.iter().all(|&r| r < 1e-10));
    }

    #[test]
    fn factor_search() {
        // x^4 - 2x^3 = x^3 (x - 2); square-free part x^2 - 2x
        let p = Poly::from_i64_desc(&[1, -2, 0, 0, 0]).square_free();
        assert_eq!(p, Poly::from_i64_desc(&[1, -2, 0]));
        let roots = p.complex_roots();
        let idx = roots.iter().position(|z| (z.re - 2.0).abs() < 1e-6).unwrap();
        assert_eq!(p.factor_containing(&roots, idx, 4), Some(Poly::from_i64_desc(&[1, -2])));
        assert!(Poly::from_i64_desc(&[1, -1, -1, -1]).proper_factor(4).is_none());
        let f = Poly::from_i64_desc(&[1, 0, -3, 0, 1]).proper_factor(4).unwrap();
        assert_eq!(f.deg(), 2);
    }

    #[test]
    fn interval_evaluation_encloses_values() {
        let p = Poly::from_i64_desc(&[1, -1, -1]);
        let (a, b) = p.eval_interval(&rat(3, 2), &rat(7, 4));
        assert!(a <= p.eval(&rat(3, 2)) && p.eval(&rat(7, 4)) <= b);
        assert!(a.is_negative() && b.is_positive());
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(Poly::from_i64_desc(&[1, -1, -1]).to_string(), "x^2 - x - 1");
    }
}
