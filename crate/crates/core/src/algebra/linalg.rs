use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::poly::Poly;
use super::scalar::Scalar;

pub type IntMatrix = Vec<Vec<i64>>;

fn pivot_zero<S: Scalar>(x: &S) -> bool {
    if S::EXACT {
        x.is_zero()
    } else {
        x.to_f64().abs() < 1e-13
    }
}

/// A nonzero vector `v` with `m v = 0`, normalized so its last free coordinate is 1.
pub fn kernel_vector<S: Scalar>(m: &[Vec<S>]) -> Option<Vec<S>> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<S>> = m.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let p = (r..rows)
            .filter(|&i| !pivot_zero(&a[i][c]))
            .max_by(|&i, &j| a[i][c].to_f64().abs().total_cmp(&a[j][c].to_f64().abs()));
        let Some(p) = p else { continue };
        a.swap(r, p);
        let inv = S::one() / a[r][c].clone();
        for x in a[r].iter_mut() {
            *x = x.clone() * inv.clone();
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let v = a[i][j].clone() - f.clone() * a[r][j].clone();
                    a[i][j] = v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free = (0..cols).rev().find(|c| !pivots.contains(c))?;
    let mut v = vec![S::zero(); cols];
    v[free] = S::one();
    for (i, &c) in pivots.iter().enumerate() {
        v[c] = -a[i][free].clone();
    }
    Some(v)
}

/// Characteristic polynomial `det(xI - a)` (Faddeev–LeVerrier, exact).
pub fn char_poly(a: &[Vec<BigRational>]) -> Poly {
    let n = a.len();
    let mut c = vec![BigRational::zero(); n + 1];
    c[n] = BigRational::from_integer(1.into());
    let mut m = vec![vec![BigRational::zero(); n]; n];
    for k in 1..=n {
        let mut next = mat_mul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &c[n - k + 1];
        }
        m = next;
        let am = mat_mul(a, &m);
        let tr: BigRational = (0..n).map(|i| am[i][i].clone()).sum();
        c[n - k] = -tr / BigRational::from_integer(BigInt::from(k));
    }
    Poly::new(c)
}

pub fn mat_mul(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let p = b.first().map_or(0, |r| r.len());
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| (0..b.len()).map(|k| &a[i][k] * &b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn to_rational(m: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    m.iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
        .collect()
}

pub fn int_char_poly(m: &[Vec<i64>]) -> Poly {
    char_poly(&to_rational(m))
}

pub fn int_det(m: &[Vec<i64>]) -> BigInt {
    let p = int_char_poly(m);
    let c0 = p.coeff(0).to_integer();
    if m.len().is_multiple_of(2) {
        c0
    } else {
        -c0
    }
}

/// Inverse of a unimodular integer matrix via Cayley–Hamilton.
pub fn int_inverse(m: &[Vec<i64>]) -> Option<IntMatrix> {
    let n = m.len();
    let p = int_char_poly(m);
    let c0 = p.coeff(0);
    if c0.is_zero() {
        return None;
    }
    let a = to_rational(m);
    let mut acc = identity(n);
    for k in (1..n).rev() {
        acc = mat_mul(&a, &acc);
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] += p.coeff(k);
        }
    }
    acc.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|x| {
                    let v = -x / &c0;
                    if v.is_integer() {
                        v.to_integer().to_i64()
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect()
}

fn identity(n: usize) -> Vec<Vec<BigRational>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| BigRational::from_integer(BigInt::from((i == j) as i64)))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::field::AlgebraicNumber;

    #[test]
    fn cat_map_char_poly_and_inverse() {
        let m = vec![vec![2, 1], vec![1, 1]];
        assert_eq!(int_char_poly(&m), Poly::from_i64_desc(&[1, -3, 1]));
        assert_eq!(int_det(&m), BigInt::from(1));
        assert_eq!(int_inverse(&m).unwrap(), vec![vec![1, -1], vec![-1, 2]]);
        let t = vec![vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]];
        assert_eq!(int_char_poly(&t), Poly::from_i64_desc(&[1, -1, -1, -1]));
        assert_eq!(int_det(&t), BigInt::from(1));
        let ti = int_inverse(&t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: i64 = (0..3).map(|k| t[i][k] * ti[k][j]).sum();
                assert_eq!(s, (i == j) as i64);
            }
        }
    }

    #[test]
    fn exact_kernel() {
        let m: Vec<Vec<AlgebraicNumber>> = vec![
            vec![AlgebraicNumber::from_int(1), AlgebraicNumber::from_int(2)],
            vec![AlgebraicNumber::from_int(2), AlgebraicNumber::from_int(4)],
        ];
        let v = kernel_vector(&m).unwrap();
        assert_eq!(v, vec![AlgebraicNumber::from_int(-2), AlgebraicNumber::from_int(1)]);
    }
}
