use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraicNumber, NumberField, Poly};
use crate::error::{Error, Result};
use crate::graph::{Edge, LabeledGraph};
use crate::subshift::{SubshiftDoc, SubshiftSpec, VertexId};
use crate::word::{primitive_root, symbol_char, MAX_ALPHABET};

pub const ORBIT_CAP: usize = 100_000;

/// Exhaustive certification of the padding constant stops at this word length.
const ELL_CHECK_MAX_LENGTH: usize = 12;
const ELL_CHECK_MAX_WORDS: usize = 4096;

/// Eventually periodic digit sequence `pre per per per ...`; a finite expansion has `per = [0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expansion {
    pub pre: Vec<u8>,
    pub per: Vec<u8>,
}

impl Expansion {
    pub fn new(pre: Vec<u8>, per: Vec<u8>) -> Result<Expansion> {
        if per.is_empty() {
            return Err(Error::InvalidParameter("period must be nonempty".into()));
        }
        Ok(Expansion { pre, per }.canonical())
    }

    /// Shortest preperiod, then shortest period.
    fn canonical(mut self) -> Expansion {
        self.per = primitive_root(&self.per).to_vec();
        while let Some(&last) = self.pre.last() {
            if last != *self.per.last().expect("nonempty period") {
                break;
            }
            self.pre.pop();
            self.per.rotate_right(1);
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.per == [0]
    }

    /// `i`-th digit, counting from 0.
    pub fn at(&self, i: usize) -> u8 {
        if i < self.pre.len() {
            self.pre[i]
        } else {
            self.per[(i - self.pre.len()) % self.per.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| self.at(i)).collect()
    }

    /// `σ^k(self) ⪯ self` for every `k >= 1`.
    pub fn is_self_maximal(&self) -> bool {
        let span = self.pre.len() + self.per.len();
        (1..=span).all(|k| (0..span).map(|i| self.at(k + i)).le((0..span).map(|i| self.at(i))))
    }

    /// `Σ_k digit_k x^k` over all digits (`k >= 1`), summing the periodic tail in closed form.
    pub fn value_at(&self, x: &AlgebraicNumber) -> AlgebraicNumber {
        let horner = |digits: &[u8]| {
            let mut s = AlgebraicNumber::zero();
            let mut pw = AlgebraicNumber::one();
            for &a in digits {
                pw = &pw * x;
                s = &s + &(&pw * &AlgebraicNumber::from_int(a as i64));
            }
            (s, pw)
        };
        let (head, xp) = horner(&self.pre);
        if self.is_finite() {
            return head;
        }
        let (cycle, xq) = horner(&self.per);
        let tail = &(&xp * &cycle) / &(&AlgebraicNumber::one() - &xq);
        &head + &tail
    }
}

impl fmt::Display for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = |d: &[u8]| d.iter().map(|&a| symbol_char(a)).collect::<String>();
        if self.is_finite() {
            if self.pre.is_empty() {
                return write!(f, "0");
            }
            return write!(f, "{}", digits(&self.pre));
        }
        write!(f, "{}({})*", digits(&self.pre), digits(&self.per))
    }
}

/// The dominant root of a monic integer polynomial, if it is a Pisot number: real, greater than
/// one, with every other root strictly inside the unit disk. Root positions are certified by
/// inclusion disks around the numerical roots.
pub fn pisot_root(poly: &Poly) -> Result<f64> {
    let ints = poly.integer_coeffs().filter(|_| poly.lead().is_one()).ok_or_else(|| {
        Error::NotPisot(format!("{poly} is not a monic integer polynomial"))
    })?;
    if ints.len() < 3 {
        return Err(Error::NotPisot(format!("{poly} has degree below 2")));
    }
    let roots = poly.complex_roots();
    let radii = poly.inclusion_radii(&roots);
    let top = (0..roots.len())
        .max_by(|&a, &b| roots[a].norm().total_cmp(&roots[b].norm()))
        .expect("at least one root");
    let z = roots[top];
    if !(z.re - radii[top] > 1.0 && z.im.abs() <= radii[top]) {
        return Err(Error::NotPisot(format!("{poly} has no real root certified above 1")));
    }
    for (i, w) in roots.iter().enumerate() {
        if i != top && w.norm() + radii[i] >= 1.0 {
            return Err(Error::NotPisot(format!("{poly} has a conjugate of modulus about {:.6}", w.norm())));
        }
    }
    Ok(z.re)
}

/// Greedy expansion of 1 in base `beta`: `d'_n = ⌊β τ^{n-1}(1)⌋` with `τ(x) = βx mod 1`,
/// iterated exactly until the orbit of 1 repeats.
pub fn parry_expansion(beta: &AlgebraicNumber) -> Result<Expansion> {
    let mut seen: HashMap<AlgebraicNumber, usize> = HashMap::new();
    let mut digits: Vec<u8> = Vec::new();
    let mut x = AlgebraicNumber::one();
    while digits.len() < ORBIT_CAP {
        let y = beta * &x;
        let a = y.try_floor()?;
        let a = a
            .to_u8()
            .filter(|&a| (a as usize) < MAX_ALPHABET)
            .ok_or_else(|| Error::InvalidParameter(format!("digit {a} exceeds the alphabet")))?;
        digits.push(a);
        x = &y - &AlgebraicNumber::rational(BigInt::from(a).into());
        if x.is_zero() {
            return Expansion::new(digits, vec![0]);
        }
        if let Some(&j) = seen.get(&x) {
            let per = digits.split_off(j);
            return Expansion::new(digits, per);
        }
        seen.insert(x.clone(), digits.len());
    }
    Err(Error::CycleNotFound(ORBIT_CAP))
}

/// Quasi-greedy expansion of 1: equal to `d'` unless `d'` is finite, in which case the last
/// nonzero digit is decremented and the block repeated.
pub fn d_sequence(d_prime: &Expansion) -> Expansion {
    if !d_prime.is_finite() {
        return d_prime.clone();
    }
    let mut block = d_prime.pre.clone();
    while block.last() == Some(&0) {
        block.pop();
    }
    match block.last_mut() {
        Some(last) => *last -= 1,
        None => return d_prime.clone(),
    }
    Expansion { pre: Vec::new(), per: block }.canonical()
}

/// Every suffix of `word` is `⪯` the prefix of `d` of the same length.
pub fn is_admissible(word: &[u8], d: &Expansion) -> bool {
    (0..word.len()).all(|j| word[j..].iter().copied().le((0..word.len() - j).map(|i| d.at(i))))
}

/// Right-resolving presentation of `X_β`: state `i` records that the current run matches
/// `d_1 ... d_i`; a digit below `d_{i+1}` returns to state 0, a digit equal to it advances.
pub fn beta_shift(d: &Expansion) -> Result<SubshiftSpec> {
    let p = d.pre.len();
    let n = p + d.per.len();
    let mut edges = Vec::new();
    for i in 0..n {
        let top = d.at(i);
        for a in 0..top {
            edges.push(Edge { from: i, to: 0, label: a });
        }
        let next = if i + 1 == n { p } else { i + 1 };
        edges.push(Edge { from: i, to: next, label: top });
    }
    let k = (0..n).map(|i| d.at(i)).max().unwrap_or(0) + 1;
    let names = (0..n as u64).map(VertexId::Num).collect();
    SubshiftSpec::from_graph(k, LabeledGraph::new(n, edges), Some(names))
}

/// Least `ℓ` with `u 0^ℓ v` admissible for all admissible `u`, `v`: the longest run of zero
/// steps needed to return to the initial state, confirmed by an exhaustive check over short
/// words and shown minimal by the same check.
pub fn ell_constant(d: &Expansion) -> Result<usize> {
    let x = beta_shift(d)?;
    let g = x.graph();
    let mut candidate = 0;
    for s in 0..g.num_vertices() {
        let mut v = s;
        let mut steps = 0;
        while v != 0 {
            v = g.successor(v, 0).ok_or_else(|| Error::InvariantViolated(format!("state {s} cannot read 0")))?;
            steps += 1;
            if steps > g.num_vertices() {
                return Err(Error::InvariantViolated("zero run never returns to the initial state".into()));
            }
        }
        candidate = candidate.max(steps);
    }
    let limit = (2 * (d.pre.len() + d.per.len())).min(ELL_CHECK_MAX_LENGTH);
    let mut words: Vec<Vec<u8>> = Vec::new();
    for len in 1..=limit {
        let slice = x.language(len);
        if words.len() + slice.words.len() > ELL_CHECK_MAX_WORDS {
            break;
        }
        words.extend(slice.words.into_iter().map(|w| w.0));
    }
    let passes = |ell: usize| {
        words.iter().all(|u| {
            words.iter().all(|v| {
                let mut w = u.clone();
                w.extend(std::iter::repeat_n(0, ell));
                w.extend_from_slice(v);
                is_admissible(&w, d)
            })
        })
    };
    if !passes(candidate) {
        return Err(Error::InvariantViolated(format!("padding {candidate} fails the exhaustive check")));
    }
    Ok((0..candidate).find(|&l| passes(l)).unwrap_or(candidate))
}

/// β-expansion data for a Pisot number `β` given by its minimal polynomial.
#[derive(Clone, Debug)]
pub struct BetaSystem {
    min_poly: Poly,
    field: Arc<NumberField>,
    d_prime: Expansion,
    d: Expansion,
    ell: usize,
    shift: SubshiftSpec,
}

impl PartialEq for BetaSystem {
    fn eq(&self, other: &Self) -> bool {
        self.min_poly == other.min_poly
            && self.d_prime == other.d_prime
            && self.d == other.d
            && self.ell == other.ell
            && self.shift == other.shift
    }
}

impl BetaSystem {
    pub fn new(min_poly: &Poly) -> Result<BetaSystem> {
        let root = pisot_root(min_poly)?;
        if let Some(f) = min_poly.proper_factor(min_poly.deg() / 2) {
            return Err(Error::Reducible(format!("{min_poly} has the factor {f}")));
        }
        let field = NumberField::new(min_poly, root)?;
        let beta = field.generator();
        let d_prime = parry_expansion(&beta)?;
        let d = d_sequence(&d_prime);
        if !d.is_self_maximal() {
            return Err(Error::InvariantViolated(format!("d = {d} is not self-maximal")));
        }
        if !d_prime.value_at(&beta.inverse()).is_one() {
            return Err(Error::InvariantViolated(format!("d' = {d_prime} does not expand 1")));
        }
        let shift = beta_shift(&d)?;
        let ell = ell_constant(&d)?;
        Ok(BetaSystem { min_poly: min_poly.clone(), field, d_prime, d, ell, shift })
    }

    pub fn from_coeffs_desc(coeffs: &[i64]) -> Result<BetaSystem> {
        BetaSystem::new(&Poly::from_i64_desc(coeffs))
    }

    pub fn min_poly(&self) -> &Poly {
        &self.min_poly
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn beta(&self) -> AlgebraicNumber {
        self.field.generator()
    }

    pub fn beta_f64(&self) -> f64 {
        self.field.root_approx()
    }

    pub fn d_prime(&self) -> &Expansion {
        &self.d_prime
    }

    pub fn d(&self) -> &Expansion {
        &self.d
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn shift(&self) -> &SubshiftSpec {
        &self.shift
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        is_admissible(word, &self.d)
    }

    /// `|h(X_β) - log β|`.
    pub fn entropy_defect(&self) -> f64 {
        (self.shift.entropy() - self.beta_f64().ln()).abs()
    }

    pub fn summary(&self) -> String {
        format!("d' = {}, d = {}", self.d_prime, self.d)
    }

    pub fn to_doc(&self) -> BetaDoc {
        BetaDoc {
            min_poly: self.min_poly.to_i64_desc().expect("integer polynomial"),
            beta: self.beta_f64(),
            d_prime: self.d_prime.clone(),
            d: self.d.clone(),
            ell: self.ell,
            graph: self.shift.to_doc(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    /// Rebuilds the system from the stored polynomial and checks the stored data against it.
    pub fn from_doc(doc: &BetaDoc) -> Result<BetaSystem> {
        let sys = BetaSystem::from_coeffs_desc(&doc.min_poly)?;
        let stored = SubshiftSpec::from_doc(&doc.graph)?;
        if sys.d_prime != doc.d_prime || sys.d != doc.d || sys.ell != doc.ell || sys.shift != stored {
            return Err(Error::Malformed("stored expansion data does not match the polynomial".into()));
        }
        Ok(sys)
    }

    pub fn from_json(s: &str) -> Result<BetaSystem> {
        let doc: BetaDoc = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaDoc {
    pub min_poly: Vec<i64>,
    pub beta: f64,
    pub d_prime: Expansion,
    pub d: Expansion,
    pub ell: usize,
    pub graph: SubshiftDoc,
}
