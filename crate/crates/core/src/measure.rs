use std::cmp::Ordering;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::field::{format_rational, parse_rational};
use crate::algebra::linalg::{int_char_poly, kernel_vector};
use crate::algebra::poly::rat_to_f64;
use crate::algebra::{AlgebraicNumber, NumberField, Poly, Scalar};
use crate::error::{Error, Result};
use crate::graph::{DetHashMap, DetHashSet, VertexSet};
use crate::subshift::{SubshiftSpec, VertexId};
use crate::word::Word;

/// Lags checked beyond a candidate mixing gap before it is accepted.
pub const VERIFICATION_HORIZON: usize = 64;
/// Largest lag a mixing-gap search will consider.
pub const MAX_LAG: usize = 1 << 16;
/// Largest presentation for which the Parry measure is computed in exact arithmetic.
pub const EXACT_PARRY_MAX_VERTICES: usize = 24;
const EXACT_PARRY_MAX_DEGREE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    Rational,
    Algebraic,
    Floating,
}

/// Stationary Markov measure carried by the edges of a subshift presentation.
#[derive(Clone, Debug)]
pub struct MarkovMeasure<S: Scalar> {
    shift: Arc<SubshiftSpec>,
    probs: Vec<S>,
    pi: Vec<S>,
    potential: Option<Potential<S>>,
}

/// Edge probabilities `r[to] / (λ r[from])`: the mass of a path depends only on its endpoints and
/// length.
#[derive(Clone, Debug)]
pub struct Potential<S> {
    pub r: Vec<S>,
    pub lambda: S,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GapThreshold<S> {
    /// `correlation >= c * μ[w] * μ[w']`.
    Fraction(S),
    /// `correlation > 0`.
    Positive,
}

fn check_close<S: Scalar>(a: &S, b: &S, what: &str) -> Result<()> {
    if a.approx_eq(b, 1e-12) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what}: {a} != {b}")))
    }
}

impl<S: Scalar> MarkovMeasure<S> {
    pub fn new(shift: Arc<SubshiftSpec>, probs: Vec<S>, pi: Vec<S>) -> Result<Self> {
        let g = shift.graph();
        if probs.len() != g.num_edges() || pi.len() != g.num_vertices() {
            return Err(Error::Malformed("measure does not match the presentation".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_positive()) {
            return Err(Error::InvalidParameter(format!("edge probability {p} is not positive")));
        }
        for v in 0..g.num_vertices() {
            let row = S::sum(&probs[g.out_range(v)]);
            check_close(&row, &S::one(), "outgoing probabilities do not sum to 1")?;
        }
        check_close(&S::sum(&pi), &S::one(), "stationary vector does not sum to 1")?;
        if (0..g.num_vertices()).all(|v| g.out_range(v).len() == 1) {
            return Err(Error::AtomicMeasure);
        }
        let m = MarkovMeasure { shift, probs, pi, potential: None };
        let next = m.step(&m.pi);
        for (a, b) in next.iter().zip(&m.pi) {
            check_close(a, b, "vector is not stationary")?;
        }
        Ok(m)
    }

    /// Measure with the given transition probabilities and its stationary vector (irreducible
    /// presentations only).
    pub fn from_transitions(shift: Arc<SubshiftSpec>, probs: Vec<S>) -> Result<Self> {
        if !shift.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        let g = shift.graph();
        let n = g.num_vertices();
        if probs.len() != g.num_edges() {
            return Err(Error::Malformed("measure does not match the presentation".into()));
        }
        let mut m = vec![vec![S::zero(); n]; n];
        for (e, p) in g.edges().iter().zip(&probs) {
            m[e.to][e.from] = m[e.to][e.from].clone() + p.clone();
        }
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = row[i].clone() - S::one();
        }
        let v = kernel_vector(&m).ok_or_else(|| Error::InvalidParameter("no stationary vector".into()))?;
        let total = S::sum(&v);
        let pi = v.into_iter().map(|x| x / total.clone()).collect();
        Self::new(shift, probs, pi)
    }

    pub fn shift(&self) -> &SubshiftSpec {
        &self.shift
    }

    pub fn shift_arc(&self) -> &Arc<SubshiftSpec> {
        &self.shift
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn pi(&self) -> &[S] {
        &self.pi
    }

    pub fn potential(&self) -> Option<&Potential<S>> {
        self.potential.as_ref()
    }

    /// Total mass of paths of length `len`, given as counts by start and end vertex; `None`
    /// unless the measure has Perron form.
    pub fn perron_mass(&self, counts: &[Vec<BigUint>], len: usize) -> Option<S> {
        let p = self.potential.as_ref()?;
        let mut total = S::zero();
        for (v0, row) in counts.iter().enumerate() {
            for (v, m) in row.iter().enumerate().filter(|(_, m)| !m.is_zero()) {
                let count = S::from_rational(&BigRational::from_integer(m.clone().into()));
                total = total + count * self.pi[v0].clone() * p.r[v].clone() / p.r[v0].clone();
            }
        }
        let scale = (0..len).fold(S::one(), |acc, _| acc * p.lambda.clone());
        Some(total / scale)
    }

    fn with_potential(mut self, r: Vec<S>, lambda: S) -> Result<Self> {
        let g = self.shift.graph();
        for (e, p) in g.edges().iter().zip(&self.probs) {
            check_close(p, &(r[e.to].clone() / (lambda.clone() * r[e.from].clone())), "edge probability is not of Perron form")?;
        }
        self.potential = Some(Potential { r, lambda });
        Ok(self)
    }

    pub fn exactness(&self) -> Exactness {
        if !S::EXACT {
            Exactness::Floating
        } else if self.probs.iter().chain(&self.pi).all(|p| p.to_json().is_string()) {
            Exactness::Rational
        } else {
            Exactness::Algebraic
        }
    }

    pub fn to_f64(&self) -> MarkovMeasure<f64> {
        MarkovMeasure {
            shift: self.shift.clone(),
            probs: self.probs.iter().map(Scalar::to_f64).collect(),
            pi: self.pi.iter().map(Scalar::to_f64).collect(),
            potential: None,
        }
    }

    /// Aperiodic chain on an irreducible presentation.
    pub fn is_mixing(&self) -> bool {
        self.shift.is_irreducible() && self.shift.graph().period() == 1
    }

    pub fn ensure_mixing(&self) -> Result<()> {
        if !self.shift.is_irreducible() {
            return Err(Error::NonMixingMeasure);
        }
        if self.shift.graph().period() != 1 {
            return Err(Error::PeriodicChain);
        }
        Ok(())
    }

    /// Mass vector after reading `word` starting from `dist`.
    pub fn push_word(&self, dist: &[S], word: &[u8]) -> Vec<S> {
        let g = self.shift.graph();
        let mut cur = dist.to_vec();
        for &a in word {
            let mut next = vec![S::zero(); cur.len()];
            for (v, mass) in cur.iter().enumerate() {
                if mass.is_zero() {
                    continue;
                }
                for i in g.out_range(v) {
                    let e = g.edge(i);
                    if e.label == a {
                        next[e.to] = next[e.to].clone() + mass.clone() * self.probs[i].clone();
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// One free step of the chain.
    pub fn step(&self, dist: &[S]) -> Vec<S> {
        let g = self.shift.graph();
        let mut next = vec![S::zero(); dist.len()];
        for (i, e) in g.edges().iter().enumerate() {
            if !dist[e.from].is_zero() {
                next[e.to] = next[e.to].clone() + dist[e.from].clone() * self.probs[i].clone();
            }
        }
        next
    }

    /// Vertex transition matrix raised to the power `n`.
    pub fn transfer_power(&self, mut n: usize) -> Vec<Vec<S>> {
        let g = self.shift.graph();
        let v = g.num_vertices();
        let mut base = vec![vec![S::zero(); v]; v];
        for (i, e) in g.edges().iter().enumerate() {
            base[e.from][e.to] = base[e.from][e.to].clone() + self.probs[i].clone();
        }
        let mut acc: Vec<Vec<S>> = (0..v)
            .map(|i| (0..v).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        while n > 0 {
            if n & 1 == 1 {
                acc = mat_mul(&acc, &base);
            }
            base = mat_mul(&base, &base);
            n >>= 1;
        }
        acc
    }

    pub fn advance(&self, dist: &[S], n: usize) -> Vec<S> {
        if n <= 64 {
            (0..n).fold(dist.to_vec(), |d, _| self.step(&d))
        } else {
            let p = self.transfer_power(n);
            (0..dist.len())
                .map(|j| (0..dist.len()).fold(S::zero(), |acc, i| acc + dist[i].clone() * p[i][j].clone()))
                .collect()
        }
    }

    /// `μ[w]` (zero for inadmissible words).
    pub fn word_measure(&self, word: &[u8]) -> S {
        S::sum(&self.push_word(&self.pi, word))
    }

    /// `μ(σ^{-r}[w]) = μ[w]`.
    pub fn cylinder_measure(&self, word: &[u8], _shift: usize) -> Result<S> {
        if !self.shift.is_admissible(word) {
            return Err(Error::InadmissibleWord(Word::from(word).to_string()));
        }
        Ok(self.word_measure(word))
    }

    /// `μ([w'] ∩ σ^{-n}[w])`: `w'` read at coordinates `1..|w'|`, `w` from coordinate `n+1`.
    pub fn correlation(&self, w: &[u8], w_prime: &[u8], n: usize) -> S {
        if n < w_prime.len() {
            match merge_at(w_prime, w, n) {
                Some(m) => self.word_measure(&m),
                None => S::zero(),
            }
        } else {
            let d = self.push_word(&self.pi, w_prime);
            let d = self.advance(&d, n - w_prime.len());
            S::sum(&self.push_word(&d, w))
        }
    }

    /// Minimal lag `ℓ >= 1` such that every ordered pair `(w, w')` of `words` satisfies the
    /// threshold at every lag in `ℓ..=ℓ+H` (all larger lags for the positivity threshold).
    pub fn mixing_gap(&self, words: &[Word], threshold: &GapThreshold<S>) -> Result<usize> {
        self.mixing_gap_pairs(words, words, threshold)
    }

    /// As `mixing_gap`, over pairs `w ∈ shifted`, `w' ∈ base`: the condition concerns
    /// `μ([w'] ∩ σ^{-ℓ}[w])`.
    pub fn mixing_gap_pairs(&self, shifted: &[Word], base: &[Word], threshold: &GapThreshold<S>) -> Result<usize> {
        self.ensure_mixing()?;
        match threshold {
            GapThreshold::Positive => positivity_gap(&self.shift, shifted, base),
            GapThreshold::Fraction(c) => self.fraction_gap(shifted, base, c),
        }
    }

    fn fraction_gap(&self, shifted: &[Word], base: &[Word], c: &S) -> Result<usize> {
        let pairs: Vec<(&Word, &Word)> = shifted.iter().flat_map(|a| base.iter().map(move |b| (a, b))).collect();
        let mut lag = 1usize;
        loop {
            let worst = pairs
                .par_iter()
                .map(|(a, b)| self.last_failure(a, b, c, lag, lag + VERIFICATION_HORIZON))
                .max()
                .flatten();
            match worst {
                None => return Ok(lag),
                Some(f) => {
                    lag = f + 1;
                    if lag > MAX_LAG {
                        return Err(Error::PeriodicChain);
                    }
                }
            }
        }
    }

    fn last_failure(&self, a: &Word, b: &Word, c: &S, from: usize, to: usize) -> Option<usize> {
        let target = c.clone() * self.word_measure(a.symbols()) * self.word_measure(b.symbols());
        let mut last = None;
        let mut lag = from;
        while lag <= to && lag < b.len() {
            if self.correlation(a.symbols(), b.symbols(), lag).lt(&target) {
                last = Some(lag);
            }
            lag += 1;
        }
        if lag <= to {
            let mut d = self.advance(&self.push_word(&self.pi, b.symbols()), lag - b.len());
            loop {
                if S::sum(&self.push_word(&d, a.symbols())).lt(&target) {
                    last = Some(lag);
                }
                if lag == to {
                    break;
                }
                d = self.step(&d);
                lag += 1;
            }
        }
        last
    }

    /// Entropy of the chain, `-Σ π_u P(e) log P(e)`.
    pub fn entropy_rate(&self) -> f64 {
        let g = self.shift.graph();
        g.edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let p = self.probs[i].to_f64();
                -self.pi[e.from].to_f64() * p * p.ln()
            })
            .sum()
    }

    pub fn to_doc(&self) -> MeasureDoc {
        let names = self.shift.vertex_names();
        MeasureDoc {
            edges: self
                .shift
                .graph()
                .edges()
                .iter()
                .zip(&self.probs)
                .map(|(e, p)| MeasureEdgeDoc {
                    from: names[e.from].clone(),
                    to: names[e.to].clone(),
                    label: e.label,
                    p: p.to_json(),
                })
                .collect(),
            pi: self.pi.iter().map(Scalar::to_json).collect(),
            exact: S::EXACT,
            field: None,
        }
    }
}

impl MarkovMeasure<AlgebraicNumber> {
    pub fn field(&self) -> Option<Arc<NumberField>> {
        self.probs.iter().chain(&self.pi).find_map(|p| p.field().cloned())
    }

    pub fn to_exact_doc(&self) -> MeasureDoc {
        let mut doc = self.to_doc();
        doc.field = self.field().map(|f| FieldDoc::from_field(&f));
        doc
    }
}

fn mat_mul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).fold(S::zero(), |acc, k| {
                        if a[i][k].is_zero() || b[k][j].is_zero() {
                            acc
                        } else {
                            acc + a[i][k].clone() * b[k][j].clone()
                        }
                    })
                })
                .collect()
        })
        .collect()
}

/// Word covering `first` at offset 0 and `second` at offset `n`, if they agree on the overlap.
pub fn merge_at(first: &[u8], second: &[u8], n: usize) -> Option<Vec<u8>> {
    let mut out = first.to_vec();
    if out.len() < n {
        return None;
    }
    for (i, &a) in second.iter().enumerate() {
        let pos = n + i;
        if pos < out.len() {
            if out[pos] != a {
                return None;
            }
        } else {
            out.push(a);
        }
    }
    Some(out)
}

/// Minimal `L >= 1` such that `[w'] ∩ σ^{-ℓ}[w]` is nonempty in `X` for all `ℓ >= L`,
/// `w ∈ shifted`, `w' ∈ base`. Lags at least `|w'|` are decided by boolean reachability
/// between end vertices of `w'` and start vertices of `w`; shorter lags by direct merging.
pub fn positivity_gap(x: &SubshiftSpec, shifted: &[Word], base: &[Word]) -> Result<usize> {
    let g = x.graph();
    if g.period() != 1 {
        return Err(Error::PeriodicChain);
    }
    let mut end_classes: DetHashMap<VertexSet, Vec<usize>> = DetHashMap::default();
    for b in base {
        let lens = end_classes.entry(x.end_set(b.symbols())).or_default();
        if !lens.contains(&b.len()) {
            lens.push(b.len());
        }
    }
    let mut start_classes: Vec<VertexSet> = Vec::new();
    {
        let mut seen = DetHashSet::default();
        for a in shifted {
            let s = x.start_set(a.symbols());
            if seen.insert(s.clone()) {
                start_classes.push(s);
            }
        }
    }
    let full = g.all_vertices();
    let mut max_fail: usize = 0;
    for (ends, lens) in &end_classes {
        let mut reach = ends.clone();
        let mut last_fail: Option<usize> = None;
        let mut history: DetHashSet<VertexSet> = DetHashSet::default();
        let mut gap = 0usize;
        loop {
            if start_classes.iter().any(|s| !reach.intersects(s)) {
                last_fail = Some(gap);
            }
            if reach == full {
                break;
            }
            if !history.insert(reach.clone()) {
                return Err(Error::PeriodicChain);
            }
            reach = g.forward_set(&reach);
            gap += 1;
        }
        if let Some(f) = last_fail {
            let longest = lens.iter().max().copied().unwrap_or(0);
            max_fail = max_fail.max(f + longest);
        }
    }
    let max_base = base.iter().map(Word::len).max().unwrap_or(0);
    let mut lag = max_base.saturating_sub(1);
    while lag > max_fail && lag >= 1 {
        if overlap_fails(x, shifted, base, lag) {
            max_fail = lag;
            break;
        }
        lag -= 1;
    }
    Ok(max_fail + 1)
}

fn overlap_fails(x: &SubshiftSpec, shifted: &[Word], base: &[Word], lag: usize) -> bool {
    let mut base_by_len: std::collections::BTreeMap<usize, Vec<&Word>> = Default::default();
    for b in base.iter().filter(|b| b.len() > lag) {
        base_by_len.entry(b.len()).or_default().push(b);
    }
    let mut shifted_by_len: std::collections::BTreeMap<usize, Vec<&Word>> = Default::default();
    for a in shifted {
        shifted_by_len.entry(a.len()).or_default().push(a);
    }
    for (&lb, bs) in &base_by_len {
        for (&la, as_) in &shifted_by_len {
            let o = la.min(lb - lag);
            let seg = &bs[0].symbols()[lag..lag + o];
            let uniform = bs.iter().all(|b| &b.symbols()[lag..lag + o] == seg)
                && as_.iter().all(|a| &a.symbols()[..o] == seg);
            if !uniform {
                return true;
            }
            for b in bs {
                for a in as_ {
                    let merged = merge_at(b.symbols(), a.symbols(), lag).expect("consistent overlap");
                    if !x.is_admissible(&merged) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Parry measure (maximal entropy) in exact arithmetic over `Q(λ)`.
pub fn parry_measure(x: &SubshiftSpec) -> Result<MarkovMeasure<AlgebraicNumber>> {
    if !x.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let g = x.graph();
    let n = g.num_vertices();
    if n > EXACT_PARRY_MAX_VERTICES {
        return Err(Error::InvalidParameter(format!("exact Parry measure limited to {EXACT_PARRY_MAX_VERTICES} vertices")));
    }
    let mut adj = vec![vec![0i64; n]; n];
    for e in g.edges() {
        adj[e.from][e.to] += 1;
    }
    let lambda_f = g.spectral_radius();
    let cp = int_char_poly(&adj).square_free();
    let roots = cp.complex_roots();
    let idx = roots
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - lambda_f).norm().total_cmp(&(b.1 - lambda_f).norm()))
        .map(|(i, _)| i)
        .ok_or(Error::EmptySubshift)?;
    let min_poly = cp
        .factor_containing(&roots, idx, EXACT_PARRY_MAX_DEGREE)
        .ok_or_else(|| Error::InvalidParameter("minimal polynomial of the spectral radius not found".into()))?;
    let lambda = if min_poly.deg() == 1 {
        AlgebraicNumber::rational(-min_poly.coeff(0))
    } else {
        NumberField::new(&min_poly, lambda_f)?.generator()
    };
    let shifted = |transpose: bool| -> Vec<Vec<AlgebraicNumber>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let a = if transpose { adj[j][i] } else { adj[i][j] };
                        let base = AlgebraicNumber::from_int(a);
                        if i == j {
                            &base - &lambda
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let positive = |v: Vec<AlgebraicNumber>| -> Vec<AlgebraicNumber> {
        if v.iter().any(|x| x.is_negative()) {
            v.iter().map(|x| -x).collect()
        } else {
            v
        }
    };
    let r = positive(kernel_vector(&shifted(false)).ok_or_else(|| Error::InvariantViolated("no right Perron vector".into()))?);
    let l = positive(kernel_vector(&shifted(true)).ok_or_else(|| Error::InvariantViolated("no left Perron vector".into()))?);
    let probs = g
        .edges()
        .iter()
        .map(|e| &r[e.to] / &(&lambda * &r[e.from]))
        .collect();
    let lr: Vec<AlgebraicNumber> = l.iter().zip(&r).map(|(a, b)| a * b).collect();
    let total = <AlgebraicNumber as Scalar>::sum(&lr);
    let pi = lr.iter().map(|x| x / &total).collect();
    MarkovMeasure::new(Arc::new(x.clone()), probs, pi)?.with_potential(r, lambda)
}

/// Parry measure in floating point (power iteration on `A + I`).
pub fn parry_measure_f64(x: &SubshiftSpec) -> Result<MarkovMeasure<f64>> {
    if !x.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let g = x.graph();
    let n = g.num_vertices();
    let lambda = g.spectral_radius();
    let iterate = |transpose: bool| -> Vec<f64> {
        let mut v = vec![1.0; n];
        for _ in 0..100_000 {
            let mut w = v.clone();
            for e in g.edges() {
                if transpose {
                    w[e.to] += v[e.from];
                } else {
                    w[e.from] += v[e.to];
                }
            }
            let norm: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= norm);
            let diff = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            if diff < 1e-16 {
                break;
            }
        }
        v
    };
    let r = iterate(false);
    let l = iterate(true);
    let mut probs: Vec<f64> = g.edges().iter().map(|e| r[e.to] / (lambda * r[e.from])).collect();
    for v in 0..n {
        let s: f64 = probs[g.out_range(v)].iter().sum();
        for p in &mut probs[g.out_range(v)] {
            *p /= s;
        }
    }
    let total: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
    let pi = l.iter().zip(&r).map(|(a, b)| a * b / total).collect();
    MarkovMeasure::new(Arc::new(x.clone()), probs, pi)
}

/// Bernoulli measure on the full shift with the given symbol weights.
pub fn bernoulli<S: Scalar>(weights: Vec<S>) -> Result<MarkovMeasure<S>> {
    let k = u8::try_from(weights.len()).map_err(|_| Error::InvalidParameter("too many symbols".into()))?;
    let x = SubshiftSpec::full_shift(k);
    MarkovMeasure::new(Arc::new(x), weights, vec![S::one()])
}

pub fn uniform_bernoulli(k: u8) -> MarkovMeasure<AlgebraicNumber> {
    bernoulli((0..k).map(|_| AlgebraicNumber::from_ratio(1, k as i64)).collect())
        .and_then(|m| m.with_potential(vec![AlgebraicNumber::from_int(1)], AlgebraicNumber::from_int(k as i64)))
        .expect("uniform weights")
}

/// Measure in whichever arithmetic it was constructed with.
#[derive(Clone, Debug)]
pub enum AnyMeasure {
    Exact(MarkovMeasure<AlgebraicNumber>),
    Float(MarkovMeasure<f64>),
}

impl AnyMeasure {
    /// Parry measure, exact when the spectral radius has a small minimal polynomial.
    pub fn parry(x: &SubshiftSpec) -> Result<AnyMeasure> {
        match parry_measure(x) {
            Ok(m) => Ok(AnyMeasure::Exact(m)),
            Err(Error::NotIrreducible) => Err(Error::NotIrreducible),
            Err(_) => parry_measure_f64(x).map(AnyMeasure::Float),
        }
    }

    pub fn shift(&self) -> &SubshiftSpec {
        match self {
            AnyMeasure::Exact(m) => m.shift(),
            AnyMeasure::Float(m) => m.shift(),
        }
    }

    pub fn to_f64(&self) -> MarkovMeasure<f64> {
        match self {
            AnyMeasure::Exact(m) => m.to_f64(),
            AnyMeasure::Float(m) => m.clone(),
        }
    }

    pub fn to_doc(&self) -> MeasureDoc {
        match self {
            AnyMeasure::Exact(m) => m.to_exact_doc(),
            AnyMeasure::Float(m) => m.to_doc(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(x: &SubshiftSpec, s: &str) -> Result<AnyMeasure> {
        let doc: MeasureDoc = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_doc(x, &doc)
    }

    pub fn from_doc(x: &SubshiftSpec, doc: &MeasureDoc) -> Result<AnyMeasure> {
        let g = x.graph();
        let names = x.vertex_names();
        let index: DetHashMap<&VertexId, usize> = names.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut slots: Vec<Option<&Value>> = vec![None; g.num_edges()];
        for e in &doc.edges {
            let (Some(&from), Some(&to)) = (index.get(&e.from), index.get(&e.to)) else {
                return Err(Error::Malformed(format!("unknown vertex in edge {}->{}", e.from, e.to)));
            };
            let i = g
                .out_range(from)
                .find(|&i| g.edge(i).to == to && g.edge(i).label == e.label)
                .ok_or_else(|| Error::Malformed(format!("no edge {}->{} labelled {}", e.from, e.to, e.label)))?;
            slots[i] = Some(&e.p);
        }
        let probs_raw: Vec<&Value> = slots
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Malformed("measure is missing edges".into()))?;
        let field = doc.field.as_ref().map(FieldDoc::to_field).transpose()?;
        let all_exact = doc.exact && probs_raw.iter().all(|v| !v.is_number()) && doc.pi.iter().all(|v| !v.is_number());
        let shift = Arc::new(x.clone());
        if all_exact {
            let probs = probs_raw.iter().map(|v| parse_exact(v, field.as_ref())).collect::<Result<Vec<_>>>()?;
            if doc.pi.is_empty() {
                MarkovMeasure::from_transitions(shift, probs).map(AnyMeasure::Exact)
            } else {
                let pi = doc.pi.iter().map(|v| parse_exact(v, field.as_ref())).collect::<Result<Vec<_>>>()?;
                MarkovMeasure::new(shift, probs, pi).map(AnyMeasure::Exact)
            }
        } else {
            let probs = probs_raw.iter().map(|v| parse_float(v)).collect::<Result<Vec<_>>>()?;
            if doc.pi.is_empty() {
                MarkovMeasure::from_transitions(shift, probs).map(AnyMeasure::Float)
            } else {
                let pi = doc.pi.iter().map(parse_float).collect::<Result<Vec<_>>>()?;
                MarkovMeasure::new(shift, probs, pi).map(AnyMeasure::Float)
            }
        }
    }
}

fn parse_exact(v: &Value, field: Option<&Arc<NumberField>>) -> Result<AlgebraicNumber> {
    match v {
        Value::String(s) => Ok(AlgebraicNumber::rational(parse_rational(s)?)),
        Value::Array(items) => {
            let f = field.ok_or_else(|| Error::Malformed("field element without a field".into()))?;
            let coeffs = items
                .iter()
                .map(|c| c.as_str().ok_or_else(|| Error::Malformed("coefficient must be a string".into())).and_then(parse_rational))
                .collect::<Result<Vec<_>>>()?;
            Ok(f.element(coeffs))
        }
        other => Err(Error::Malformed(format!("bad exact value {other}"))),
    }
}

fn parse_float(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Malformed(format!("bad number {n}"))),
        Value::String(s) => Ok(rat_to_f64(&parse_rational(s)?)),
        other => Err(Error::Malformed(format!("bad probability {other}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub edges: Vec<MeasureEdgeDoc>,
    #[serde(default)]
    pub pi: Vec<Value>,
    #[serde(default)]
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEdgeDoc {
    pub from: VertexId,
    pub to: VertexId,
    pub label: u8,
    pub p: Value,
}

/// Number field `Q(β)`: minimal polynomial (highest degree first) and an isolating interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDoc {
    pub min_poly: Vec<String>,
    pub root_interval: [String; 2],
}

impl FieldDoc {
    pub fn from_field(f: &NumberField) -> FieldDoc {
        let (lo, hi) = f.isolating_interval();
        FieldDoc {
            min_poly: f.min_poly().coeffs().iter().rev().map(format_rational).collect(),
            root_interval: [format_rational(&lo), format_rational(&hi)],
        }
    }

    pub fn to_field(&self) -> Result<Arc<NumberField>> {
        let mut c = self.min_poly.iter().map(|s| parse_rational(s)).collect::<Result<Vec<BigRational>>>()?;
        c.reverse();
        let lo = parse_rational(&self.root_interval[0])?;
        let hi = parse_rational(&self.root_interval[1])?;
        let mid = rat_to_f64(&((lo + hi) / BigRational::from_integer(2.into())));
        NumberField::new(&Poly::new(c), mid)
    }
}

/// Sort key for cylinders: measure, then word.
pub fn cmp_by_measure<S: Scalar>(a: &(S, Word), b: &(S, Word)) -> Ordering {
    a.0.cmp_value(&b.0).then_with(|| a.1.cmp(&b.1))
}
