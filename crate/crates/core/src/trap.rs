use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::Scalar;
use crate::error::{Error, Result};
use crate::hole::{make_overlapping, normalize_hole, normalize_to_length, quarter_split, union_measure, HoleSet, ShiftedCylinder};
use crate::measure::{GapThreshold, MarkovMeasure, MAX_LAG};
use crate::subshift::{contains, SubshiftSpec};
use crate::survivor::{verify_trap, FactorMatcher, TrapVerdict};
use crate::word::Word;

/// Hole sizes up to which the union measure of a new hole is recomputed independently.
pub const CROSS_CHECK_WORDS: usize = 4096;
/// Overlapping holes up to this many words get an exact union measure; larger ones up to
/// `FLOAT_OVERLAP_WORDS` a floating one.
pub const EXACT_OVERLAP_WORDS: usize = 64;
pub const FLOAT_OVERLAP_WORDS: usize = 4096;
const OVERLAP_SAMPLE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagRule {
    /// Least `ℓ` with `μ(σ^{-ℓ}C′ ∩ C″) >= c μ(C′) μ(C″)`.
    Aggregate,
    /// Least `ℓ` for which every pair satisfies the bound (`mixing_gap`).
    PerPair,
}

#[derive(Clone, Debug)]
pub struct TrapOptions<S> {
    pub c: S,
    pub lag_rule: LagRule,
    pub verify_each_step: bool,
    pub max_iterations: Option<usize>,
}

impl<S: Scalar> Default for TrapOptions<S> {
    fn default() -> Self {
        TrapOptions { c: S::from_ratio(1, 2), lag_rule: LagRule::Aggregate, verify_each_step: false, max_iterations: None }
    }
}

/// One pass `C_n -> C_{n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep<S> {
    pub n: usize,
    pub t: S,
    pub window: usize,
    pub words: usize,
    pub split: usize,
    pub first: S,
    pub second: S,
    pub lag: usize,
    pub intersection: S,
    pub next: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRecord {
    pub step: usize,
    pub pairs_checked: usize,
    pub all_pairs: bool,
    pub all_positive: bool,
    pub min_intersection: f64,
}

#[derive(Clone, Debug)]
pub struct TrapCertificate<S> {
    pub epsilon: S,
    pub c: S,
    pub lag_rule: LagRule,
    pub steps: Vec<TraceStep<S>>,
    /// `t_0, ..., t_n`.
    pub t: Vec<S>,
    pub window: usize,
    pub disjoint_words: Vec<Word>,
    pub hole: HoleSet,
    /// `Σ μ[w]` over the disjoint words, an upper bound for the measure of `hole`.
    pub measure: S,
    pub overlapped_measure: Option<f64>,
    pub overlap: OverlapRecord,
    pub verification: TrapVerdict,
}

impl<S: Scalar> TrapCertificate<S> {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// `t_{n+1} <= t_n - (c/16) t_n^2` at every step.
    pub fn recurrence_holds(&self) -> bool {
        let k = self.c.clone() * S::from_ratio(1, 16);
        self.t
            .windows(2)
            .all(|p| p[1].le(&(p[0].clone() - k.clone() * p[0].clone() * p[0].clone())))
    }

    /// `t_n <= (16/c) / (n + (16/c)/t_0)`, the closed form implied by the recurrence.
    pub fn decay_bound_holds(&self) -> bool {
        let a = S::from_ratio(16, 1) / self.c.clone();
        let t0 = self.t[0].clone();
        self.t.iter().enumerate().all(|(n, t)| {
            let bound = a.clone() / (S::from_ratio(n as i64, 1) + a.clone() / t0.clone());
            t.le(&bound)
        })
    }

    /// Failed certificate clauses, empty when the certificate is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.measure.lt(&self.epsilon) {
            out.push(format!("final measure {} is not below {}", self.measure, self.epsilon));
        }
        if self.t.last() != Some(&self.measure) {
            out.push("final measure differs from the last trace value".into());
        }
        if !self.recurrence_holds() {
            out.push("measure recurrence fails".into());
        }
        if !self.verification.is_trap() {
            out.push(format!("survivor set is nonempty, witness {:?}", self.verification.witness));
        }
        if !self.overlap.all_positive {
            out.push("some pair of cylinders meets in measure zero".into());
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "epsilon": self.epsilon.to_json(),
            "c": self.c.to_json(),
            "lag_rule": self.lag_rule,
            "iterations": self.iterations(),
            "measure": self.measure.to_json(),
            "measure_f64": self.measure.to_f64(),
            "overlapped_measure": self.overlapped_measure,
            "window": self.window,
            "trace": self.steps.iter().map(|s| json!({
                "n": s.n,
                "t": s.t.to_json(),
                "t_f64": s.t.to_f64(),
                "window": s.window,
                "words": s.words,
                "split": s.split,
                "first": s.first.to_json(),
                "second": s.second.to_json(),
                "lag": s.lag,
                "intersection": s.intersection.to_json(),
            })).collect::<Vec<_>>(),
            "t": self.t.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "recurrence_holds": self.recurrence_holds(),
            "decay_bound_holds": self.decay_bound_holds(),
            "overlap": self.overlap,
            "verification": self.verification,
            "hole": self.hole,
        })
    }

    /// `n,t_n` rows for plotting the decay.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("n,t_n\n");
        for (n, t) in self.t.iter().enumerate() {
            out.push_str(&format!("{},{}\n", n, t.to_f64()));
        }
        out
    }
}

/// Measures of `C′` words read from each vertex, stored on the trie of `C′` so that overlaps with
/// `C″` at any lag are sums over `C″`.
struct Absorber<S> {
    k: usize,
    children: Vec<u32>,
    weight: Vec<Vec<S>>,
}

impl<S: Scalar> Absorber<S> {
    fn new(mu: &MarkovMeasure<S>, words: &[&Word]) -> Absorber<S> {
        let g = mu.shift().graph();
        let k = mu.shift().alphabet_size() as usize;
        let mut children = vec![u32::MAX; k];
        let mut leaf = vec![false];
        for w in words {
            let mut node = 0usize;
            for &a in w.symbols() {
                let slot = node * k + a as usize;
                if children[slot] == u32::MAX {
                    children[slot] = leaf.len() as u32;
                    leaf.push(false);
                    children.extend(std::iter::repeat_n(u32::MAX, k));
                }
                node = children[slot] as usize;
            }
            leaf[node] = true;
        }
        let nv = g.num_vertices();
        let mut weight = vec![Vec::new(); leaf.len()];
        for node in (0..leaf.len()).rev() {
            weight[node] = if leaf[node] {
                vec![S::one(); nv]
            } else {
                (0..nv)
                    .map(|v| {
                        g.out_range(v).fold(S::zero(), |acc, i| {
                            let e = g.edge(i);
                            match children[node * k + e.label as usize] {
                                u32::MAX => acc,
                                c => acc + mu.probs()[i].clone() * weight[c as usize][e.to].clone(),
                            }
                        })
                    })
                    .collect()
            };
        }
        Absorber { k, children, weight }
    }

    fn find(&self, w: &[u8]) -> Option<usize> {
        w.iter().try_fold(0usize, |node, &a| match self.children[node * self.k + a as usize] {
            u32::MAX => None,
            c => Some(c as usize),
        })
    }
}

/// Mass of each `C″` word split by the vertex where it ends.
fn end_weights<S: Scalar>(mu: &MarkovMeasure<S>, w: &[u8]) -> Vec<(usize, S)> {
    let g = mu.shift().graph();
    (0..g.num_vertices())
        .filter_map(|s| {
            let mut v = s;
            let mut p = mu.pi()[s].clone();
            for &a in w {
                let i = g.out_range(v).find(|&i| g.edge(i).label == a)?;
                p = p * mu.probs()[i].clone();
                v = g.edge(i).to;
            }
            Some((v, p))
        })
        .collect()
}

/// `μ(σ^{-ℓ}C′ ∩ C″)` for equal-length words of length `n`, as a function of `ℓ`.
struct Intersections<'a, S: Scalar> {
    mu: &'a MarkovMeasure<S>,
    n: usize,
    absorber: Absorber<S>,
    second: Vec<(&'a Word, Vec<(usize, S)>)>,
}

impl<'a, S: Scalar> Intersections<'a, S> {
    fn new(mu: &'a MarkovMeasure<S>, first: &[&'a Word], second: &[&'a Word], n: usize) -> Self {
        Intersections {
            mu,
            n,
            absorber: Absorber::new(mu, first),
            second: second.iter().map(|w| (*w, end_weights(mu, w.symbols()))).collect(),
        }
    }

    fn overlap(&self, lag: usize) -> S {
        let mut acc = S::zero();
        for (w, ends) in &self.second {
            if let Some(node) = self.absorber.find(&w.symbols()[lag..]) {
                for (e, p) in ends {
                    acc = acc + p.clone() * self.absorber.weight[node][*e].clone();
                }
            }
        }
        acc
    }

    fn end_distribution(&self) -> Vec<S> {
        let mut d = vec![S::zero(); self.mu.pi().len()];
        for (_, ends) in &self.second {
            for (e, p) in ends {
                d[*e] = d[*e].clone() + p.clone();
            }
        }
        d
    }

    fn absorb(&self, d: &[S]) -> S {
        d.iter().zip(&self.absorber.weight[0]).fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }

    fn at(&self, lag: usize) -> S {
        if lag < self.n {
            self.overlap(lag)
        } else {
            self.absorb(&self.mu.advance(&self.end_distribution(), lag - self.n))
        }
    }

    /// Least `ℓ >= 1` with intersection at least `target`.
    fn first_reaching(&self, target: &S) -> Result<(usize, S)> {
        for lag in 1..self.n {
            let v = self.overlap(lag);
            if !v.lt(target) {
                return Ok((lag, v));
            }
        }
        let mut d = self.end_distribution();
        for lag in self.n.max(1)..=MAX_LAG {
            let v = self.absorb(&d);
            if !v.lt(target) {
                return Ok((lag, v));
            }
            d = self.mu.step(&d);
        }
        Err(Error::PeriodicChain)
    }
}

/// Builds a complete trap of measure below `epsilon` by the halving iteration
/// `C_{n+1} = σ^{-ℓ}C′_n ∪ C″_n`, then spreads its cylinders so all pairs overlap.
pub fn synthesize_trap<S: Scalar>(mu: &MarkovMeasure<S>, epsilon: &S, options: &TrapOptions<S>) -> Result<TrapCertificate<S>> {
    if !epsilon.is_positive() || S::one().lt(epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in (0, 1]")));
    }
    if !options.c.is_positive() || !options.c.lt(&S::one()) {
        return Err(Error::InvalidParameter(format!("c = {} must lie in (0, 1)", options.c)));
    }
    mu.ensure_mixing()?;
    let x = mu.shift();
    let cap = options
        .max_iterations
        .unwrap_or_else(|| 10 * (32.0 / epsilon.to_f64()).ceil() as usize);
    let symbols: Vec<Word> = (0..x.alphabet_size())
        .filter(|&a| x.is_admissible(&[a]))
        .map(|a| Word(vec![a]))
        .collect();
    let mut hole = HoleSet::from_words(symbols, 0)?;
    let mut t = S::sum(&hole.words().map(|w| mu.word_measure(w.symbols())).collect::<Vec<_>>());
    let mut ts = vec![t.clone()];
    let mut steps = Vec::new();
    let half = S::from_ratio(1, 2);
    while !t.lt(epsilon) {
        if steps.len() >= cap {
            return Err(Error::BudgetExceeded(format!("no trap below {epsilon} after {cap} iterations")));
        }
        let norm = normalize_hole(mu, &hole, &(t.clone() * half.clone()))?;
        if !norm.total().approx_eq(&t, 1e-9) {
            return Err(Error::InvariantViolated(format!("normalized measure {} differs from {}", norm.total(), t)));
        }
        let mut order: Vec<usize> = (0..norm.words.len()).collect();
        order.sort_by(|&i, &j| norm.measures[i].cmp_value(&norm.measures[j]).then_with(|| norm.words[i].cmp(&norm.words[j])));
        let weights: Vec<S> = order.iter().map(|&i| norm.measures[i].clone()).collect();
        let k = quarter_split(&weights)?;
        let first: Vec<&Word> = order[..k].iter().map(|&i| &norm.words[i]).collect();
        let second: Vec<&Word> = order[k..].iter().map(|&i| &norm.words[i]).collect();
        let m1 = S::sum(&weights[..k]);
        let m2 = S::sum(&weights[k..]);
        let target = options.c.clone() * m1.clone() * m2.clone();
        let inter = Intersections::new(mu, &first, &second, norm.length);
        let (lag, meet) = match options.lag_rule {
            LagRule::Aggregate => inter.first_reaching(&target)?,
            LagRule::PerPair => {
                let a: Vec<Word> = first.iter().map(|w| (*w).clone()).collect();
                let b: Vec<Word> = second.iter().map(|w| (*w).clone()).collect();
                let lag = mu.mixing_gap_pairs(&a, &b, &GapThreshold::Fraction(options.c.clone()))?;
                let meet = inter.at(lag);
                if meet.lt(&target) {
                    return Err(Error::InvariantViolated(format!("pairwise lag {lag} misses the aggregate bound")));
                }
                (lag, meet)
            }
        };
        let mut cylinders: Vec<ShiftedCylinder> = first.iter().map(|w| ShiftedCylinder::new((*w).clone(), lag)).collect();
        cylinders.extend(second.iter().map(|w| ShiftedCylinder::new((*w).clone(), 0)));
        let next_hole = HoleSet::new(cylinders)?;
        let next = m1.clone() + m2.clone() - meet.clone();
        if norm.words.len() <= CROSS_CHECK_WORDS {
            let direct = union_measure(mu, &next_hole);
            if !direct.approx_eq(&next, 1e-9) {
                return Err(Error::InvariantViolated(format!("union measure {direct} differs from {next}")));
            }
        }
        let bound = t.clone() - options.c.clone() * S::from_ratio(1, 16) * t.clone() * t.clone();
        if !next.le(&bound) {
            return Err(Error::InvariantViolated(format!("t = {next} exceeds the recurrence bound {bound}")));
        }
        if options.verify_each_step && !verify_trap(x, &next_hole)?.is_trap() {
            return Err(Error::InvariantViolated(format!("C_{} is not a complete trap", steps.len() + 1)));
        }
        steps.push(TraceStep {
            n: steps.len(),
            t: t.clone(),
            window: norm.length,
            words: norm.words.len(),
            split: k,
            first: m1,
            second: m2,
            lag,
            intersection: meet,
            next: next.clone(),
        });
        hole = next_hole;
        t = next;
        ts.push(t.clone());
    }
    let window = hole.window();
    let disjoint_words = normalize_to_length(x, &hole, window)?;
    let measure = S::sum(&disjoint_words.iter().map(|w| mu.word_measure(w.symbols())).collect::<Vec<_>>());
    if !measure.approx_eq(&t, 1e-9) {
        return Err(Error::InvariantViolated(format!("final disjoint measure {measure} differs from {t}")));
    }
    let overlapping = make_overlapping(x, &disjoint_words)?;
    let overlap = overlap_record(mu, &disjoint_words, overlapping.step);
    let overlapped_measure = if disjoint_words.len() <= EXACT_OVERLAP_WORDS {
        Some(union_measure(mu, &overlapping.hole).to_f64())
    } else if disjoint_words.len() <= FLOAT_OVERLAP_WORDS {
        Some(union_measure(&mu.to_f64(), &overlapping.hole))
    } else {
        None
    };
    let verification = verify_trap(x, &overlapping.hole)?;
    Ok(TrapCertificate {
        epsilon: epsilon.clone(),
        c: options.c.clone(),
        lag_rule: options.lag_rule,
        steps,
        t: ts,
        window,
        disjoint_words,
        hole: overlapping.hole,
        measure: t,
        overlapped_measure,
        overlap,
        verification,
    })
}

/// Checks `μ(σ^{-r_i}[w_i] ∩ σ^{-r_j}[w_j]) > 0` on all pairs of a small hole, or on a fixed
/// pseudo-random sample of pairs of a large one.
fn overlap_record<S: Scalar>(mu: &MarkovMeasure<S>, words: &[Word], step: usize) -> OverlapRecord {
    let f = mu.to_f64();
    let n = words.len();
    let pairs: Vec<(usize, usize)> = if n <= EXACT_OVERLAP_WORDS {
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (0..OVERLAP_SAMPLE)
            .map(|_| {
                let i = rng.random_range(0..n);
                let j = (i + rng.random_range(1..n)) % n;
                (i, j)
            })
            .collect()
    };
    let all_pairs = pairs.len() == n * (n - 1);
    let mut min = f64::INFINITY;
    for &(i, j) in &pairs {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let lag = step * (hi - lo);
        let v = f.correlation(words[hi].symbols(), words[lo].symbols(), lag);
        min = min.min(v);
    }
    OverlapRecord {
        step,
        pairs_checked: pairs.len(),
        all_pairs,
        all_positive: min > 0.0 || pairs.is_empty(),
        min_intersection: if pairs.is_empty() { 0.0 } else { min },
    }
}

#[derive(Clone, Debug)]
pub struct LargeHoleOptions {
    pub even_shift: bool,
    /// Fixed word length `n`; by default the least `n` meeting the measure target.
    pub word_length: Option<usize>,
    pub depth: usize,
    pub max_word_length: usize,
}

impl Default for LargeHoleOptions {
    fn default() -> Self {
        LargeHoleOptions { even_shift: false, word_length: None, depth: 20, max_word_length: 24 }
    }
}

#[derive(Clone, Debug)]
pub struct LargeHoleCertificate<S> {
    pub epsilon: S,
    pub word_length: usize,
    /// `μ(Σ′_n)`, the cylinders of `L_n(X) \ L_n(Y)`.
    pub complement_measure: S,
    pub complement_words: usize,
    pub w_star: Word,
    pub w_star_measure: S,
    pub lag: usize,
    pub hole: HoleSet,
    pub measure: S,
    pub meets_target: bool,
    pub depth: usize,
    pub contained: bool,
    pub x_entropy: f64,
    pub y_entropy: f64,
    pub survivor_entropy: f64,
}

impl<S: Scalar> LargeHoleCertificate<S> {
    pub fn to_json(&self) -> Value {
        json!({
            "epsilon": self.epsilon.to_json(),
            "word_length": self.word_length,
            "complement_measure": self.complement_measure.to_json(),
            "complement_measure_f64": self.complement_measure.to_f64(),
            "complement_words": self.complement_words,
            "w_star": self.w_star,
            "w_star_measure": self.w_star_measure.to_json(),
            "lag": self.lag,
            "measure": self.measure.to_json(),
            "measure_f64": self.measure.to_f64(),
            "meets_target": self.meets_target,
            "depth": self.depth,
            "contained": self.contained,
            "x_entropy": self.x_entropy,
            "y_entropy": self.y_entropy,
            "survivor_entropy": self.survivor_entropy,
            "hole": self.hole,
        })
    }
}

/// `μ(Σ′_n)` and the words of `Σ′_n = L_n(X) \ L_n(Y)` with their measures.
pub fn complement_cylinders<S: Scalar>(mu: &MarkovMeasure<S>, y: &SubshiftSpec, n: usize) -> (S, Vec<(S, Word)>) {
    let mut out = Vec::new();
    mu.shift().for_each_word(n, |w| {
        if !y.is_admissible(w) {
            out.push((mu.word_measure(w), Word::from(w)));
        }
    });
    let total = S::sum(&out.iter().map(|(m, _)| m.clone()).collect::<Vec<_>>());
    (total, out)
}

/// Large hole `G = (Σ′_n \ [w*]) ∪ σ^{-K}[w*]` with `μ(G) > 1 - ε` whose survivor set contains `Y`.
pub fn construct_large_hole<S: Scalar>(
    mu: &MarkovMeasure<S>,
    y: &SubshiftSpec,
    epsilon: &S,
    options: &LargeHoleOptions,
) -> Result<LargeHoleCertificate<S>> {
    let x = mu.shift();
    if !epsilon.is_positive() {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    if y.alphabet_size() != x.alphabet_size() {
        return Err(Error::InvalidParameter("X and Y use different alphabets".into()));
    }
    let c = contains(x, y, options.depth);
    if !c.contained {
        return Err(Error::NotASubshiftOfX(c.witness.map(|w| w.to_string()).unwrap_or_default()));
    }
    let (hx, hy) = (x.entropy(), y.entropy());
    if hy >= hx - 1e-9 {
        return Err(Error::EntropyNotSmaller);
    }
    if hy <= 1e-12 {
        return Err(Error::InvalidParameter("Y must have positive entropy".into()));
    }
    let target = S::one() - epsilon.clone();
    let pick = |n: usize| -> Option<(S, usize, S, Word)> {
        let (total, words) = complement_cylinders(mu, y, n);
        let (m, w) = words.iter().min_by(|a, b| a.0.cmp_value(&b.0).then_with(|| a.1.cmp(&b.1)))?.clone();
        Some((total, words.len(), m, w))
    };
    let (n, (total, count, w_star_measure, w_star)) = match options.word_length {
        Some(n) => (n, pick(n).ok_or_else(|| Error::InvalidParameter(format!("L_{n}(X) = L_{n}(Y)")))?),
        None => {
            let mut found = None;
            for n in 1..=options.max_word_length {
                if let Some(p) = pick(n) {
                    if target.lt(&(p.0.clone() - p.2.clone())) {
                        found = Some((n, p));
                        break;
                    }
                }
            }
            found.ok_or_else(|| Error::BudgetExceeded(format!("no word length up to {} reaches the target", options.max_word_length)))?
        }
    };
    let (_, words) = complement_cylinders(mu, y, n);
    let others: Vec<Word> = words.into_iter().map(|(_, w)| w).filter(|w| *w != w_star).collect();
    let f = mu.to_f64();
    let step = if options.even_shift { 2 } else { 1 };
    let lag = (1..=512)
        .map(|i| i * step)
        .take_while(|&k| k <= 512)
        .find(|&k| others.iter().all(|w| f.correlation(w_star.symbols(), w.symbols(), k) > 0.0))
        .ok_or(Error::PeriodicChain)?;
    let mut cylinders: Vec<ShiftedCylinder> = others.into_iter().map(|w| ShiftedCylinder::new(w, 0)).collect();
    cylinders.push(ShiftedCylinder::new(w_star.clone(), lag));
    let hole = HoleSet::new(cylinders)?;
    let measure = union_measure(mu, &hole);
    let contained = survives(y, &hole, options.depth);
    let survivor_entropy = crate::survivor::survivor_entropy(x, &hole);
    if contained && survivor_entropy < hy - 1e-9 {
        return Err(Error::InvariantViolated(format!("survivor entropy {survivor_entropy} below h(Y) = {hy}")));
    }
    Ok(LargeHoleCertificate {
        meets_target: target.lt(&measure),
        epsilon: epsilon.clone(),
        word_length: n,
        complement_measure: total,
        complement_words: count,
        w_star,
        w_star_measure,
        lag,
        hole,
        measure,
        depth: options.depth,
        contained,
        x_entropy: hx,
        y_entropy: hy,
        survivor_entropy,
    })
}

/// Whether no word of `L_m(Y)`, `m <= depth`, contains a hole word.
pub fn survives(y: &SubshiftSpec, hole: &HoleSet, depth: usize) -> bool {
    let matcher = FactorMatcher::new(y.alphabet_size(), hole.words());
    let g = y.graph();
    let mut stack: Vec<(crate::graph::VertexSet, u32, usize)> = vec![(g.all_vertices(), 0, 0)];
    while let Some((set, state, len)) = stack.pop() {
        if len == depth {
            continue;
        }
        for a in 0..y.alphabet_size() {
            let next = g.step_set(&set, a);
            if next.is_empty() {
                continue;
            }
            let s = matcher.step(state, a);
            if matcher.is_hit(s) {
                return false;
            }
            stack.push((next, s, len + 1));
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraicNumber;
    use crate::measure::{parry_measure, uniform_bernoulli};

    fn q(n: i64, d: i64) -> AlgebraicNumber {
        AlgebraicNumber::from_ratio(n, d)
    }

    fn golden() -> SubshiftSpec {
        SubshiftSpec::build_sft(2, &["11".parse().unwrap()]).unwrap()
    }

    #[test]
    fn bernoulli_trap_small_iteration() {
        let mu = uniform_bernoulli(2);
        let opts = TrapOptions { verify_each_step: true, ..TrapOptions::default() };
        let cert = synthesize_trap(&mu, &q(9, 10), &opts).unwrap();
        assert!(cert.violations().is_empty(), "{:?}", cert.violations());
        assert!(cert.decay_bound_holds());
        assert_eq!(cert.t[0], q(1, 1));
        for s in &cert.steps {
            assert_eq!(s.next, s.first.clone() + s.second.clone() - s.intersection.clone());
        }
    }

    #[test]
    fn epsilon_one_runs_one_iteration_and_out_of_range_fails() {
        let mu = uniform_bernoulli(2);
        let cert = synthesize_trap(&mu, &q(1, 1), &TrapOptions::default()).unwrap();
        assert_eq!(cert.iterations(), 1);
        assert!(matches!(synthesize_trap(&mu, &q(11, 10), &TrapOptions::default()), Err(Error::InvalidParameter(_))));
        assert!(matches!(synthesize_trap(&mu, &q(0, 1), &TrapOptions::default()), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn per_pair_rule_on_golden() {
        let mu = parry_measure(&golden()).unwrap();
        let opts = TrapOptions { lag_rule: LagRule::PerPair, ..TrapOptions::default() };
        let cert = synthesize_trap(&mu, &q(9, 10), &opts).unwrap();
        assert!(cert.violations().is_empty(), "{:?}", cert.violations());
    }

    #[test]
    fn intersections_match_correlations() {
        let mu = parry_measure(&golden()).unwrap();
        let ws: Vec<Word> = ["000", "001", "010", "100", "101"].iter().map(|s| s.parse().unwrap()).collect();
        let first: Vec<&Word> = ws[..2].iter().collect();
        let second: Vec<&Word> = ws[2..].iter().collect();
        let inter = Intersections::new(&mu, &first, &second, 3);
        for lag in 1..8 {
            let direct = first.iter().flat_map(|a| second.iter().map(move |b| (a, b))).fold(q(0, 1), |acc, (a, b)| {
                acc + mu.correlation(a.symbols(), b.symbols(), lag)
            });
            assert_eq!(inter.at(lag), direct, "lag {lag}");
        }
    }

    #[test]
    fn large_hole_golden_in_full_shift() {
        let mu = uniform_bernoulli(2);
        let (m5, _) = complement_cylinders(&mu, &golden(), 5);
        assert_eq!(m5, q(19, 32));
        let (m10, _) = complement_cylinders(&mu, &golden(), 10);
        assert_eq!(m10, q(880, 1024));
        let opts = LargeHoleOptions { word_length: Some(10), ..LargeHoleOptions::default() };
        let cert = construct_large_hole(&mu, &golden(), &q(1, 5), &opts).unwrap();
        assert!(cert.meets_target);
        assert!(cert.contained);
        assert!(cert.survivor_entropy >= golden().entropy() - 1e-9);
        assert!(construct_large_hole(&mu, &SubshiftSpec::full_shift(2), &q(1, 5), &opts).unwrap_err() == Error::EntropyNotSmaller);
    }
}
