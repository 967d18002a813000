use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::Scalar;
use crate::error::{Error, Result};
use crate::graph::{DetHashMap, LabeledGraph, VertexSet};
use crate::measure::{positivity_gap, MarkovMeasure};
use crate::subshift::SubshiftSpec;
use crate::word::Word;

/// Upper limit on the number of words produced by a normalization.
pub const MAX_NORMALIZED_WORDS: usize = 1 << 22;
/// Upper limit on the window length tried by `normalize_hole`.
pub const MAX_NORMALIZED_LENGTH: usize = 4096;

/// `σ^{-shift}[word]`: the coordinates `shift+1 ..= shift+|word|` spell `word`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShiftedCylinder {
    pub word: Word,
    pub shift: usize,
}

impl ShiftedCylinder {
    pub fn new(word: Word, shift: usize) -> Self {
        ShiftedCylinder { word, shift }
    }

    pub fn end(&self) -> usize {
        self.shift + self.word.len()
    }

    /// Membership of a one-sided sequence given by a prefix of length at least `end()`.
    pub fn contains(&self, seq: &[u8]) -> bool {
        seq.get(self.shift..self.end()) == Some(self.word.symbols())
    }
}

/// Finite union of shifted cylinders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleSet {
    cylinders: Vec<ShiftedCylinder>,
}

impl HoleSet {
    pub fn new(cylinders: Vec<ShiftedCylinder>) -> Result<HoleSet> {
        if cylinders.is_empty() {
            return Err(Error::InvalidParameter("hole has no cylinders".into()));
        }
        Ok(HoleSet { cylinders })
    }

    pub fn from_words(words: impl IntoIterator<Item = Word>, shift: usize) -> Result<HoleSet> {
        HoleSet::new(words.into_iter().map(|w| ShiftedCylinder::new(w, shift)).collect())
    }

    /// Cylinders anchored at arbitrary integer start coordinates, recentred so the smallest
    /// shift is zero.
    pub fn from_anchored(items: Vec<(Word, i64)>) -> Result<HoleSet> {
        let base = items.iter().map(|(_, s)| *s).min().unwrap_or(0);
        HoleSet::new(
            items
                .into_iter()
                .map(|(w, s)| ShiftedCylinder::new(w, (s - base) as usize))
                .collect(),
        )
    }

    pub fn cylinders(&self) -> &[ShiftedCylinder] {
        &self.cylinders
    }

    pub fn len(&self) -> usize {
        self.cylinders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    /// Length of the coordinate window covering every cylinder.
    pub fn window(&self) -> usize {
        self.cylinders.iter().map(ShiftedCylinder::end).max().unwrap_or(0)
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.cylinders.iter().map(|c| &c.word)
    }

    pub fn validate(&self, x: &SubshiftSpec) -> Result<()> {
        for c in &self.cylinders {
            c.word.check_alphabet(x.alphabet_size() as usize)?;
            if !x.is_admissible(c.word.symbols()) {
                return Err(Error::InadmissibleWord(c.word.to_string()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, seq: &[u8]) -> bool {
        self.cylinders.iter().any(|c| c.contains(seq))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<HoleSet> {
        let h: HoleSet = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        HoleSet::new(h.cylinders)
    }
}

/// Hole rewritten as a disjoint union of cylinders `[w]`, all of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized<S> {
    pub length: usize,
    pub words: Vec<Word>,
    pub measures: Vec<S>,
}

impl<S: Scalar> Normalized<S> {
    pub fn total(&self) -> S {
        S::sum(&self.measures)
    }

    pub fn hole(&self) -> Result<HoleSet> {
        HoleSet::from_words(self.words.iter().cloned(), 0)
    }
}

/// Words `u ∈ L_n(X)` with `[u] ⊂ hole`, i.e. the hole restricted to the window `1..=n`, sorted.
pub fn normalize_to_length(x: &SubshiftSpec, hole: &HoleSet, n: usize) -> Result<Vec<Word>> {
    if n < hole.window() {
        return Err(Error::InvalidParameter(format!(
            "normalization length {n} is shorter than the hole window {}",
            hole.window()
        )));
    }
    hole.validate(x)?;
    let mut out: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut overflow = false;
    for c in hole.cylinders() {
        for_each_extension(x, c, n, &mut |w| {
            out.insert(w.to_vec());
            if out.len() > MAX_NORMALIZED_WORDS {
                overflow = true;
            }
            !overflow
        });
        if overflow {
            return Err(Error::BudgetExceeded(format!("normalization exceeds {MAX_NORMALIZED_WORDS} words")));
        }
    }
    Ok(out.into_iter().map(Word).collect())
}

/// Calls `f` on every `u ∈ L_n(X)` with `u` spelling the cylinder word at its shift, stopping
/// early when `f` returns false.
pub fn for_each_extension(x: &SubshiftSpec, c: &ShiftedCylinder, n: usize, f: &mut impl FnMut(&[u8]) -> bool) {
    let start = x.start_set(c.word.symbols());
    if start.is_empty() || c.end() > n {
        return;
    }
    let mut buf = vec![0u8; n];
    buf[c.shift..c.end()].copy_from_slice(c.word.symbols());
    let k = x.alphabet_size();

    fn forward(x: &SubshiftSpec, k: u8, buf: &mut [u8], pos: usize, set: &VertexSet, f: &mut impl FnMut(&[u8]) -> bool) -> bool {
        if pos == buf.len() {
            return f(buf);
        }
        for a in 0..k {
            let next = x.graph().step_set(set, a);
            if !next.is_empty() {
                buf[pos] = a;
                if !forward(x, k, buf, pos + 1, &next, f) {
                    return false;
                }
            }
        }
        true
    }

    fn backward(x: &SubshiftSpec, k: u8, buf: &mut [u8], pos: usize, end: usize, set: &VertexSet, f: &mut impl FnMut(&[u8]) -> bool) -> bool {
        let g = x.graph();
        if pos == 0 {
            let ends = x.end_set(&buf[..end]);
            return forward(x, k, buf, end, &ends, f);
        }
        for a in 0..k {
            let mut prev = VertexSet::new(g.num_vertices());
            for t in set.iter() {
                for &i in g.in_edge_ids(t) {
                    let e = g.edge(i);
                    if e.label == a {
                        prev.insert(e.from);
                    }
                }
            }
            if !prev.is_empty() {
                buf[pos - 1] = a;
                if !backward(x, k, buf, pos - 1, end, &prev, f) {
                    return false;
                }
            }
        }
        true
    }

    backward(x, k, &mut buf, c.shift, c.end(), &start, f);
}

/// Disjoint equal-length form of `hole` in which every cylinder has measure below `bound`,
/// using the shortest such length not below the hole window.
pub fn normalize_hole<S: Scalar>(mu: &MarkovMeasure<S>, hole: &HoleSet, bound: &S) -> Result<Normalized<S>> {
    if !bound.is_positive() {
        return Err(Error::InvalidParameter("normalization bound must be positive".into()));
    }
    let x = mu.shift();
    let w = hole.window();
    let attempt = |n: usize| -> Result<Option<Normalized<S>>> {
        let words = normalize_to_length(x, hole, n)?;
        let mut measures = Vec::with_capacity(words.len());
        for word in &words {
            let m = mu.word_measure(word.symbols());
            if !m.lt(bound) {
                return Ok(None);
            }
            measures.push(m);
        }
        Ok(Some(Normalized { length: n, words, measures }))
    };
    let mut failed = None;
    let mut step = 0usize;
    let (mut hi, mut best) = loop {
        let n = w + step;
        if n > MAX_NORMALIZED_LENGTH {
            return Err(Error::BudgetExceeded(format!("no normalization up to length {MAX_NORMALIZED_LENGTH}")));
        }
        if let Some(r) = attempt(n)? {
            break (n, r);
        }
        failed = Some(n);
        step = if step == 0 { 1 } else { step * 2 };
    };
    let mut lo = failed.map_or(hi, |f| f + 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        match attempt(mid)? {
            Some(r) => {
                hi = mid;
                best = r;
            }
            None => lo = mid + 1,
        }
    }
    Ok(best)
}

/// Index `k` splitting ascending weights into `x_1..x_k` and `x_{k+1}..x_n`, each carrying at
/// least a quarter of the total: `k = 1` when `x_1` alone does, else the shortest such prefix.
pub fn quarter_split<S: Scalar>(weights: &[S]) -> Result<usize> {
    if weights.len() < 2 {
        return Err(Error::PreconditionViolated("quarter split needs at least two weights".into()));
    }
    let total = S::sum(weights);
    let half = total.clone() * S::from_ratio(1, 2);
    let quarter = total.clone() * S::from_ratio(1, 4);
    if let Some(w) = weights.iter().find(|w| w.cmp_value(&half).is_gt() || !w.is_positive()) {
        return Err(Error::PreconditionViolated(format!("weight {w} is not in (0, 1/2] of the total")));
    }
    if weights.windows(2).any(|p| p[1].lt(&p[0])) {
        return Err(Error::PreconditionViolated("weights must be sorted ascending".into()));
    }
    let mut prefix = S::zero();
    for (i, w) in weights.iter().enumerate() {
        prefix = prefix + w.clone();
        if !prefix.lt(&quarter) {
            let k = i + 1;
            if (total.clone() - prefix).lt(&quarter) || k == weights.len() {
                return Err(Error::InvariantViolated("quarter split complement below 1/4".into()));
            }
            return Ok(k);
        }
    }
    Err(Error::InvariantViolated("weights do not reach a quarter".into()))
}

/// Overlapping form of a disjoint hole: cylinder `i` (from 1) moved to shift `step * i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlapping {
    pub hole: HoleSet,
    pub step: usize,
}

/// Places `words[i]` at shift `M * (i + 1)`, where `M` is the least lag from which every pair of
/// cylinders meets in positive measure at every larger lag.
pub fn make_overlapping(x: &SubshiftSpec, words: &[Word]) -> Result<Overlapping> {
    if words.is_empty() {
        return Err(Error::InvalidParameter("hole has no cylinders".into()));
    }
    let step = positivity_gap(x, words, words)?;
    let hole = HoleSet::new(
        words
            .iter()
            .enumerate()
            .map(|(i, w)| ShiftedCylinder::new(w.clone(), step * (i + 1)))
            .collect(),
    )?;
    Ok(Overlapping { hole, step })
}

const DEAD: u32 = u32::MAX;

struct Trie {
    k: usize,
    children: Vec<u32>,
    terminal: Vec<bool>,
}

impl Trie {
    fn new(k: usize) -> Trie {
        Trie { k, children: vec![DEAD; k], terminal: vec![false] }
    }

    fn insert(&mut self, w: &[u8]) {
        let mut node = 0usize;
        for &a in w {
            let slot = node * self.k + a as usize;
            if self.children[slot] == DEAD {
                self.children[slot] = self.terminal.len() as u32;
                self.terminal.push(false);
                self.children.extend(std::iter::repeat_n(DEAD, self.k));
            }
            node = self.children[slot] as usize;
        }
        self.terminal[node] = true;
    }

    fn child(&self, node: u32, a: u8) -> u32 {
        self.children[node as usize * self.k + a as usize]
    }
}

struct Group {
    shift: usize,
    end: usize,
    trie: Trie,
}

/// Exact measure of a finite union of shifted cylinders: the complement is propagated position by
/// position, tracking the presentation vertex and, for every group of cylinders sharing a shift,
/// the trie node of the symbols read since that shift.
pub fn union_measure<S: Scalar>(mu: &MarkovMeasure<S>, hole: &HoleSet) -> S {
    let x = mu.shift();
    let g = x.graph();
    let k = x.alphabet_size() as usize;
    let mut by_shift: std::collections::BTreeMap<usize, Vec<&Word>> = Default::default();
    for c in hole.cylinders() {
        by_shift.entry(c.shift).or_default().push(&c.word);
    }
    let groups: Vec<Group> = by_shift
        .into_iter()
        .map(|(shift, ws)| {
            let mut trie = Trie::new(k);
            for w in &ws {
                trie.insert(w.symbols());
            }
            let end = shift + ws.iter().map(|w| w.len()).max().unwrap_or(0);
            Group { shift, end, trie }
        })
        .collect();
    if groups.iter().any(|gr| gr.trie.terminal[0]) {
        return S::one();
    }
    let window = hole.window();
    let n = g.num_vertices();
    if mu.potential().is_some() {
        // Perron form: count surviving paths by (start, end) vertex and weigh them once
        let start = (0..n).map(|v| {
            let mut c = vec![BigUint::zero(); n];
            c[v] = BigUint::one();
            (v, c)
        });
        let paths = complement_walk(g, &groups, window, start, |c, _| c.clone(), |acc, c| {
            acc.iter_mut().zip(c).for_each(|(a, b)| *a += b)
        });
        let mut ends = vec![vec![BigUint::zero(); n]; n];
        for (key, c) in paths {
            for (v0, m) in c.into_iter().enumerate() {
                ends[v0][key[0] as usize] += m;
            }
        }
        let survivors = mu.perron_mass(&ends, window).expect("Perron form");
        return S::one() - survivors;
    }
    let start = mu.pi().iter().cloned().enumerate();
    let probs = mu.probs();
    let states = complement_walk(g, &groups, window, start, |m, i| m.clone() * probs[i].clone(), |acc, m| {
        *acc = acc.clone() + m
    });
    let survivors = states.into_values().fold(S::zero(), |acc, m| acc + m);
    S::one() - survivors
}

/// Weights of the paths of length `window` avoiding every group, keyed by the end vertex followed
/// by the trie nodes of the groups still open.
fn complement_walk<W: Clone>(
    g: &LabeledGraph,
    groups: &[Group],
    window: usize,
    start: impl Iterator<Item = (usize, W)>,
    along: impl Fn(&W, usize) -> W,
    merge: impl Fn(&mut W, W),
) -> DetHashMap<Vec<u32>, W> {
    let mut states: DetHashMap<Vec<u32>, W> = start.map(|(v, w)| (vec![v as u32], w)).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut next_group = 0usize;
    let add = |map: &mut DetHashMap<Vec<u32>, W>, key: Vec<u32>, w: W| match map.get_mut(&key) {
        Some(acc) => merge(acc, w),
        None => {
            map.insert(key, w);
        }
    };
    for pos in 0..window {
        while next_group < groups.len() && groups[next_group].shift == pos {
            active.push(next_group);
            next_group += 1;
            states = states
                .into_iter()
                .map(|(mut key, m)| {
                    key.push(0);
                    (key, m)
                })
                .collect();
        }
        let mut next: DetHashMap<Vec<u32>, W> = DetHashMap::default();
        for (key, mass) in states {
            let v = key[0] as usize;
            'edges: for i in g.out_range(v) {
                let e = g.edge(i);
                let mut nk = Vec::with_capacity(key.len());
                nk.push(e.to as u32);
                for (slot, &gi) in active.iter().enumerate() {
                    let node = key[slot + 1];
                    let child = if node == DEAD { DEAD } else { groups[gi].trie.child(node, e.label) };
                    if child != DEAD && groups[gi].trie.terminal[child as usize] {
                        continue 'edges;
                    }
                    nk.push(child);
                }
                add(&mut next, nk, along(&mass, i));
            }
        }
        let keep: Vec<bool> = active.iter().map(|&gi| groups[gi].end > pos + 1).collect();
        if keep.iter().all(|&b| b) {
            states = next;
        } else {
            states = DetHashMap::default();
            for (key, m) in next {
                let mut nk = vec![key[0]];
                nk.extend(key[1..].iter().zip(&keep).filter(|(_, &k)| k).map(|(&n, _)| n));
                add(&mut states, nk, m);
            }
            active = active.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(g, _)| g).collect();
        }
    }
    states
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraicNumber;
    use crate::measure::{bernoulli, parry_measure, uniform_bernoulli};

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn words(ss: &[&str]) -> Vec<Word> {
        ss.iter().map(|s| w(s)).collect()
    }

    fn q(n: i64, d: i64) -> AlgebraicNumber {
        AlgebraicNumber::from_ratio(n, d)
    }

    fn golden() -> SubshiftSpec {
        SubshiftSpec::build_sft(2, &[w("11")]).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let full = SubshiftSpec::full_shift(2);
        let hole = HoleSet::new(vec![ShiftedCylinder::new(w("0"), 1), ShiftedCylinder::new(w("11"), 0)]).unwrap();
        let n = normalize_to_length(&full, &hole, 3).unwrap();
        assert_eq!(n, words(&["000", "001", "100", "101", "110", "111"]));
        let g = golden();
        let one = HoleSet::from_words([w("1")], 0).unwrap();
        assert_eq!(normalize_to_length(&g, &one, 2).unwrap(), words(&["10"]));
        let mu = uniform_bernoulli(2);
        let single = HoleSet::from_words([w("01")], 0).unwrap();
        let r = normalize_hole(&mu, &single, &q(1, 2)).unwrap();
        assert_eq!(r.words, words(&["01"]));
        assert_eq!(r.total(), q(1, 4));
    }

    #[test]
    fn normalize_finds_shortest_length() {
        let mu = uniform_bernoulli(2);
        let hole = HoleSet::from_words(words(&["0", "1"]), 0).unwrap();
        let r = normalize_hole(&mu, &hole, &q(1, 16)).unwrap();
        assert_eq!(r.length, 5);
        assert_eq!(r.words.len(), 32);
        assert_eq!(r.total(), q(1, 1));
        let r = normalize_hole(&mu, &hole, &q(1, 1)).unwrap();
        assert_eq!(r.length, 1);
    }

    #[test]
    fn quarter_split_examples() {
        assert_eq!(quarter_split(&[0.5, 0.5]).unwrap(), 1);
        assert_eq!(quarter_split(&[0.1, 0.15, 0.25, 0.5]).unwrap(), 2);
        assert_eq!(quarter_split(&[q(1, 3), q(1, 3), q(1, 3)]).unwrap(), 1);
        assert!(matches!(quarter_split(&[0.2, 0.8]), Err(Error::PreconditionViolated(_))));
        assert!(matches!(quarter_split(&[1.0]), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn overlapping_examples() {
        let full = SubshiftSpec::full_shift(2);
        let o = make_overlapping(&full, &words(&["0", "1"])).unwrap();
        assert_eq!(o.step, 1);
        let shifts: Vec<usize> = o.hole.cylinders().iter().map(|c| c.shift).collect();
        assert_eq!(shifts, vec![1, 2]);
        let mu = uniform_bernoulli(2);
        assert_eq!(mu.correlation(&[1], &[0], 1), q(1, 4));

        let g = golden();
        let mu = parry_measure(&g).unwrap();
        let ws = words(&["10", "01"]);
        let o = make_overlapping(&g, &ws).unwrap();
        for a in &ws {
            for b in &ws {
                for lag in o.step..o.step + 30 {
                    assert!(mu.correlation(a.symbols(), b.symbols(), lag).is_positive());
                }
            }
        }
        let single = make_overlapping(&g, &words(&["0"])).unwrap();
        assert_eq!(single.hole.cylinders()[0].shift, single.step);
    }

    #[test]
    fn union_measure_examples() {
        let mu = uniform_bernoulli(2);
        let disjoint = HoleSet::from_words(words(&["0", "1"]), 0).unwrap();
        assert_eq!(union_measure(&mu, &disjoint), q(1, 1));
        let shifted = HoleSet::new(vec![ShiftedCylinder::new(w("0"), 0), ShiftedCylinder::new(w("0"), 1)]).unwrap();
        assert_eq!(union_measure(&mu, &shifted), q(3, 4));
        let single = HoleSet::from_words([w("0110")], 3).unwrap();
        assert_eq!(union_measure(&mu, &single), q(1, 16));
        let nested = HoleSet::new(vec![ShiftedCylinder::new(w("0"), 0), ShiftedCylinder::new(w("01"), 0)]).unwrap();
        assert_eq!(union_measure(&mu, &nested), q(1, 2));
    }

    #[test]
    fn union_measure_matches_normalized_sum() {
        let g = golden();
        let mu = parry_measure(&g).unwrap();
        let hole = HoleSet::new(vec![
            ShiftedCylinder::new(w("10"), 2),
            ShiftedCylinder::new(w("00"), 0),
            ShiftedCylinder::new(w("0"), 3),
        ])
        .unwrap();
        let n = normalize_to_length(&g, &hole, hole.window()).unwrap();
        let direct = <AlgebraicNumber as Scalar>::sum(&n.iter().map(|u| mu.word_measure(u.symbols())).collect::<Vec<_>>());
        assert_eq!(union_measure(&mu, &hole), direct);
        let b = bernoulli(vec![0.3, 0.7]).unwrap();
        let hole = HoleSet::new(vec![ShiftedCylinder::new(w("1"), 0), ShiftedCylinder::new(w("1"), 2)]).unwrap();
        assert!((union_measure(&b, &hole) - (1.0 - 0.3 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn path_counting_agrees_with_weighted_walk() {
        let g = golden();
        let mu = parry_measure(&g).unwrap();
        assert!(mu.potential().is_some());
        let plain = MarkovMeasure::new(mu.shift_arc().clone(), mu.probs().to_vec(), mu.pi().to_vec()).unwrap();
        let hole = HoleSet::new(vec![
            ShiftedCylinder::new(w("1001"), 0),
            ShiftedCylinder::new(w("010"), 1),
            ShiftedCylinder::new(w("00"), 3),
            ShiftedCylinder::new(w("1010"), 6),
        ])
        .unwrap();
        assert_eq!(union_measure(&mu, &hole), union_measure(&plain, &hole));
        let u = uniform_bernoulli(3);
        let plain = MarkovMeasure::new(u.shift_arc().clone(), u.probs().to_vec(), u.pi().to_vec()).unwrap();
        let hole = HoleSet::new(vec![ShiftedCylinder::new(w("21"), 0), ShiftedCylinder::new(w("1"), 1)]).unwrap();
        assert_eq!(union_measure(&u, &hole), union_measure(&plain, &hole));
        assert_eq!(union_measure(&u, &hole), AlgebraicNumber::from_ratio(1, 3));
    }

    #[test]
    fn json_round_trip() {
        let h = HoleSet::new(vec![ShiftedCylinder::new(w("0110"), 3)]).unwrap();
        let s = h.to_json();
        assert!(s.contains("\"word\": \"0110\""));
        assert_eq!(HoleSet::from_json(&s).unwrap(), h);
        assert!(HoleSet::from_json("{\"cylinders\":[]}").is_err());
    }

    #[test]
    fn anchored_cylinders_recentre() {
        let h = HoleSet::from_anchored(vec![(w("01"), -2), (w("1"), 1)]).unwrap();
        let shifts: Vec<usize> = h.cylinders().iter().map(|c| c.shift).collect();
        assert_eq!(shifts, vec![0, 3]);
    }
}
