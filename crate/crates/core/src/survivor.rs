use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DetHashMap, Edge, LabeledGraph};
use crate::hole::HoleSet;
use crate::subshift::{SubshiftSpec, VertexId};
use crate::word::{lyndon_words, Word};

const NONE: u32 = u32::MAX;

/// Pattern-matching automaton (Aho–Corasick, completed into a DFA) for a set of forbidden words.
#[derive(Clone, Debug)]
pub struct FactorMatcher {
    k: usize,
    next: Vec<u32>,
    hit: Vec<bool>,
    parent: Vec<(u32, u8)>,
}

impl FactorMatcher {
    pub fn new(k: u8, words: impl IntoIterator<Item = impl AsRef<[u8]>>) -> FactorMatcher {
        let k = k as usize;
        let mut next = vec![NONE; k];
        let mut hit = vec![false];
        let mut parent = vec![(NONE, 0)];
        for w in words {
            let mut node = 0usize;
            for &a in w.as_ref() {
                let slot = node * k + a as usize;
                if next[slot] == NONE {
                    next[slot] = hit.len() as u32;
                    hit.push(false);
                    parent.push((node as u32, a));
                    next.extend(std::iter::repeat_n(NONE, k));
                }
                node = next[slot] as usize;
            }
            hit[node] = true;
        }
        let mut fail = vec![0u32; hit.len()];
        let mut queue = VecDeque::new();
        for a in 0..k {
            match next[a] {
                NONE => next[a] = 0,
                c => {
                    fail[c as usize] = 0;
                    queue.push_back(c as usize);
                }
            }
        }
        while let Some(u) = queue.pop_front() {
            if hit[fail[u] as usize] {
                hit[u] = true;
            }
            for a in 0..k {
                let slot = u * k + a;
                let through_fail = next[fail[u] as usize * k + a];
                match next[slot] {
                    NONE => next[slot] = through_fail,
                    c => {
                        fail[c as usize] = through_fail;
                        queue.push_back(c as usize);
                    }
                }
            }
        }
        FactorMatcher { k, next, hit, parent }
    }

    pub fn num_states(&self) -> usize {
        self.hit.len()
    }

    pub fn step(&self, state: u32, a: u8) -> u32 {
        self.next[state as usize * self.k + a as usize]
    }

    /// True when the symbols read so far end with a forbidden word.
    pub fn is_hit(&self, state: u32) -> bool {
        self.hit[state as usize]
    }

    /// Symbols spelling the prefix represented by `state`.
    pub fn prefix(&self, mut state: u32) -> Vec<u8> {
        let mut out = Vec::new();
        while state != 0 {
            let (p, a) = self.parent[state as usize];
            out.push(a);
            state = p;
        }
        out.reverse();
        out
    }

    /// Whether any forbidden word occurs in `w`.
    pub fn occurs_in(&self, w: &[u8]) -> bool {
        let mut s = 0;
        for &a in w {
            s = self.step(s, a);
            if self.is_hit(s) {
                return true;
            }
        }
        false
    }
}

/// Presentation of the survivor set `J(H)`: points of `X` none of whose windows spells a hole
/// word. Vertices pair a vertex of `X` with a matcher state; the graph is trimmed to its
/// essential part.
#[derive(Clone, Debug)]
pub struct SurvivorAutomaton {
    alphabet: u8,
    window: usize,
    graph: LabeledGraph,
    states: Vec<(usize, u32)>,
    matcher: FactorMatcher,
}

impl SurvivorAutomaton {
    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        if self.graph.is_empty() {
            0.0
        } else {
            self.graph.spectral_radius().ln().max(0.0)
        }
    }

    /// Labels of a shortest cycle, if any survivor exists.
    pub fn shortest_cycle(&self) -> Option<Word> {
        self.graph
            .shortest_cycle()
            .map(|ids| Word(ids.iter().map(|&i| self.graph.edge(i).label).collect()))
    }

    /// Vertex `(q, s)` is named `q|s`, `s` being the matched hole-word prefix.
    pub fn to_subshift(&self, x: &SubshiftSpec) -> Result<SubshiftSpec> {
        if self.graph.is_empty() {
            return Err(Error::EmptySubshift);
        }
        let names = self
            .states
            .iter()
            .map(|&(q, s)| VertexId::Name(format!("{}|{}", x.vertex_names()[q], Word(self.matcher.prefix(s)))))
            .collect();
        SubshiftSpec::from_graph(self.alphabet, self.graph.clone(), Some(names))
    }
}

fn hole_words(h: &HoleSet) -> Vec<Word> {
    let mut ws: Vec<Word> = h.words().cloned().collect();
    ws.sort();
    ws.dedup();
    ws
}

/// Survivor presentation. Shifts of the cylinders are irrelevant because the orbit ranges over
/// all of `Z`, so survival means avoiding every hole word as a factor.
pub fn survivor_automaton(x: &SubshiftSpec, h: &HoleSet) -> SurvivorAutomaton {
    let words = hole_words(h);
    let matcher = FactorMatcher::new(x.alphabet_size(), &words);
    let g = x.graph();
    let mut index: DetHashMap<(usize, u32), usize> = DetHashMap::default();
    let mut states: Vec<(usize, u32)> = Vec::new();
    let mut edges = Vec::new();
    let mut queue = VecDeque::new();
    if !matcher.is_hit(0) {
        for q in 0..g.num_vertices() {
            index.insert((q, 0), states.len());
            states.push((q, 0));
            queue.push_back(states.len() - 1);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (q, s) = states[i];
        for e in g.out_edges(q) {
            let t = matcher.step(s, e.label);
            if matcher.is_hit(t) {
                continue;
            }
            let j = *index.entry((e.to, t)).or_insert_with(|| {
                states.push((e.to, t));
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            edges.push(Edge { from: i, to: j, label: e.label });
        }
    }
    let full = LabeledGraph::new(states.len(), edges);
    let (graph, map) = full.essential();
    let mut kept = vec![(0, 0); graph.num_vertices()];
    for (old, new) in map.iter().enumerate() {
        if let Some(n) = new {
            kept[*n] = states[old];
        }
    }
    SurvivorAutomaton {
        alphabet: x.alphabet_size(),
        window: words.iter().map(Word::len).max().unwrap_or(0),
        graph,
        states: kept,
        matcher,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrapStatus {
    CompleteTrap,
    NotTrap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapVerdict {
    pub status: TrapStatus,
    /// Period of a surviving periodic orbit.
    pub witness: Option<Word>,
    pub survivor_entropy: Option<f64>,
    pub automaton_vertices: usize,
    pub automaton_edges: usize,
}

impl TrapVerdict {
    pub fn is_trap(&self) -> bool {
        self.status == TrapStatus::CompleteTrap
    }
}

/// Decides whether `h` meets every orbit of `X`; otherwise returns a shortest surviving cycle,
/// re-checked directly against the hole words.
pub fn verify_trap(x: &SubshiftSpec, h: &HoleSet) -> Result<TrapVerdict> {
    let a = survivor_automaton(x, h);
    verdict(x, h, &a)
}

pub fn verdict(x: &SubshiftSpec, h: &HoleSet, a: &SurvivorAutomaton) -> Result<TrapVerdict> {
    let (vertices, edges) = (a.graph.num_vertices(), a.graph.num_edges());
    if a.is_empty() {
        return Ok(TrapVerdict {
            status: TrapStatus::CompleteTrap,
            witness: None,
            survivor_entropy: None,
            automaton_vertices: vertices,
            automaton_edges: edges,
        });
    }
    let witness = a
        .shortest_cycle()
        .ok_or_else(|| Error::InvariantViolated("nonempty survivor graph without a cycle".into()))?;
    if let Some(w) = h.words().find(|w| w.occurs_in_periodic(witness.symbols())) {
        return Err(Error::InvariantViolated(format!("witness {witness} meets hole word {w}")));
    }
    if !periodic_in(x, witness.symbols()) {
        return Err(Error::InvariantViolated(format!("witness {witness} is not a point of X")));
    }
    Ok(TrapVerdict {
        status: TrapStatus::NotTrap,
        witness: Some(witness),
        survivor_entropy: Some(a.entropy()),
        automaton_vertices: vertices,
        automaton_edges: edges,
    })
}

pub fn survivor_entropy(x: &SubshiftSpec, h: &HoleSet) -> f64 {
    survivor_automaton(x, h).entropy()
}

/// Whether the periodic point `u^∞` lies in `X`.
pub fn periodic_in(x: &SubshiftSpec, u: &[u8]) -> bool {
    let g = x.graph();
    let n = g.num_vertices();
    (0..n).any(|start| {
        let mut v = start;
        for _ in 0..n {
            match g.follow(v, u) {
                Some(w) if w == start => return true,
                Some(w) => v = w,
                None => return false,
            }
        }
        false
    })
}

/// Primitive periods (as Lyndon words) of the periodic survivors with period at most `p`.
pub fn periodic_survivors(x: &SubshiftSpec, h: &HoleSet, p: usize) -> Vec<Word> {
    let matcher = FactorMatcher::new(x.alphabet_size(), hole_words(h));
    lyndon_words(x.alphabet_size(), p)
        .into_iter()
        .filter(|u| periodic_in(x, u.symbols()) && !periodic_hits(&matcher, u.symbols(), h))
        .collect()
}

fn periodic_hits(m: &FactorMatcher, u: &[u8], h: &HoleSet) -> bool {
    let longest = h.words().map(Word::len).max().unwrap_or(0);
    let reps = longest / u.len() + 2;
    let seq: Vec<u8> = u.iter().copied().cycle().take(u.len() * reps).collect();
    m.occurs_in(&seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn hole(ss: &[&str]) -> HoleSet {
        HoleSet::from_words(ss.iter().map(|s| w(s)), 0).unwrap()
    }

    fn golden() -> SubshiftSpec {
        SubshiftSpec::build_sft(2, &[w("11")]).unwrap()
    }

    #[test]
    fn matcher_detects_factors() {
        let m = FactorMatcher::new(2, [w("011"), w("10")]);
        assert!(m.occurs_in(&[0, 0, 1, 1]));
        assert!(m.occurs_in(&[1, 1, 0]));
        assert!(m.occurs_in(&[0, 1, 1]));
        assert!(!m.occurs_in(&[0, 0, 0, 1]));
    }

    #[test]
    fn automaton_examples() {
        let full = SubshiftSpec::full_shift(2);
        let a = survivor_automaton(&full, &hole(&["11"]));
        assert!((a.entropy() - golden().entropy()).abs() < 1e-12);
        let y = a.to_subshift(&full).unwrap();
        for n in 0..8 {
            assert_eq!(y.count_words(n), golden().count_words(n));
        }
        assert!(survivor_automaton(&full, &hole(&["0", "1"])).is_empty());
        let a = survivor_automaton(&golden(), &hole(&["1"]));
        assert_eq!(a.graph().num_vertices(), 1);
        assert_eq!(a.shortest_cycle(), Some(w("0")));
        assert_eq!(a.entropy(), 0.0);
    }

    #[test]
    fn verdict_examples() {
        let full = SubshiftSpec::full_shift(2);
        assert!(verify_trap(&full, &hole(&["0", "1"])).unwrap().is_trap());
        let v = verify_trap(&full, &hole(&["00", "11"])).unwrap();
        assert_eq!(v.status, TrapStatus::NotTrap);
        assert_eq!(v.witness.unwrap().len(), 2);
        let v = verify_trap(&full, &hole(&["0"])).unwrap();
        assert_eq!(v.witness, Some(w("1")));
        assert_eq!(v.survivor_entropy, Some(0.0));
    }

    #[test]
    fn shifts_do_not_change_survivors() {
        let full = SubshiftSpec::full_shift(2);
        let shifted = HoleSet::new(vec![
            crate::hole::ShiftedCylinder::new(w("00"), 5),
            crate::hole::ShiftedCylinder::new(w("11"), 2),
        ])
        .unwrap();
        assert_eq!(verify_trap(&full, &shifted).unwrap(), verify_trap(&full, &hole(&["00", "11"])).unwrap());
    }

    #[test]
    fn periodic_survivor_examples() {
        let full = SubshiftSpec::full_shift(2);
        assert_eq!(periodic_survivors(&full, &hole(&["00", "11"]), 6), vec![w("01")]);
        assert!(periodic_survivors(&full, &hole(&["0", "1"]), 6).is_empty());
        assert_eq!(periodic_survivors(&full, &hole(&["11"]), 2), vec![w("0"), w("01")]);
        assert_eq!(periodic_survivors(&golden(), &hole(&["00"]), 4), vec![w("01")]);
    }
}
