use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DetHashMap, DetHashSet, Edge, LabeledGraph, SubsetDfa, VertexSet};
use crate::word::Word;

/// Language cross-check length used when a document carries both forbidden words and a graph.
pub const CROSS_CHECK_LENGTH: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexId {
    Num(u64),
    Name(String),
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Num(n) => write!(f, "{n}"),
            VertexId::Name(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftKind {
    /// Shift of finite type whose longest forbidden word has length `order`.
    Sft { order: usize },
    Sofic,
}

/// A subshift given by an essential right-resolving labelled graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubshiftSpec {
    alphabet: u8,
    kind: ShiftKind,
    forbidden: Vec<Word>,
    graph: LabeledGraph,
    names: Vec<VertexId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSlice {
    pub n: usize,
    pub words: Vec<Word>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Containment {
    pub contained: bool,
    pub depth: usize,
    pub witness: Option<Word>,
}

fn contains_forbidden_suffix(w: &[u8], forbidden: &DetHashSet<Vec<u8>>, lengths: &[usize]) -> bool {
    lengths
        .iter()
        .any(|&l| l <= w.len() && forbidden.contains(&w[w.len() - l..]))
}

impl SubshiftSpec {
    /// Shift of finite type on `alphabet` symbols avoiding `forbidden`, presented on the
    /// admissible words of length `N-1` (`N` the longest forbidden length).
    pub fn build_sft(alphabet: u8, forbidden: &[Word]) -> Result<SubshiftSpec> {
        if alphabet == 0 || alphabet as usize > crate::word::MAX_ALPHABET {
            return Err(Error::InvalidParameter(format!("alphabet size {alphabet}")));
        }
        for w in forbidden {
            if w.is_empty() || w.check_alphabet(alphabet as usize).is_err() {
                return Err(Error::InvalidForbiddenWord(w.to_string()));
            }
        }
        let mut forbidden: Vec<Word> = forbidden.to_vec();
        forbidden.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        forbidden.dedup();
        let order = forbidden.iter().map(Word::len).max().unwrap_or(1);
        let set: DetHashSet<Vec<u8>> = forbidden.iter().map(|w| w.0.clone()).collect();
        let mut lengths: Vec<usize> = forbidden.iter().map(Word::len).collect();
        lengths.dedup();

        let mut verts: Vec<Vec<u8>> = vec![Vec::new()];
        for _ in 0..order - 1 {
            let mut next = Vec::new();
            for u in &verts {
                for a in 0..alphabet {
                    let mut v = u.clone();
                    v.push(a);
                    if !contains_forbidden_suffix(&v, &set, &lengths) {
                        next.push(v);
                    }
                }
            }
            verts = next;
        }
        let index: DetHashMap<Vec<u8>, usize> = verts.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let mut edges = Vec::new();
        for (i, u) in verts.iter().enumerate() {
            for a in 0..alphabet {
                let mut ua = u.clone();
                ua.push(a);
                if contains_forbidden_suffix(&ua, &set, &lengths) {
                    continue;
                }
                let to = index[&ua[1..]];
                edges.push(Edge { from: i, to, label: a });
            }
        }
        let graph = LabeledGraph::new(verts.len(), edges);
        let (graph, map) = graph.essential();
        if graph.is_empty() {
            return Err(Error::EmptySubshift);
        }
        let mut names = vec![VertexId::Num(0); graph.num_vertices()];
        for (old, new) in map.iter().enumerate() {
            if let Some(n) = new {
                names[*n] = if order == 1 {
                    VertexId::Num(0)
                } else {
                    VertexId::Name(Word(verts[old].clone()).to_string())
                };
            }
        }
        Ok(SubshiftSpec { alphabet, kind: ShiftKind::Sft { order }, forbidden, graph, names })
    }

    pub fn full_shift(alphabet: u8) -> SubshiftSpec {
        Self::build_sft(alphabet, &[]).expect("full shift is nonempty")
    }

    /// Sofic shift presented by a right-resolving labelled graph (trimmed to its essential part).
    pub fn from_graph(alphabet: u8, graph: LabeledGraph, names: Option<Vec<VertexId>>) -> Result<SubshiftSpec> {
        if alphabet == 0 || alphabet as usize > crate::word::MAX_ALPHABET {
            return Err(Error::InvalidParameter(format!("alphabet size {alphabet}")));
        }
        if let Some(l) = graph.max_label() {
            if l >= alphabet {
                return Err(Error::Malformed(format!("edge label {l} outside alphabet of size {alphabet}")));
            }
        }
        if let Some((vertex, label)) = graph.right_resolving_violation() {
            return Err(Error::NotRightResolving { vertex, label });
        }
        let names = names.unwrap_or_else(|| (0..graph.num_vertices() as u64).map(VertexId::Num).collect());
        if names.len() != graph.num_vertices() {
            return Err(Error::Malformed("vertex list does not match the graph".into()));
        }
        let (trimmed, map) = graph.essential();
        if trimmed.is_empty() {
            return Err(Error::EmptySubshift);
        }
        let mut new_names = vec![VertexId::Num(0); trimmed.num_vertices()];
        for (old, new) in map.iter().enumerate() {
            if let Some(n) = new {
                new_names[*n] = names[old].clone();
            }
        }
        Ok(SubshiftSpec { alphabet, kind: ShiftKind::Sofic, forbidden: Vec::new(), graph: trimmed, names: new_names })
    }

    /// Same subshift regarded over a larger alphabet (extra symbols never occur).
    pub fn with_alphabet(&self, alphabet: u8) -> Result<SubshiftSpec> {
        if alphabet < self.alphabet {
            return Err(Error::InvalidParameter("cannot shrink the alphabet".into()));
        }
        Ok(SubshiftSpec { alphabet, ..self.clone() })
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn forbidden(&self) -> &[Word] {
        &self.forbidden
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn vertex_names(&self) -> &[VertexId] {
        &self.names
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        if word.iter().any(|&a| a >= self.alphabet) {
            return false;
        }
        (0..self.graph.num_vertices()).any(|v| self.graph.follow(v, word).is_some())
    }

    /// End vertices of paths labelled `word`.
    pub fn end_set(&self, word: &[u8]) -> VertexSet {
        let mut s = self.graph.all_vertices();
        for &a in word {
            s = self.graph.step_set(&s, a);
        }
        s
    }

    /// Start vertices of paths labelled `word`.
    pub fn start_set(&self, word: &[u8]) -> VertexSet {
        let mut s = VertexSet::new(self.graph.num_vertices());
        for v in 0..self.graph.num_vertices() {
            if self.graph.follow(v, word).is_some() {
                s.insert(v);
            }
        }
        s
    }

    /// `L_n(X)` in lexicographic order.
    pub fn language(&self, n: usize) -> LanguageSlice {
        let mut dfa = SubsetDfa::new(&self.graph, self.alphabet);
        let mut words = Vec::new();
        let mut prefix = Vec::with_capacity(n);
        let start = dfa.start();
        Self::enumerate(&mut dfa, start, n, &mut prefix, &mut |w| words.push(Word(w.to_vec())));
        LanguageSlice { n, words }
    }

    /// Visits every word of `L_n(X)` in lexicographic order.
    pub fn for_each_word(&self, n: usize, mut f: impl FnMut(&[u8])) {
        let mut dfa = SubsetDfa::new(&self.graph, self.alphabet);
        let mut prefix = Vec::with_capacity(n);
        let start = dfa.start();
        Self::enumerate(&mut dfa, start, n, &mut prefix, &mut f);
    }

    fn enumerate(dfa: &mut SubsetDfa, state: usize, n: usize, prefix: &mut Vec<u8>, f: &mut impl FnMut(&[u8])) {
        if prefix.len() == n {
            f(prefix);
            return;
        }
        for a in 0..dfa.alphabet() {
            if let Some(next) = dfa.step(state, a) {
                prefix.push(a);
                Self::enumerate(dfa, next, n, prefix, f);
                prefix.pop();
            }
        }
    }

    /// `#L_n(X)`.
    pub fn count_words(&self, n: usize) -> u128 {
        let mut dfa = SubsetDfa::new(&self.graph, self.alphabet);
        let mut counts: Vec<(usize, u128)> = vec![(dfa.start(), 1)];
        for _ in 0..n {
            let mut next: DetHashMap<usize, u128> = DetHashMap::default();
            for &(s, c) in &counts {
                for a in 0..self.alphabet {
                    if let Some(t) = dfa.step(s, a) {
                        *next.entry(t).or_insert(0) += c;
                    }
                }
            }
            counts = next.into_iter().collect();
        }
        counts.iter().map(|&(_, c)| c).sum()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.graph.spectral_radius()
    }

    /// Topological entropy (natural log).
    pub fn entropy(&self) -> f64 {
        let r = self.spectral_radius();
        if r <= 1.0 {
            0.0
        } else {
            r.ln()
        }
    }

    pub fn is_irreducible(&self) -> bool {
        self.graph.is_strongly_connected()
    }

    /// Presentation on pairs (word of `L_N(X)`, vertex where it ends); edges keep the original
    /// symbols, so the language is unchanged.
    pub fn higher_block(&self, n: usize) -> Result<SubshiftSpec> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        let mut states: Vec<(Vec<u8>, usize)> = Vec::new();
        for start in 0..self.graph.num_vertices() {
            let mut stack = vec![(Vec::new(), start)];
            while let Some((w, v)) = stack.pop() {
                if w.len() == n {
                    states.push((w, v));
                    continue;
                }
                for e in self.graph.out_edges(v) {
                    let mut w2 = w.clone();
                    w2.push(e.label);
                    stack.push((w2, e.to));
                }
            }
        }
        states.sort();
        states.dedup();
        let index: DetHashMap<(Vec<u8>, usize), usize> =
            states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut edges = Vec::new();
        for (i, (w, v)) in states.iter().enumerate() {
            for e in self.graph.out_edges(*v) {
                let mut w2 = w[1..].to_vec();
                w2.push(e.label);
                if let Some(&j) = index.get(&(w2, e.to)) {
                    edges.push(Edge { from: i, to: j, label: e.label });
                }
            }
        }
        let unique_ends = {
            let mut words: Vec<&Vec<u8>> = states.iter().map(|(w, _)| w).collect();
            words.dedup();
            words.len() == states.len()
        };
        let names = states
            .iter()
            .map(|(w, v)| {
                let w = Word(w.clone()).to_string();
                VertexId::Name(if unique_ends { w } else { format!("{w}/{}", self.names[*v]) })
            })
            .collect();
        Self::from_graph(self.alphabet, LabeledGraph::new(states.len(), edges), Some(names))
    }

    pub fn to_doc(&self) -> SubshiftDoc {
        SubshiftDoc {
            alphabet_size: self.alphabet as usize,
            kind: match self.kind {
                ShiftKind::Sft { .. } => "sft".into(),
                ShiftKind::Sofic => "sofic".into(),
            },
            forbidden: self.forbidden.clone(),
            graph: Some(GraphDoc {
                vertices: self.names.clone(),
                edges: self
                    .graph
                    .edges()
                    .iter()
                    .map(|e| EdgeDoc { from: self.names[e.from].clone(), to: self.names[e.to].clone(), label: e.label })
                    .collect(),
            }),
        }
    }

    pub fn from_doc(doc: &SubshiftDoc) -> Result<SubshiftSpec> {
        let k = u8::try_from(doc.alphabet_size).map_err(|_| Error::InvalidParameter("alphabet too large".into()))?;
        match doc.kind.as_str() {
            "sft" => {
                let x = Self::build_sft(k, &doc.forbidden)?;
                if let Some(g) = &doc.graph {
                    let given = Self::from_graph(k, g.to_graph()?, Some(g.vertices.clone()))?;
                    for n in 0..=CROSS_CHECK_LENGTH {
                        if x.language(n) != given.language(n) {
                            return Err(Error::Malformed(format!(
                                "graph language differs from forbidden-word definition at length {n}"
                            )));
                        }
                    }
                }
                Ok(x)
            }
            "sofic" => {
                let g = doc.graph.as_ref().ok_or_else(|| Error::Malformed("sofic shift needs a graph".into()))?;
                Self::from_graph(k, g.to_graph()?, Some(g.vertices.clone()))
            }
            other => Err(Error::Malformed(format!("unknown kind {other:?}"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<SubshiftSpec> {
        let doc: SubshiftDoc = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubshiftDoc {
    pub alphabet_size: usize,
    pub kind: String,
    #[serde(default)]
    pub forbidden: Vec<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: VertexId,
    pub to: VertexId,
    pub label: u8,
}

impl GraphDoc {
    pub fn to_graph(&self) -> Result<LabeledGraph> {
        let index: DetHashMap<&VertexId, usize> = self.vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
        if index.len() != self.vertices.len() {
            return Err(Error::Malformed("duplicate vertex id".into()));
        }
        let lookup = |v: &VertexId| index.get(v).copied().ok_or_else(|| Error::Malformed(format!("unknown vertex {v}")));
        let edges = self
            .edges
            .iter()
            .map(|e| Ok(Edge { from: lookup(&e.from)?, to: lookup(&e.to)?, label: e.label }))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledGraph::new(self.vertices.len(), edges))
    }
}

/// Checks `L_n(Y) ⊆ L_n(X)` for all `n <= depth`, returning the shortest (then least) witness.
pub fn contains(x: &SubshiftSpec, y: &SubshiftSpec, depth: usize) -> Containment {
    let k = x.alphabet.max(y.alphabet);
    let mut dx = SubsetDfa::new(&x.graph, x.alphabet);
    let mut dy = SubsetDfa::new(&y.graph, y.alphabet);
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut queue: VecDeque<(usize, usize, Vec<u8>)> = VecDeque::from([(dx.start(), dy.start(), Vec::new())]);
    seen.insert((dx.start(), dy.start()));
    while let Some((sx, sy, w)) = queue.pop_front() {
        if w.len() == depth {
            continue;
        }
        for a in 0..k {
            let ny = if a < y.alphabet { dy.step(sy, a) } else { None };
            let Some(ny) = ny else { continue };
            let mut w2 = w.clone();
            w2.push(a);
            let nx = if a < x.alphabet { dx.step(sx, a) } else { None };
            match nx {
                None => return Containment { contained: false, depth, witness: Some(Word(w2)) },
                Some(nx) => {
                    if seen.insert((nx, ny)) {
                        queue.push_back((nx, ny, w2));
                    }
                }
            }
        }
    }
    Containment { contained: true, depth, witness: None }
}
