use std::collections::{HashMap, VecDeque};
use std::hash::BuildHasherDefault;
use std::collections::hash_map::DefaultHasher;

use serde::{Deserialize, Serialize};

/// Hash map with a fixed hasher, so iteration order depends only on insertion order.
pub type DetHashMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;
pub type DetHashSet<K> = std::collections::HashSet<K, BuildHasherDefault<DefaultHasher>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: u8,
}

/// Directed multigraph with symbol-labelled edges; edges are kept sorted by `(from, label, to)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledGraph {
    num_vertices: usize,
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    in_edges: Vec<Vec<usize>>,
}

impl LabeledGraph {
    pub fn new(num_vertices: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.from, e.label, e.to));
        edges.dedup();
        let mut out_start = vec![0; num_vertices + 1];
        for e in &edges {
            out_start[e.from + 1] += 1;
        }
        for v in 0..num_vertices {
            out_start[v + 1] += out_start[v];
        }
        let mut in_edges = vec![Vec::new(); num_vertices];
        for (i, e) in edges.iter().enumerate() {
            in_edges[e.to].push(i);
        }
        LabeledGraph { num_vertices, edges, out_start, in_edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    pub fn out_range(&self, v: usize) -> std::ops::Range<usize> {
        self.out_start[v]..self.out_start[v + 1]
    }

    pub fn out_edges(&self, v: usize) -> &[Edge] {
        &self.edges[self.out_range(v)]
    }

    pub fn in_edge_ids(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn successor(&self, v: usize, label: u8) -> Option<usize> {
        self.out_edges(v).iter().find(|e| e.label == label).map(|e| e.to)
    }

    pub fn is_empty(&self) -> bool {
        self.num_vertices == 0
    }

    /// First vertex with two outgoing edges carrying the same label.
    pub fn right_resolving_violation(&self) -> Option<(usize, u8)> {
        (0..self.num_vertices).find_map(|v| {
            self.out_edges(v)
                .windows(2)
                .find(|w| w[0].label == w[1].label)
                .map(|w| (v, w[0].label))
        })
    }

    /// Vertices lying on a bi-infinite path, i.e. surviving repeated removal of sources and sinks.
    pub fn essential_vertices(&self) -> Vec<bool> {
        let n = self.num_vertices;
        let mut alive = vec![true; n];
        let mut outdeg = vec![0usize; n];
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            outdeg[e.from] += 1;
            indeg[e.to] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| outdeg[v] == 0 || indeg[v] == 0).collect();
        while let Some(v) = queue.pop_front() {
            if !alive[v] {
                continue;
            }
            alive[v] = false;
            for e in self.out_edges(v) {
                if alive[e.to] {
                    indeg[e.to] -= 1;
                    if indeg[e.to] == 0 {
                        queue.push_back(e.to);
                    }
                }
            }
            for &i in &self.in_edges[v] {
                let u = self.edges[i].from;
                if alive[u] {
                    outdeg[u] -= 1;
                    if outdeg[u] == 0 {
                        queue.push_back(u);
                    }
                }
            }
        }
        alive
    }

    /// Subgraph induced on `keep`, with the map from old to new vertex ids.
    pub fn induced(&self, keep: &[bool]) -> (LabeledGraph, Vec<Option<usize>>) {
        let mut map = vec![None; self.num_vertices];
        let mut next = 0;
        for v in 0..self.num_vertices {
            if keep[v] {
                map[v] = Some(next);
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|e| Some(Edge { from: map[e.from]?, to: map[e.to]?, label: e.label }))
            .collect();
        (LabeledGraph::new(next, edges), map)
    }

    pub fn essential(&self) -> (LabeledGraph, Vec<Option<usize>>) {
        self.induced(&self.essential_vertices())
    }

    pub fn is_essential(&self) -> bool {
        self.essential_vertices().iter().all(|&a| a)
    }

    /// Strongly connected component id for every vertex (iterative Tarjan), and the count.
    pub fn scc(&self) -> (Vec<usize>, usize) {
        let n = self.num_vertices;
        let unset = usize::MAX;
        let mut index = vec![unset; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut comp = vec![unset; n];
        let mut stack = Vec::new();
        let mut next_index = 0;
        let mut ncomp = 0;
        for root in 0..n {
            if index[root] != unset {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, self.out_start[root])];
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < self.out_start[v + 1] {
                    let w = self.edges[*pos].to;
                    *pos += 1;
                    if index[w] == unset {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, self.out_start[w]));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp[w] = ncomp;
                            if w == v {
                                break;
                            }
                        }
                        ncomp += 1;
                    }
                }
            }
        }
        (comp, ncomp)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.num_vertices > 0 && self.scc().1 == 1
    }

    /// Period (gcd of cycle lengths) of a strongly connected graph; 0 if it has no cycle.
    pub fn period(&self) -> usize {
        if self.num_vertices == 0 {
            return 0;
        }
        let mut level = vec![usize::MAX; self.num_vertices];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(v) = queue.pop_front() {
            for e in self.out_edges(v) {
                if level[e.to] == usize::MAX {
                    level[e.to] = level[v] + 1;
                    queue.push_back(e.to);
                } else {
                    let diff = (level[v] + 1).abs_diff(level[e.to]);
                    g = gcd(g, diff);
                }
            }
        }
        g
    }

    /// Spectral radius of the adjacency matrix (edge multiplicities counted).
    ///
    /// Each strongly connected component is handled separately with power iteration on `A + I`,
    /// stopping when the Collatz–Wielandt bracket is narrower than `1e-12` (relative).
    pub fn spectral_radius(&self) -> f64 {
        let (comp, ncomp) = self.scc();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
        for v in 0..self.num_vertices {
            members[comp[v]].push(v);
        }
        let mut best: f64 = 0.0;
        let mut local = vec![usize::MAX; self.num_vertices];
        for (c, verts) in members.iter().enumerate() {
            let has_edge = verts
                .iter()
                .any(|&v| self.out_edges(v).iter().any(|e| comp[e.to] == c));
            if !has_edge {
                continue;
            }
            best = best.max(self.component_radius(verts, &comp, c, &mut local));
        }
        best
    }

    fn component_radius(&self, verts: &[usize], comp: &[usize], c: usize, local: &mut [usize]) -> f64 {
        for (i, &v) in verts.iter().enumerate() {
            local[v] = i;
        }
        let edges: Vec<(usize, usize)> = verts
            .iter()
            .flat_map(|&v| {
                self.out_edges(v)
                    .iter()
                    .filter(|e| comp[e.to] == c)
                    .map(|e| (local[e.from], local[e.to]))
                    .collect::<Vec<_>>()
            })
            .collect();
        let n = verts.len();
        let mut x = vec![1.0f64; n];
        let mut y = vec![0.0f64; n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for _ in 0..100_000 {
            y.copy_from_slice(&x);
            for &(u, v) in &edges {
                y[u] += x[v];
            }
            lo = f64::INFINITY;
            hi = 0.0;
            for i in 0..n {
                let r = y[i] / x[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            let norm = y.iter().cloned().fold(0.0, f64::max);
            for i in 0..n {
                x[i] = y[i] / norm;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        0.5 * (lo + hi) - 1.0
    }

    /// Edge ids of a shortest cycle, or `None` when the graph is acyclic.
    pub fn shortest_cycle(&self) -> Option<Vec<usize>> {
        let n = self.num_vertices;
        let mut best: Option<Vec<usize>> = None;
        let mut dist = vec![usize::MAX; n];
        let mut via = vec![usize::MAX; n];
        let mut touched = Vec::new();
        for s in 0..n {
            let limit = best.as_ref().map_or(usize::MAX, |b| b.len());
            if limit == 1 {
                break;
            }
            for &v in &touched {
                dist[v] = usize::MAX;
            }
            touched.clear();
            dist[s] = 0;
            touched.push(s);
            let mut queue = VecDeque::from([s]);
            'bfs: while let Some(v) = queue.pop_front() {
                if dist[v] + 1 >= limit {
                    break;
                }
                for i in self.out_range(v) {
                    let w = self.edges[i].to;
                    if w == s {
                        let mut cycle = vec![i];
                        let mut cur = v;
                        while cur != s {
                            cycle.push(via[cur]);
                            cur = self.edges[via[cur]].from;
                        }
                        cycle.reverse();
                        best = Some(cycle);
                        break 'bfs;
                    }
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        via[w] = i;
                        touched.push(w);
                        queue.push_back(w);
                    }
                }
            }
        }
        best
    }

    /// Set of vertices reached from `from` by reading `label` (subset construction step).
    pub fn step_set(&self, from: &VertexSet, label: u8) -> VertexSet {
        let mut out = VertexSet::new(self.num_vertices);
        for v in from.iter() {
            for e in self.out_edges(v) {
                if e.label == label {
                    out.insert(e.to);
                }
            }
        }
        out
    }

    /// Vertices reached from `from` in one step.
    pub fn forward_set(&self, from: &VertexSet) -> VertexSet {
        let mut out = VertexSet::new(self.num_vertices);
        for v in from.iter() {
            for e in self.out_edges(v) {
                out.insert(e.to);
            }
        }
        out
    }

    pub fn all_vertices(&self) -> VertexSet {
        let mut s = VertexSet::new(self.num_vertices);
        for v in 0..self.num_vertices {
            s.insert(v);
        }
        s
    }

    /// Pairs `(start, end)` of paths labelled `word`.
    pub fn word_paths(&self, word: &[u8]) -> Vec<(usize, usize)> {
        (0..self.num_vertices)
            .filter_map(|s| self.follow(s, word).map(|e| (s, e)))
            .collect()
    }

    /// End vertex of the path labelled `word` from `start` (right-resolving graphs).
    pub fn follow(&self, start: usize, word: &[u8]) -> Option<usize> {
        word.iter().try_fold(start, |v, &a| self.successor(v, a))
    }

    pub fn max_label(&self) -> Option<u8> {
        self.edges.iter().map(|e| e.label).max()
    }
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet {
    bits: Vec<u64>,
}

impl VertexSet {
    pub fn new(n: usize) -> Self {
        VertexSet { bits: vec![0; n.div_ceil(64)] }
    }

    pub fn singleton(n: usize, v: usize) -> Self {
        let mut s = Self::new(n);
        s.insert(v);
        s
    }

    pub fn insert(&mut self, v: usize) {
        self.bits[v / 64] |= 1 << (v % 64);
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bits[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn intersects(&self, other: &VertexSet) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| a & b != 0)
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(i, &b)| {
            (0..64).filter(move |j| b >> j & 1 == 1).map(move |j| i * 64 + j)
        })
    }
}

/// Lazily determinized subset automaton of a labelled graph, started from the full vertex set.
#[derive(Debug)]
pub struct SubsetDfa<'g> {
    graph: &'g LabeledGraph,
    alphabet: u8,
    states: Vec<VertexSet>,
    index: DetHashMap<VertexSet, usize>,
    trans: Vec<Vec<Option<Option<usize>>>>,
}

impl<'g> SubsetDfa<'g> {
    pub fn new(graph: &'g LabeledGraph, alphabet: u8) -> Self {
        let mut dfa = SubsetDfa {
            graph,
            alphabet,
            states: Vec::new(),
            index: DetHashMap::default(),
            trans: Vec::new(),
        };
        dfa.intern(graph.all_vertices());
        dfa
    }

    fn intern(&mut self, set: VertexSet) -> usize {
        if let Some(&i) = self.index.get(&set) {
            return i;
        }
        let i = self.states.len();
        self.states.push(set.clone());
        self.index.insert(set, i);
        self.trans.push(vec![None; self.alphabet as usize]);
        i
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn set(&self, state: usize) -> &VertexSet {
        &self.states[state]
    }

    /// Next state, or `None` when no path continues with `label`.
    pub fn step(&mut self, state: usize, label: u8) -> Option<usize> {
        if let Some(cached) = self.trans[state][label as usize] {
            return cached;
        }
        let next = self.graph.step_set(&self.states[state], label);
        let result = if next.is_empty() { None } else { Some(self.intern(next)) };
        self.trans[state][label as usize] = Some(result);
        result
    }
}
