use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::Scalar;
use crate::error::{Error, Result};
use crate::graph::{DetHashMap, LabeledGraph};
use crate::hole::HoleSet;
use crate::measure::MarkovMeasure;
use crate::subshift::SubshiftSpec;
use crate::survivor::{verify_trap, FactorMatcher};
use crate::toral::PisotToralSystem;

/// Samples per independently seeded stream; fixed so results do not depend on the thread count.
pub const CHUNK: u64 = 8192;
const MAX_FIRST_HIT_SCAN: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscapeMethod {
    ExactTransfer,
    MonteCarlo,
    ToralMonteCarlo,
}

fn ser_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

fn de_extended<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(x) => Ok(x),
        Num::S(s) if s == "inf" => Ok(f64::INFINITY),
        Num::S(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Num::S(s) => Err(serde::de::Error::custom(format!("not a number: {s}"))),
    }
}

/// Survivor masses `m(E_n)`, `E_n = {x : T^k x ∉ H for 0 <= k <= n}`, and the fitted decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRateEstimate {
    pub method: EscapeMethod,
    pub n_max: usize,
    pub masses: Vec<f64>,
    /// Exact masses as serialized scalars, for the exact method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_masses: Option<Vec<serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    pub delta: f64,
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub rate: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub fit_from: usize,
    /// Least `n` with `m(E_n) = 0`, when the exact method finds one (possibly beyond `n_max`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EscapeRateEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<EscapeRateEstimate> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.std_errors.is_some() { "n,mass,std_error\n" } else { "n,mass\n" });
        for (n, m) in self.masses.iter().enumerate() {
            match &self.std_errors {
                Some(se) => out.push_str(&format!("{n},{m:.17e},{:.17e}\n", se[n])),
                None => out.push_str(&format!("{n},{m:.17e}\n")),
            }
        }
        out
    }

    pub fn is_infinite(&self) -> bool {
        self.rate.is_infinite()
    }
}

/// Least-squares slope of `log m(E_n)` over the last quarter of `0..=n_max` (at least two points);
/// returns `(δ, rate, residual, first n used)`. A vanishing mass gives `δ = 0` and an infinite rate.
pub fn fit_decay(masses: &[f64]) -> (f64, f64, f64, usize) {
    let len = masses.len();
    let q = (len / 4).max(2).min(len);
    let from = len - q;
    if masses.iter().any(|&m| m <= 0.0) {
        return (0.0, f64::INFINITY, 0.0, from);
    }
    if q < 2 {
        return (f64::NAN, f64::NAN, 0.0, from);
    }
    let xs: Vec<f64> = (from..len).map(|n| n as f64).collect();
    let ys: Vec<f64> = masses[from..].iter().map(|m| m.ln()).collect();
    let k = q as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / k).sqrt();
    (slope.exp(), -slope, residual, from)
}

/// Reads off, from the words ending at each position, the least `j` with `σ^j x` in the hole.
struct FirstHit {
    matcher: FactorMatcher,
    // per matcher state: (length, ascending shifts) of every hole word ending there
    ends: Vec<Vec<(usize, Vec<usize>)>>,
    longest: usize,
    last_shift: usize,
    window: usize,
}

impl FirstHit {
    fn new(x: &SubshiftSpec, hole: &HoleSet) -> Result<FirstHit> {
        hole.validate(x)?;
        let mut shifts: BTreeMap<&[u8], Vec<usize>> = BTreeMap::new();
        for c in hole.cylinders() {
            shifts.entry(c.word.symbols()).or_default().push(c.shift);
        }
        shifts.values_mut().for_each(|v| v.sort_unstable());
        let matcher = FactorMatcher::new(x.alphabet_size(), shifts.keys());
        let ends = (0..matcher.num_states() as u32)
            .map(|q| {
                let p = matcher.prefix(q);
                (1..=p.len()).filter_map(|l| shifts.get(&p[p.len() - l..]).map(|s| (l, s.clone()))).collect()
            })
            .collect();
        Ok(FirstHit {
            matcher,
            ends,
            longest: shifts.keys().map(|w| w.len()).max().unwrap_or(0),
            last_shift: hole.cylinders().iter().map(|c| c.shift).max().unwrap_or(0),
            window: hole.window(),
        })
    }

    /// Least `j` witnessed by a word ending after `pos` symbols, the automaton being in `q`.
    fn at(&self, q: u32, pos: usize) -> Option<usize> {
        self.ends[q as usize]
            .iter()
            .filter_map(|(l, ss)| {
                let start = pos - l;
                ss.iter().rev().find(|&&s| s <= start).map(|s| start - s)
            })
            .min()
    }

    /// No word ending later than `pos` can witness an index below `j`.
    fn settled(&self, j: usize, pos: usize) -> bool {
        j + self.longest + self.last_shift <= pos + 1
    }

    /// Largest first hit index over all paths, for a hole every orbit enters. A larger running
    /// index dominates a smaller one in the same presentation and automaton state, so one value
    /// per state suffices.
    fn max_first_hit(&self, g: &LabeledGraph) -> Result<usize> {
        let mut best: DetHashMap<(u32, u32), usize> = (0..g.num_vertices() as u32).map(|v| ((v, 0), usize::MAX)).collect();
        for pos in 1.. {
            let mut next: DetHashMap<(u32, u32), usize> = DetHashMap::default();
            for (&(v, q), &j) in &best {
                for i in g.out_range(v as usize) {
                    let e = g.edge(i);
                    let q2 = self.matcher.step(q, e.label);
                    let j2 = self.at(q2, pos).map_or(j, |h| j.min(h));
                    let slot = next.entry((e.to as u32, q2)).or_insert(0);
                    *slot = (*slot).max(j2);
                }
            }
            best = next;
            let top = best.values().copied().max().unwrap_or(0);
            if top != usize::MAX && self.settled(top, pos) {
                return Ok(top);
            }
            if pos > MAX_FIRST_HIT_SCAN + self.window {
                break;
            }
        }
        Err(Error::InvariantViolated("first hit index of a trap did not settle".into()))
    }

    /// Weights of paths of length `n_max + window` by end vertex, matcher state and first hit
    /// index (capped at `n_max + 1`); paths hit at index 0 are dropped.
    fn walk<W: Clone>(
        &self,
        g: &LabeledGraph,
        n_max: usize,
        start: impl Iterator<Item = (usize, W)>,
        along: impl Fn(&W, usize) -> W,
        merge: impl Fn(&mut W, W),
    ) -> DetHashMap<(u32, u32, u32), W> {
        let cap = n_max as u32 + 1;
        let mut states: DetHashMap<(u32, u32, u32), W> = start.map(|(v, w)| ((v as u32, 0, cap), w)).collect();
        for pos in 1..=n_max + self.window {
            let mut next: DetHashMap<(u32, u32, u32), W> = DetHashMap::default();
            for ((v, q, j), w) in states {
                for i in g.out_range(v as usize) {
                    let e = g.edge(i);
                    let q2 = self.matcher.step(q, e.label);
                    let j2 = self.at(q2, pos).map_or(j, |h| j.min(h.min(cap as usize) as u32));
                    if j2 == 0 {
                        continue;
                    }
                    let key = (e.to as u32, q2, j2);
                    let w2 = along(&w, i);
                    match next.get_mut(&key) {
                        Some(acc) => merge(acc, w2),
                        None => {
                            next.insert(key, w2);
                        }
                    }
                }
            }
            states = next;
        }
        states
    }
}

/// Exact `m(E_n)` for `n = 0..=n_max`: the measure is pushed along the presentation while the
/// first index at which the orbit enters the hole is tracked.
pub fn survival_masses<S: Scalar>(mu: &MarkovMeasure<S>, hole: &HoleSet, n_max: usize) -> Result<Vec<S>> {
    let x = mu.shift();
    let g = x.graph();
    let n = g.num_vertices();
    let hits = FirstHit::new(x, hole)?;
    let len = n_max + hits.window;
    // by_first[j]: mass of the paths first hit at index j (j = n_max + 1: not before n_max)
    let by_first: Vec<S> = if mu.potential().is_some() {
        let start = (0..n).map(|v| {
            let mut c = vec![BigUint::zero(); n];
            c[v] = BigUint::one();
            (v, c)
        });
        let paths = hits.walk(g, n_max, start, |c, _| c.clone(), |acc, c| acc.iter_mut().zip(c).for_each(|(a, b)| *a += b));
        let mut counts = vec![vec![vec![BigUint::zero(); n]; n]; n_max + 2];
        for ((v, _, j), c) in paths {
            for (v0, m) in c.into_iter().enumerate() {
                counts[j as usize][v0][v as usize] += m;
            }
        }
        counts.iter().map(|c| mu.perron_mass(c, len).expect("Perron form")).collect()
    } else {
        let start = mu.pi().iter().cloned().enumerate();
        let probs = mu.probs();
        let paths = hits.walk(g, n_max, start, |m, i| m.clone() * probs[i].clone(), |acc, m| *acc = acc.clone() + m);
        let mut out = vec![S::zero(); n_max + 2];
        for ((_, _, j), m) in paths {
            out[j as usize] = out[j as usize].clone() + m;
        }
        out
    };
    let mut out = vec![S::zero(); n_max + 1];
    let mut acc = by_first[n_max + 1].clone();
    for k in (0..=n_max).rev() {
        out[k] = acc.clone();
        acc = acc + by_first[k].clone();
    }
    Ok(out)
}

pub fn escape_rate_exact<S: Scalar>(mu: &MarkovMeasure<S>, hole: &HoleSet, n_max: usize) -> Result<EscapeRateEstimate> {
    let exact = survival_masses(mu, hole, n_max)?;
    for i in 1..exact.len() {
        if exact[i - 1].lt(&exact[i]) {
            return Err(Error::InvariantViolated(format!("m(E_{i}) exceeds m(E_{})", i - 1)));
        }
    }
    let mut masses: Vec<f64> = exact.iter().map(|m| m.to_f64()).collect();
    let zero_from = match exact.iter().position(|m| m.is_zero()) {
        Some(first) => {
            for m in &mut masses[first..] {
                *m = 0.0;
            }
            Some(first)
        }
        None if verify_trap(mu.shift(), hole)?.is_trap() => Some(FirstHit::new(mu.shift(), hole)?.max_first_hit(mu.shift().graph())?),
        None => None,
    };
    let (mut delta, mut rate, residual, fit_from) = fit_decay(&masses);
    if zero_from.is_some() {
        (delta, rate) = (0.0, f64::INFINITY);
    }
    Ok(EscapeRateEstimate {
        method: EscapeMethod::ExactTransfer,
        n_max,
        masses,
        exact_masses: Some(exact.iter().map(|m| m.to_json()).collect()),
        std_errors: None,
        delta,
        rate,
        residual,
        fit_from,
        zero_from,
        trials: None,
        seed: None,
    })
}

/// Runs `trials` samples split into fixed chunks, chunk `c` drawing from stream `c` of the
/// seeded generator; `sample` returns the escape time (or `None` past the horizon).
fn chunked_counts<F>(trials: u64, seed: u64, n_max: usize, sample: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng) -> Option<usize> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let size = CHUNK.min(trials - c * CHUNK);
            let mut hist = vec![0u64; n_max + 2];
            for _ in 0..size {
                match sample(&mut rng) {
                    Some(e) => hist[e.min(n_max + 1)] += 1,
                    None => hist[n_max + 1] += 1,
                }
            }
            hist
        })
        .collect();
    let mut hist = vec![0u64; n_max + 2];
    for h in per_chunk {
        for (a, b) in hist.iter_mut().zip(h) {
            *a += b;
        }
    }
    // survivors of E_n have escape time > n
    let mut surv = vec![0u64; n_max + 1];
    let mut acc = hist[n_max + 1];
    for n in (0..=n_max).rev() {
        surv[n] = acc;
        acc += hist[n];
    }
    surv
}

fn monte_carlo_estimate(method: EscapeMethod, surv: Vec<u64>, trials: u64, seed: u64, n_max: usize) -> EscapeRateEstimate {
    let t = trials as f64;
    let masses: Vec<f64> = surv.iter().map(|&s| s as f64 / t).collect();
    let std_errors = masses.iter().map(|p| (p * (1.0 - p) / t).sqrt()).collect();
    let (delta, rate, residual, fit_from) = fit_decay(&masses);
    EscapeRateEstimate {
        method,
        n_max,
        masses,
        exact_masses: None,
        std_errors: Some(std_errors),
        delta,
        rate,
        residual,
        fit_from,
        zero_from: None,
        trials: Some(trials),
        seed: Some(seed),
    }
}

fn pick(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn cumulative(xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    xs.into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Monte Carlo estimate of `m(E_n)` from sequences sampled from the Markov measure.
pub fn escape_rate_monte_carlo(mu: &MarkovMeasure<f64>, hole: &HoleSet, n_max: usize, trials: u64, seed: u64) -> Result<EscapeRateEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let x = mu.shift();
    let hits = FirstHit::new(x, hole)?;
    let g = x.graph();
    let start = cumulative(mu.pi().iter().copied());
    let out: Vec<Vec<f64>> = (0..g.num_vertices())
        .map(|v| cumulative(mu.probs()[g.out_range(v)].iter().copied()))
        .collect();
    let surv = chunked_counts(trials, seed, n_max, |rng| {
        let mut v = pick(rng, &start);
        let mut q = 0u32;
        let mut first: Option<usize> = None;
        for pos in 1..=n_max + hits.window {
            let i = g.out_range(v).start + pick(rng, &out[v]);
            let e = g.edge(i);
            q = hits.matcher.step(q, e.label);
            if let Some(h) = hits.at(q, pos) {
                first = Some(first.map_or(h, |f| f.min(h)));
            }
            if first.is_some_and(|f| hits.settled(f, pos)) {
                return first;
            }
            v = e.to;
        }
        first
    });
    Ok(monte_carlo_estimate(EscapeMethod::MonteCarlo, surv, trials, seed, n_max))
}

/// Axis-parallel box `[lo, hi)` in the fundamental domain `[0,1)^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl TorusBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lo).zip(&self.hi).all(|((v, a), b)| *a <= *v && *v < *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }
}

/// Monte Carlo estimate of `m(E_n)` for Haar measure and a union of boxes, iterating `T_M`
/// in floating point (reliable while `β^{n_max}` times the rounding error stays small).
pub fn toral_escape_monte_carlo(
    sys: &PisotToralSystem,
    boxes: &[TorusBox],
    n_max: usize,
    trials: u64,
    seed: u64,
) -> Result<EscapeRateEstimate> {
    let m = sys.dimension();
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    if boxes.iter().any(|b| b.lo.len() != m || b.hi.len() != m) {
        return Err(Error::InvalidParameter(format!("boxes must have dimension {m}")));
    }
    let a: Vec<Vec<f64>> = sys.matrix().iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let surv = chunked_counts(trials, seed, n_max, |rng| {
        let mut x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        for n in 0..=n_max {
            if boxes.iter().any(|b| b.contains(&x)) {
                return Some(n);
            }
            let mut y: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
            crate::toral::reduce_mod_one(&mut y);
            x = y;
        }
        None
    });
    Ok(monte_carlo_estimate(EscapeMethod::ToralMonteCarlo, surv, trials, seed, n_max))
}
