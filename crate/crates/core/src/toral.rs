use std::collections::VecDeque;
use std::fmt;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::linalg::{int_char_poly, int_det, int_inverse, kernel_vector, IntMatrix};
use crate::algebra::{AlgebraicNumber, Poly, Scalar};
use crate::beta::BetaSystem;
use crate::error::{Error, Result};
use crate::graph::DetHashMap;
use crate::hole::{for_each_extension, HoleSet, ShiftedCylinder};
use crate::measure::MarkovMeasure;
use crate::subshift::contains;
use crate::trap::{construct_large_hole, synthesize_trap, LargeHoleCertificate, LargeHoleOptions, TrapCertificate, TrapOptions};
use crate::word::Word;

/// Tolerance for `A t = β t` on the unstable line.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
const FLOAT_SLACK: f64 = 1e-12;
/// Digits used on each side when a one-sided expansion certifies a chain link.
pub const LINK_DIGITS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "T")]
    T,
    #[serde(rename = "-T")]
    MinusT,
    #[serde(rename = "T^-1")]
    TInverse,
    #[serde(rename = "-T^-1")]
    MinusTInverse,
}

impl Classification {
    /// `S = -T` or `S = -T^{-1}`: the construction has to be symmetric under `x -> -x`.
    pub fn is_negated(self) -> bool {
        matches!(self, Classification::MinusT | Classification::MinusTInverse)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::T => "T",
            Classification::MinusT => "-T",
            Classification::TInverse => "T^-1",
            Classification::MinusTInverse => "-T^-1",
        })
    }
}

/// Point of `R^m / Z^m` with a bound on its distance to the exact projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub coords: Vec<f64>,
    pub tail: f64,
}

pub fn reduce_mod_one(x: &mut [f64]) {
    for c in x {
        *c -= c.floor();
        if *c >= 1.0 {
            *c = 0.0;
        }
    }
}

/// Euclidean distance in the quotient `R^m / Z^m`.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            let d = d - d.round();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn int_mul_vec(m: &[Vec<i64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum()).collect()
}

fn frobenius(m: &[Vec<i64>]) -> f64 {
    m.iter().flatten().map(|&a| (a as f64) * (a as f64)).sum::<f64>().sqrt()
}

/// A hyperbolic toral automorphism `T_M` one of whose variants `±T^{±1}` is Pisot, with the
/// homoclinic point used to project `X_β` onto the torus.
#[derive(Clone, Debug)]
pub struct PisotToralSystem {
    matrix: IntMatrix,
    /// The integer matrix among `±M^{±1}` whose dominant eigenvalue is the Pisot number `β`.
    pisot_matrix: IntMatrix,
    classification: Classification,
    char_poly: Poly,
    beta: BetaSystem,
    t_exact: Vec<AlgebraicNumber>,
    t: Vec<f64>,
    /// Stable eigenvalues of the Pisot matrix and the matching conjugates of `t`.
    stable: Vec<(Complex64, Vec<Complex64>)>,
}

impl PartialEq for PisotToralSystem {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix && self.classification == other.classification && self.t == other.t
    }
}

impl PisotToralSystem {
    pub fn new(matrix: IntMatrix) -> Result<PisotToralSystem> {
        let m = matrix.len();
        if m < 2 || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("matrix must be square of size at least 2".into()));
        }
        let det = int_det(&matrix);
        if det.magnitude().to_u64() != Some(1) {
            return Err(Error::NotUnimodular);
        }
        let char_poly = int_char_poly(&matrix);
        let roots = char_poly.complex_roots();
        let radii = char_poly.inclusion_radii(&roots);
        if roots.iter().zip(&radii).any(|(z, r)| (z.norm() - 1.0).abs() <= *r) {
            return Err(Error::NotHyperbolic);
        }
        if let Some(f) = char_poly.proper_factor(m / 2) {
            return Err(Error::Reducible(format!("{char_poly} has the factor {f}")));
        }
        let outside: Vec<Complex64> = roots.iter().copied().filter(|z| z.norm() > 1.0).collect();
        let inside: Vec<Complex64> = roots.iter().copied().filter(|z| z.norm() < 1.0).collect();
        let negate = |a: &IntMatrix| a.iter().map(|r| r.iter().map(|x| -x).collect()).collect::<IntMatrix>();
        let (classification, pisot_matrix) = if outside.len() == 1 {
            if outside[0].re > 0.0 {
                (Classification::T, matrix.clone())
            } else {
                (Classification::MinusT, negate(&matrix))
            }
        } else if inside.len() == 1 {
            let inv = int_inverse(&matrix).ok_or(Error::NotUnimodular)?;
            if inside[0].re > 0.0 {
                (Classification::TInverse, inv)
            } else {
                (Classification::MinusTInverse, negate(&inv))
            }
        } else {
            return Err(Error::NotGeneralizedPisot);
        };
        let beta_poly = int_char_poly(&pisot_matrix);
        let beta = BetaSystem::new(&beta_poly)?;
        let b = beta.beta();
        let a: Vec<Vec<AlgebraicNumber>> = pisot_matrix
            .iter()
            .map(|r| r.iter().map(|&x| AlgebraicNumber::from_int(x)).collect())
            .collect();
        let shifted = |transpose: bool| -> Vec<Vec<AlgebraicNumber>> {
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            let x = if transpose { a[j][i].clone() } else { a[i][j].clone() };
                            if i == j { &x - &b } else { x }
                        })
                        .collect()
                })
                .collect()
        };
        let v = kernel_vector(&shifted(false)).ok_or_else(|| Error::InvariantViolated("no unstable eigenvector".into()))?;
        let w = kernel_vector(&shifted(true)).ok_or_else(|| Error::InvariantViolated("no left eigenvector".into()))?;
        let wv = AlgebraicNumber::sum(&w.iter().zip(&v).map(|(x, y)| x * y).collect::<Vec<_>>());
        if wv.is_zero() {
            return Err(Error::InvariantViolated("unstable eigenvectors are orthogonal".into()));
        }
        let scale = &w[0] / &wv;
        let t_exact: Vec<AlgebraicNumber> = v.iter().map(|x| x * &scale).collect();
        let t: Vec<f64> = t_exact.iter().map(|x| x.to_f64()).collect();
        let stable = beta
            .field()
            .conjugates()
            .into_iter()
            .skip(1)
            .map(|z| (z, t_exact.iter().map(|x| x.eval_at(z)).collect()))
            .collect();
        let sys = PisotToralSystem { matrix, pisot_matrix, classification, char_poly, beta, t_exact, t, stable };
        let defect = sys.eigen_defect();
        if defect > EIGEN_TOLERANCE {
            return Err(Error::InvariantViolated(format!("A t differs from β t by {defect:e}")));
        }
        Ok(sys)
    }

    pub fn dimension(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn pisot_matrix(&self) -> &IntMatrix {
        &self.pisot_matrix
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    pub fn char_poly(&self) -> &Poly {
        &self.char_poly
    }

    pub fn beta(&self) -> &BetaSystem {
        &self.beta
    }

    pub fn homoclinic(&self) -> &[f64] {
        &self.t
    }

    pub fn homoclinic_exact(&self) -> &[AlgebraicNumber] {
        &self.t_exact
    }

    /// Torus distance between `A t` and `β t`; zero up to rounding since `t` is an exact
    /// eigenvector.
    pub fn eigen_defect(&self) -> f64 {
        let at = int_mul_vec(&self.pisot_matrix, &self.t);
        let bt: Vec<f64> = self.t.iter().map(|x| x * self.beta.beta_f64()).collect();
        torus_distance(&at, &bt)
    }

    fn t_norm(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn max_digit(&self) -> f64 {
        self.beta.d().at(0) as f64
    }

    /// `Σ_{n >= from} β^{-n} |t|` for `from >= 0`.
    fn unstable_tail(&self, from: i64) -> f64 {
        let b = self.beta.beta_f64();
        self.t_norm() * b.powi(-(from as i32)) / (1.0 - 1.0 / b)
    }

    /// `Σ_{k >= from} ‖A^k (t - e_1)‖` bounded through the stable conjugates, `from >= 1`.
    fn stable_tail(&self, from: i64) -> f64 {
        self.stable
            .iter()
            .map(|(z, v)| {
                let r = z.norm();
                let c = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                c * r.powi(from as i32) / (1.0 - r)
            })
            .sum()
    }

    fn stable_term(&self, k: i64) -> f64 {
        self.stable
            .iter()
            .map(|(z, v)| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() * z.norm().powi(k as i32))
            .sum()
    }

    fn unstable_term(&self, n: i64) -> f64 {
        self.t_norm() * self.beta.beta_f64().powi(-(n as i32))
    }

    /// Bound on the contribution of all indices `n < first` (when not known to be zero) and
    /// `n > last`.
    fn tail_bound(&self, first: i64, last: i64, left_known: bool) -> f64 {
        let left = if left_known {
            0.0
        } else if first <= 0 {
            self.stable_tail(1 - first)
        } else {
            self.stable_tail(1) + (0..first).map(|n| self.unstable_term(n)).sum::<f64>()
        };
        let right = if last >= -1 {
            self.unstable_tail(last + 1)
        } else {
            (1..-last).map(|k| self.stable_term(k)).sum::<f64>() + self.unstable_tail(0)
        };
        self.max_digit() * (left + right)
    }

    fn project(&self, digits: &[u8], first: i64, left_known: bool) -> TorusPoint {
        let m = self.dimension();
        let b = self.beta.beta_f64();
        let mut x = vec![0.0; m];
        let mut stable_acc: Vec<Complex64> = vec![Complex64::zero(); self.stable.len()];
        for (i, &a) in digits.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let n = first + i as i64;
            if n >= 0 {
                let s = a as f64 * b.powi(-(n as i32));
                for (xi, ti) in x.iter_mut().zip(&self.t) {
                    *xi += s * ti;
                }
            } else {
                for (acc, (z, _)) in stable_acc.iter_mut().zip(&self.stable) {
                    *acc += a as f64 * z.powi((-n) as i32);
                }
            }
        }
        for (acc, (_, v)) in stable_acc.iter().zip(&self.stable) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi -= (acc * vi).re;
            }
        }
        reduce_mod_one(&mut x);
        let last = first + digits.len() as i64 - 1;
        let tail = self.tail_bound(first, last, left_known) + FLOAT_SLACK * (1.0 + digits.len() as f64);
        TorusPoint { coords: x, tail }
    }

    /// `φ_t(a) = Σ a_n β^{-n} t mod Z^m` for the digits `a_first, a_{first+1}, ...`; digits
    /// outside the segment are unknown and covered by the tail bound.
    pub fn phi_project(&self, digits: &[u8], first: i64) -> TorusPoint {
        self.project(digits, first, false)
    }

    /// Projection of the one-sided sequence `a_1 a_2 ...` (zero at all indices `n <= 0`).
    pub fn phi_one_sided(&self, digits: &[u8]) -> TorusPoint {
        self.project(digits, 1, true)
    }

    /// Distance between `φ_N(σa)` and `T φ_N(a)` for a segment covering indices `-N ..= N + 1`.
    pub fn semiconjugacy_residual(&self, digits: &[u8], first: i64, n: usize) -> Result<Residual> {
        let n = n as i64;
        let last = first + digits.len() as i64 - 1;
        if first > -n || last < n + 1 {
            return Err(Error::InvalidParameter(format!("segment [{first}, {last}] does not cover [-{n}, {}]", n + 1)));
        }
        let at = |k: i64| (k - first) as usize;
        let here = self.phi_project(&digits[at(-n)..=at(n)], -n);
        let shifted = self.phi_project(&digits[at(-n + 1)..=at(n + 1)], -n);
        let mapped = int_mul_vec(&self.pisot_matrix, &here.coords);
        let distance = torus_distance(&shifted.coords, &mapped);
        let bound = shifted.tail + frobenius(&self.pisot_matrix) * here.tail;
        Ok(Residual { distance, bound })
    }

    pub fn to_doc(&self) -> SystemDoc {
        SystemDoc {
            matrix: self.matrix.clone(),
            classification: self.classification,
            t: self.t.clone(),
            beta_min_poly: self.beta.min_poly().to_i64_desc().expect("integer polynomial"),
            beta: self.beta.beta_f64(),
            pisot_matrix: self.pisot_matrix.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<PisotToralSystem> {
        let doc: SystemDoc = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        let sys = PisotToralSystem::new(doc.matrix.clone())?;
        if sys.to_doc() != doc {
            return Err(Error::Malformed("stored system data does not match the matrix".into()));
        }
        Ok(sys)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub matrix: IntMatrix,
    pub classification: Classification,
    pub t: Vec<f64>,
    pub beta_min_poly: Vec<i64>,
    pub beta: f64,
    pub pisot_matrix: IntMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub distance: f64,
    pub bound: f64,
}

impl Residual {
    pub fn holds(&self) -> bool {
        self.distance <= self.bound
    }
}

/// Adjacent cylinders `[left]` and `[right]` whose images share the point with greedy
/// expansion `left 0^∞` and quasi-greedy expansion `right'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub left: Word,
    pub right: Word,
    pub greedy: Word,
    pub quasi_greedy: Word,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub cylinders: Vec<Word>,
    pub links: Vec<ChainLink>,
}

impl Chain {
    pub fn certified(&self) -> bool {
        self.links.iter().all(|l| l.distance <= l.bound)
    }
}

impl PisotToralSystem {
    /// For `w` with a nonzero digit, the cylinder just below it: the length-`|w|` prefix of
    /// `w_1 ... w_{k-1} (w_k - 1) d_1 d_2 ...` where `w_k` is the last nonzero digit, together
    /// with `digits` symbols of that expansion.
    fn lower_neighbour(&self, w: &[u8], digits: usize) -> Option<(Vec<u8>, Vec<u8>)> {
        let k = w.iter().rposition(|&a| a != 0)?;
        let d = self.beta.d();
        let mut q: Vec<u8> = w[..=k].to_vec();
        q[k] -= 1;
        let mut i = 0;
        while q.len() < digits.max(w.len()) {
            q.push(d.at(i));
            i += 1;
        }
        Some((q[..w.len()].to_vec(), q))
    }

    fn link(&self, upper: &[u8]) -> Result<(Vec<u8>, ChainLink)> {
        let (lower, quasi) = self
            .lower_neighbour(upper, LINK_DIGITS)
            .ok_or_else(|| Error::InvariantViolated("zero cylinder has no lower neighbour".into()))?;
        if !self.beta.is_admissible(&quasi) {
            return Err(Error::InvariantViolated(format!("quasi-greedy expansion {} is inadmissible", Word(quasi))));
        }
        let mut greedy = upper.to_vec();
        greedy.resize(LINK_DIGITS.max(upper.len()), 0);
        let p = self.phi_one_sided(&greedy);
        let q = self.phi_one_sided(&quasi);
        let link = ChainLink {
            left: Word(upper.to_vec()),
            right: Word(lower.clone()),
            greedy: Word(greedy),
            quasi_greedy: Word(quasi),
            distance: torus_distance(&p.coords, &q.coords),
            bound: p.tail + q.tail,
        };
        Ok((lower, link))
    }

    /// Chain of length-`N` cylinders from `a` to `b` in which consecutive images meet, found by
    /// breadth-first search over the boundary identifications
    /// `w_1 ... w_k 0^∞ = w_1 ... (w_k - 1) d_1 d_2 ...`.
    pub fn chain_connect(&self, a: &Word, b: &Word) -> Result<Chain> {
        let n = a.len();
        if b.len() != n {
            return Err(Error::InvalidParameter("cylinders must have equal length".into()));
        }
        for w in [a, b] {
            if !self.beta.is_admissible(w.symbols()) {
                return Err(Error::InadmissibleWord(w.to_string()));
            }
        }
        let mut adj: DetHashMap<Vec<u8>, Vec<(Vec<u8>, usize)>> = DetHashMap::default();
        let mut links: Vec<ChainLink> = Vec::new();
        let mut words: Vec<Vec<u8>> = Vec::new();
        self.beta.shift().for_each_word(n, |w| words.push(w.to_vec()));
        for w in &words {
            if w.iter().all(|&x| x == 0) {
                continue;
            }
            let (lower, link) = self.link(w)?;
            let id = links.len();
            links.push(link);
            adj.entry(w.clone()).or_default().push((lower.clone(), id));
            adj.entry(lower).or_default().push((w.clone(), id));
        }
        let mut prev: DetHashMap<Vec<u8>, (Vec<u8>, usize)> = DetHashMap::default();
        let mut queue = VecDeque::from([a.0.clone()]);
        let mut seen = std::collections::HashSet::from([a.0.clone()]);
        while let Some(u) = queue.pop_front() {
            if u == b.0 {
                break;
            }
            for (v, id) in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                if seen.insert(v.clone()) {
                    prev.insert(v.clone(), (u.clone(), *id));
                    queue.push_back(v.clone());
                }
            }
        }
        if !seen.contains(&b.0) {
            return Err(Error::NotConnected(a.to_string(), b.to_string()));
        }
        let mut cylinders = vec![Word(b.0.clone())];
        let mut used = Vec::new();
        let mut cur = b.0.clone();
        while cur != a.0 {
            let (p, id) = prev[&cur].clone();
            used.push(links[id].clone());
            cylinders.push(Word(p.clone()));
            cur = p;
        }
        cylinders.reverse();
        used.reverse();
        Ok(Chain { cylinders, links: used })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPointCloud {
    pub source: String,
    /// Known digits on each side of the sampled window.
    pub truncation: usize,
    pub tail_bound: f64,
    pub points: Vec<TorusPoint>,
}

impl TorusPointCloud {
    pub fn to_csv(&self) -> String {
        let m = self.points.first().map_or(0, |p| p.coords.len());
        let mut out = String::new();
        let header: Vec<String> = (0..m).map(|i| format!("x{i}")).chain(["tail".to_string()]).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.points {
            let row: Vec<String> = p.coords.iter().chain([&p.tail]).map(|x| format!("{x:.17e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn negated(&self) -> TorusPointCloud {
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut c: Vec<f64> = p.coords.iter().map(|x| -x).collect();
                reduce_mod_one(&mut c);
                TorusPoint { coords: c, tail: p.tail }
            })
            .collect();
        TorusPointCloud { source: format!("-({})", self.source), points, ..self.clone() }
    }
}

/// Straight tube joining the two closest points of `D′` and `-D′`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tunnel {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub radius: f64,
    pub length: f64,
    /// Volume of the tube with its end caps.
    pub measure: f64,
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    let mut v = [1.0, 2.0 * r];
    if dim < 2 {
        return v[dim];
    }
    let mut cur = 0.0;
    for n in 2..=dim {
        cur = v[n % 2] * 2.0 * std::f64::consts::PI * r * r / n as f64;
        v[n % 2] = cur;
    }
    cur
}

fn tunnel(a: &TorusPointCloud, b: &TorusPointCloud, radius: f64) -> Option<Tunnel> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, p) in a.points.iter().enumerate() {
        for (j, q) in b.points.iter().enumerate() {
            let d = torus_distance(&p.coords, &q.coords);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, i, j));
            }
        }
    }
    let (length, i, j) = best?;
    let from = a.points[i].coords.clone();
    let to: Vec<f64> = from
        .iter()
        .zip(&b.points[j].coords)
        .map(|(x, y)| {
            let d = y - x;
            x + d - d.round()
        })
        .collect();
    let m = from.len();
    let measure = ball_volume(m - 1, radius) * length + ball_volume(m, radius);
    Some(Tunnel { from, to, radius, length, measure })
}

#[derive(Clone, Debug)]
pub struct PropertySOptions {
    pub delta: f64,
    /// Free digits sampled on each side of a hole cylinder.
    pub sample_depth: usize,
    pub max_points: usize,
}

impl Default for PropertySOptions {
    fn default() -> Self {
        PropertySOptions { delta: 1e-3, sample_depth: 4, max_points: 4096 }
    }
}

#[derive(Clone, Debug)]
pub struct PropertyS<S> {
    pub classification: Classification,
    /// `ε >= 1`: the whole space is returned as the hole.
    pub trivial: bool,
    pub trap: Option<TrapCertificate<S>>,
    pub hole: HoleSet,
    pub trap_verified: bool,
    pub cloud: TorusPointCloud,
    pub delta: f64,
    pub mirrored: Option<TorusPointCloud>,
    pub tunnel: Option<Tunnel>,
}

impl<S: Scalar> PropertyS<S> {
    pub fn to_json(&self) -> Value {
        json!({
            "classification": self.classification,
            "trivial": self.trivial,
            "trap_verified": self.trap_verified,
            "hole": self.hole,
            "delta": self.delta,
            "points": self.cloud.points.len(),
            "tail_bound": self.cloud.tail_bound,
            "mirrored_points": self.mirrored.as_ref().map(|c| c.points.len()),
            "tunnel": self.tunnel,
            "trap": self.trap.as_ref().map(|t| t.to_json()),
        })
    }
}

impl PisotToralSystem {
    /// Samples `φ_t` of every hole cylinder: each cylinder word is padded by `depth` admissible
    /// digits on both sides, and all such paddings are projected (evenly thinned to at most
    /// `max_points` in total).
    pub fn sample_hole(&self, hole: &HoleSet, depth: usize, max_points: usize) -> TorusPointCloud {
        let x = self.beta.shift();
        let per = (max_points / hole.len().max(1)).max(1);
        let mut points = Vec::new();
        let mut tail: f64 = 0.0;
        for c in hole.cylinders() {
            let span = depth + c.end() + depth;
            let cyl = ShiftedCylinder::new(c.word.clone(), c.shift + depth);
            let mut found: Vec<Vec<u8>> = Vec::new();
            for_each_extension(x, &cyl, span, &mut |w| {
                found.push(w.to_vec());
                found.len() < 1 << 16
            });
            let stride = found.len().div_ceil(per).max(1);
            for w in found.iter().step_by(stride) {
                let p = self.phi_project(w, 1 - depth as i64);
                tail = tail.max(p.tail);
                points.push(p);
            }
        }
        TorusPointCloud { source: "hole".into(), truncation: depth, tail_bound: tail, points }
    }

    /// Small connected hole meeting all but countably many orbits: a complete trap for the
    /// shift on `X_β`, projected to the torus; for negated classifications the image is
    /// symmetrised and joined to its mirror by a tunnel.
    pub fn property_s<S: Scalar>(
        &self,
        mu: &MarkovMeasure<S>,
        epsilon: &S,
        trap_options: &TrapOptions<S>,
        options: &PropertySOptions,
    ) -> Result<PropertyS<S>> {
        if mu.shift() != self.beta.shift() {
            return Err(Error::InvalidParameter("measure must live on the β-shift of the system".into()));
        }
        let (trivial, trap, hole, trap_verified) = if !epsilon.lt(&S::one()) {
            let x = self.beta.shift();
            let symbols = (0..x.alphabet_size()).filter(|&a| x.is_admissible(&[a])).map(|a| Word(vec![a]));
            (true, None, HoleSet::from_words(symbols, 0)?, true)
        } else {
            let cert = synthesize_trap(mu, epsilon, trap_options)?;
            let ok = cert.verification.is_trap();
            let hole = cert.hole.clone();
            (false, Some(cert), hole, ok)
        };
        let cloud = self.sample_hole(&hole, options.sample_depth, options.max_points);
        let (mirrored, tunnel) = if self.classification.is_negated() {
            let neg = cloud.negated();
            let t = tunnel(&cloud, &neg, options.delta);
            (Some(neg), t)
        } else {
            (None, None)
        };
        Ok(PropertyS {
            classification: self.classification,
            trivial,
            trap,
            hole,
            trap_verified,
            cloud,
            delta: options.delta,
            mirrored,
            tunnel,
        })
    }

    /// Large hole on `X_β` whose survivor set contains `X_{β′}`; the shift is even when the
    /// classification is negated.
    pub fn large_toral_hole<S: Scalar>(
        &self,
        mu: &MarkovMeasure<S>,
        inner: &BetaSystem,
        epsilon: &S,
        options: &LargeHoleOptions,
    ) -> Result<LargeToralHole<S>> {
        if inner.beta_f64() >= self.beta.beta_f64() - 1e-12 {
            return Err(Error::EntropyNotSmaller);
        }
        let x = self.beta.shift();
        let k = x.alphabet_size().max(inner.shift().alphabet_size());
        let y = inner.shift().with_alphabet(k)?;
        let c = contains(x, &y, options.depth);
        if !c.contained {
            return Err(Error::ContainmentFails(format!(
                "X_β′ has the word {} outside X_β",
                c.witness.map(|w| w.to_string()).unwrap_or_default()
            )));
        }
        let y = y.with_alphabet(x.alphabet_size())?;
        let even_shift = options.even_shift || self.classification.is_negated();
        let opts = LargeHoleOptions { even_shift, ..options.clone() };
        let certificate = construct_large_hole(mu, &y, epsilon, &opts)?;
        Ok(LargeToralHole {
            classification: self.classification,
            inner_min_poly: inner.min_poly().to_i64_desc().expect("integer polynomial"),
            inner_beta: inner.beta_f64(),
            even_shift,
            certificate,
        })
    }
}

#[derive(Clone, Debug)]
pub struct LargeToralHole<S> {
    pub classification: Classification,
    pub inner_min_poly: Vec<i64>,
    pub inner_beta: f64,
    pub even_shift: bool,
    pub certificate: LargeHoleCertificate<S>,
}

impl<S: Scalar> LargeToralHole<S> {
    pub fn to_json(&self) -> Value {
        json!({
            "classification": self.classification,
            "inner_min_poly": self.inner_min_poly,
            "inner_beta": self.inner_beta,
            "even_shift": self.even_shift,
            "certificate": self.certificate.to_json(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::parry_measure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cat() -> PisotToralSystem {
        PisotToralSystem::new(vec![vec![1, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn classification() {
        assert_eq!(cat().classification(), Classification::T);
        let m = PisotToralSystem::new(vec![vec![-1, -1], vec![-1, 0]]).unwrap();
        assert_eq!(m.classification(), Classification::MinusT);
        let inv = PisotToralSystem::new(vec![vec![0, 1], vec![1, -1]]).unwrap();
        assert_eq!(inv.classification(), Classification::MinusT);
        let e = PisotToralSystem::new(vec![vec![1, 0], vec![0, 1]]).unwrap_err();
        assert_eq!(e.code(), "NotHyperbolic");
        let e = PisotToralSystem::new(vec![vec![2, 1], vec![1, 2]]).unwrap_err();
        assert_eq!(e.code(), "NotUnimodular");
        let trib = PisotToralSystem::new(vec![vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        assert_eq!(trib.classification(), Classification::T);
        assert_eq!(trib.beta().summary(), "d' = 111, d = (110)*");
    }

    #[test]
    fn inverse_classification() {
        // x^3 - x^2 - x - 1 reversed: one root inside the unit disk
        let m = vec![vec![0, 1, 0], vec![0, 0, 1], vec![1, -1, -1]];
        let s = PisotToralSystem::new(m).unwrap();
        assert_eq!(s.classification(), Classification::TInverse);
        assert!(s.eigen_defect() < EIGEN_TOLERANCE);
    }

    #[test]
    fn homoclinic_projects_e1() {
        let s = cat();
        let b = s.beta().beta_f64();
        // t lies on the unstable line (b, 1) and t - e_1 on the stable line
        let t = s.homoclinic();
        assert!((t[0] - b * t[1]).abs() < 1e-12);
        let st = [t[0] - 1.0, t[1]];
        assert!((st[0] + st[1] / b).abs() < 1e-12);
    }

    #[test]
    fn projection_basics() {
        let s = cat();
        let zero = s.phi_project(&[0; 21], -10);
        assert!(torus_distance(&zero.coords, &[0.0, 0.0]) < 1e-15);
        let mut one = vec![0u8; 21];
        one[10] = 1;
        let p = s.phi_project(&one, -10);
        let mut t = s.homoclinic().to_vec();
        reduce_mod_one(&mut t);
        assert!(torus_distance(&p.coords, &t) < 1e-12);
        let alt: Vec<u8> = (0..61).map(|i| (i % 2) as u8).collect();
        let q = s.phi_project(&alt, -30);
        let b = s.beta().beta_f64();
        let tn = s.homoclinic().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(q.tail < b.powi(-29) * tn / (1.0 - 1.0 / b));
    }

    #[test]
    fn semiconjugacy() {
        let s = cat();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = s.beta().shift().graph();
        for _ in 0..50 {
            let mut v = rng.random_range(0..g.num_vertices());
            let digits: Vec<u8> = (0..83)
                .map(|_| {
                    let out = g.out_edges(v);
                    let e = &out[rng.random_range(0..out.len())];
                    v = e.to;
                    e.label
                })
                .collect();
            let r = s.semiconjugacy_residual(&digits, -41, 40).unwrap();
            assert!(r.holds(), "{r:?}");
            assert!(r.distance < 1e-7);
        }
    }

    #[test]
    fn golden_chain() {
        let s = cat();
        let c = s.chain_connect(&"10".parse().unwrap(), &"01".parse().unwrap()).unwrap();
        assert_eq!(c.cylinders.len(), 2);
        assert!(c.certified());
        assert_eq!(c.links[0].quasi_greedy.0[..4], [0, 1, 0, 1]);
        let same = s.chain_connect(&"00".parse().unwrap(), &"00".parse().unwrap()).unwrap();
        assert_eq!(same.cylinders.len(), 1);
    }

    #[test]
    fn property_s_golden() {
        let s = cat();
        let mu = parry_measure(s.beta().shift()).unwrap();
        let eps = AlgebraicNumber::from_ratio(1, 2);
        let r = s.property_s(&mu, &eps, &TrapOptions::default(), &PropertySOptions::default()).unwrap();
        assert!(r.trap_verified && !r.trivial);
        assert!(!r.cloud.points.is_empty());
        assert!(r.tunnel.is_none());
        let big = s.property_s(&mu, &AlgebraicNumber::from_int(1), &TrapOptions::default(), &PropertySOptions::default()).unwrap();
        assert!(big.trivial);
    }

    #[test]
    fn property_s_negated_has_tunnel() {
        let s = PisotToralSystem::new(vec![vec![-1, -1], vec![-1, 0]]).unwrap();
        let mu = parry_measure(s.beta().shift()).unwrap();
        let eps = AlgebraicNumber::from_ratio(1, 2);
        let r = s.property_s(&mu, &eps, &TrapOptions::default(), &PropertySOptions::default()).unwrap();
        assert!(r.mirrored.is_some());
        let t = r.tunnel.unwrap();
        assert!(t.measure > 0.0 && t.length >= 0.0);
    }

    #[test]
    fn large_toral() {
        let trib = PisotToralSystem::new(vec![vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        let golden = BetaSystem::from_coeffs_desc(&[1, -1, -1]).unwrap();
        let mu = parry_measure(trib.beta().shift()).unwrap();
        let eps = AlgebraicNumber::from_ratio(3, 10);
        let r = trib.large_toral_hole(&mu, &golden, &eps, &LargeHoleOptions::default()).unwrap();
        assert!(r.certificate.meets_target && r.certificate.contained);
        let same = BetaSystem::from_coeffs_desc(&[1, -1, -1, -1]).unwrap();
        assert_eq!(trib.large_toral_hole(&mu, &same, &eps, &LargeHoleOptions::default()).unwrap_err().code(), "EntropyNotSmaller");
    }

    #[test]
    fn json_round_trip() {
        let s = cat();
        assert_eq!(PisotToralSystem::from_json(&s.to_json()).unwrap(), s);
    }
}
