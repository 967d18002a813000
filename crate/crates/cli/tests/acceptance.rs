//! One line per acceptance criterion, written straight to stdout so it survives output capture.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use trapforge::algebra::field::parse_rational;
use trapforge::algebra::{AlgebraicNumber, NumberField};
use trapforge::beta::BetaSystem;
use trapforge::escape::{escape_rate_exact, escape_rate_monte_carlo, survival_masses};
use trapforge::hole::{union_measure, HoleSet, ShiftedCylinder};
use trapforge::measure::{parry_measure, uniform_bernoulli};
use trapforge::subshift::SubshiftSpec;
use trapforge::survivor::{survivor_entropy, verify_trap};
use trapforge::toral::PisotToralSystem;
use trapforge::trap::{complement_cylinders, construct_large_hole, synthesize_trap, LargeHoleOptions, TrapOptions};
use trapforge::word::Word;

const BIN: &str = env!("CARGO_BIN_EXE_trapforge");
const FULL2: &str = r#"{"alphabet_size":2,"kind":"sft","forbidden":[]}"#;
const GOLDEN: &str = r#"{"alphabet_size":2,"kind":"sft","forbidden":["11"]}"#;

const TRAP_SECONDS: u64 = 60;
const UNION_WINDOW: usize = 1000;
const LARGE_HOLE_SECONDS: u64 = 30;
const ORACLE_SECONDS: u64 = 300;
const ENTROPY_TOL: f64 = 1e-9;
const RATE_TOL: f64 = 1e-12;
const MC_SIGMAS: f64 = 3.0;
const TAIL_CEILING: f64 = 1e-6;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {id} [{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn cli(args: &[&str], threads: Option<usize>) -> (String, Duration) {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("TRAPFORGE_THREADS", n.to_string());
    }
    let t0 = Instant::now();
    let out = cmd.output().expect("run trapforge");
    let elapsed = t0.elapsed();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    (String::from_utf8(out.stdout).unwrap(), elapsed)
}

fn ratio(n: i64, d: i64) -> AlgebraicNumber {
    AlgebraicNumber::from_ratio(n, d)
}

fn exact(v: &Value, field: Option<&Arc<NumberField>>) -> AlgebraicNumber {
    match v {
        Value::String(s) => AlgebraicNumber::rational(parse_rational(s).unwrap()),
        Value::Array(c) => field
            .expect("field")
            .element(c.iter().map(|x| parse_rational(x.as_str().unwrap()).unwrap()).collect()),
        other => panic!("not an exact value: {other}"),
    }
}

fn all_words(k: u8, n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..(k as usize).pow(n as u32)).map(move |mut i| {
        let mut w = vec![0u8; n];
        for s in w.iter_mut().rev() {
            *s = (i % k as usize) as u8;
            i /= k as usize;
        }
        w
    })
}

fn no_11(w: &[u8]) -> bool {
    !w.windows(2).any(|p| p == [1, 1])
}

/// The orbit of `u^∞` enters the hole iff some cylinder word occurs in `u^∞`.
fn orbit_hits(u: &[u8], words: &BTreeMap<usize, HashSet<&[u8]>>) -> bool {
    words.iter().any(|(&len, set)| {
        (0..u.len()).any(|j| {
            let s: Vec<u8> = u.iter().copied().cycle().skip(j).take(len).collect();
            set.contains(s.as_slice())
        })
    })
}

fn words_by_length(h: &HoleSet) -> BTreeMap<usize, HashSet<&[u8]>> {
    let mut m: BTreeMap<usize, HashSet<&[u8]>> = BTreeMap::new();
    for c in h.cylinders() {
        m.entry(c.word.len()).or_default().insert(c.word.symbols());
    }
    m
}

/// Every pair `σ^{-a}[u] ∩ σ^{-b}[v]` is nonempty in the full 2-shift or the golden shift. A run
/// of zeros fills any gap, so only abutting or overlapping cylinders can clash; cylinders are
/// grouped by window so the check is linear in the hole size per pair of windows.
fn all_pairs_meet(cyl: &[ShiftedCylinder], golden: bool) -> bool {
    let mut groups: BTreeMap<(usize, usize), Vec<&[u8]>> = BTreeMap::new();
    for c in cyl {
        groups.entry((c.shift, c.word.len())).or_default().push(c.word.symbols());
    }
    if golden && cyl.iter().any(|c| !no_11(c.word.symbols())) {
        return false;
    }
    let groups: Vec<_> = groups.into_iter().collect();
    for (i, ((sa, la), a)) in groups.iter().enumerate() {
        if a.iter().any(|w| *w != a[0]) {
            return false;
        }
        for ((sb, lb), b) in &groups[i + 1..] {
            let end = sa + la;
            if *sb > end {
                break;
            }
            if *sb == end {
                if golden && a.iter().any(|u| u[la - 1] == 1) && b.iter().any(|v| v[0] == 1) {
                    return false;
                }
                continue;
            }
            let (lo, hi) = (*sb, end.min(sb + lb));
            let first = &a[0][lo - sa..hi - sa];
            if a.iter().any(|u| &u[lo - sa..hi - sa] != first) || b.iter().any(|v| &v[..hi - lo] != first) {
                return false;
            }
        }
    }
    true
}

struct TrapRun {
    label: String,
    eps: (i64, i64),
    elapsed: Duration,
    summary: String,
    artifact: Value,
    x: SubshiftSpec,
}

fn trap_runs() -> &'static [TrapRun] {
    static RUNS: OnceLock<Vec<TrapRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut runs = Vec::new();
        for (name, doc) in [("full2", FULL2), ("golden", GOLDEN)] {
            let shift = dir.path().join(format!("{name}.json"));
            std::fs::write(&shift, doc).unwrap();
            for (eps_text, eps) in [("0.9", (9, 10)), ("0.5", (1, 2)), ("0.25", (1, 4))] {
                let out = dir.path().join(format!("{name}-{eps_text}.json"));
                let (summary, elapsed) = cli(
                    &["trap-synth", "--shift", shift.to_str().unwrap(), "--measure", "parry", "--eps", eps_text, "--out", out.to_str().unwrap()],
                    None,
                );
                let artifact: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
                runs.push(TrapRun {
                    label: format!("{name} ε={eps_text}"),
                    eps,
                    elapsed,
                    summary: summary.trim().to_string(),
                    artifact,
                    x: SubshiftSpec::from_json(doc).unwrap(),
                });
            }
        }
        runs
    })
}

fn trace(run: &TrapRun) -> Vec<AlgebraicNumber> {
    let mu = parry_measure(&run.x).unwrap();
    let field = mu.field();
    run.artifact["t"].as_array().unwrap().iter().map(|v| exact(v, field.as_ref())).collect()
}

#[test]
fn criterion_1_small_traps() {
    let mut failures = Vec::new();
    let mut worst = Duration::ZERO;
    for run in trap_runs() {
        let golden = run.x.forbidden().len() == 1;
        let mu = parry_measure(&run.x).unwrap();
        let hole: HoleSet = serde_json::from_value(run.artifact["hole"].clone()).unwrap();
        let eps = ratio(run.eps.0, run.eps.1);
        worst = worst.max(run.elapsed);
        let cylinder_sum: AlgebraicNumber = hole.cylinders().iter().fold(AlgebraicNumber::zero(), |acc, c| acc + mu.word_measure(c.word.symbols()));
        let union_ok = hole.window() > UNION_WINDOW || union_measure(&mu, &hole) <= cylinder_sum;
        let measure_ok = union_ok && cylinder_sum < eps && run.artifact["measure_f64"].as_f64().unwrap() < eps.to_f64();
        let words = words_by_length(&hole);
        let periodic = (1..=10).flat_map(|p| all_words(2, p)).filter(|u| !golden || no_11(&[u.as_slice(), u.as_slice()].concat()));
        let empty = verify_trap(&run.x, &hole).unwrap().is_trap()
            && run.artifact["verification"]["status"] == "CompleteTrap"
            && periodic.into_iter().all(|u| orbit_hits(&u, &words));
        let cyl = hole.cylinders();
        let positive = all_pairs_meet(cyl, golden);
        let t = trace(run);
        let c32 = ratio(1, 32);
        let recurrence = t.len() >= 2 && t.windows(2).all(|p| p[1] <= &p[0] - &(&(&p[0] * &p[0]) * &c32));
        let timely = run.elapsed < Duration::from_secs(TRAP_SECONDS);
        let summary_ok = run.summary.starts_with("trap μ=") && run.summary.ends_with("verified=true");
        if !(measure_ok && empty && positive && recurrence && timely && summary_ok) {
            failures.push(format!(
                "{} (measure {measure_ok}, empty {empty}, positive {positive}, recurrence {recurrence}, time {:?}, summary {summary_ok})",
                run.label, run.elapsed
            ));
        }
    }
    let ok = failures.is_empty();
    let detail = if ok {
        format!("6 certificates, all four conditions exact, slowest run {:.1}s < {TRAP_SECONDS}s", worst.as_secs_f64())
    } else {
        failures.join("; ")
    };
    report(1, "small traps on full2 and golden", ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_2_decay_bound() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for run in trap_runs() {
        let t = trace(run);
        let t0 = &t[0];
        let c32 = AlgebraicNumber::from_int(32);
        // t_n <= 32 / (n + 32/t_0)  ⟺  t_n (n t_0 + 32) <= 32 t_0
        for (n, tn) in t.iter().enumerate() {
            checked += 1;
            let lhs = tn * &(&(&AlgebraicNumber::from_int(n as i64) * t0) + &c32);
            if lhs > &c32 * t0 {
                failures.push(format!("{} n={n}", run.label));
            }
        }
    }
    let ok = failures.is_empty();
    let detail = if ok { format!("{checked} trace entries satisfy the closed-form bound exactly") } else { failures.join("; ") };
    report(2, "decay t_n <= 32/(n + 32/t_0)", ok, &detail);
    assert!(ok, "{detail}");
}

fn fibonacci(n: usize) -> i64 {
    let (mut a, mut b) = (0i64, 1i64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

#[test]
fn criterion_3_large_hole() {
    let x = SubshiftSpec::full_shift(2);
    let y = SubshiftSpec::from_json(GOLDEN).unwrap();
    let mu = uniform_bernoulli(2);
    let mut problems = Vec::new();
    for n in [5usize, 10] {
        let (m, _) = complement_cylinders(&mu, &y, n);
        let expected = ratio((1 << n) - fibonacci(n + 2), 1 << n);
        if m != expected {
            problems.push(format!("μ(Σ′_{n}) = {m}, expected {expected}"));
        }
    }
    if complement_cylinders(&mu, &y, 5).0 != ratio(19, 32) || complement_cylinders(&mu, &y, 10).0 != ratio(880, 1024) {
        problems.push("pinned values 19/32, 880/1024 differ".into());
    }
    let t0 = Instant::now();
    let opts = LargeHoleOptions { word_length: Some(10), depth: 20, ..Default::default() };
    let cert = construct_large_hole(&mu, &y, &ratio(1, 5), &opts).unwrap();
    let elapsed = t0.elapsed();
    let g = &cert.hole;
    let mass = union_measure(&mu, g);
    if mass <= ratio(4, 5) {
        problems.push(format!("μ(G) = {mass} not above 4/5"));
    }
    // every golden word of the hole window avoids G, so no golden orbit ever enters it
    let w = g.window();
    let escapes = all_words(2, w).filter(|u| no_11(u)).filter(|u| g.contains(u)).count();
    if escapes != 0 || !cert.contained {
        problems.push(format!("{escapes} golden windows of length {w} lie in G"));
    }
    let h = survivor_entropy(&x, g);
    let log_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    if h < log_phi - ENTROPY_TOL {
        problems.push(format!("survivor entropy {h} below log φ"));
    }
    if elapsed >= Duration::from_secs(LARGE_HOLE_SECONDS) {
        problems.push(format!("took {elapsed:?}"));
    }
    let ok = problems.is_empty();
    let detail = if ok {
        format!(
            "μ(Σ′_5)=19/32, μ(Σ′_10)=880/1024, μ(G)={:.6} > 0.8, golden ⊂ J(G) on all windows of length {w}, h(J)={h:.12}, {:.2}s",
            mass.to_f64(),
            elapsed.as_secs_f64()
        )
    } else {
        problems.join("; ")
    };
    report(3, "large hole full2 ⊃ golden", ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_4_survivor_oracle() {
    let t0 = Instant::now();
    let x = SubshiftSpec::full_shift(2);
    let cylinders: Vec<ShiftedCylinder> = (1..=4)
        .flat_map(|len| (0..=4 - len).flat_map(move |shift| all_words(2, len).map(move |w| ShiftedCylinder::new(Word(w), shift))))
        .collect();
    // bit c of a mask: the orbit of u^∞ enters cylinder c
    let masks: Vec<u64> = (1..=10)
        .flat_map(|p| all_words(2, p))
        .map(|u| {
            let mut m = 0u64;
            for j in 0..u.len() {
                let s: Vec<u8> = u.iter().copied().cycle().skip(j).take(4).collect();
                for (c, cyl) in cylinders.iter().enumerate() {
                    if cyl.contains(&s) {
                        m |= 1 << c;
                    }
                }
            }
            m
        })
        .collect();
    let n = cylinders.len();
    let mut holes = 0usize;
    let mut disagreements = Vec::new();
    let mut traps = 0usize;
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                if (i == j && j != k) || (j == k && i != j) {
                    continue;
                }
                let idx: BTreeSet<usize> = [i, j, k].into_iter().collect();
                let hole = HoleSet::new(idx.iter().map(|&c| cylinders[c].clone()).collect()).unwrap();
                let hm: u64 = idx.iter().map(|&c| 1u64 << c).sum();
                let brute_trap = masks.iter().all(|m| m & hm != 0);
                let v = verify_trap(&x, &hole).unwrap();
                holes += 1;
                traps += v.is_trap() as usize;
                if v.is_trap() != brute_trap {
                    disagreements.push(format!("{idx:?}"));
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    let ok = disagreements.is_empty() && elapsed < Duration::from_secs(ORACLE_SECONDS);
    let detail = if ok {
        format!("{holes} holes from {n} cylinders, {traps} traps, full agreement with periods <= 10, {:.1}s", elapsed.as_secs_f64())
    } else {
        format!("{} disagreements (first {:?}), {elapsed:?}", disagreements.len(), disagreements.first())
    };
    report(4, "survivor automaton vs periodic search", ok, &detail);
    assert!(ok, "{detail}");
}

/// `β · 10^200`, rounded up, for the root in `(1, 3)` of a polynomial (highest degree first).
fn root_upper(coeffs: &[i64], scale: &BigInt) -> BigInt {
    let eval = |b: &BigInt| -> BigInt {
        let deg = coeffs.len() - 1;
        coeffs.iter().enumerate().map(|(i, &c)| BigInt::from(c) * b.pow((deg - i) as u32) * scale.pow(i as u32)).sum()
    };
    let (mut lo, mut hi) = (scale.clone(), scale * 3);
    assert!(eval(&lo).is_negative() && eval(&hi).is_positive());
    while &hi - &lo > BigInt::from(1) {
        let mid: BigInt = (&lo + &hi) / 2;
        if eval(&mid).is_positive() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Greedy digits of 1 with an upper approximation of β; rounding up keeps every remainder at or
/// above the true one, so exact integer hits are not lost.
fn greedy_oracle(b: &BigInt, scale: &BigInt, n: usize) -> Vec<u8> {
    let mut x = scale.clone();
    (0..n)
        .map(|_| {
            let prod = b * &x;
            let y: BigInt = (&prod + scale - 1) / scale;
            let d = &y / scale;
            x = &y - &d * scale;
            d.to_u8().unwrap()
        })
        .collect()
}

#[test]
fn criterion_5_parry_machinery() {
    let scale = BigInt::from(10).pow(200);
    let digits = 40;
    let mut problems = Vec::new();
    for (poly, name, d_prime, d) in [
        (vec![1i64, -1, -1], "golden", "11", "(10)*"),
        (vec![1, -1, -1, -1], "tribonacci", "111", "(110)*"),
        (vec![1, -2, -1], "1+√2", "21", "(20)*"),
    ] {
        let sys = BetaSystem::from_coeffs_desc(&poly).unwrap();
        if sys.d_prime().to_string() != d_prime || sys.d().to_string() != d {
            problems.push(format!("{name}: got {}", sys.summary()));
        }
        let b = root_upper(&poly, &scale);
        let oracle = greedy_oracle(&b, &scale, digits);
        if oracle != sys.d_prime().prefix(digits) {
            problems.push(format!("{name}: greedy oracle {oracle:?}"));
        }
        let last = oracle.iter().rposition(|&a| a != 0).unwrap();
        let mut block = oracle[..=last].to_vec();
        block[last] -= 1;
        let quasi: Vec<u8> = block.iter().copied().cycle().take(digits).collect();
        if quasi != sys.d().prefix(digits) {
            problems.push(format!("{name}: quasi-greedy oracle {quasi:?}"));
        }
        let beta_f = (&b / BigInt::from(10).pow(185)).to_f64().unwrap() / 1e15;
        let defect = (sys.shift().entropy() - beta_f.ln()).abs();
        if defect > ENTROPY_TOL {
            problems.push(format!("{name}: entropy defect {defect:e}"));
        }
        // Σ d′_k β^{-k} = 1  ⟺  β^n = Σ d′_k β^{n-k}
        let beta = sys.beta();
        let dp = sys.d_prime().prefix(last + 1);
        let mut rhs = AlgebraicNumber::zero();
        for &a in &dp {
            rhs = &(&rhs * &beta) + &AlgebraicNumber::from_int(a as i64);
        }
        let lhs = (0..dp.len()).fold(AlgebraicNumber::one(), |p, _| &p * &beta);
        if lhs != rhs {
            problems.push(format!("{name}: Σ d′_k β^-k ≠ 1"));
        }
        let (out, _) = cli(&["beta-parry", "--poly", &poly.iter().map(i64::to_string).collect::<Vec<_>>().join(",")], None);
        if out.trim() != format!("d' = {d_prime}, d = {d}") {
            problems.push(format!("{name}: CLI printed {out:?}"));
        }
    }
    let ok = problems.is_empty();
    let detail = if ok {
        "d′/d for golden, tribonacci, 1+√2 match a 200-digit greedy oracle; entropy = log β within 1e-9; Σ d′_k β^-k = 1 exactly".to_string()
    } else {
        problems.join("; ")
    };
    report(5, "Parry expansions", ok, &detail);
    assert!(ok, "{detail}");
}

fn torus_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            d.min(1.0 - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn criterion_6_semiconjugacy() {
    let n = 40usize;
    let a = vec![vec![1i64, 1], vec![1, 0]];
    let sys = PisotToralSystem::new(a.clone()).unwrap();
    let frobenius = (a.iter().flatten().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    let mut max_bound: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..1000 {
        let mut w = Vec::with_capacity(2 * n + 2);
        for _ in 0..2 * n + 2 {
            let prev_one = w.last() == Some(&1);
            w.push(if prev_one { 0 } else { rng.random_range(0..2u8) });
        }
        assert!(sys.beta().is_admissible(&w));
        let first = -(n as i64);
        let here = sys.phi_project(&w[..=2 * n], first);
        let shifted = sys.phi_project(&w[1..], first);
        let mapped: Vec<f64> = a.iter().map(|r| r.iter().zip(&here.coords).map(|(&m, x)| m as f64 * x).sum()).collect();
        let gap = torus_gap(&shifted.coords, &mapped);
        let bound = shifted.tail + frobenius * here.tail;
        let r = sys.semiconjugacy_residual(&w, first, n).unwrap();
        if gap > bound || !r.holds() || bound > TAIL_CEILING {
            violations += 1;
        }
        worst = worst.max(gap);
        max_bound = max_bound.max(bound);
    }
    let ok = violations == 0;
    let detail = format!("1000 words, N={n}: max distance {worst:.3e} <= bound (max {max_bound:.3e}), {violations} violations");
    report(6, "φ∘σ = T∘φ on [[1,1],[1,0]]", ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_7_escape_rate() {
    let mu = uniform_bernoulli(2);
    let hole = HoleSet::from_words([Word(vec![1])], 0).unwrap();
    let mut problems = Vec::new();
    let exact_masses = survival_masses(&mu, &hole, 30).unwrap();
    for (n, m) in exact_masses.iter().enumerate() {
        if *m != ratio(1, 1 << (n + 1)) {
            problems.push(format!("m(E_{n}) = {m}"));
        }
    }
    let e = escape_rate_exact(&mu, &hole, 30).unwrap();
    let rate_gap = (e.rate - 2f64.ln()).abs();
    if rate_gap > RATE_TOL {
        problems.push(format!("rate {} off by {rate_gap:e}", e.rate));
    }
    let golden = SubshiftSpec::from_json(GOLDEN).unwrap();
    let mut traps = 0;
    for (x, eps) in [(SubshiftSpec::full_shift(2), (1, 2)), (golden.clone(), (9, 10)), (golden, (1, 2))] {
        let m = parry_measure(&x).unwrap();
        let cert = synthesize_trap(&m, &ratio(eps.0, eps.1), &TrapOptions::default()).unwrap();
        assert!(cert.verification.is_trap());
        let r = escape_rate_exact(&m, &cert.hole, 40).unwrap();
        traps += 1;
        if !(r.rate.is_infinite() && r.rate > 0.0 && r.zero_from.is_some()) {
            problems.push(format!("trap rate {}", r.rate));
        }
    }
    let trials = 1_000_000u64;
    let n_mc = 20;
    let mc = escape_rate_monte_carlo(&mu.to_f64(), &hole, n_mc, trials, 0).unwrap();
    let mut worst_z: f64 = 0.0;
    for n in 0..=n_mc {
        let p = 0.5f64.powi(n as i32 + 1);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let z = (mc.masses[n] - p).abs() / se;
        worst_z = worst_z.max(z);
        if z > MC_SIGMAS {
            problems.push(format!("MC m(E_{n}) = {} is {z:.2} SE from {p}", mc.masses[n]));
        }
    }
    let ok = problems.is_empty();
    let detail = if ok {
        format!(
            "m(E_n)=2^-(n+1) exactly for n<=30, |rate-log 2|={rate_gap:.1e}, {traps} traps give rate inf, MC 1e6 within {worst_z:.2} SE (n<={n_mc})"
        )
    } else {
        problems.join("; ")
    };
    report(7, "escape rates", ok, &detail);
    assert!(ok, "{detail}");
}

/// Parry's lexicographic criterion on a finite word.
fn parry_admissible(w: &[u8], d: &[u8]) -> bool {
    (0..w.len()).all(|i| w[i..] <= d[..w.len() - i])
}

#[test]
fn criterion_8_chains() {
    let mut problems = Vec::new();
    let mut pairs = 0;
    let mut longest = 0;
    for (name, m) in [("golden", vec![vec![1i64, 1], vec![1, 0]]), ("tribonacci", vec![vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]])] {
        let sys = PisotToralSystem::new(m).unwrap();
        let d = sys.beta().d().prefix(64);
        let words: Vec<Word> = all_words(2, 3).filter(|w| parry_admissible(w, &d)).map(Word).collect();
        for a in &words {
            for b in &words {
                if a == b {
                    continue;
                }
                pairs += 1;
                let chain = match sys.chain_connect(a, b) {
                    Ok(c) => c,
                    Err(e) => {
                        problems.push(format!("{name} {a}→{b}: {e}"));
                        continue;
                    }
                };
                longest = longest.max(chain.cylinders.len());
                let cyl = &chain.cylinders;
                let mut fine = cyl.first() == Some(a) && cyl.last() == Some(b) && chain.links.len() + 1 == cyl.len();
                for (i, l) in chain.links.iter().enumerate() {
                    let ends: BTreeSet<&Word> = [&l.left, &l.right].into_iter().collect();
                    let step: BTreeSet<&Word> = [&cyl[i], &cyl[i + 1]].into_iter().collect();
                    let p = sys.phi_one_sided(l.greedy.symbols());
                    let q = sys.phi_one_sided(l.quasi_greedy.symbols());
                    fine &= ends == step
                        && l.greedy.symbols().starts_with(l.left.symbols())
                        && l.quasi_greedy.symbols().starts_with(l.right.symbols())
                        && parry_admissible(l.greedy.symbols(), &d)
                        && parry_admissible(l.quasi_greedy.symbols(), &d)
                        && torus_gap(&p.coords, &q.coords) <= p.tail + q.tail
                        && p.tail + q.tail <= TAIL_CEILING;
                }
                if !fine || !chain.certified() {
                    problems.push(format!("{name} {a}→{b}: uncertified chain"));
                }
            }
        }
    }
    let ok = problems.is_empty();
    let detail = if ok {
        format!("{pairs} ordered pairs of length-3 cylinders connected, longest chain {longest}, every link within its tail bound")
    } else {
        problems.join("; ")
    };
    report(8, "chain connectedness for golden and tribonacci", ok, &detail);
    assert!(ok, "{detail}");
}

fn run_in(dir: &Path, tag: &str, args: &[&str], threads: usize) -> (String, Vec<u8>) {
    let out = dir.join(format!("{tag}-{threads}.out"));
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    full.extend(["--out", &out_s]);
    let (summary, _) = cli(&full, Some(threads));
    (summary, std::fs::read(&out).unwrap())
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden.json");
    let full2 = dir.path().join("full2.json");
    std::fs::write(&golden, GOLDEN).unwrap();
    std::fs::write(&full2, FULL2).unwrap();
    let (g, f) = (golden.to_str().unwrap(), full2.to_str().unwrap());
    let hole = r#"{"cylinders":[{"word":"1","shift":0}]}"#;
    let boxes = r#"[{"lo":[0.0,0.0],"hi":[0.2,0.2]}]"#;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("trap", vec!["trap-synth", "--shift", g, "--eps", "0.5"]),
        ("mc", vec!["toral-escape", "--shift", f, "--hole", hole, "--method", "monte-carlo", "--trials", "300000", "--n-max", "12", "--seed", "7"]),
        ("toral-mc", vec!["toral-escape", "--matrix", "2,1;1,1", "--boxes", boxes, "--trials", "200000", "--n-max", "8", "--seed", "7"]),
        ("property-s", vec!["property-s", "--matrix", "-1,-1;-1,0", "--eps", "0.5", "--format", "csv"]),
        ("large", vec!["large-hole", "--shift", f, "--inner", g, "--eps", "0.2", "--word-length", "10"]),
    ];
    let mut differing = Vec::new();
    for (tag, args) in &runs {
        let base = run_in(dir.path(), tag, args, 1);
        for threads in [2, 8] {
            if run_in(dir.path(), tag, args, threads) != base {
                differing.push(format!("{tag} with {threads} threads"));
            }
        }
        if run_in(dir.path(), tag, args, 1) != base {
            differing.push(format!("{tag} repeated"));
        }
    }
    let ok = differing.is_empty();
    let detail = if ok {
        format!("{} CLI runs byte-identical across 1, 2 and 8 threads and on repetition", runs.len())
    } else {
        differing.join("; ")
    };
    report(9, "determinism", ok, &detail);
    assert!(ok, "{detail}");
}
