use std::collections::BTreeSet;

use proptest::prelude::*;
use trapforge::algebra::{AlgebraicNumber, Scalar};
use trapforge::beta::BetaSystem;
use trapforge::hole::{normalize_to_length, quarter_split, union_measure, HoleSet, ShiftedCylinder};
use trapforge::measure::parry_measure;
use trapforge::subshift::SubshiftSpec;
use trapforge::survivor::{verify_trap, TrapStatus};
use trapforge::trap::{synthesize_trap, TrapOptions};
use trapforge::word::Word;
use trapforge::Error;

fn golden() -> SubshiftSpec {
    SubshiftSpec::build_sft(2, &["11".parse().unwrap()]).unwrap()
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

fn has_factor(w: &[u8], f: &[u8]) -> bool {
    f.len() <= w.len() && w.windows(f.len()).any(|x| x == f)
}

/// `u^∞` avoids every forbidden word.
fn cyclic_ok(u: &[u8], forbidden: &[Vec<u8>]) -> bool {
    let longest = forbidden.iter().map(Vec::len).max().unwrap_or(0);
    let s: Vec<u8> = u.iter().copied().cycle().take(u.len() + longest + u.len()).collect();
    forbidden.iter().all(|f| !has_factor(&s, f))
}

/// Some point of the orbit of `u^∞` lies in the hole.
fn orbit_hits(u: &[u8], h: &HoleSet) -> bool {
    let w = h.window();
    (0..u.len()).any(|j| {
        let s: Vec<u8> = u.iter().copied().cycle().skip(j).take(w).collect();
        h.contains(&s)
    })
}

fn surviving_period(x_forbidden: &[Vec<u8>], h: &HoleSet, k: u8, max_p: usize) -> Option<Vec<u8>> {
    (1..=max_p).flat_map(|p| all_words(k, p)).find(|u| cyclic_ok(u, x_forbidden) && !orbit_hits(u, h))
}

fn word_strategy(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 1..=max_len)
}

fn hole_strategy() -> impl Strategy<Value = Vec<(Vec<u8>, usize)>> {
    prop::collection::vec((word_strategy(3), 0usize..3), 1..=3)
}

fn to_hole(items: &[(Vec<u8>, usize)]) -> HoleSet {
    HoleSet::new(items.iter().map(|(w, s)| ShiftedCylinder::new(Word(w.clone()), *s)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn language_matches_extendable_words(forbidden in prop::collection::vec(word_strategy(3), 0..4), n in 1usize..6) {
        let ws: Vec<Word> = forbidden.iter().map(|f| Word(f.clone())).collect();
        // with at most four states, a word extending five steps each way lies on a bi-infinite path
        let m = 5;
        let oracle: BTreeSet<Vec<u8>> = all_words(2, n + 2 * m)
            .filter(|w| forbidden.iter().all(|f| !has_factor(w, f)))
            .map(|w| w[m..m + n].to_vec())
            .collect();
        match SubshiftSpec::build_sft(2, &ws) {
            Ok(x) => {
                let got: BTreeSet<Vec<u8>> = x.language(n).words.into_iter().map(|w| w.0).collect();
                prop_assert_eq!(&got, &oracle);
                prop_assert_eq!(x.count_words(n), oracle.len() as u128);
            }
            Err(Error::EmptySubshift) => prop_assert!(oracle.is_empty()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn normalization_is_membership(items in hole_strategy(), extra in 0usize..3) {
        let x = golden();
        let h = to_hole(&items);
        prop_assume!(h.validate(&x).is_ok());
        let n = h.window() + extra;
        let norm: BTreeSet<Word> = normalize_to_length(&x, &h, n).unwrap().into_iter().collect();
        for w in x.language(n).words {
            prop_assert_eq!(norm.contains(&w), h.contains(w.symbols()), "word {}", w);
        }
    }

    #[test]
    fn union_is_normalized_sum(items in hole_strategy()) {
        let x = golden();
        let mu = parry_measure(&x).unwrap();
        let h = to_hole(&items);
        prop_assume!(h.validate(&x).is_ok());
        let words = normalize_to_length(&x, &h, h.window()).unwrap();
        let sum = AlgebraicNumber::sum(&words.iter().map(|w| mu.word_measure(w.symbols())).collect::<Vec<_>>());
        prop_assert_eq!(union_measure(&mu, &h), sum);
    }

    #[test]
    fn quarter_split_bounds(mut raw in prop::collection::vec(1u32..100, 2..12)) {
        raw.sort();
        let total: u32 = raw.iter().sum();
        prop_assume!(2 * raw[raw.len() - 1] <= total);
        let ws: Vec<f64> = raw.iter().map(|&w| w as f64).collect();
        let k = quarter_split(&ws).unwrap();
        let prefix: u32 = raw[..k].iter().sum();
        prop_assert!(k >= 1 && k < raw.len());
        prop_assert!(4 * prefix >= total);
        prop_assert!(4 * (total - prefix) >= total);
        if k > 1 {
            prop_assert!(4 * (prefix - raw[k - 1]) < total);
        }
    }

    #[test]
    fn survivor_matches_periodic_search(items in prop::collection::vec((prop::collection::vec(0u8..2, 1..=4), 0usize..3), 1..=3)) {
        let x = golden();
        let h = to_hole(&items);
        let forbidden = vec![vec![1u8, 1]];
        let v = verify_trap(&x, &h).unwrap();
        let brute = surviving_period(&forbidden, &h, 2, 10);
        match v.status {
            TrapStatus::CompleteTrap => prop_assert!(brute.is_none(), "survivor {:?}", brute),
            TrapStatus::NotTrap => {
                let w = v.witness.expect("witness");
                prop_assert!(cyclic_ok(w.symbols(), &forbidden) && !orbit_hits(w.symbols(), &h));
                if w.len() <= 10 {
                    prop_assert!(brute.is_some());
                }
            }
        }
    }
}

/// Parry's criterion on finite words: every suffix is lexicographically at most the prefix of `d`
/// of the same length.
fn parry_admissible(w: &[u8], d: &[u8]) -> bool {
    (0..w.len()).all(|i| w[i..] <= d[..w.len() - i])
}

#[test]
fn beta_shift_counts_match_lexicographic_criterion() {
    for (poly, max_n) in [
        (vec![1, -1, -1], 14),
        (vec![1, -1, -1, -1], 14),
        (vec![1, -2, -1], 9),
        (vec![1, -1, 0, 0, -1], 14),
        (vec![1, 0, -1, -1], 14),
    ] {
        let b = BetaSystem::from_coeffs_desc(&poly).unwrap();
        let d = b.d().prefix(max_n);
        let k = b.shift().alphabet_size();
        for n in 1..=max_n {
            let oracle = all_words(k, n).filter(|w| parry_admissible(w, &d)).count() as u128;
            assert_eq!(b.shift().count_words(n), oracle, "{poly:?} n={n}");
        }
    }
}

#[test]
fn golden_half_trap_meets_every_short_cycle() {
    let x = golden();
    let mu = parry_measure(&x).unwrap();
    let cert = synthesize_trap(&mu, &AlgebraicNumber::from_ratio(1, 2), &TrapOptions::default()).unwrap();
    assert!(cert.measure < AlgebraicNumber::from_ratio(1, 2));
    assert_eq!(surviving_period(&[vec![1, 1]], &cert.hole, 2, 12), None);
}
