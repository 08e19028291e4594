use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::subsequence;

use blindconv::channel::{generate_dataset, random_interleaver, Interleaver};
use blindconv::classify::{all_profiles, neighbourhood_profile};
use blindconv::conv::{ConvCode, ParityCheck};
use blindconv::graph::{
    build_graph, equivalent, isomorphic, shift_graph, validate_equivalence, validate_isomorphism,
};
use blindconv::pipeline::{reconstruct, ReconstructParams};

/// A check with minimum 1, span `s` and `inner.len() + 2` positions.
fn check_strategy(max_span: i64) -> impl Strategy<Value = ParityCheck> {
    (4..=max_span).prop_flat_map(|s| {
        let middle: Vec<i64> = (2..s).collect();
        let k = middle.len().min(6);
        subsequence(middle, 1..=k).prop_map(move |inner| {
            let mut v = vec![1, s];
            v.extend(inner);
            ParityCheck::new(v).unwrap()
        })
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<u32>> {
    Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle()
}

fn checks_over(n: usize, count: usize) -> impl Strategy<Value = Vec<ParityCheck>> {
    let positions: Vec<i64> = (1..=n as i64).collect();
    prop::collection::vec(subsequence(positions, 2..=6), 1..=count)
        .prop_map(|sets| sets.into_iter().map(|v| ParityCheck::new(v).unwrap()).collect())
}

fn block_permuted(e: &ParityCheck, n: usize, sigma: &[usize]) -> ParityCheck {
    let n = n as i64;
    e.map(|p| {
        let (b, j) = ((p - 1).div_euclid(n), (p - 1).rem_euclid(n));
        b * n + sigma[j as usize] as i64 + 1
    })
    .unwrap()
}

fn mirrored(e: &ParityCheck) -> ParityCheck {
    e.map(|p| -p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn neighbourhood_sizes_are_bounded(e in check_strategy(30), n in 2usize..=4) {
        let r = (e.span() as usize).div_ceil(n);
        let g1 = shift_graph(&e, n, 1);
        let g2 = shift_graph(&e, n, 2);
        prop_assert!(g1.len() <= 2 * r - 1, "|G1| = {} for s={} n={}", g1.len(), e.span(), n);
        prop_assert!(g2.len() <= 4 * r - 3, "|G2| = {} for s={} n={}", g2.len(), e.span(), n);
    }

    #[test]
    fn profiles_survive_relabeling_and_reordering(
        (l, perm, order) in checks_over(40, 30).prop_flat_map(|l| {
            let len = l.len();
            (Just(l), permutation(40), Just((0..len).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        let pi = Interleaver::new(perm).unwrap();
        let moved: Vec<ParityCheck> = order.iter().map(|&i| pi.apply_check(&l[i]).unwrap()).collect();
        let before = all_profiles(&l);
        let after = all_profiles(&moved);
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(&after[k], &before[i]);
            prop_assert_eq!(neighbourhood_profile(&moved[k], &moved), before[i].clone());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn labeled_neighbourhood_is_invariant_under_mirror_and_stream_swap(
        (e, n, sigma) in (check_strategy(24), 2usize..=3).prop_flat_map(|(e, n)| {
            (Just(e), Just(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        let g = shift_graph(&e, n, 2);
        for other in [mirrored(&e), block_permuted(&e, n, &sigma)] {
            let h = shift_graph(&other, n, 2);
            let m = equivalent(&g, &h);
            prop_assert!(m.is_some(), "{} vs {} not equivalent", e, other);
            prop_assert!(validate_equivalence(&g, &h, m.as_ref().unwrap()));
            let iso = isomorphic(&g, &h).unwrap();
            prop_assert!(validate_isomorphism(&g, &h, &iso));
        }
    }

    #[test]
    fn witnesses_revalidate_on_relabeled_graphs(
        (l, perm) in (checks_over(30, 12), permutation(30))
    ) {
        let pi = Interleaver::new(perm).unwrap();
        let moved: Vec<ParityCheck> = l.iter().rev().map(|e| pi.apply_check(e).unwrap()).collect();
        let (g, h) = (build_graph(&l), build_graph(&moved));
        let iso = isomorphic(&g, &h).expect("relabeled graphs are isomorphic");
        prop_assert!(validate_isomorphism(&g, &h, &iso));
        let eq = equivalent(&g, &h).expect("relabeled graphs are equivalent");
        prop_assert!(validate_equivalence(&g, &h, &eq));
    }

    #[test]
    fn interleavers_are_bijections(n in 2usize..500, seed in any::<u64>()) {
        let pi = random_interleaver(n, seed).unwrap();
        let seen: BTreeSet<u32> = pi.map().iter().copied().collect();
        prop_assert_eq!(seen.len(), n);
        prop_assert_eq!(seen.iter().next().copied(), Some(1));
        prop_assert_eq!(seen.iter().last().copied(), Some(n as u32));
        let x: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        prop_assert_eq!(pi.inverse().apply(&pi.apply(&x).unwrap()).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn emitted_interleavers_are_bijections(seed in 0u64..1000) {
        let code = ConvCode::named("C2").unwrap();
        let n_total = 400;
        let pi = random_interleaver(n_total, seed).unwrap();
        let data = generate_dataset(&code, &pi, 0.0, 300, n_total / 2, seed).unwrap();
        let mut params = ReconstructParams::new(6, 10);
        params.seed = seed;
        let report = reconstruct(&data, &params, None);
        prop_assert!(!report.candidates.is_empty(), "{}", report.summary());
        for c in &report.candidates {
            let seen: BTreeSet<u32> = c.interleaver.map().iter().copied().collect();
            prop_assert_eq!(seen.len(), n_total);
            prop_assert!(seen.iter().all(|&y| (1..=n_total as u32).contains(&y)));
        }
    }
}

#[test]
fn non_bijections_are_rejected() {
    assert!(Interleaver::new(vec![1, 2, 2]).is_err());
    assert!(Interleaver::new(vec![0, 1, 2]).is_err());
    assert!(Interleaver::new(vec![1, 2, 4]).is_err());
}
