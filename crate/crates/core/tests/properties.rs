use limsup_core::covering::{verify_cover, verify_structure, vitali_5r};
use limsup_core::family::BallFamily;
use limsup_core::overlap::{measure_sum, overlap_sum_of, CoverageProfile};
use limsup_core::rational::{frac, int, sum};
use limsup_core::space::{Arc, DoublingMeasure, IntervalSet};
use limsup_core::trimming::{build_blocks, extract_global, TrimParams};
use limsup_core::verifier::local_density_check;
use limsup_core::Rational;
use num::Zero;
use proptest::prelude::*;

fn arc() -> impl Strategy<Value = Arc> {
    (0i64..256, 1i64..160).prop_map(|(c, r)| Arc::new(frac(c, 256), frac(r, 512)).unwrap())
}

fn arcs(max: usize) -> impl Strategy<Value = Vec<Arc>> {
    prop::collection::vec(arc(), 1..max)
}

fn measure() -> impl Strategy<Value = DoublingMeasure> {
    prop_oneof![
        Just(DoublingMeasure::lebesgue()),
        prop::collection::vec(1i64..5, 4).prop_map(|w| {
            let total: i64 = w.iter().sum();
            let density = w.iter().map(|&x| frac(4 * x, total)).collect();
            DoublingMeasure::new(2, density, int(16), frac(1, 2)).unwrap()
        }),
    ]
}

fn sets(arcs: &[Arc]) -> Vec<IntervalSet> {
    arcs.iter().map(Arc::to_set).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inclusion_exclusion(a in arcs(6), b in arcs(6), mu in measure()) {
        let (x, y) = (IntervalSet::canonicalize(&a), IntervalSet::canonicalize(&b));
        prop_assert_eq!(
            mu.measure(&x.union(&y)) + mu.measure(&x.intersection(&y)),
            mu.measure(&x) + mu.measure(&y)
        );
    }

    #[test]
    fn complement(a in arcs(6), mu in measure()) {
        let x = IntervalSet::canonicalize(&a);
        let rest = IntervalSet::full().difference(&x);
        prop_assert!(!rest.intersects(&x));
        prop_assert_eq!(mu.measure(&x) + mu.measure(&rest), int(1));
    }

    #[test]
    fn overlap_is_pairwise_sum(a in arcs(10), mu in measure()) {
        let s = sets(&a);
        let pairwise = sum(s.iter().flat_map(|x| s.iter().map(|y| mu.measure(&x.intersection(y)))));
        prop_assert_eq!(overlap_sum_of(&s, &mu), pairwise);
        let profile = CoverageProfile::from_sets(&s);
        let (first, second, covered) = profile.moments(&mu);
        prop_assert_eq!(first, measure_sum(&s, &mu));
        prop_assert_eq!(second, profile.moment(&mu, 2));
        prop_assert_eq!(covered, mu.measure(&IntervalSet::canonicalize(&a)));
    }

    #[test]
    fn overlap_ignores_order(mut a in arcs(10), mu in measure(), seed in any::<u64>()) {
        let before = overlap_sum_of(&sets(&a), &mu);
        let n = a.len();
        a.rotate_left((seed as usize) % n);
        a.reverse();
        prop_assert_eq!(overlap_sum_of(&sets(&a), &mu), before);
    }

    #[test]
    fn cauchy_schwarz(a in arcs(12), mu in measure()) {
        let s = sets(&a);
        let total = measure_sum(&s, &mu);
        let overlap = overlap_sum_of(&s, &mu);
        prop_assume!(!overlap.is_zero());
        prop_assert!(&total * &total / overlap <= mu.measure(&IntervalSet::canonicalize(&a)));
    }

    #[test]
    fn doubling_grows_measure(a in arc(), mu in measure()) {
        let twice = a.dilate(&int(2));
        prop_assert!(a.to_set().is_subset(&twice.to_set()));
        prop_assert!(mu.measure_arc(&a) <= mu.measure_arc(&twice));
    }

    #[test]
    fn covering_selection_is_valid(a in arcs(40)) {
        let sel = vitali_5r(&a);
        prop_assert!(verify_cover(&a, &sel).passed());
        prop_assert!(verify_structure(&a, &sel).is_ok());
        let mut idx = sel.selected.clone();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), sel.selected.len());
    }

    #[test]
    fn covering_ignores_duplicates(a in arcs(20)) {
        let doubled: Vec<Arc> = a.iter().chain(a.iter()).cloned().collect();
        let sel = vitali_5r(&doubled);
        prop_assert!(verify_cover(&doubled, &sel).passed());
        prop_assert!(sel.selected.len() <= a.len());
    }

    #[test]
    fn density_monotone_in_c(a in arcs(6), num in 1i64..8) {
        let mu = DoublingMeasure::lebesgue();
        let set = IntervalSet::canonicalize(&a);
        let (hi, lo) = (frac(num, 8), frac(num, 16));
        let strict = local_density_check(&set, &mu, &hi, &frac(1, 4), 4).unwrap();
        let loose = local_density_check(&set, &mu, &lo, &frac(1, 4), 4).unwrap();
        prop_assert!(!strict.passed || loose.passed);
        prop_assert_eq!(strict.worst, loose.worst);
    }
}

fn check_trim(family: &BallFamily, mu: &DoublingMeasure, params: &TrimParams, ball: &Arc, n: usize) {
    let run = build_blocks(family, mu, params, ball, n, None).unwrap();
    let arcs = family.prefix(n).unwrap();
    let g = run.g_values();
    assert!(g.windows(2).all(|w| w[0] < w[1]), "G not increasing: {g:?}");
    for block in &run.blocks {
        let mut seen: Vec<&Arc> = Vec::new();
        assert!(block.passed);
        assert!(block.core_measure >= &run.kappa * &run.mass);
        for &i in &block.core {
            let a = &arcs[i - 1];
            assert!(a.is_subset_of(ball));
            assert!(seen.iter().all(|b| !a.intersects(b)), "cores overlap at {i}");
            seen.push(a);
        }
    }
    let l: Vec<usize> = run.blocks.iter().flat_map(|b| b.core.iter().copied()).collect();
    assert_eq!(run.l_indices, l);
    let qs: Vec<usize> = run.checkpoints.iter().map(|c| c.q).collect();
    assert!(qs.windows(2).all(|w| w[0] < w[1]), "Q_M not increasing: {qs:?}");
    assert!(run.checkpoints.iter().all(|c| c.holds));
    assert!(run.sum_mu() >= Rational::zero());
}

#[test]
fn dyadic_trimming_invariants() {
    let family = BallFamily::dyadic_tiling();
    let mu = DoublingMeasure::lebesgue();
    let params = TrimParams::new(int(2), int(2), int(2), None).unwrap();
    for (c, r) in [(0, 4), (1, 4), (3, 8), (5, 16), (0, 2)] {
        let ball = Arc::new(frac(c, 8), frac(1, r)).unwrap();
        check_trim(&family, &mu, &params, &ball, 126);
    }
}

#[test]
fn trimming_prefix_stable() {
    let family = BallFamily::dyadic_tiling();
    let mu = DoublingMeasure::lebesgue();
    let params = TrimParams::new(int(2), int(2), int(2), None).unwrap();
    let ball = Arc::new(Rational::zero(), frac(1, 4)).unwrap();
    let short = build_blocks(&family, &mu, &params, &ball, 62, None).unwrap();
    let long = build_blocks(&family, &mu, &params, &ball, 254, None).unwrap();
    assert!(short.blocks.len() <= long.blocks.len());
    for (a, b) in short.blocks.iter().zip(&long.blocks) {
        assert_eq!(a.g, b.g);
        assert_eq!(a.core, b.core);
    }
}

#[test]
fn global_block_cores_disjoint() {
    let family = BallFamily::dyadic_tiling();
    let mu = DoublingMeasure::lebesgue();
    let params = TrimParams::new(int(2), int(2), int(2), Some(int(1))).unwrap();
    let run = extract_global(&family, &mu, &params, 1, 126, None).unwrap();
    let arcs = family.prefix(126).unwrap();
    for block in &run.blocks {
        let core: Vec<&Arc> = block.core.iter().map(|&i| &arcs[i - 1]).collect();
        for (k, a) in core.iter().enumerate() {
            assert!(core[k + 1..].iter().all(|b| !a.intersects(b)));
        }
        assert!(block.core.iter().all(|&i| i >= block.g));
    }
    assert!(run.passed);
}

#[test]
fn prefix_is_stable() {
    for family in [BallFamily::harmonic(), BallFamily::dyadic_tiling()] {
        let long = family.prefix(200).unwrap();
        assert_eq!(family.prefix(50).unwrap(), long[..50].to_vec());
        assert_eq!(family.ball(37).unwrap(), long[36]);
    }
}
