use proptest::prelude::*;

use corrnet::matching::{cost_matrix, kcore_match_exact, kcore_match_oracle, min_distance_match, solve_assignment};
use corrnet::models::{sample_ccsbm, sample_cgmm, CcsbmParams, CgmmParams};
use corrnet::oracle::{brute_force_min_distance, OracleBudget};
use corrnet::recovery::{
    genie_score, lloyd_objective, lloyd_refine, spectral_gmm_init, PowerIterConfig, ScoreWeights,
};
use corrnet::theory::{classify_matching_cgmm, fn_I, fn_I_star, fn_I_t, fn_S, MatchingLabel, ThresholdOptions};
use corrnet::{
    core_numbers, graph_intersection, graph_union, k_core, AttributeDatabase, LabelVector, Permutation, Seed,
    SimpleGraph,
};

fn graph(max_n: usize) -> impl Strategy<Value = SimpleGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut b = bits.iter();
            for i in 0..n {
                for j in i + 1..n {
                    if *b.next().unwrap() {
                        edges.push((i, j));
                    }
                }
            }
            SimpleGraph::from_edges(n, edges).unwrap()
        })
    })
}

fn perm(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn graph_and_perm(max_n: usize) -> impl Strategy<Value = (SimpleGraph, Permutation)> {
    graph(max_n).prop_flat_map(|g| {
        let n = g.n();
        (Just(g), perm(n))
    })
}

fn int_db(n: usize, d: usize) -> impl Strategy<Value = AttributeDatabase> {
    proptest::collection::vec(-20i32..20, n * d)
        .prop_map(move |v| AttributeDatabase::new(n, d, v.into_iter().map(f64::from).collect()).unwrap())
}

fn real_db(n: usize, d: usize) -> impl Strategy<Value = AttributeDatabase> {
    proptest::collection::vec(-3.0f64..3.0, n * d)
        .prop_map(move |v| AttributeDatabase::new(n, d, v).unwrap())
}

/// Root in (0, 1) of `r / (1 − r)² = 1/(4α)`, for which
/// `1 + (1 − cos θ)/(2α) = (1 − 2r cos θ + r²)/(1 − r)²`.
fn ratio_root(alpha: f64) -> f64 {
    let beta = 1.0 / (4.0 * alpha);
    2.0 * beta / (2.0 * beta + 1.0 + (4.0 * beta + 1.0).sqrt())
}

fn labels(n: usize) -> impl Strategy<Value = LabelVector> {
    proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n)
        .prop_map(|v| LabelVector::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kcore_commutes_with_relabelling((g, pi) in graph_and_perm(14), k in 0usize..5) {
        let h = g.pulled_back(&pi).unwrap();
        let core_g = k_core(&g, k);
        let want: Vec<usize> = (0..g.n()).filter(|&i| core_g.binary_search(&pi.apply(i)).is_ok()).collect();
        prop_assert_eq!(k_core(&h, k), want);
    }

    #[test]
    fn kcores_are_nested_and_agree_with_core_numbers(g in graph(16), k in 0usize..6) {
        let outer = k_core(&g, k);
        let inner = k_core(&g, k + 1);
        prop_assert!(inner.iter().all(|v| outer.binary_search(v).is_ok()));
        let cn = core_numbers(&g);
        let by_number: Vec<usize> = (0..g.n()).filter(|&v| cn[v] >= k).collect();
        prop_assert_eq!(&outer, &by_number);
        if let Some(m) = g.induced_min_degree(&outer) {
            prop_assert!(m >= k);
        }
    }

    #[test]
    fn union_plus_intersection_counts((a, pi) in graph_and_perm(12), seed in any::<u64>()) {
        let n = a.n();
        let bits: Vec<bool> = (0..n * n).map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64) & 1 == 1).collect();
        let b = SimpleGraph::from_edges(
            n,
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| bits[i * n + j]),
        ).unwrap();
        let u = graph_union(&a, &b, &pi).unwrap();
        let x = graph_intersection(&a, &b, &pi).unwrap();
        prop_assert_eq!(u.edge_count() + x.edge_count(), a.edge_count() + b.edge_count());
        for (i, j) in x.edges() {
            prop_assert!(a.has_edge(i, j) && b.has_edge(pi.apply(i), pi.apply(j)));
        }
    }

    #[test]
    fn permutation_roundtrip(pi in (1usize..30).prop_flat_map(perm), l in labels(30)) {
        let n = pi.len();
        let id = Permutation::identity(n);
        prop_assert_eq!(pi.compose(&pi.inverse()).unwrap(), id.clone());
        prop_assert_eq!(pi.inverse().compose(&pi).unwrap(), id);
        let l = LabelVector::new(l.as_slice()[..n].to_vec()).unwrap();
        prop_assert_eq!(l.permuted(&pi).unwrap().permuted(&pi.inverse()).unwrap(), l);
    }

    #[test]
    fn assignment_equals_brute_force(x in (1usize..=7, 1usize..=4).prop_flat_map(|(n, d)| (real_db(n, d), real_db(n, d)))) {
        let (x, y) = x;
        let (_, best) = brute_force_min_distance(&x, &y, &OracleBudget::default()).unwrap();
        let (pi, cost) = solve_assignment(&cost_matrix(&x, &y).unwrap()).unwrap();
        prop_assert!((cost - best).abs() <= 1e-12 * best.max(1.0));
        prop_assert_eq!(cost_matrix(&x, &y).unwrap().cost_of(&pi).unwrap(), cost);
    }

    #[test]
    fn min_distance_is_translation_invariant(
        xy in (2usize..12, 1usize..4).prop_flat_map(|(n, d)| (int_db(n, d), int_db(n, d), proptest::collection::vec(-50i32..50, d)))
    ) {
        let (x, y, shift) = xy;
        let shift: Vec<f64> = shift.into_iter().map(f64::from).collect();
        let a = min_distance_match(&x, &y).unwrap();
        let b = min_distance_match(&x.translated(&shift).unwrap(), &y.translated(&shift).unwrap()).unwrap();
        prop_assert_eq!(a.matching, b.matching);
        prop_assert_eq!(a.total_cost, b.total_cost);
    }

    #[test]
    fn lloyd_is_sign_equivariant_and_monotone(db in (4usize..40, 1usize..5).prop_flat_map(|(n, d)| real_db(n, d)), seed in any::<u64>()) {
        let n = db.n();
        let l0 = LabelVector::new((0..n).map(|i| if (seed >> (i % 64)) & 1 == 1 { 1 } else { -1 }).collect()).unwrap();
        let (a, _) = lloyd_refine(&db, &l0, 20).unwrap();
        let (b, _) = lloyd_refine(&db, &l0.negated(), 20).unwrap();
        prop_assert_eq!(b, a.negated());
        let mut cur = l0;
        let mut obj = lloyd_objective(&db, &cur).unwrap();
        for _ in 0..10 {
            let (next, _) = lloyd_refine(&db, &cur, 1).unwrap();
            let o = lloyd_objective(&db, &next).unwrap();
            prop_assert!(o >= obj - 1e-9 * obj.abs().max(1.0));
            cur = next;
            obj = o;
        }
    }

    #[test]
    fn genie_score_ignores_global_flip(g in graph(20), l in labels(20), d in 0usize..3, seed in any::<u64>()) {
        let n = g.n();
        let l = LabelVector::new(l.as_slice()[..n].to_vec()).unwrap();
        let vals: Vec<f64> = (0..n * d).map(|i| ((seed ^ i as u64) % 97) as f64 / 10.0 - 4.8).collect();
        let db = AttributeDatabase::new(n, d, vals).unwrap();
        let w = ScoreWeights::new(0.4, 0.1, 2.0, d, n).unwrap();
        let a = genie_score(Some(&g), &db, &l, &w).unwrap();
        let b = genie_score(Some(&g), &db, &l.negated(), &w).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn spectral_init_ignores_database_sign(db in (3usize..30, 1usize..4).prop_flat_map(|(n, d)| real_db(n, d)), seed in any::<u64>()) {
        let cfg = PowerIterConfig::with_seed(Seed::new(seed, 0));
        let neg = db.scaled(-1.0);
        match (spectral_gmm_init(&db, &cfg), spectral_gmm_init(&neg, &cfg)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side failed"),
        }
    }

    #[test]
    fn oracle_kcore_never_beats_exhaustive(seed in any::<u64>(), k in 1usize..3) {
        let params = CcsbmParams { n: 7, p: 0.7, q: 0.3, s: 0.8, r: 1.0, d: 0, rho: 0.0, allow_equal_pq: false };
        let inst = sample_ccsbm(&params, Seed::new(seed, 1)).unwrap();
        let oracle = kcore_match_oracle(&inst, k).unwrap();
        let exact = kcore_match_exact(inst.graph1.as_ref().unwrap(), inst.graph2.as_ref().unwrap(), k, 8).unwrap();
        prop_assert!(oracle.len() <= exact.len());
    }

    #[test]
    fn sampled_instances_are_consistent(seed in any::<u64>(), n in 2usize..40, rho in 0.0f64..=1.0) {
        let inst = sample_cgmm(&CgmmParams::with_radius(n, 3, rho, 2.0), Seed::new(seed, 0)).unwrap();
        let again = sample_cgmm(&CgmmParams::with_radius(n, 3, rho, 2.0), Seed::new(seed, 0)).unwrap();
        prop_assert_eq!(&inst.db2, &again.db2);
        prop_assert_eq!(inst.labels2(), inst.labels1.permuted(&inst.truth_perm).unwrap());
        prop_assert_eq!(inst.db2.n(), n);
    }

    #[test]
    fn s_between_linear_bounds(alpha in 0.01f64..100.0, t in 3usize..60) {
        let s = fn_S(alpha, t).unwrap();
        let i = fn_I(alpha).unwrap();
        let r = ratio_root(alpha);
        prop_assert!(r > 0.0 && r < 1.0);
        prop_assert!((i + 2.0 * (-r).ln_1p()).abs() <= 1e-13 * i);
        let closed = t as f64 * i + 2.0 * (-r.powi(t as i32)).ln_1p();
        prop_assert!((s - closed).abs() <= 1e-12 * s);
        // both gaps in stable form
        let upper_gap = -2.0 * (-r.powi(t as i32)).ln_1p();
        let lower_gap = 2.0 * ((-r.powi(t as i32)).ln_1p() - (-r * r).ln_1p());
        prop_assert!(upper_gap > 0.0 && lower_gap > 0.0);
        prop_assert!(s <= t as f64 * i * (1.0 + 1e-12));
        prop_assert!(s >= (fn_S(alpha, 2).unwrap() + (t as f64 - 2.0) * i) * (1.0 - 1e-12));
    }

    #[test]
    fn i_star_is_i_at_minus_half(a in 0.01f64..50.0, b in 0.01f64..50.0, c in 0.0f64..20.0) {
        let lhs = fn_I_star(a, b, c);
        let rhs = fn_I_t(-0.5, a, b, c).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn achievable_matching_is_upward_closed_in_rho(
        n in 10usize..100_000, d in 1usize..2000, r in 0.0f64..50.0, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0
    ) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let o = ThresholdOptions::default();
        let a = classify_matching_cgmm(n, d, lo, r, &o).unwrap().label;
        let b = classify_matching_cgmm(n, d, hi, r, &o).unwrap().label;
        if a == MatchingLabel::Achievable {
            prop_assert_eq!(b, MatchingLabel::Achievable);
        }
    }
}
