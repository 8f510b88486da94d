mod common;

use std::collections::BTreeMap;

use paretomerge::evaluation::{compute_objectives, ItemOutcome};
use paretomerge::merge::{merge_task_arithmetic, merge_ties, MergeEndpoints};
use paretomerge::moea::{crowding_distance, dominates, fast_nondominated_sort, pareto_indices};
use paretomerge::report::build_report;
use paretomerge::sampling::bernoulli_entropy;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn entropy_matches_high_precision_grid() {
    for (p, h) in common::entropy_grid() {
        assert!((bernoulli_entropy(p).unwrap() - h).abs() <= 1e-9, "H({p})");
    }
}

fn outcomes() -> impl Strategy<Value = Vec<ItemOutcome>> {
    prop::collection::vec((any::<bool>(), 1.0f64..5000.0), 1..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (correct, length))| ItemOutcome {
                item_id: format!("q{i}"),
                correct,
                length,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn sort_matches_pairwise_oracle(seed in any::<u64>(), n in 0usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = common::random_points(&mut rng, n);
        prop_assert_eq!(fast_nondominated_sort(&pts), common::brute_force_fronts(&pts));
    }

    #[test]
    fn pareto_members_are_mutually_nondominated(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = common::random_points(&mut rng, n);
        let keep = pareto_indices(&pts);
        for &i in &keep {
            prop_assert!(!pts.iter().any(|q| dominates(q, &pts[i])));
        }
        for w in keep.windows(2) {
            prop_assert!(pts[w[0]][0] <= pts[w[1]][0]);
        }
        let first_front = &fast_nondominated_sort(&pts)[0];
        let distinct: std::collections::HashSet<[u64; 2]> =
            first_front.iter().map(|&i| [pts[i][0].to_bits(), pts[i][1].to_bits()]).collect();
        prop_assert_eq!(keep.len(), distinct.len());
    }

    #[test]
    fn crowding_marks_extremes_infinite(seed in any::<u64>(), n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = common::random_points(&mut rng, n);
        let d = crowding_distance(&pts);
        prop_assert!(d.iter().filter(|x| x.is_infinite()).count() >= 2);
        prop_assert!(d.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn weighted_average_is_pooled_accuracy(groups in prop::collection::vec(outcomes(), 1..6)) {
        let map: BTreeMap<String, Vec<ItemOutcome>> =
            groups.iter().enumerate().map(|(i, g)| (format!("b{i}"), g.clone())).collect();
        let report = build_report(&map, &map).unwrap();
        let pooled: Vec<ItemOutcome> = groups.concat();
        let acc = compute_objectives(&pooled).unwrap().accuracy;
        prop_assert!((report.weighted_average - acc).abs() < 1e-12);
        prop_assert!(report.weighted_length_reduction.abs() < 1e-9);
    }

    #[test]
    fn ta_stays_between_endpoints(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let (a, b) = common::checkpoint_pair(seed, 300, 2);
        let ep = MergeEndpoints::new(a, b).unwrap();
        let m = merge_task_arithmetic(&ep, lambda).unwrap();
        for ((_, t), ((_, x), (_, y))) in m.tensors().zip(ep.system2().tensors().zip(ep.system1().tensors())) {
            for ((&v, &p), &q) in t.data().iter().zip(x.data()).zip(y.data()) {
                prop_assert!(v >= p.min(q) && v <= p.max(q));
            }
        }
    }

    #[test]
    fn ties_moves_at_most_the_retained_share(seed in any::<u64>(), k in 0.01f64..=1.0) {
        let (a, b) = common::checkpoint_pair(seed, 400, 1);
        let ep = MergeEndpoints::new(a, b).unwrap();
        let m = merge_ties(&ep, 1.0, k).unwrap();
        let (_, t) = m.tensors().next().unwrap();
        let (_, s2) = ep.system2().tensors().next().unwrap();
        let (_, s1) = ep.system1().tensors().next().unwrap();
        // at λ = 1 a retained entry becomes System-1, a dropped one stays System-2
        let moved = t.data().iter().zip(s1.data()).zip(s2.data())
            .filter(|((v, y), x)| v.to_bits() == y.to_bits() && v.to_bits() != x.to_bits())
            .count();
        prop_assert!(moved <= paretomerge::merge::retained_count(k, 400));
    }
}
