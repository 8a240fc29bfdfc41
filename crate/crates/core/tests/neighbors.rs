use entropy_embed::neighbors::{jitter, linear_scan, Metric, NeighborIndex};
use proptest::prelude::*;

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::MaxNorm), Just(Metric::Euclidean)]
}

/// Coordinates on a coarse grid so that ties and duplicates are common.
fn columns(max_n: usize, max_dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (20..max_n, 1..=max_dim).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec((-8i32..8).prop_map(|v| v as f64 * 0.25), n), d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn knn_matches_linear_scan(
        cols in columns(120, 4),
        metric in metric(),
        theiler in prop_oneof![Just(0usize), Just(1), Just(4)],
        k in 1usize..6,
    ) {
        let views: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let index = NeighborIndex::new(&views, metric, theiler).unwrap();
        for i in 0..index.len() {
            let fast = index.knn(i, k).unwrap();
            let slow = linear_scan::knn(&views, metric, theiler, i, k).unwrap();
            prop_assert_eq!(&fast.indices, &slow.indices, "point {}", i);
            prop_assert_eq!(fast.distance, slow.distance);
        }
    }

    #[test]
    fn range_count_matches_linear_scan(
        cols in columns(120, 4),
        metric in metric(),
        theiler in prop_oneof![Just(0usize), Just(1), Just(4)],
        radius in prop_oneof![Just(0.0), Just(0.25), Just(0.5), 0.0f64..3.0, Just(f64::INFINITY)],
    ) {
        let views: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let index = NeighborIndex::new(&views, metric, theiler).unwrap();
        for i in 0..index.len() {
            prop_assert_eq!(
                index.range_count(i, radius),
                linear_scan::range_count(&views, metric, theiler, i, radius),
                "point {}", i
            );
        }
    }

    #[test]
    fn knn_distances_are_sorted_and_bound_the_count(
        cols in columns(80, 3),
        metric in metric(),
        k in 1usize..5,
    ) {
        let views: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let index = NeighborIndex::new(&views, metric, 0).unwrap();
        for i in 0..index.len() {
            let nb = index.knn(i, k).unwrap();
            prop_assert_eq!(nb.indices.len(), k);
            prop_assert!(!nb.indices.contains(&i));
            // Strictly fewer than k points lie strictly inside the k-th distance.
            prop_assert!(index.range_count(i, nb.distance) < k);
        }
    }

    #[test]
    fn jitter_is_bounded_and_reproducible(
        cols in columns(60, 3),
        amplitude in 1e-12f64..1e-3,
        seed in any::<u64>(),
    ) {
        let a = jitter(&cols, amplitude, seed);
        prop_assert_eq!(&a, &jitter(&cols, amplitude, seed));
        for (orig, noisy) in cols.iter().zip(&a) {
            for (x, y) in orig.iter().zip(noisy) {
                // One rounding of the sum on top of the amplitude.
                prop_assert!((x - y).abs() <= amplitude + f64::EPSILON * x.abs().max(1.0));
            }
        }
    }
}

#[test]
fn not_enough_neighbors_is_reported() {
    let x = [0.0, 1.0, 2.0, 3.0, 4.0];
    let index = NeighborIndex::new(&[&x], Metric::MaxNorm, 1).unwrap();
    // Point 0 excludes 0 and 1: three admissible neighbors.
    assert!(index.knn(0, 3).is_ok());
    assert!(index.knn(0, 4).is_err());
}
