use entropy_embed::data::{build_candidate_pool, lagged_matrix, MultivariateSeries};
use entropy_embed::Error;
use proptest::prelude::*;
use std::collections::HashSet;

fn series_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..5, 12usize..60).prop_flat_map(|(l, n)| {
        prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), l)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagged_columns_are_shifted_channels(values in series_strategy(), m in 1usize..3, d in 1usize..4) {
        let s = MultivariateSeries::from_channels(values.clone()).unwrap();
        prop_assume!(s.len() > d * m);
        let pool = build_candidate_pool(s.n_channels(), m, d);
        for target in 0..s.n_channels() {
            let (y, cols) = lagged_matrix(&s, &pool, target, m, d).unwrap();
            let rows = s.len() - d * m;
            prop_assert_eq!(y.len(), rows);
            for t in 0..rows {
                prop_assert_eq!(y[t], values[target][d * m + t]);
            }
            for (c, col) in pool.iter().zip(&cols) {
                prop_assert_eq!(col.len(), rows);
                for t in 0..rows {
                    prop_assert_eq!(col[t], values[c.channel][d * m + t - c.lag]);
                }
            }
        }
    }

    #[test]
    fn pool_is_l_times_d_distinct_and_deterministic(l in 1usize..80, m in 1usize..4, d in 1usize..10) {
        let pool = build_candidate_pool(l, m, d);
        prop_assert_eq!(pool.len(), l * d);
        prop_assert_eq!(pool.iter().collect::<HashSet<_>>().len(), l * d);
        prop_assert_eq!(&pool, &build_candidate_pool(l, m, d));
        prop_assert!(pool.iter().all(|c| c.lag % m == 0 && c.lag >= m && c.lag <= d * m));
    }

    #[test]
    fn normalize_gives_zero_mean_unit_variance_and_is_idempotent(values in series_strategy()) {
        let s = MultivariateSeries::from_channels(values).unwrap();
        let z = match s.normalize() {
            Ok(z) => z,
            Err(Error::ConstantChannel { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let n = z.len() as f64;
        for c in z.channels() {
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
        let zz = z.normalize().unwrap();
        for (a, b) in z.channels().iter().zip(zz.channels()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact(values in series_strategy()) {
        let s = MultivariateSeries::from_channels(values).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = MultivariateSeries::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.labels(), s.labels());
        prop_assert_eq!(back.channels(), s.channels());
    }
}

#[test]
fn malformed_csv_is_rejected() {
    let ragged = "a,b\n1,2\n3\n";
    assert!(MultivariateSeries::read_csv(ragged.as_bytes()).is_err());
    let text = "a,b\n1,x\n";
    assert!(matches!(
        MultivariateSeries::read_csv(text.as_bytes()),
        Err(Error::Csv(_))
    ));
    let single = "a\n1\n2\n";
    assert!(matches!(
        MultivariateSeries::read_csv(single.as_bytes()),
        Err(Error::InvalidSeries(_))
    ));
}
