use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfod::data::quantile_sorted;
use rfod::forest::rank_by_score;
use rfod::scoring::scaled_distance;
use rfod::tree::Leaf;
use rfod::{
    aggregate, aggregate_rows, auc_pr, auc_roc, confidence_weights, fit_tree, log_loss, read_table, split_for_eval,
    threshold_metrics, Aggregation, Column, ColumnSpec, FeatureKind, Matrix, Prediction, Schema, Table64, Target,
    TreeConfig,
};

fn labels_with_both(m: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), m).prop_map(|mut v| {
        v[0] = true;
        v[1] = false;
        v
    })
}

fn scored(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..=max).prop_flat_map(|m| {
        (
            prop::collection::vec(0u32..12, m).prop_map(|v| v.into_iter().map(f64::from).collect()),
            labels_with_both(m),
        )
    })
}

fn mixed_table(rows: &[(f64, u32, f64, u32)]) -> Table64 {
    let schema = Schema::new(
        vec![
            ColumnSpec::new("x", FeatureKind::Numerical),
            ColumnSpec::new("c", FeatureKind::Categorical),
            ColumnSpec::new("y", FeatureKind::Numerical),
            ColumnSpec::new("k", FeatureKind::Categorical),
        ],
        None,
    )
    .unwrap();
    let dict = |n: usize| (0..n).map(|i| format!("v{i}")).collect::<Vec<_>>();
    Table64::from_columns(
        schema,
        vec![
            Column::Numerical(rows.iter().map(|r| r.0).collect()),
            Column::Categorical {
                ids: rows.iter().map(|r| r.1).collect(),
                dictionary: dict(5),
            },
            Column::Numerical(rows.iter().map(|r| r.2).collect()),
            Column::Categorical {
                ids: rows.iter().map(|r| r.3).collect(),
                dictionary: dict(4),
            },
        ],
    )
    .unwrap()
}

fn mixed_rows() -> impl Strategy<Value = Vec<(f64, u32, f64, u32)>> {
    prop::collection::vec((-5.0f64..5.0, 0u32..5, -3.0f64..3.0, 0u32..4), 2..80)
}

proptest! {
    #[test]
    fn quantiles_are_monotone_and_bounded(
        mut v in prop::collection::vec(-1e3f64..1e3, 1..60),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ql, qh) = (quantile_sorted(&v, lo), quantile_sorted(&v, hi));
        prop_assert!(ql <= qh);
        prop_assert!(v[0] <= ql && qh <= v[v.len() - 1]);
        prop_assert_eq!(quantile_sorted(&v, 0.0), v[0]);
        prop_assert_eq!(quantile_sorted(&v, 1.0), v[v.len() - 1]);
    }

    #[test]
    fn ranking_survives_positive_affine_maps(
        phi in prop::collection::vec(-4i32..4, 1..64),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let a: Vec<f64> = phi.iter().map(|&p| f64::from(p)).collect();
        let b: Vec<f64> = a.iter().map(|&p| p * scale + shift).collect();
        prop_assert_eq!(rank_by_score(&a), rank_by_score(&b));
    }

    #[test]
    fn weights_sum_to_d_minus_one(
        (d, cells) in (1usize..10).prop_flat_map(|d| (Just(d), prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], d * 4))),
    ) {
        let u = Matrix::from_vec(4, d, cells).unwrap();
        let w = confidence_weights(&u).unwrap();
        for i in 0..4 {
            let sum: f64 = w.row(i).iter().sum();
            prop_assert!((sum - (d as f64 - 1.0)).abs() < 1e-9);
            prop_assert!(w.row(i).iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn row_score_is_monotone_in_each_cell(
        s in prop::collection::vec(0.0f64..10.0, 5),
        u in prop::collection::vec(0.0f64..2.0, 5),
        j in 0usize..5,
        bump in 0.0f64..5.0,
    ) {
        let w = confidence_weights(&Matrix::from_vec(1, 5, u).unwrap()).unwrap();
        let before = Matrix::from_vec(1, 5, s.clone()).unwrap();
        let mut after = before.clone();
        after.set(0, j, s[j] + bump);
        for mode in [Aggregation::Uwa, Aggregation::Mean] {
            let a = aggregate_rows(&before, &w, mode).unwrap()[0];
            let b = aggregate_rows(&after, &w, mode).unwrap()[0];
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms((s, y) in scored(40)) {
        let t: Vec<f64> = s.iter().map(|v| (v / 3.0).exp() * 2.0 - 7.0).collect();
        prop_assert_eq!(auc_roc(&s, &y).unwrap(), auc_roc(&t, &y).unwrap());
        prop_assert_eq!(auc_pr(&s, &y).unwrap(), auc_pr(&t, &y).unwrap());
    }

    #[test]
    fn auc_of_negated_distinct_scores_is_complement(
        (perm, y) in (2usize..40).prop_flat_map(|m| (Just((0..m).collect::<Vec<_>>()).prop_shuffle(), labels_with_both(m))),
    ) {
        let s: Vec<f64> = perm.iter().map(|&p| p as f64).collect();
        let n: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = auc_roc(&s, &y).unwrap() + auc_roc(&n, &y).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_stay_in_range((s, y) in scored(50), c in 0.05f64..0.95) {
        let m = s.len();
        prop_assert!((0.0..=1.0).contains(&auc_roc(&s, &y).unwrap()));
        prop_assert!((0.0..=1.0).contains(&auc_pr(&s, &y).unwrap()));
        prop_assert!(log_loss(&s, &y).unwrap() >= 0.0);
        if c * m as f64 >= 1.0 {
            let t = threshold_metrics(&s, &y, c).unwrap();
            prop_assert_eq!(t.n_flagged, (c * m as f64 - 1e-9).ceil() as usize);
            prop_assert!((0.0..=1.0).contains(&t.f1) && (0.0..=1.0).contains(&t.accuracy));
        }
    }

    #[test]
    fn scaled_distance_is_symmetric_and_shift_invariant(
        x in -100.0f64..100.0,
        x_hat in -100.0f64..100.0,
        shift in -100.0f64..100.0,
        scale in prop_oneof![Just(0.0), 1e-3f64..50.0],
    ) {
        let a = scaled_distance(x, x_hat, scale, 1e6).unwrap();
        prop_assert_eq!(a, scaled_distance(x_hat, x, scale, 1e6).unwrap());
        let b = scaled_distance(x + shift, x_hat + shift, scale, 1e6).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        prop_assert!(a >= 0.0);
        if scale == 0.0 {
            prop_assert!(a <= 1e6);
        }
    }

    #[test]
    fn averaged_probabilities_sum_to_one(
        counts in prop::collection::vec(prop::collection::vec(0usize..6, 4), 1..20),
    ) {
        let per_tree: Vec<Prediction<f64>> = counts
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c[0] += 1;
                Prediction::Proba(rfod::tree::counts_to_proba(&c))
            })
            .collect();
        let agg = aggregate(&per_tree).unwrap();
        let p = agg.proba.unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=0.5).contains(&agg.uncertainty));
    }

    #[test]
    fn leaves_summarise_the_samples_routed_to_them(
        rows in mixed_rows(),
        draws in prop::collection::vec(0usize..1000, 1..120),
        seed in any::<u64>(),
        target in prop_oneof![Just(2usize), Just(3usize)],
    ) {
        let table = mixed_table(&rows);
        let ids: Vec<usize> = draws.iter().map(|d| d % rows.len()).collect();
        let predictors: Vec<usize> = (0..4).filter(|&j| j != target).collect();
        let kind = table.schema().kind(target);
        let config = TreeConfig::default_for(kind, predictors.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = fit_tree(&table, &predictors, Target::from_table(&table, target), &ids, &config, &mut rng).unwrap();
        prop_assert!(tree.features_used().iter().all(|&f| f != target));
        let mut routed: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes().len()];
        for &i in &ids {
            routed[tree.leaf_index(&table.row(i))].push(i);
        }
        for (node, members) in routed.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            match tree.leaf(&table.row(members[0])) {
                Leaf::Mean { value, n_samples } => {
                    prop_assert_eq!(*n_samples, members.len());
                    let y = table.numeric(target).unwrap();
                    let mean = members.iter().map(|&i| y[i]).sum::<f64>() / members.len() as f64;
                    prop_assert!((value - mean).abs() < 1e-9, "leaf {node}: {value} vs {mean}");
                }
                Leaf::Counts { counts } => {
                    let (k, _) = table.categories(target).unwrap();
                    let mut expect = vec![0usize; counts.len()];
                    for &i in members {
                        expect[k[i] as usize] += 1;
                    }
                    prop_assert_eq!(counts, &expect);
                }
            }
        }
    }

    #[test]
    fn eval_split_partitions_rows(
        labels in prop::collection::vec(prop::bool::weighted(0.2), 4..60),
        fraction in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let rows: Vec<(f64, u32, f64, u32)> = (0..labels.len()).map(|i| (i as f64, 0, 0.0, 0)).collect();
        let table = mixed_table(&rows);
        let normals = labels.iter().filter(|&&l| !l).count();
        match split_for_eval(&table, &labels, fraction, seed) {
            Ok(s) => {
                prop_assert!(s.train_row_ids.iter().all(|&i| !labels[i]));
                prop_assert_eq!(s.train_row_ids.len(), (fraction * normals as f64 + 1e-9).floor() as usize);
                let mut all: Vec<usize> = s.train_row_ids.iter().chain(&s.test_row_ids).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                prop_assert_eq!(s.test.n_rows(), s.test_labels.len());
            }
            Err(_) => prop_assert!((fraction * normals as f64 + 1e-9).floor() < 1.0),
        }
    }

    #[test]
    fn csv_round_trip_preserves_tables(rows in mixed_rows()) {
        let table = mixed_table(&rows);
        let mut buf = Vec::new();
        table.write_csv(&mut buf, None).unwrap();
        let back = read_table::<f64, _>(buf.as_slice(), Some(table.schema())).unwrap().table;
        for j in [0, 2] {
            prop_assert_eq!(back.numeric(j), table.numeric(j));
        }
        for j in [1, 3] {
            let (a, da) = back.categories(j).unwrap();
            let (b, db) = table.categories(j).unwrap();
            let sa: Vec<&String> = a.iter().map(|&i| &da[i as usize]).collect();
            let sb: Vec<&String> = b.iter().map(|&i| &db[i as usize]).collect();
            prop_assert_eq!(sa, sb);
        }
    }
}
