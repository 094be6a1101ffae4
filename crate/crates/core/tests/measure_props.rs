use gah::hardness::{lid_estimate, pearson};
use gah::workload::{generate_unbiased_workload, WorkloadSpec};
use gah::NeighborList;
use proptest::prelude::*;

fn list(d: &[f32]) -> NeighborList {
    NeighborList::new(
        d.iter()
            .enumerate()
            .map(|(i, &x)| gah::Neighbor::new(i as u32, x))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pearson_affine_invariant(xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(base) = pearson(&x, &y) else { return Ok(()); };
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let t = pearson(&xs, &y).unwrap();
        prop_assert!((t.r - base.r).abs() <= 1e-9, "{} vs {}", t.r, base.r);
        prop_assert!(base.r.abs() <= 1.0);
    }

    #[test]
    fn lid_scale_invariant(mut d in prop::collection::vec(0.01f32..10.0, 2..30), c in 0.5f32..4.0) {
        d.sort_by(f32::total_cmp);
        let k = d.len();
        let a = lid_estimate(&list(&d), k).unwrap();
        let scaled: Vec<f32> = d.iter().map(|x| x * c).collect();
        let b = lid_estimate(&list(&scaled), k).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-3 * a.abs().max(1.0)),
            (None, None) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn workload_selection_invariants(h in prop::collection::vec(0.0f64..100.0, 50..300), q in 5usize..40, segs in 1usize..8, seed in any::<u64>()) {
        let segs = segs.min(q);
        let spec = WorkloadSpec::new(q, segs, seed);
        let Ok(sel) = generate_unbiased_workload(&h, &spec) else { return Ok(()); };
        let (lo, hi) = sel.range;
        let per = spec.per_segment();
        let mut counts = vec![0usize; segs];
        for &i in &sel.indices {
            prop_assert!(h[i] >= lo && h[i] <= hi);
            counts[sel.segment_of(h[i])] += 1;
        }
        for s in 0..segs {
            if sel.deficits[s] == 0 {
                prop_assert_eq!(counts[s], per);
            } else {
                prop_assert_eq!(counts[s], sel.available[s]);
            }
        }
        prop_assert!(sel.indices.windows(2).all(|w| h[w[0]] <= h[w[1]]));
        prop_assert_eq!(generate_unbiased_workload(&h, &spec).unwrap(), sel);
    }
}
