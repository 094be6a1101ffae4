mod common;

use common::Instance;
use gah::reach::{find_delta0, Delta0Params};
use gah::steiner::{
    decision_weights, dst_exact_bruteforce, dst_shortest_path, me_basic_within, me_chain, satisfies_pairs,
    vdsn_exact_bruteforce, vdsn_heuristic, CandidateFilter,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dst_heuristic_bounds_exact(n in 2usize..12, density in 0.05f64..0.5, seed in any::<u64>(), weighted in any::<bool>()) {
        let inst = Instance::random(n, density, seed);
        let filter = CandidateFilter::unbounded(n);
        let w = decision_weights(&inst.g);
        let w = weighted.then_some(&w[..]);
        let terms = inst.nn.top_ids(3.min(n));
        let root = terms[0];
        let h = dst_shortest_path(&inst.g, root, &terms, &filter, w).unwrap();
        let x = dst_exact_bruteforce(&inst.g, root, &terms, &filter, w).unwrap();
        prop_assert_eq!(h.is_feasible(), x.is_feasible());
        if x.is_feasible() {
            prop_assert!(h.weight(w) >= x.weight(w) - 1e-9);
            let pairs: Vec<(u32, u32)> = terms.iter().map(|&t| (root, t)).collect();
            prop_assert!(satisfies_pairs(&inst.g, &h.nodes, &pairs));
        }
    }

    #[test]
    fn vdsn_heuristic_bounds_exact(n in 2usize..12, density in 0.05f64..0.5, seed in any::<u64>()) {
        let inst = Instance::random(n, density, seed);
        let filter = CandidateFilter::unbounded(n);
        let top = inst.nn.top_ids(3.min(n));
        let pairs: Vec<(u32, u32)> = top.iter().flat_map(|&s| top.iter().map(move |&t| (s, t))).filter(|(s, t)| s != t).collect();
        let h = vdsn_heuristic(&inst.g, &pairs, &filter, None).unwrap();
        let x = vdsn_exact_bruteforce(&inst.g, &pairs, &filter, None).unwrap();
        prop_assert_eq!(h.is_feasible(), x.is_feasible());
        prop_assert!(h.me() >= x.me());
    }

    #[test]
    fn me_chain_is_ordered_and_feasible(n in 3usize..25, density in 0.05f64..0.4, seed in any::<u64>(), acc in 0.5f64..1.0) {
        let inst = Instance::random(n, density, seed);
        let k = 3.min(n);
        let d0 = find_delta0(&inst.g, &inst.rev, &inst.nn, &Delta0Params::new(k, acc, 0.6, n)).unwrap();
        prop_assume!(d0.found());
        let filter = CandidateFilter::from_neighbors(n, inst.nn.as_slice(), d0.radius);
        let roots: Vec<u32> = (0..n as u32).collect();
        let c = me_chain(&inst.g, &inst.nn, k, acc, &roots, &d0.pairs, &filter).unwrap();
        prop_assert!(c.basic.value <= c.constrained.value);
        prop_assert!(c.constrained.value <= c.exhaustive.value);
        let y = &c.constrained.solution.nodes;
        prop_assert!(y.iter().all(|&v| filter.contains(v)));
        prop_assert!(satisfies_pairs(&inst.g, y, &d0.pairs.representative_pairs()));
        prop_assert!(me_basic_within(&inst.g, &inst.nn, k, acc, y).unwrap().is_some());
    }
}
