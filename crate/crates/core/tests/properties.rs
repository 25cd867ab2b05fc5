mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reclqr_core::dynamics::{assemble_system, OpinionModel};
use reclqr_core::graph::{DirectedGraph, Edge};
use reclqr_core::linalg::{Matrix, Vector};
use reclqr_core::performance::{classify_weights, evaluate_stage_cost, stage_cost, Regime};
use reclqr_core::riccati::{riccati_residual, TransformedProblem};
use reclqr_core::synthesis::synthesize;

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn balanced_laplacian_has_zero_row_and_column_sums(seed in any::<u64>(), n in 1usize..7) {
        let g = random_graph(&mut rng(seed), n);
        let pair = g.balance().unwrap();
        prop_assert!(pair.balance_residual() < 1e-9 * (1.0 + pair.l_b.amax()));
        prop_assert!((pair.balancing_weights.min() - 1.0).abs() < 1e-12);
        let sym = pair.symmetric_balanced();
        prop_assert!(sym.column_sum().amax() < 1e-9 * (1.0 + sym.amax()));
        let again = DirectedGraph::parse(&g.to_edge_list()).unwrap();
        prop_assert_eq!(again.laplacian(), g.laplacian());
    }

    #[test]
    fn drift_identities(seed in any::<u64>()) {
        let rm = random_model(&mut rng(seed), 4, 3, true);
        let sys = &rm.sys;
        let dim = sys.dim();
        prop_assert!((&sys.a_uc - &sys.a_c - Matrix::identity(dim, dim)).amax() < 1e-14);
        let res = (&sys.a_uc * &sys.x_eq + &sys.d).amax();
        prop_assert!(res < 1e-9 * (1.0 + sys.a_uc.amax() * sys.x_eq.amax()));
    }

    #[test]
    fn relabeling_agents_conjugates_the_drift(seed in any::<u64>(), n in 2usize..5, m in 1usize..3) {
        let mut r = rng(seed);
        let rm = random_model_sized(&mut r, n, m, true);
        let model = &rm.model;
        // agent i becomes agent perm[i]
        let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = -model.laplacians.l[(i, j)];
                if i != j && w != 0.0 {
                    edges.push(Edge { source: perm[i], target: perm[j], weight: w });
                }
            }
        }
        let pair = DirectedGraph::new(n, edges).unwrap().balance().unwrap();
        let mut anchoring = Vector::zeros(n);
        let mut anchors = Matrix::zeros(n, m);
        for i in 0..n {
            anchoring[perm[i]] = model.anchoring[i];
            anchors.set_row(perm[i], &model.anchors.row(i));
        }
        let relabeled = OpinionModel::new(pair, model.coupling.clone(), anchoring, anchors).unwrap();
        let sys2 = assemble_system(&relabeled).unwrap();
        // state index is topic * n + agent
        let big = n * m;
        let mut pm = Matrix::zeros(big, big);
        for t in 0..m {
            for i in 0..n {
                pm[(t * n + perm[i], t * n + i)] = 1.0;
            }
        }
        let conj = &pm * &rm.sys.a_c * pm.transpose();
        prop_assert!((conj - &sys2.a_c).amax() < 1e-10);
        prop_assert!((&pm * &rm.sys.x_eq - &sys2.x_eq).amax() < 1e-9);
    }

    #[test]
    fn stage_cost_matches_its_breakdown(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rm = random_model(&mut r, 3, 2, true);
        let dim = rm.sys.dim();
        let w = strictly_convex_weights(&mut r, dim, true);
        let mats = cost_matrices(&rm, &w);
        let x = random_vector(&mut r, dim, 2.0);
        let u = random_vector(&mut r, dim, 2.0);
        let total = stage_cost(&mats, &x, &u);
        let parts = evaluate_stage_cost(&mats, &x, &u).unwrap();
        // the deviation term carries the constant that the quadratic form drops
        prop_assert!((total + parts.constant - parts.terms_sum()).abs() < 1e-9 * (1.0 + total.abs()));
    }

    #[test]
    fn strictly_convex_synthesis_is_stabilizing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rm = random_model(&mut r, 3, 2, true);
        let w = strictly_convex_weights(&mut r, rm.sys.dim(), true);
        let mats = cost_matrices(&rm, &w);
        let verdict = classify_weights(&mats).unwrap();
        prop_assert_eq!(verdict.regime, Regime::StrictlyConvex);
        let ctrl = synthesize(&rm.sys, &mats, &verdict).unwrap();
        prop_assert_eq!(ctrl.hurwitz, Some(true));
        let p = ctrl.p_used.as_ref().unwrap();
        let tp = TransformedProblem::from_stage_cost(&mats, &rm.sys);
        prop_assert!(riccati_residual(&tp, p) < 1e-8 * (1.0 + p.norm()));
        prop_assert!((p - p.transpose()).amax() < 1e-9 * (1.0 + p.amax()));
        prop_assert!(p.symmetric_eigenvalues().min() > 0.0);
        prop_assert!(ctrl.spectrum.iter().all(|z| z.re < 0.0));
    }
}
