//! Property tests for the structural invariants: SHD is a metric, CPDAG
//! computation agrees with Markov equivalence, Meek closure is idempotent,
//! laws stay normalized, and design checks are permutation-invariant.

use proptest::prelude::*;

use latent_causal::graphs::{
    dag_to_cpdag, is_acyclic, markov_equivalent, meek_closure, shd, Cpdag, LatentDag,
};
use latent_causal::identcheck::subset_condition;
use latent_causal::model::{densify, latent_prob, Cpt, LatentLaw, QMatrix};

/// Arbitrary DAG on `k` nodes: pick an orientation state per node pair,
/// dropping any edge that would close a directed cycle.
fn arb_dag(k: usize) -> impl Strategy<Value = LatentDag> {
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .collect();
    let m = pairs.len();
    proptest::collection::vec(0u8..3, m).prop_map(move |states| {
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for (&(a, b), &s) in pairs.iter().zip(&states) {
            let e = match s {
                1 => (a, b),
                2 => (b, a),
                _ => continue,
            };
            kept.push(e);
            let set: std::collections::BTreeSet<_> = kept.iter().copied().collect();
            if !is_acyclic(&set, k).unwrap() {
                kept.pop();
            }
        }
        LatentDag::new(k, kept).unwrap()
    })
}

/// Arbitrary PDAG (not necessarily a valid CPDAG) on `k` nodes.
fn arb_pdag(k: usize) -> impl Strategy<Value = Cpdag> {
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .collect();
    let m = pairs.len();
    proptest::collection::vec(0u8..4, m).prop_map(move |states| {
        let mut directed = Vec::new();
        let mut undirected = Vec::new();
        for (&(a, b), &s) in pairs.iter().zip(&states) {
            match s {
                1 => directed.push((a, b)),
                2 => directed.push((b, a)),
                3 => undirected.push((a, b)),
                _ => {}
            }
        }
        // drop directed edges that close a cycle, keeping the rest
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for e in directed {
            kept.push(e);
            let set: std::collections::BTreeSet<_> = kept.iter().copied().collect();
            if !is_acyclic(&set, k).unwrap() {
                kept.pop();
            }
        }
        Cpdag::new(k, kept, undirected).unwrap()
    })
}

fn arb_law(k: usize) -> impl Strategy<Value = LatentLaw> {
    // chain DAG with arbitrary CPT entries bounded away from 0 and 1
    proptest::collection::vec(0.05f64..0.95, 2 * k - 1).prop_map(move |probs| {
        let dag = LatentDag::new(k, (0..k - 1).map(|i| (i, i + 1))).unwrap();
        let mut cpts = vec![Cpt { parents: vec![], probs: vec![probs[0]] }];
        for v in 1..k {
            cpts.push(Cpt {
                parents: vec![v - 1],
                probs: vec![probs[2 * v - 1], probs[2 * v]],
            });
        }
        LatentLaw::Bn { dag, cpts }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shd_is_a_metric(a in arb_pdag(5), b in arb_pdag(5), c in arb_pdag(5)) {
        prop_assert_eq!(shd(&a, &a).unwrap(), 0);
        prop_assert_eq!(shd(&a, &b).unwrap(), shd(&b, &a).unwrap());
        let ab = shd(&a, &b).unwrap();
        let bc = shd(&b, &c).unwrap();
        let ac = shd(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc);
        // positivity: distinct graphs are at positive distance
        if a != b {
            prop_assert!(ab > 0);
        }
    }

    #[test]
    fn cpdag_preserves_skeleton_and_v_structures(g in arb_dag(4)) {
        let c = dag_to_cpdag(&g);
        let mut skel = std::collections::BTreeSet::new();
        for &(a, b) in c.directed() {
            skel.insert((a.min(b), a.max(b)));
        }
        for &e in c.undirected() {
            skel.insert(e);
        }
        prop_assert_eq!(skel, g.skeleton());
        // every compelled edge appears in the DAG with the same orientation
        for &(a, b) in c.directed() {
            prop_assert!(g.has_edge(a, b));
        }
    }

    #[test]
    fn markov_equivalence_iff_equal_cpdags(g1 in arb_dag(4), g2 in arb_dag(4)) {
        let eq = markov_equivalent(&g1, &g2).unwrap();
        let same = dag_to_cpdag(&g1) == dag_to_cpdag(&g2);
        prop_assert_eq!(eq, same);
    }

    #[test]
    fn meek_closure_idempotent_on_patterns(g in arb_dag(5)) {
        // the v-structure pattern of a DAG always admits an extension
        let skeleton: Vec<(usize, usize)> = g.skeleton().into_iter().collect();
        let vs = g.v_structures();
        let mut directed = std::collections::BTreeSet::new();
        for &(a, b, c) in &vs {
            directed.insert((a, b));
            directed.insert((c, b));
        }
        let undirected: Vec<(usize, usize)> = skeleton
            .iter()
            .copied()
            .filter(|&(a, b)| !directed.contains(&(a, b)) && !directed.contains(&(b, a)))
            .collect();
        let pattern = Cpdag::new(5, directed, undirected).unwrap();
        let once = meek_closure(&pattern).unwrap();
        let twice = meek_closure(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        // closing the pattern of a DAG yields its CPDAG
        prop_assert_eq!(once, dag_to_cpdag(&g));
    }

    #[test]
    fn densify_normalized_and_consistent(law in arb_law(4)) {
        let dense = densify(&law, 20).unwrap();
        prop_assert!(dense.iter().all(|&p| p >= 0.0));
        let total: f64 = dense.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // spot-check against latent_prob
        for (s, &p) in dense.iter().enumerate() {
            let z: Vec<u8> = (0..4).map(|t| ((s >> (3 - t)) & 1) as u8).collect();
            prop_assert!((latent_prob(&law, &z) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn subset_condition_permutation_invariant(
        entries in proptest::collection::vec(0u8..2, 24),
        row_rot in 0usize..8,
        col_perm in Just([2usize, 0, 1]),
    ) {
        let q = QMatrix::new(8, 3, entries.clone()).unwrap();
        let verdict = subset_condition(&q).holds;
        // rotate rows
        let mut rows: Vec<Vec<u8>> = (0..8).map(|j| q.row(j).to_vec()).collect();
        rows.rotate_left(row_rot);
        let qr = QMatrix::new(8, 3, rows.into_iter().flatten().collect()).unwrap();
        prop_assert_eq!(subset_condition(&qr).holds, verdict);
        // permute columns
        let qc = q.permute_columns(&col_perm);
        prop_assert_eq!(subset_condition(&qc).holds, verdict);
    }
}
