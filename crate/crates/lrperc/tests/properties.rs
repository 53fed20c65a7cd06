//! Property tests for the structural invariants: kernel symmetry, ball
//! nesting, the reduction of the exploration to plain percolation, the
//! pointwise cluster sandwich, and the containment theorem on randomized
//! instances.

use lrperc::coupling::{check_containment, Containment, CoupledRunner, CPrimeMode};
use lrperc::exploration::{self, AssertLevel, ExplorationContext, RunOptions};
use lrperc::lattice::{ball, delta_of, DifferenceSet, Displacement, Kernel, Orientation};
use lrperc::marks::MarkField;
use lrperc::oracle;
use proptest::prelude::*;

fn prob() -> impl Strategy<Value = f64> {
    (0u32..=1000).prop_map(|k| k as f64 / 1000.0)
}

/// Random undirected table kernel on the plane over a small displacement
/// pool.
fn plane_kernel() -> impl Strategy<Value = Kernel> {
    (prob(), prob(), prob(), prob()).prop_map(|(a, b, c, d)| {
        Kernel::table(
            2,
            vec![
                (Displacement::new(vec![1, 0]), a),
                (Displacement::new(vec![0, 1]), b),
                (Displacement::new(vec![1, 1]), c),
                (Displacement::new(vec![2, 0]), d),
            ],
        )
        .expect("table kernel")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn undirected_kernels_are_negation_symmetric(kernel in plane_kernel()) {
        for z in ball(2, 4) {
            if z.l1_norm() == 0 {
                continue;
            }
            let z = Displacement::new(z.coords().to_vec());
            prop_assert_eq!(
                kernel.value(&z).unwrap(),
                kernel.value(&z.negated()).unwrap()
            );
        }
    }

    #[test]
    fn balls_nest(d in 1usize..=3, n in 0u32..5) {
        let small: std::collections::HashSet<_> = ball(d, n).into_iter().collect();
        let large: std::collections::HashSet<_> = ball(d, n + 1).into_iter().collect();
        prop_assert!(small.is_subset(&large));
        if d == 2 {
            prop_assert_eq!(small.len() as u32, 2 * n * n + 2 * n + 1);
        }
    }

    #[test]
    fn exploration_reduces_to_plain_percolation(kernel in plane_kernel(), seed in any::<u64>(), q in prob()) {
        // With an empty difference set the exploration discovers exactly
        // the breadth-first cluster, whatever q is.
        let delta = DifferenceSet::empty(2, Orientation::Undirected);
        let ctx = ExplorationContext::build(&kernel, &delta, q, 3).expect("context");
        let field = MarkField::new(seed);
        let outcome = exploration::run_in_context(
            &ctx,
            &field,
            RunOptions {
                stop_at_boundary: false,
                ..RunOptions::with_assertions(AssertLevel::LemmaChecks)
            },
        )
        .expect("exploration");
        let mut mine = outcome.discovered_vertices();
        mine.sort();
        let bfs = oracle::bfs_cluster_in(&ctx, &field);
        prop_assert_eq!(mine, bfs.vertices);
    }

    #[test]
    fn exploration_assertions_hold_on_random_tuples(
        kernel in plane_kernel(),
        q in prob(),
        seed in any::<u64>(),
        delta_mask in 0u8..8,
    ) {
        let pool = [
            Displacement::new(vec![1, 0]),
            Displacement::new(vec![0, 1]),
            Displacement::new(vec![1, 1]),
        ];
        let displacements: Vec<Displacement> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| delta_mask & (1 << i) != 0)
            .map(|(_, z)| z.clone())
            .collect();
        let delta = DifferenceSet::from_displacements(2, Orientation::Undirected, displacements)
            .expect("difference set");
        let outcome = exploration::run(
            &kernel,
            &delta,
            q,
            3,
            &MarkField::new(seed),
            RunOptions::with_assertions(AssertLevel::FullTrace),
        );
        prop_assert!(outcome.is_ok(), "consistency failure: {:?}", outcome.err());
    }

    #[test]
    fn coupled_clusters_are_sandwiched(base in prob(), cut in prob(), seed in any::<u64>()) {
        // J' strictly below J on the horizontal orbit, both inside (0,1).
        let j_val = 0.05 + 0.9 * base;
        let jp_val = j_val * (0.9 * cut);
        let j = Kernel::table(
            2,
            vec![
                (Displacement::new(vec![1, 0]), j_val),
                (Displacement::new(vec![0, 1]), j_val),
            ],
        )
        .unwrap();
        let jp = j.with_override(Displacement::new(vec![1, 0]), jp_val).unwrap();
        let runner = CoupledRunner::new(&j, &jp, 3, CPrimeMode::PointwiseDominated).unwrap();
        let sample = runner.sample_seed(seed).unwrap();
        let star: std::collections::HashSet<_> = sample.cluster_star.iter().cloned().collect();
        for v in &sample.cluster_jprime {
            prop_assert!(star.contains(v), "refined cluster escaped the four-condition rule");
        }
        // Containment on applicable samples.
        let (containment, witness) = check_containment(&sample);
        prop_assert_ne!(containment, Containment::Violated, "witness {:?}", witness);
    }

    #[test]
    fn thinning_strength_monotone_in_the_gap(base in prob(), lo in prob(), hi in prob()) {
        let j_val = 0.1 + 0.85 * base;
        let (small, large) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        // Larger gap (smaller perturbed value) never decreases q.
        let jp_lo = j_val * 0.95 * small;
        let jp_hi = j_val * 0.95 * large;
        let j = Kernel::table(1, vec![(Displacement::new(vec![1]), j_val)]).unwrap();
        let make = |v: f64| {
            let jp = j.with_override(Displacement::new(vec![1]), v).unwrap();
            let delta = delta_of(&j, &jp).unwrap();
            lrperc::coupling::compute_q(&j, &jp, &delta).unwrap().q
        };
        let q_wide = make(jp_lo);
        let q_narrow = make(jp_hi);
        prop_assert!(q_wide >= q_narrow - 1e-15, "q_wide {q_wide} < q_narrow {q_narrow}");
    }

    #[test]
    fn marks_are_pure_and_endpoint_keyed(ax in -8i32..8, ay in -8i32..8, bx in -8i32..8, by in -8i32..8, seed in any::<u64>()) {
        prop_assume!((ax, ay) != (bx, by));
        use lrperc::lattice::{EdgeKey, Vertex};
        use lrperc::marks::Channel;
        let field = MarkField::new(seed);
        let a = Vertex::new(vec![ax, ay]);
        let b = Vertex::new(vec![bx, by]);
        let e1 = EdgeKey::undirected(a.clone(), b.clone()).unwrap();
        let e2 = EdgeKey::undirected(b.clone(), a.clone()).unwrap();
        for ch in [Channel::U, Channel::W, Channel::X, Channel::Priority] {
            prop_assert_eq!(field.mark(&e1, ch), field.mark(&e2, ch));
        }
        prop_assert_eq!(field.endpoint_mark(&e1, &a), field.endpoint_mark(&e2, &a));
        prop_assert_eq!(field.endpoint_mark(&e1, &b), field.endpoint_mark(&e2, &b));
        prop_assert_ne!(field.endpoint_mark(&e1, &a), field.endpoint_mark(&e1, &b));
    }
}
