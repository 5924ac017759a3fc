//! Property tests for structural invariants that must hold for arbitrary
//! admissible inputs, not just the worked examples.

use proptest::prelude::*;

use critgraph::graphgen::{components, sample_mc_graph, SimpleGraph};
use critgraph::levy::{build_levy_path, excursions, reflect};
use critgraph::metric::MeasuredMetricSpace;
use critgraph::ptree::{dfs_annotate, sample_ordered_ptree};
use critgraph::rng::rng_from_seed;
use critgraph::weights::{
    entrance_boundary, nr_to_mc_params, power_law_weights, EntranceBoundary, WeightSequence,
};

fn pmf_strategy(max_m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 2..max_m).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_partition_any_graph(
        n in 2usize..40,
        edges in prop::collection::vec((0u32..40, 0u32..40), 0..80),
        seed in any::<u64>(),
    ) {
        let edges: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|&(u, v)| (u as usize) < n && (v as usize) < n && u != v)
            .collect();
        let mut dedup = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect::<Vec<_>>();
        dedup.sort_unstable();
        dedup.dedup();
        let weights: Vec<f64> = (0..n)
            .map(|i| 0.1 + critgraph::rng::keyed_uniform(seed, i as u64, 0))
            .collect();
        let g = SimpleGraph::new(n, dedup, weights.clone()).unwrap();
        let comps = components(&g);
        let mut seen = vec![false; n];
        let mut total_mass = 0.0;
        for c in &comps {
            prop_assert!(!c.vertices.is_empty());
            let mut recomputed = 0.0;
            for &v in &c.vertices {
                prop_assert!(!seen[v as usize], "vertex {v} in two components");
                seen[v as usize] = true;
                recomputed += weights[v as usize];
            }
            prop_assert!((recomputed - c.mass).abs() < 1e-9);
            total_mass += c.mass;
        }
        prop_assert!(seen.iter().all(|&s| s));
        let expect: f64 = weights.iter().sum();
        prop_assert!((total_mass - expect).abs() < 1e-9);
    }

    #[test]
    fn nr_mc_identity_everywhere(
        n in 2usize..400,
        tau in 3.05f64..3.95,
        lambda in -0.9f64..3.0,
        iota in 0.2f64..2.0,
    ) {
        let w = power_law_weights(n, tau, iota).unwrap();
        let (x, t) = nr_to_mc_params(&w, lambda, tau).unwrap();
        let eta = (tau - 3.0) / (tau - 1.0);
        let mult = 1.0 + lambda * (n as f64).powf(-eta);
        for i in (0..n).step_by(1 + n / 10) {
            for j in (0..n).step_by(1 + n / 7) {
                let lhs = t * x.values()[i] * x.values()[j];
                let rhs = mult * w.values()[i] * w.values()[j] / w.total();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reflected_paths_nonnegative_with_disjoint_excursions(
        seed in any::<u64>(),
        lambda in -2.0f64..1.5,
        alpha in 0.3f64..0.9,
    ) {
        let c = entrance_boundary(alpha, 3.5, 200).unwrap();
        let mut rng = rng_from_seed(seed);
        let p = build_levy_path(&c, lambda, 5.0, &mut rng).unwrap();
        let r = reflect(&p);
        for k in 0..200 {
            let s = 5.0 * (k as f64 + 0.5) / 200.0;
            prop_assert!(r.value(s) >= 0.0);
        }
        let set = excursions(&r);
        let mut iv: Vec<(f64, f64)> = set.excursions.iter().map(|e| (e.start, e.end)).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in iv.windows(2) {
            prop_assert!(w[0].1 <= w[1].0 + 1e-12);
        }
    }

    #[test]
    fn tilt_bounds_and_mass_identity(p in pmf_strategy(24), a in 0.0f64..4.0, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let t = sample_ordered_ptree(&p, &mut rng).unwrap();
        // dfs_annotate internally asserts the two-route tilt-mass identity.
        let ann = dfs_annotate(&t, &p, a).unwrap();
        let pmax = p.iter().cloned().fold(0.0, f64::max);
        prop_assert!(ann.tilt_i >= 1.0 - 1e-12);
        prop_assert!(ann.tilt_i <= (a * pmax).exp() + 1e-12);
        prop_assert!((ann.tilt_l - ann.tilt_i * ann.tilt_lbar).abs() <= 1e-9 * ann.tilt_l);
        for v in 0..t.len() {
            prop_assert!(ann.d_a[v] <= ann.max_active_weight + 1e-12);
        }
    }

    #[test]
    fn scale_round_trip_and_cover_monotone(
        seed in any::<u64>(),
        k in 2usize..30,
        factor in 0.1f64..8.0,
    ) {
        // Random ultrametric-free spaces from graph distances.
        let mut rng = rng_from_seed(seed);
        let x = WeightSequence::new(vec![1.0; k]).unwrap();
        let g = sample_mc_graph(&x, 1.2, &mut rng).unwrap();
        let comps = components(&g);
        let s = critgraph::metric::graph_metric_space_exact(&g, &comps[0]);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let back = s.scale(factor).unwrap().scale(1.0 / factor).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                prop_assert!((back.dist(i, j) - s.dist(i, j)).abs() < 1e-12);
            }
        }
        let mut prev = usize::MAX;
        for delta in [0.5, 1.0, 2.0, 4.0] {
            let n = critgraph::metric::ball_cover_count(&s, delta);
            prop_assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn excursion_params_always_normalized(seed in any::<u64>()) {
        let c = EntranceBoundary::from_values(
            (1..=50).map(|j| 0.8 * (j as f64).powf(-0.4)).collect(),
        ).unwrap();
        let mut rng = rng_from_seed(seed);
        let p = build_levy_path(&c, -0.2, 8.0, &mut rng).unwrap();
        let set = excursions(&reflect(&p));
        for e in set.complete() {
            if e.jump_indices.is_empty() {
                continue;
            }
            let (gamma_bar, theta, gamma) =
                critgraph::levy::component_limit_params(e, &c).unwrap();
            let s2: f64 = theta.values().iter().map(|t| t * t).sum();
            prop_assert!((s2 - 1.0).abs() < 1e-12);
            prop_assert!(gamma_bar > 0.0 && gamma > 0.0);
        }
    }
}

#[test]
fn metric_space_rejects_asymmetry() {
    assert!(MeasuredMetricSpace::new(2, vec![0.0, 1.0, 2.0, 0.0], vec![0.5, 0.5]).is_err());
}
