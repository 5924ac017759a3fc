//! Fast self-test: the closed-form and small-sample checks that must hold
//! on any working build, runnable in a few seconds from the CLI.

use critgraph::graphgen::{components, sample_connected_conditioned, SimpleGraph};
use critgraph::levy::{build_levy_path, excursions, reflect};
use critgraph::metric::{ball_cover_count, gh_exact, graph_metric_space_exact, MeasuredMetricSpace};
use critgraph::ptree::{birthday_tree_from_sequence, dfs_annotate, ptree_exploration, OrderedTree};
use critgraph::rng::rng_from_seed;
use critgraph::weights::{
    critical_window, entrance_boundary, nr_to_mc_params, power_law_weights, EntranceBoundary,
};

/// Run every check; returns the list of failures (empty = pass).
pub fn run(seed: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        println!("  [{}] {}", if ok { "PASS" } else { "FAIL" }, name);
        if !ok {
            failures.push(name.to_string());
        }
    };

    // Weights closed forms.
    let w = power_law_weights(32, 3.5, 1.0).unwrap();
    check("power-law weights closed form", (w.values()[0] - 4.0).abs() < 1e-12);
    let w15 = critical_window(&w, 1.0, 3.5).unwrap();
    check(
        "critical window multiplier",
        (w15.values()[0] / w.values()[0] - 1.5).abs() < 1e-12,
    );
    let w2 = critgraph::weights::WeightSequence::new(vec![2.0; 32]).unwrap();
    let (x, t) = nr_to_mc_params(&w2, 0.0, 3.5).unwrap();
    check(
        "rank-one to coalescent map",
        (x.values()[0] - 0.25).abs() < 1e-12 && (t - 1.0).abs() < 1e-12,
    );
    let c = entrance_boundary(2.0, 3.5, 32).unwrap();
    check("entrance boundary closed form", (c.values()[31] - 0.5).abs() < 1e-12);

    // p-tree hand traces.
    let t3 = ptree_exploration(&[0.5, 0.3, 0.2], &[0.9, 0.1, 0.5]).unwrap();
    check(
        "exploration golden trace",
        t3.root() == 0 && t3.parent_of(2) == Some(1),
    );
    let (bt, reps) = birthday_tree_from_sequence(3, &[0, 1, 0, 2]).unwrap();
    check(
        "birthday golden trace",
        bt.root() == 0 && bt.parent_of(2) == Some(0) && reps == vec![1],
    );
    let tree = OrderedTree::new(0, vec![0, 0, 0], vec![vec![1, 2], vec![], vec![]]).unwrap();
    let ann = dfs_annotate(&tree, &[0.5, 0.3, 0.2], 2.0).unwrap();
    check("tilt mass closed form", (ann.lambda - 2.0 * 0.06).abs() < 1e-12);

    // Connectivity-conditioned sampler on two vertices.
    let mut rng = rng_from_seed(seed);
    let (g, _) = sample_connected_conditioned(&[0.5, 0.5], 4.0, 100_000, &mut rng).unwrap();
    check("two-vertex conditioned graph", g.edges == vec![(0, 1)]);

    // Components of a path plus isolate.
    let g = SimpleGraph::new(4, vec![(0, 1), (1, 2)], vec![1.0; 4]).unwrap();
    let comps = components(&g);
    check(
        "component decomposition",
        comps.len() == 2 && comps[0].vertices == vec![0, 1, 2],
    );

    // Single-jump path algebra.
    let cb = EntranceBoundary::from_values(vec![0.5]).unwrap();
    let mut rng = rng_from_seed(seed ^ 1);
    let p = build_levy_path(&cb, 0.0, 1000.0, &mut rng).unwrap();
    let set = excursions(&reflect(&p));
    let exc = set.largest_complete().unwrap();
    check("single-jump excursion length", (exc.length - 2.0).abs() < 1e-9);

    // Metric kernel.
    let a = MeasuredMetricSpace::new(2, vec![0.0, 2.0, 2.0, 0.0], vec![0.5, 0.5]).unwrap();
    let b = MeasuredMetricSpace::new(2, vec![0.0, 3.0, 3.0, 0.0], vec![0.5, 0.5]).unwrap();
    check(
        "two-point Gromov-Hausdorff",
        (gh_exact(&a, &b).unwrap() - 0.5).abs() < 1e-12,
    );
    let path5 = SimpleGraph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)], vec![1.0; 5]).unwrap();
    let comp = &components(&path5)[0];
    let s = graph_metric_space_exact(&path5, comp).unwrap();
    check("greedy cover on unit path", ball_cover_count(&s, 1.5) == 2);
    check("cover above diameter", ball_cover_count(&s, 10.0) == 1);

    failures
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        assert!(super::run(42).is_empty());
    }
}
