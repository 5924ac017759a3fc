//! Scratch calibration probe for the dimension experiment grid.

use critgraph::metric::{ball_cover_count, GraphDistances};
use critgraph::rng::rng_for;

fn main() {
    let tau = 3.5;
    for lambda in [4.0f64, 5.0] {
        for n in [10_000usize, 100_000] {
            let eta: f64 = (tau - 3.0) / (tau - 1.0);
            let base = (n as f64).powf(eta);
            let mut cfg = critgraph_harness::ExperimentConfig::named("probe");
            cfg.lambda = lambda;
            cfg.tau = tau;
            for rep in 0..3u64 {
                let mut rng = rng_for(9 + rep, (n + lambda as usize) as u64);
                let w =
                    critgraph::weights::power_law_weights(n, tau, cfg.iota_value()).unwrap();
                let g =
                    critgraph::graphgen::sample_nr_graph(&w, lambda, tau, &mut rng).unwrap();
                let comp = critgraph::graphgen::components(&g)
                    .into_iter()
                    .max_by_key(|c| c.len())
                    .unwrap();
                if comp.len() > 20_000 {
                    println!("lambda={lambda} n={n} k={} TOO BIG", comp.len());
                    continue;
                }
                let gd = GraphDistances::from_component(&g, &comp).unwrap();
                print!("lambda={lambda} n={n} k={} | ", comp.len());
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for f in [0.5, 0.8, 1.26, 2.0, 3.17, 5.0, 8.0] {
                    let delta = (f * base).max(1.000001);
                    let c = ball_cover_count(&gd, delta);
                    print!("{delta:.1}->{c} ");
                    xs.push((1.0 / delta).ln());
                    ys.push((c.max(1) as f64).ln());
                }
                // Best decade LS slope over consecutive windows of 4 points
                // (the grid ratio between consecutive points is 10^(1/5)).
                for lo in 0..=xs.len() - 4 {
                    let (s, _, _) =
                        critgraph::stats::linear_fit(&xs[lo..lo + 4], &ys[lo..lo + 4]);
                    print!("| w{lo}:{s:.2} ");
                }
                println!();
            }
        }
    }
}
