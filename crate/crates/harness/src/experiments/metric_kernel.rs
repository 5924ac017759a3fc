//! Metric kernel checks: exact Gromov-Hausdorff identities, greedy-versus-
//! exact covers and the unit-path dimension slope.

use anyhow::Result;
use rand::Rng as _;

use critgraph::graphgen::{components, SimpleGraph};
use critgraph::metric::{
    ball_cover_count, ball_cover_exact, dim_estimate, gh_exact, graph_metric_space_exact,
    GraphDistances, MeasuredMetricSpace,
};
use critgraph::rng::{rng_for, Rng};

use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct MetricKernel;

fn two_point(gap: f64) -> MeasuredMetricSpace {
    MeasuredMetricSpace::new(2, vec![0.0, gap, gap, 0.0], vec![0.5, 0.5]).unwrap()
}

/// Shortest-path metric of a random connected weighted graph on k points.
fn random_graph_space(k: usize, rng: &mut Rng) -> MeasuredMetricSpace {
    let mut d = vec![vec![f64::INFINITY; k]; k];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if rng.gen::<f64>() < 0.6 {
                let w = 0.25 + rng.gen::<f64>();
                d[i][j] = w;
                d[j][i] = w;
            }
        }
    }
    for i in 0..k {
        let j = (i + 1) % k;
        let w = 0.25 + rng.gen::<f64>();
        d[i][j] = d[i][j].min(w);
        d[j][i] = d[i][j];
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    let flat: Vec<f64> = d.into_iter().flatten().collect();
    MeasuredMetricSpace::new(k, flat, vec![1.0 / k as f64; k]).unwrap()
}

impl Experiment for MetricKernel {
    fn name(&self) -> &'static str {
        "metric-kernel"
    }

    fn describe(&self) -> &'static str {
        "GH identities, cover bounds and the unit-path dimension slope"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let mut report = ExperimentReport::new(self.name());
        let mut csv = String::from("check,value\n");

        // Two-point spaces: d_GH = |a - b| / 2.
        let mut max_two_point_err = 0.0f64;
        for (a, b) in [(2.0, 3.0), (1.0, 5.0), (0.4, 0.4), (7.0, 0.5)] {
            let d = gh_exact(&two_point(a), &two_point(b))?;
            max_two_point_err = max_two_point_err.max((d - (a - b).abs() / 2.0).abs());
        }
        report.push(CriterionResult::le(
            "two_point_gh_error",
            max_two_point_err,
            1e-12,
        ));
        csv.push_str(&format!("two_point_gh_error,{max_two_point_err}\n"));

        // Scale equivariance on random 4-point instances: bit-exact at
        // factor 2, 1e-12 relative at factor 3.
        let mut rng = rng_for(config.seed, 1);
        let mut exact2 = true;
        let mut max_rel3 = 0.0f64;
        for _ in 0..40 {
            let x = random_graph_space(4, &mut rng);
            let y = random_graph_space(4, &mut rng);
            let base = gh_exact(&x, &y)?;
            let d2 = gh_exact(&x.scale(2.0)?, &y.scale(2.0)?)?;
            exact2 &= d2 == 2.0 * base;
            let d3 = gh_exact(&x.scale(3.0)?, &y.scale(3.0)?)?;
            max_rel3 = max_rel3.max((d3 - 3.0 * base).abs() / (1.0 + 3.0 * base));
        }
        report.push(CriterionResult::flag("scale_equivariance_factor2_exact", exact2));
        report.push(CriterionResult::le(
            "scale_equivariance_factor3_relerr",
            max_rel3,
            1e-12,
        ));
        csv.push_str(&format!("scale_equivariance_factor3_relerr,{max_rel3}\n"));

        // Greedy cover never beats the exact cover (k <= 12).
        let mut rng = rng_for(config.seed, 2);
        let mut greedy_ok = true;
        let mut instances = 0usize;
        for k in 5..=12usize {
            for _ in 0..6 {
                let s = random_graph_space(k, &mut rng);
                for delta in [0.3, 0.6, 1.1, 2.2] {
                    let g = ball_cover_count(&s, delta);
                    let e = ball_cover_exact(&s, delta)?;
                    greedy_ok &= g >= e;
                    instances += 1;
                }
            }
        }
        report.push(CriterionResult::flag("greedy_cover_ge_exact", greedy_ok));
        report.stat("cover_instances", instances as f64);

        // Unit-path dimension slope on a grid coarse enough to tame the
        // open-ball discreteness: n = 4096 over {4, 8, 16, 32}.
        let n = 4096usize;
        let edges: Vec<(u32, u32)> = (0..n - 1).map(|i| (i as u32, i as u32 + 1)).collect();
        let g = SimpleGraph::new(n, edges, vec![1.0; n])?;
        let comp = &components(&g)[0];
        let gd = GraphDistances::from_component(&g, comp)?;
        let (slope, counts) = dim_estimate(&gd, &[4.0, 8.0, 16.0, 32.0])?;
        report.push(CriterionResult::in_range(
            "unit_path_dimension_slope",
            slope,
            0.9,
            1.1,
        ));
        report.stat("unit_path_dimension_slope", slope);
        for (d, c) in counts {
            csv.push_str(&format!("path_cover_delta_{d},{c}\n"));
        }

        // Landmark space at full size coincides with the exact space.
        let small = SimpleGraph::new(
            5,
            vec![(0, 1), (1, 2), (2, 3), (3, 4)],
            vec![1.0, 2.0, 1.0, 2.0, 1.0],
        )?;
        let c0 = &components(&small)[0];
        let exact = graph_metric_space_exact(&small, c0)?;
        let mut rng = rng_for(config.seed, 3);
        let land =
            critgraph::metric::graph_metric_space_landmarks(&small, c0, 5, &mut rng)?;
        let mut same = true;
        for i in 0..5 {
            for j in 0..5 {
                same &= exact.dist(i, j) == land.dist(i, j);
            }
        }
        report.push(CriterionResult::flag("landmarks_full_equals_exact", same));

        report.records_csv = csv;
        Ok(report)
    }
}
