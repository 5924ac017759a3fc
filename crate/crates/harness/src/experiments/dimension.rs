//! Box-counting dimension of the largest critical component: the log-log
//! cover-count slope over a decade of radii around n^eta, compared with the
//! limit value (tau-2)/(tau-3), plus the monotone-in-n trend.

use anyhow::Result;

use critgraph::metric::{dim_estimate, GraphDistances};
use critgraph::rng::rng_for;
use critgraph::weights::ExponentSet;

use super::util::{largest_by_size, nr_graph};
use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct Dimension;

/// The window parameter for this experiment. The limit dimension is the
/// same for every window location, but at desk scale the largest component
/// under a deeper window carries enough vertices (~10^4 at n = 10^5) for
/// the cover counts to leave the hub-dominated small-radius regime inside
/// the measured decade.
const WINDOW_LAMBDA: f64 = 4.0;

/// One decade of radii, log-spaced, from 0.5 n^eta up to 5 n^eta; radii
/// below the component diameter scale and above the unit-edge resolution.
fn delta_grid(n: usize, eta: f64) -> Vec<f64> {
    let base = (n as f64).powf(eta);
    [0.5, 0.796, 1.262, 2.0, 3.17, 5.02]
        .iter()
        .map(|f| (f * base).max(1.0 + 1e-9))
        .collect()
}

impl Experiment for Dimension {
    fn name(&self) -> &'static str {
        "dimension"
    }

    fn describe(&self) -> &'static str {
        "box-counting slope of the largest component over a decade of n^eta"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let sizes: Vec<usize> = if config.n_list.len() >= 2 {
            config.n_list.clone()
        } else {
            vec![10_000, 100_000]
        };
        let replicas = config.replicas.min(50).max(1);
        let exps = ExponentSet::new(config.tau)?;

        let mut cfg = config.clone();
        cfg.lambda = WINDOW_LAMBDA;
        let mut csv = String::from("n,replica,component_size,slope\n");
        let mut mean_slopes = Vec::new();
        for (slot, &n) in sizes.iter().enumerate() {
            let grid = delta_grid(n, exps.eta);
            // Replicas run sequentially: the dense distance table of the
            // largest component dominates memory; BFS parallelism lives
            // inside GraphDistances.
            let mut slopes = Vec::with_capacity(replicas);
            for r in 0..replicas {
                let mut rng = rng_for(config.seed ^ 0xd1a, (slot * replicas + r) as u64);
                let g = nr_graph(&cfg, n, &mut rng);
                let comp = largest_by_size(&g);
                if comp.len() > 18_000 {
                    // A dense table would not fit comfortably; skip the rare
                    // oversized draw and record it.
                    csv.push_str(&format!("{n},{r},{},skipped\n", comp.len()));
                    continue;
                }
                let gd = GraphDistances::from_component(&g, &comp)?;
                let (slope, _) = dim_estimate(&gd, &grid)?;
                csv.push_str(&format!("{n},{r},{},{slope}\n", comp.len()));
                slopes.push(slope);
            }
            mean_slopes.push(slopes.iter().sum::<f64>() / slopes.len() as f64);
        }

        let mut report = ExperimentReport::new(self.name());
        let target = exps.pi_dim;
        let tol = config.tol("tol_dim", 0.8);
        let last = *mean_slopes.last().unwrap();
        report.push(CriterionResult::in_range(
            "dimension_slope_largest_n",
            last,
            target - tol,
            target + tol,
        ));
        // Finite-size bias is downward; the slope must move toward the
        // limit as n grows.
        let trend_ok = mean_slopes.windows(2).all(|w| w[0] <= w[1] + 0.05);
        report.push(CriterionResult::flag("monotone_trend_toward_limit", trend_ok));
        for (n, s) in sizes.iter().zip(&mean_slopes) {
            report.stat(&format!("mean_slope_n{n}"), *s);
        }
        report.stat("dimension_target", target);
        report.records_csv = csv;
        Ok(report)
    }
}
