//! Component-size scaling: the largest component grows like n^rho with
//! rho = (tau-2)/(tau-1).

use anyhow::Result;
use rayon::prelude::*;

use critgraph::rng::rng_for;
use critgraph::stats::{linear_fit, median};
use critgraph::weights::ExponentSet;

use super::util::{largest_by_size, nr_graph};
use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct SizeScaling;

pub(super) const SWEEP: [usize; 6] = [4096, 8192, 16384, 32768, 65536, 131072];

impl Experiment for SizeScaling {
    fn name(&self) -> &'static str {
        "size-scaling"
    }

    fn describe(&self) -> &'static str {
        "slope of log median |C_1| against log n across the critical sweep"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let sweep: Vec<usize> = if config.n_list.len() >= 3 {
            config.n_list.clone()
        } else {
            SWEEP.to_vec()
        };
        let replicas = config.replicas.max(1);
        let exps = ExponentSet::new(config.tau)?;

        let mut medians = Vec::with_capacity(sweep.len());
        let mut csv = String::from("n,replica,largest_size\n");
        for (slot, &n) in sweep.iter().enumerate() {
            let sizes: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = rng_for(config.seed, (slot * replicas + r) as u64);
                    let g = nr_graph(config, n, &mut rng);
                    largest_by_size(&g).len() as f64
                })
                .collect();
            for (r, s) in sizes.iter().enumerate() {
                csv.push_str(&format!("{n},{r},{s}\n"));
            }
            medians.push(median(&sizes));
        }
        let xs: Vec<f64> = sweep.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
        let (slope, _, stderr) = linear_fit(&xs, &ys);

        let tol = config.tol("tol_slope", 0.08);
        let mut report = ExperimentReport::new(self.name());
        report.push(CriterionResult::in_range(
            "size_slope",
            slope,
            exps.rho - tol,
            exps.rho + tol,
        ));
        report.stat("size_slope", slope);
        report.stat("size_slope_stderr", stderr);
        report.stat("rho_target", exps.rho);
        for (n, m) in sweep.iter().zip(&medians) {
            report.stat(&format!("median_size_n{n}"), *m);
        }
        report.records_csv = csv;
        Ok(report)
    }
}
