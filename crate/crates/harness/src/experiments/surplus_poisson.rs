//! Conditional surplus-count law: given a fixed tree, the number of surplus
//! draws is Poisson with mean equal to the tree's tilt mass.

use anyhow::Result;
use rayon::prelude::*;

use critgraph::ptree::{dfs_annotate, sample_ordered_ptree, sample_surplus_pairs};
use critgraph::rng::rng_for;

use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct SurplusPoisson;

impl Experiment for SurplusPoisson {
    fn name(&self) -> &'static str {
        "surplus-poisson"
    }

    fn describe(&self) -> &'static str {
        "surplus-count moments vs the tilt mass on 100 fixed trees (m = 50)"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let m = 50usize;
        let a = 2.0;
        let trees = 100usize;
        let draws = 2_000usize;
        let p = vec![1.0 / m as f64; m];

        struct TreeRow {
            lambda: f64,
            mean: f64,
            var: f64,
            z_mean: f64,
            z_var: f64,
        }
        let rows: Vec<TreeRow> = (0..trees)
            .into_par_iter()
            .map(|idx| {
                let mut rng = rng_for(config.seed, idx as u64);
                let t = sample_ordered_ptree(&p, &mut rng).expect("valid pmf");
                let lambda = dfs_annotate(&t, &p, a).expect("valid tree").lambda;
                let mut counts = Vec::with_capacity(draws);
                for _ in 0..draws {
                    counts.push(
                        sample_surplus_pairs(&t, &p, a, &mut rng)
                            .expect("valid tree")
                            .len() as f64,
                    );
                }
                let (mean, var) = critgraph::stats::mean_var(&counts);
                let se_mean = (lambda / draws as f64).sqrt();
                let se_var = ((lambda + 2.0 * lambda * lambda) / draws as f64).sqrt();
                TreeRow {
                    lambda,
                    mean,
                    var,
                    z_mean: (mean - lambda) / se_mean,
                    z_var: (var - lambda) / se_var,
                }
            })
            .collect();

        // Pooled z-scores: individual 3-sigma tests over 100 trees would
        // false-alarm, so the criterion is applied to the aggregate.
        let nf = trees as f64;
        let pooled_z_mean = rows.iter().map(|r| r.z_mean).sum::<f64>() / nf.sqrt();
        let pooled_z_var = rows.iter().map(|r| r.z_var).sum::<f64>() / nf.sqrt();
        let per_tree_outliers = rows
            .iter()
            .filter(|r| r.z_mean.abs() > 3.0 || r.z_var.abs() > 3.0)
            .count();

        let mut report = ExperimentReport::new(self.name());
        report.push(CriterionResult::le(
            "abs_pooled_z_mean",
            pooled_z_mean.abs(),
            config.tol("tol_z", 3.0),
        ));
        report.push(CriterionResult::le(
            "abs_pooled_z_var",
            pooled_z_var.abs(),
            config.tol("tol_z", 3.0),
        ));
        report.stat("pooled_z_mean", pooled_z_mean);
        report.stat("pooled_z_var", pooled_z_var);
        report.stat("per_tree_3sigma_outliers", per_tree_outliers as f64);
        let mut csv = String::from("tree,lambda,mean,var,z_mean,z_var\n");
        for (i, r) in rows.iter().enumerate() {
            csv.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                r.lambda, r.mean, r.var, r.z_mean, r.z_var
            ));
        }
        report.records_csv = csv;
        Ok(report)
    }
}
