//! Exact-law check for the two p-tree samplers against full enumeration.

use std::collections::HashMap;

use anyhow::Result;

use critgraph::ptree::{enumerate_rooted_trees, ptree_birthday, sample_ordered_ptree};
use critgraph::rng::rng_for;
use critgraph::stats::tv_vs_exact;

use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct PtreeLaw;

fn exact_law(m: usize, p: &[f64]) -> HashMap<Vec<usize>, f64> {
    let mut law = HashMap::new();
    for (root, parent) in enumerate_rooted_trees(m) {
        let mut d = vec![0usize; m];
        for v in 0..m {
            if v != root {
                d[parent[v]] += 1;
            }
        }
        let prob: f64 = (0..m).map(|v| p[v].powi(d[v] as i32)).product();
        law.insert(parent, prob);
    }
    let total: f64 = law.values().sum();
    for v in law.values_mut() {
        *v /= total;
    }
    law
}

impl Experiment for PtreeLaw {
    fn name(&self) -> &'static str {
        "ptree-law"
    }

    fn describe(&self) -> &'static str {
        "exploration and birthday samplers vs the enumerated p-tree law (m = 3, 4)"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let samples = 100_000usize;
        let tol = config.tol("tol_tv", 0.02);
        let mut report = ExperimentReport::new(self.name());
        let mut csv = String::from("m,sampler,tv\n");
        for (slot, m) in [3usize, 4].into_iter().enumerate() {
            let p = vec![1.0 / m as f64; m];
            let law = exact_law(m, &p);
            let mut rng = rng_for(config.seed, slot as u64);
            let mut via_exploration: HashMap<Vec<usize>, u64> = HashMap::new();
            let mut via_birthday: HashMap<Vec<usize>, u64> = HashMap::new();
            for _ in 0..samples {
                let t = sample_ordered_ptree(&p, &mut rng)?;
                *via_exploration.entry(t.shape_key()).or_insert(0) += 1;
                let (t, _) = ptree_birthday(&p, 0, &mut rng)?;
                *via_birthday.entry(t.shape_key()).or_insert(0) += 1;
            }
            let tv_expl = tv_vs_exact(&via_exploration, &law);
            let tv_bday = tv_vs_exact(&via_birthday, &law);
            csv.push_str(&format!("{m},exploration,{tv_expl}\n"));
            csv.push_str(&format!("{m},birthday,{tv_bday}\n"));
            report.push(CriterionResult::le(
                &format!("tv_exploration_m{m}"),
                tv_expl,
                tol,
            ));
            report.push(CriterionResult::le(
                &format!("tv_birthday_m{m}"),
                tv_bday,
                tol,
            ));
            report.stat(&format!("tv_exploration_m{m}"), tv_expl);
            report.stat(&format!("tv_birthday_m{m}"), tv_bday);
        }
        report.records_csv = csv;
        Ok(report)
    }
}
