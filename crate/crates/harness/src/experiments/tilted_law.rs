//! Tilted p-tree law: rejection sampler vs the enumerated tilted table, and
//! recovery of the untilted law as the interaction strength vanishes.

use std::collections::HashMap;

use anyhow::Result;

use critgraph::ptree::TiltedPtreeSampler;
use critgraph::rng::rng_for;
use critgraph::stats::tv_vs_exact;

use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct TiltedLaw;

impl Experiment for TiltedLaw {
    fn name(&self) -> &'static str {
        "tilted-law"
    }

    fn describe(&self) -> &'static str {
        "rejection-sampled tilted p-trees vs exact enumeration (m = 3)"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let m = 3usize;
        let a = 1.0;
        let samples = 100_000usize;
        let p = vec![1.0 / m as f64; m];
        let mut report = ExperimentReport::new(self.name());

        // Exact tilted table as the golden reference, keyed by the
        // serialized ordered tree.
        let exact = TiltedPtreeSampler::new_exact(&p, a)?;
        let (trees, probs) = exact.exact_table().expect("enum sampler has a table");
        let key_of = |t: &critgraph::ptree::OrderedTree| -> Vec<u8> {
            let mut buf = Vec::new();
            t.write_text(&mut buf).expect("in-memory write");
            buf
        };
        let mut law: HashMap<Vec<u8>, f64> = HashMap::new();
        for (t, pr) in trees.iter().zip(&probs) {
            *law.entry(key_of(t)).or_insert(0.0) += pr;
        }

        let mut rng = rng_for(config.seed, 0);
        let mut sampler = TiltedPtreeSampler::new_rejection(&p, a, 10_000, &mut rng)?;
        let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
        for _ in 0..samples {
            let t = sampler.sample(&mut rng)?;
            *counts.entry(key_of(&t)).or_insert(0) += 1;
        }
        let tv = tv_vs_exact(&counts, &law);
        report.push(CriterionResult::le("tv_rejection_vs_enum", tv, config.tol("tol_tv", 0.02)));
        report.stat("tv_rejection_vs_enum", tv);
        report.stat("rejection_overflows", sampler.overflows() as f64);
        report.stat(
            "rejection_acceptance_rate",
            sampler.acceptance_rate().unwrap_or(f64::NAN),
        );

        // a -> 0 recovers the untilted law; measured on the exact tables.
        let small = TiltedPtreeSampler::new_exact(&p, 1e-4)?;
        let untilted = TiltedPtreeSampler::new_exact(&p, 0.0)?;
        let (_, probs_small) = small.exact_table().unwrap();
        let (_, probs_zero) = untilted.exact_table().unwrap();
        let tv_small: f64 = probs_small
            .iter()
            .zip(&probs_zero)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        report.push(CriterionResult::le(
            "tv_small_a_vs_untilted",
            tv_small,
            config.tol("tol_small_a", 1e-3),
        ));
        report.stat("tv_small_a_vs_untilted", tv_small);

        report.records_csv = format!(
            "check,value\ntv_rejection_vs_enum,{tv}\ntv_small_a_vs_untilted,{tv_small}\noverflows,{}\n",
            sampler.overflows()
        );
        Ok(report)
    }
}
