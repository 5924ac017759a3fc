//! Event-exact path kernel checks: single-jump closed forms, reflected
//! nonnegativity en masse, and the linear lower-tail bound of the thinned
//! process's hitting time.

use anyhow::Result;
use rayon::prelude::*;

use critgraph::levy::{
    build_levy_path, component_limit_params, excursions, nr_limit_constants, reflect,
    ThinnedLevySampler,
};
use critgraph::rng::rng_for;
use critgraph::weights::EntranceBoundary;

use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct LevyUnit;

impl Experiment for LevyUnit {
    fn name(&self) -> &'static str {
        "levy-unit"
    }

    fn describe(&self) -> &'static str {
        "single-jump closed forms, reflected nonnegativity, thinned hitting tail"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let mut report = ExperimentReport::new(self.name());
        let mut csv = String::from("check,value\n");

        // Single-jump closed forms, exact to 1e-12: excursion length 1/c_1,
        // theta = (1), gamma_bar = 1, Gamma = 1/c_1^2.
        let c1 = 0.5f64;
        let c = EntranceBoundary::from_values(vec![c1])?;
        let mut worst = 0.0f64;
        for r in 0..200u64 {
            let mut rng = rng_for(config.seed, r);
            let path = build_levy_path(&c, 0.0, 10_000.0, &mut rng)?;
            let set = excursions(&reflect(&path));
            let exc = set.largest_complete().expect("jump is within horizon");
            let (gamma_bar, theta, gamma) = component_limit_params(exc, &c)?;
            worst = worst
                .max((exc.length - 1.0 / c1).abs())
                .max((gamma_bar - 1.0).abs())
                .max((theta.values()[0] - 1.0).abs())
                .max((gamma - 1.0 / (c1 * c1)).abs());
        }
        report.push(CriterionResult::le("single_jump_closed_form_error", worst, 1e-12));
        csv.push_str(&format!("single_jump_closed_form_error,{worst}\n"));

        // Reflected nonnegativity: 1e3 paths x 1e3 query times.
        let boundary = critgraph::weights::entrance_boundary(
            config.alpha_value(),
            config.tau,
            1_000,
        )?;
        let neg_found: u64 = (0..1_000u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_for(config.seed ^ 0xab, r);
                let p = build_levy_path(&boundary, config.lambda - 0.5, 8.0, &mut rng)
                    .expect("valid parameters");
                let refl = reflect(&p);
                let mut bad = 0u64;
                for k in 0..1_000 {
                    let s = 8.0 * (k as f64 + 0.5) / 1_000.0;
                    if refl.value(s) < 0.0 {
                        bad += 1;
                    }
                }
                bad
            })
            .sum();
        report.push(CriterionResult::le(
            "reflected_negative_values",
            neg_found as f64,
            0.0,
        ));
        csv.push_str(&format!("reflected_negative_values,{neg_found}\n"));

        // Thinned hitting-time lower tail: P(H <= s)/s bounded over the
        // grid, i.e. no blow-up at small s.
        let iota = config.iota_value();
        let c_f = iota.powf(config.tau - 1.0);
        let mean_w = iota * (config.tau - 1.0) / (config.tau - 2.0);
        let nr = nr_limit_constants(config.tau, c_f, mean_w, config.lambda, 16)?;
        let a = c_f.powf(1.0 / (config.tau - 1.0)) / mean_w;
        let b = c_f.powf(1.0 / (config.tau - 1.0)); // i = 1
        let c_const = config.lambda + nr.zeta - a * b;
        let grid = [0.01f64, 0.02, 0.05, 0.1, 0.2];
        let paths = 100_000usize;
        let chunk = 1_000usize;
        let sampler =
            ThinnedLevySampler::new(a, b, c_const, config.tau, config.boundary_len, 0.5)?;
        let hits: Vec<u64> = (0..paths / chunk)
            .into_par_iter()
            .map(|cidx| {
                let mut rng = rng_for(config.seed ^ 0x717, cidx as u64);
                let mut counts = vec![0u64; grid.len()];
                for _ in 0..chunk {
                    let (_, hit) = sampler.sample(1, &mut rng);
                    if let Some(h) = hit {
                        for (i, &s) in grid.iter().enumerate() {
                            if h <= s {
                                counts[i] += 1;
                            }
                        }
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; grid.len()],
                |mut acc, c| {
                    for (a, b) in acc.iter_mut().zip(c) {
                        *a += b;
                    }
                    acc
                },
            );
        csv.push_str("s,p_hit_le_s,ratio\n");
        let mut max_ratio = 0.0f64;
        let mut ratios = Vec::new();
        for (&s, &h) in grid.iter().zip(&hits) {
            let p = h as f64 / paths as f64;
            let ratio = p / s;
            ratios.push(ratio);
            max_ratio = max_ratio.max(ratio);
            csv.push_str(&format!("{s},{p},{ratio}\n"));
        }
        // Bounded ratio: pinned with margin from the theory constant scale;
        // plus no blow-up at the small end relative to the large end.
        report.push(CriterionResult::le(
            "max_hit_ratio",
            max_ratio,
            config.tol("tol_hit_ratio", 10.0),
        ));
        let blowup = ratios[0] / ratios.last().unwrap().max(1e-9);
        report.push(CriterionResult::le(
            "small_s_blowup_factor",
            blowup,
            config.tol("tol_blowup", 3.0),
        ));
        report.stat("max_hit_ratio", max_ratio);
        report.stat("small_s_blowup_factor", blowup);
        report.stat("zeta", nr.zeta);
        report.records_csv = csv;
        Ok(report)
    }
}
