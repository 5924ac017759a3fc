//! Branching-process checks: the exact total-progeny formula against
//! simulation, and the height-tail exponent of the critical heavy-tailed
//! mixed-Poisson process.

use anyhow::Result;
use rayon::prelude::*;

use critgraph::branching::{
    height_tail, otter_dwass_pmf, poisson_mixture_pmf, simulate_progeny, DiscreteDistribution,
    PoissonMixer, SizeBiasedPareto,
};
use critgraph::rng::rng_for;
use critgraph::stats::linear_fit;

use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct BranchingOracle;

impl Experiment for BranchingOracle {
    fn name(&self) -> &'static str {
        "branching-oracle"
    }

    fn describe(&self) -> &'static str {
        "total-progeny formula vs simulation; critical height-tail exponent"
    }

    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport> {
        let mut report = ExperimentReport::new(self.name());
        let mut csv = String::new();

        // Part A: Poisson(1) offspring (degenerate mixer), exact formula as
        // the oracle for the progeny histogram at 1e6 runs.
        let runs = 1_000_000usize;
        let cells = 20usize;
        let mix = DiscreteDistribution::degenerate(1.0);
        let chunk = 10_000usize;
        let histograms: Vec<Vec<u64>> = (0..runs / chunk)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng_for(config.seed, c as u64);
                let mut hist = vec![0u64; cells + 1];
                for _ in 0..chunk {
                    let (size, _, truncated) =
                        simulate_progeny(&mix, &mix, 100_000, 1_000_000, &mut rng);
                    if !truncated && size <= cells {
                        hist[size] += 1;
                    }
                }
                hist
            })
            .collect();
        let mut hist = vec![0u64; cells + 1];
        for h in histograms {
            for (slot, v) in hist.iter_mut().zip(h) {
                *slot += v;
            }
        }
        let (offspring_pmf, deficit) = poisson_mixture_pmf(&mix, 80)?;
        let mut max_cell_err = 0.0f64;
        csv.push_str("k,empirical,exact\n");
        for k in 1..=cells {
            let (exact, _) = otter_dwass_pmf(&offspring_pmf, k)?;
            let freq = hist[k] as f64 / runs as f64;
            csv.push_str(&format!("{k},{freq},{exact}\n"));
            max_cell_err = max_cell_err.max((freq - exact).abs());
        }
        report.push(CriterionResult::le(
            "max_progeny_cell_error",
            max_cell_err,
            config.tol("tol_cell", 0.005),
        ));
        report.stat("max_progeny_cell_error", max_cell_err);
        report.stat("offspring_pmf_deficit", deficit);

        // Part B: height tail of the critical infinite-variance process;
        // the theory slope is -1/(tau-3) = -2 at tau = 3.5, the criterion
        // allows finite-size slack down to -1.6. The mixer must be the
        // continuous size-biased law: any finite atom grid truncates the
        // tail and caps the offspring variance, flattening the slope to -1.
        let mixer = SizeBiasedPareto::new(config.tau, config.iota_value())?;
        debug_assert!((mixer.mean() - 1.0).abs() < 1e-9);
        let grid = [10usize, 20, 40, 80, 160];
        let tail_runs = 1_000_000usize;
        let per_chunk = tail_runs / 50;
        let partials: Vec<Vec<u64>> = (0..50usize)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng_for(config.seed ^ 0x7a11, c as u64);
                let rows = height_tail(&mixer, &grid, per_chunk, &mut rng);
                rows.iter()
                    .map(|&(_, p, _)| (p * per_chunk as f64).round() as u64)
                    .collect()
            })
            .collect();
        let mut reached = vec![0u64; grid.len()];
        for p in partials {
            for (slot, v) in reached.iter_mut().zip(p) {
                *slot += v;
            }
        }
        csv.push_str("m,p_height_ge_m\n");
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (&m, &r) in grid.iter().zip(&reached) {
            let p = r as f64 / tail_runs as f64;
            csv.push_str(&format!("{m},{p}\n"));
            if p > 0.0 {
                xs.push((m as f64).ln());
                ys.push(p.ln());
            }
        }
        let (slope, _, stderr) = linear_fit(&xs, &ys);
        report.push(CriterionResult::le(
            "height_tail_slope",
            slope,
            config.tol("tol_tail_slope", -1.6),
        ));
        report.stat("height_tail_slope", slope);
        report.stat("height_tail_slope_stderr", stderr);
        report.stat("theory_slope", -1.0 / (config.tau - 3.0));
        report.records_csv = csv;
        Ok(report)
    }
}
