//! Named experiments behind a common trait, selected at runtime by the CLI
//! and the acceptance suite. Every scaling-law or law-identity check maps
//! to exactly one experiment name.

use anyhow::Result;

use crate::config::ExperimentConfig;
use crate::report::ExperimentReport;

mod branching_oracle;
mod construction_equivalence;
mod degree_law;
mod dimension;
mod distance_scaling;
mod excursion_vs_mass;
mod levy_unit;
mod metric_kernel;
mod ptree_law;
mod size_scaling;
mod surplus_poisson;
mod tilted_law;

/// A runnable experiment: pure function of the configuration (all
/// randomness is derived from `config.seed` by replica splitting, so the
/// report is independent of thread count).
pub trait Experiment: Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn run(&self, config: &ExperimentConfig) -> Result<ExperimentReport>;
}

/// All registered experiments.
pub fn registry() -> Vec<Box<dyn Experiment>> {
    vec![
        Box::new(ptree_law::PtreeLaw),
        Box::new(tilted_law::TiltedLaw),
        Box::new(construction_equivalence::ConstructionEquivalence),
        Box::new(surplus_poisson::SurplusPoisson),
        Box::new(excursion_vs_mass::ExcursionVsMass),
        Box::new(size_scaling::SizeScaling),
        Box::new(distance_scaling::DistanceScaling),
        Box::new(dimension::Dimension),
        Box::new(degree_law::DegreeLaw),
        Box::new(branching_oracle::BranchingOracle),
        Box::new(metric_kernel::MetricKernel),
        Box::new(levy_unit::LevyUnit),
    ]
}

pub fn find_experiment(name: &str) -> Option<Box<dyn Experiment>> {
    registry().into_iter().find(|e| e.name() == name)
}

pub(crate) mod util {
    use critgraph::graphgen::{components, sample_nr_graph, Component, SimpleGraph};
    use critgraph::rng::Rng;
    use critgraph::weights::{power_law_weights, WeightSequence};

    use crate::config::ExperimentConfig;

    pub fn weights_for(cfg: &ExperimentConfig, n: usize) -> WeightSequence {
        power_law_weights(n, cfg.tau, cfg.iota_value()).expect("validated parameters")
    }

    pub fn nr_graph(cfg: &ExperimentConfig, n: usize, rng: &mut Rng) -> SimpleGraph {
        let w = weights_for(cfg, n);
        sample_nr_graph(&w, cfg.lambda, cfg.tau, rng).expect("validated parameters")
    }

    /// Largest component by vertex count (the scaling laws count vertices).
    pub fn largest_by_size(g: &SimpleGraph) -> Component {
        components(g)
            .into_iter()
            .max_by(|a, b| {
                a.len()
                    .cmp(&b.len())
                    .then_with(|| b.vertices[0].cmp(&a.vertices[0]))
            })
            .expect("graph has at least one component")
    }

    /// Edge-set bitmask over the pairs of a small labelled graph; a stable
    /// key for distribution comparisons.
    pub fn edge_bitmask(g: &SimpleGraph) -> u64 {
        let n = g.n as u32;
        let mut mask = 0u64;
        for &(u, v) in &g.edges {
            let mut idx = 0u32;
            let mut found = u32::MAX;
            for i in 0..n {
                for j in (i + 1)..n {
                    if (i, j) == (u, v) {
                        found = idx;
                    }
                    idx += 1;
                }
            }
            mask |= 1 << found;
        }
        mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_unique_and_complete() {
        let names: Vec<&str> = registry().iter().map(|e| e.name()).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        for required in [
            "size-scaling",
            "distance-scaling",
            "dimension",
            "excursion-vs-mass",
            "construction-equivalence",
            "degree-law",
            "surplus-poisson",
            "levy-unit",
            "ptree-law",
            "tilted-law",
            "branching-oracle",
            "metric-kernel",
        ] {
            assert!(names.contains(&required), "missing {required}");
            assert!(find_experiment(required).is_some());
        }
        assert!(find_experiment("nope").is_none());
    }
}
