//! Typical-distance scaling: distances between measure-sampled points of
//! the largest component grow like n^eta with eta = (tau-3)/(tau-1).

use anyhow::Result;
use rayon::prelude::*;

use critgraph::graphgen::{Component, SimpleGraph};
use critgraph::rng::{rng_for, Rng};
use critgraph::stats::{linear_fit, median};
use critgraph::weights::ExponentSet;

use super::size_scaling::SWEEP;
use super::util::{largest_by_size, nr_graph};
use super::{Experiment, ExperimentConfig, ExperimentReport};
use crate::report::CriterionResult;

pub struct DistanceScaling;

/// Distances between measure-sampled pairs of the component, via one BFS
/// per source.
pub(super) fn sample_component_distances(
    g: &SimpleGraph,
    comp: &Component,
    sources: usize,
    targets_per_source: usize,
    rng: &mut Rng,
) -> Vec<f64> {
    use rand::Rng as _;
    let weights: Vec<f64> = comp
        .vertices
        .iter()
        .map(|&v| g.vertex_weights[v as usize])
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cdf.push(acc);
    }
    let sample_vertex = |rng: &mut Rng| -> u32 {
        let u: f64 = rng.gen::<f64>() * total;
        comp.vertices[cdf.partition_point(|&c| c < u).min(comp.len() - 1)]
    };
    let adj = g.adjacency();
    let mut dist = vec![u32::MAX; g.n];
    let mut queue = Vec::new();
    let mut out = Vec::with_capacity(sources * targets_per_source);
    for _ in 0..sources {
        let src = sample_vertex(rng);
        adj.bfs(src, &mut dist, &mut queue);
        for _ in 0..targets_per_source {
            let dst = sample_vertex(rng);
            debug_assert!(dist[dst as usize] != u32::MAX);
            out.push(dist[dst as usize] as f64);
        }
    }
    out
}

impl Experiment for DistanceScaling {
    fn name(&self) -> &'static str {
        "distance-scaling"
    }

    fn describe(&self) -> &'static str {
        "slope of log median typical distance in C_1 against log n"
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
        let mut csv = String::from("n,replica,median_typical_distance\n");
        for (slot, &n) in sweep.iter().enumerate() {
            let per_replica: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng =
                        rng_for(config.seed ^ 0xd15c, (slot * replicas + r) as u64);
                    let g = nr_graph(config, n, &mut rng);
                    let comp = largest_by_size(&g);
                    let d = sample_component_distances(&g, &comp, 4, 6, &mut rng);
                    median(&d)
                })
                .collect();
            for (r, d) in per_replica.iter().enumerate() {
                csv.push_str(&format!("{n},{r},{d}\n"));
            }
            medians.push(median(&per_replica));
        }
        let xs: Vec<f64> = sweep.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = medians.iter().map(|m| m.max(1e-9).ln()).collect();
        let (slope, _, stderr) = linear_fit(&xs, &ys);

        let tol = config.tol("tol_slope", 0.1);
        let mut report = ExperimentReport::new(self.name());
        report.push(CriterionResult::in_range(
            "distance_slope",
            slope,
            exps.eta - tol,
            exps.eta + tol,
        ));
        report.stat("distance_slope", slope);
        report.stat("distance_slope_stderr", stderr);
        report.stat("eta_target", exps.eta);
        for (n, m) in sweep.iter().zip(&medians) {
            report.stat(&format!("median_distance_n{n}"), *m);
        }
        report.records_csv = csv;
        Ok(report)
    }
}
