//! Size-biased breadth-first exploration of the rank-one graph: emits the
//! breadth-first walk, component masses as excursion lengths, and the
//! sum-of-squares processes.

use std::io::Write;

use rand::Rng;

use crate::error::{param_err, Result};
use crate::graphgen::Component;
use crate::weights::WeightSequence;

/// Fenwick tree over f64 weights supporting prefix sums, point updates and
/// sampling by cumulative weight.
struct WeightFenwick {
    tree: Vec<f64>,
    total: f64,
}

impl WeightFenwick {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0f64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            let mut idx = i + 1;
            while idx <= n {
                tree[idx] += w;
                idx += idx & idx.wrapping_neg();
            }
        }
        Self {
            tree,
            total: weights.iter().sum(),
        }
    }

    fn remove(&mut self, i: usize, w: f64) {
        let n = self.tree.len() - 1;
        let mut idx = i + 1;
        while idx <= n {
            self.tree[idx] -= w;
            idx += idx & idx.wrapping_neg();
        }
        self.total -= w;
    }

    /// Smallest index with prefix sum exceeding `target`.
    fn search(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Fenwick tree over alive flags supporting rank/select.
struct CountFenwick {
    tree: Vec<u32>,
    alive: usize,
}

impl CountFenwick {
    fn new(n: usize) -> Self {
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        Self { tree, alive: n }
    }

    fn remove(&mut self, i: usize) {
        let n = self.tree.len() - 1;
        let mut idx = i + 1;
        while idx <= n {
            self.tree[idx] -= 1;
            idx += idx & idx.wrapping_neg();
        }
        self.alive -= 1;
    }

    /// Index of the `k`-th alive element (1-based `k`).
    fn select(&self, mut k: u32) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] < k {
                k -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos // 0-based element index
    }
}

/// One walk event: the walk value just after `time` (measured in cumulative
/// explored weight).
#[derive(Debug, Clone, Copy)]
pub struct WalkEvent {
    pub time: f64,
    pub value: f64,
    pub component: u32,
}

/// One explored component of the walk.
#[derive(Debug, Clone)]
pub struct TraceComponent {
    /// Range of step indices (into `explored`) belonging to the component.
    pub first_step: usize,
    pub last_step: usize,
    pub mass: f64,
    pub start_time: f64,
    pub end_time: f64,
}

/// Breadth-first walk trace.
#[derive(Debug, Clone)]
pub struct WalkTrace {
    /// Vertices in exploration (size-biased breadth-first) order.
    pub explored: Vec<u32>,
    /// Cumulative explored weight after each step: `T_i`.
    pub step_end: Vec<f64>,
    pub events: Vec<WalkEvent>,
    pub components: Vec<TraceComponent>,
}

impl WalkTrace {
    /// CSV rows `explored_weight,walk_value,component_id`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "explored_weight,walk_value,component_id")?;
        for e in &self.events {
            writeln!(out, "{},{},{}", e.time, e.value, e.component)?;
        }
        Ok(())
    }
}

/// Explore the graph `G(x,t)` in size-biased breadth-first order without
/// materializing it.
///
/// Candidate children are scanned in weight order with geometric skips: the
/// envelope for a block is the connection probability of its first (and
/// heaviest) remaining candidate, so thinning by `q_child / envelope` keeps
/// every marginal exactly `1 - exp(-t x_u x_v)`; removal from the alive set
/// is deferred to the end of the scan so ranks stay stable. Birth times
/// within a step are the exponential clocks conditioned on connection,
/// which fixes the children's order.
pub fn explore<R: Rng>(
    x: &WeightSequence,
    t: f64,
    rng: &mut R,
) -> Result<(WalkTrace, Vec<Component>)> {
    if t <= 0.0 {
        return param_err("t must be positive");
    }
    let xs = x.values();
    let n = xs.len();
    let mut weights = WeightFenwick::new(xs);
    let mut counts = CountFenwick::new(n);
    let mut explored: Vec<u32> = Vec::with_capacity(n);
    let mut step_end: Vec<f64> = Vec::with_capacity(n);
    let mut events: Vec<WalkEvent> = Vec::new();
    let mut components: Vec<TraceComponent> = Vec::new();
    let mut comp_vertices: Vec<Vec<u32>> = Vec::new();

    let mut time = 0.0f64; // cumulative explored weight
    let mut z = 0.0f64; // walk value
    let mut queue: std::collections::VecDeque<u32> = std::collections::VecDeque::new();
    let mut children_buf: Vec<(f64, u32)> = Vec::new();

    while counts.alive > 0 {
        // Size-biased start of a new component.
        let start = weights.search(rng.gen::<f64>() * weights.total);
        weights.remove(start, xs[start]);
        counts.remove(start);
        queue.clear();
        queue.push_back(start as u32);
        let comp_id = components.len() as u32;
        let first_step = explored.len();
        let start_time = time;
        let mut mass = 0.0f64;
        let mut members: Vec<u32> = Vec::new();

        while let Some(u) = queue.pop_front() {
            let xu = xs[u as usize];
            explored.push(u);
            members.push(u);
            mass += xu;

            // Scan alive candidates in weight order with geometric skips.
            children_buf.clear();
            let mut rank_ptr: u32 = 0;
            let alive_now = counts.alive as u32;
            while rank_ptr < alive_now {
                let first_idx = counts.select(rank_ptr + 1);
                let qbar = 1.0 - (-t * xu * xs[first_idx]).exp();
                if qbar <= 0.0 {
                    break;
                }
                let skip = if qbar >= 1.0 {
                    0u64
                } else {
                    (rng.gen::<f64>().ln() / (-qbar).ln_1p()).floor() as u64
                };
                if skip >= (alive_now - rank_ptr) as u64 {
                    break;
                }
                let hit_rank = rank_ptr + skip as u32 + 1;
                let v = counts.select(hit_rank);
                let qv = 1.0 - (-t * xu * xs[v]).exp();
                if rng.gen::<f64>() < qv / qbar {
                    // Birth time: exponential clock conditioned below x_u.
                    let u01: f64 = rng.gen();
                    let eta = -(-u01 * qv).ln_1p() / (t * xs[v]);
                    children_buf.push((eta, v as u32));
                }
                rank_ptr = hit_rank;
            }
            // Deferred removals keep ranks stable during the scan.
            for &(_, v) in &children_buf {
                weights.remove(v as usize, xs[v as usize]);
                counts.remove(v as usize);
            }
            children_buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            let z_step_start = z;
            let mut jump_sum = 0.0;
            for &(eta, v) in &children_buf {
                jump_sum += xs[v as usize];
                events.push(WalkEvent {
                    time: time + eta,
                    value: z_step_start - eta + jump_sum,
                    component: comp_id,
                });
                queue.push_back(v);
            }
            time += xu;
            z = z_step_start - xu + jump_sum;
            step_end.push(time);
            events.push(WalkEvent {
                time,
                value: z,
                component: comp_id,
            });
        }
        components.push(TraceComponent {
            first_step,
            last_step: explored.len() - 1,
            mass,
            start_time,
            end_time: time,
        });
        comp_vertices.push(members);
    }

    let mut comps: Vec<Component> = comp_vertices
        .into_iter()
        .map(|mut vertices| {
            vertices.sort_unstable();
            let mass = vertices.iter().map(|&v| xs[v as usize]).sum();
            Component { vertices, mass }
        })
        .collect();
    comps.sort_by(|a, b| {
        b.mass
            .total_cmp(&a.mass)
            .then_with(|| a.vertices[0].cmp(&b.vertices[0]))
    });
    Ok((
        WalkTrace {
            explored,
            step_end,
            events,
            components,
        },
        comps,
    ))
}

/// Normalized sum-of-squares step functions over explored weight: `S` adds
/// `(x_{v(i)}/sigma_2)^2` at every step end, `R` only for vertices with
/// weight below `epsilon * sigma_2`.
pub fn sum_squares_process(
    trace: &WalkTrace,
    x: &WeightSequence,
    epsilon: f64,
) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let sigma2 = x.sigma(2);
    let xs = x.values();
    let mut s = Vec::with_capacity(trace.explored.len());
    let mut r = Vec::with_capacity(trace.explored.len());
    let mut acc_s = 0.0;
    let mut acc_r = 0.0;
    for (i, &v) in trace.explored.iter().enumerate() {
        let xv = xs[v as usize];
        let term = (xv / sigma2) * (xv / sigma2);
        acc_s += term;
        if xv < sigma2 * epsilon {
            acc_r += term;
        }
        s.push((trace.step_end[i], acc_s));
        r.push((trace.step_end[i], acc_r));
    }
    (s, r)
}

/// Walk values divided by `sigma_2`; event times unchanged.
pub fn rescaled_walk(trace: &WalkTrace, sigma2: f64) -> Result<Vec<(f64, f64)>> {
    if sigma2 <= 0.0 {
        return param_err("sigma2 must be positive");
    }
    Ok(trace
        .events
        .iter()
        .map(|e| (e.time, e.value / sigma2))
        .collect())
}
