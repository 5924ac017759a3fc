//! Rank-one random graph samplers, component decomposition and the
//! connectivity-conditioned rejection sampler.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{param_err, Error, Result};
use crate::weights::WeightSequence;

/// Simple undirected vertex-weighted graph. Edges are stored as `(u, v)`
/// with `u < v`, no self-loops, no duplicates.
#[derive(Debug, Clone)]
pub struct SimpleGraph {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    pub vertex_weights: Vec<f64>,
}

impl SimpleGraph {
    pub fn new(n: usize, mut edges: Vec<(u32, u32)>, vertex_weights: Vec<f64>) -> Result<Self> {
        if vertex_weights.len() != n {
            return param_err("weights length must equal n");
        }
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return param_err("self-loop");
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.1 as usize >= n {
                return param_err("edge endpoint out of range");
            }
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        if edges.len() != before {
            return param_err("duplicate edge");
        }
        Ok(Self {
            n,
            edges,
            vertex_weights,
        })
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.n, &self.edges)
    }

    /// Text serialization: `# n=<n>` header, one `w <i> <value>` line per
    /// vertex, one `u v` line per edge. Vertex ids are 0-based.
    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# n={}", self.n)?;
        for (i, w) in self.vertex_weights.iter().enumerate() {
            writeln!(out, "w {} {}", i, w)?;
        }
        for (u, v) in &self.edges {
            writeln!(out, "{} {}", u, v)?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut weights: Vec<f64> = Vec::new();
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("n=") {
                    n = Some(
                        v.parse()
                            .map_err(|e| Error::Parse(format!("bad header: {e}")))?,
                    );
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().ok_or_else(|| Error::Parse("empty row".into()))?;
            if first == "w" {
                let i: usize = parts
                    .next()
                    .ok_or_else(|| Error::Parse("missing vertex id".into()))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad vertex id: {e}")))?;
                let val: f64 = parts
                    .next()
                    .ok_or_else(|| Error::Parse("missing weight".into()))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad weight: {e}")))?;
                if weights.len() != i {
                    return Err(Error::Parse("weight lines out of order".into()));
                }
                weights.push(val);
            } else {
                let u: u32 = first
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad endpoint: {e}")))?;
                let v: u32 = parts
                    .next()
                    .ok_or_else(|| Error::Parse("missing endpoint".into()))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad endpoint: {e}")))?;
                edges.push((u, v));
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing '# n=' header".into()))?;
        SimpleGraph::new(n, edges, weights)
    }
}

/// Compressed adjacency for BFS work.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<u32>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut deg = vec![0usize; n];
        for &(u, v) in edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; offsets[n]];
        for &(u, v) in edges {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        Self { offsets, neighbors }
    }

    pub fn neighbors_of(&self, v: u32) -> &[u32] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    /// BFS distances from `src`; unreachable vertices get `u32::MAX`.
    /// `dist` and `queue` are caller-owned scratch buffers.
    pub fn bfs(&self, src: u32, dist: &mut [u32], queue: &mut Vec<u32>) {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        queue.clear();
        dist[src as usize] = 0;
        queue.push(src);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            let dv = dist[v as usize];
            for &w in self.neighbors_of(v) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dv + 1;
                    queue.push(w);
                }
            }
        }
    }
}

/// Weighted union-find with path halving.
#[derive(Debug)]
pub(crate) struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = self.parent[x as usize];
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Connected component: sorted member ids and total weight of members.
#[derive(Debug, Clone)]
pub struct Component {
    pub vertices: Vec<u32>,
    pub mass: f64,
}

impl Component {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Sample independent edges with `q_ij = 1 - exp(-t x_i x_j)` over all pairs.
///
/// The weights are descending, so for a fixed row `i` the probability
/// `q_ij` is nonincreasing in `j`. We therefore walk each row with
/// geometric skips under the envelope `qbar = q(x_i, x_last_hit)` and thin
/// each hit by `q_ij / qbar`; every pair is retained with probability
/// exactly `q_ij` because the envelope dominates all later columns until
/// it is refreshed at the next hit. This keeps the cost at
/// O(n + edges + rejected hits) instead of O(n^2).
pub fn sample_mc_graph<R: Rng>(
    x: &WeightSequence,
    t: f64,
    rng: &mut R,
) -> Result<SimpleGraph> {
    if t < 0.0 {
        return param_err(format!("t must be nonnegative, got {t}"));
    }
    let v = x.values();
    let n = v.len();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    if t > 0.0 {
        for i in 0..n.saturating_sub(1) {
            let xi = v[i];
            let mut j = i + 1;
            let mut qbar = 1.0 - (-t * xi * v[j]).exp();
            loop {
                if qbar <= 0.0 {
                    break;
                }
                // Geometric number of envelope failures before the next hit.
                let skip = if qbar >= 1.0 {
                    0
                } else {
                    let u: f64 = rng.gen::<f64>();
                    (u.ln() / (-qbar).ln_1p()).floor() as u64
                };
                if skip as u128 >= (n - j) as u128 {
                    break;
                }
                j += skip as usize;
                let q = 1.0 - (-t * xi * v[j]).exp();
                if rng.gen::<f64>() < q / qbar {
                    edges.push((i as u32, j as u32));
                }
                qbar = q;
                j += 1;
                if j >= n {
                    break;
                }
            }
        }
    }
    SimpleGraph::new(n, edges, v.to_vec())
}

/// Norros-Reittu graph at window parameter `lambda`: edges independent with
/// `q_ij = 1 - exp(-(1 + lambda n^-eta) w_i w_j / ell_n)`.
pub fn sample_nr_graph<R: Rng>(
    w: &WeightSequence,
    lambda: f64,
    tau: f64,
    rng: &mut R,
) -> Result<SimpleGraph> {
    let exps = crate::weights::ExponentSet::new(tau)?;
    let n = w.len() as f64;
    let mult = 1.0 + lambda * n.powf(-exps.eta);
    if mult <= 0.0 {
        return param_err("window multiplier is not positive");
    }
    let t_eff = mult / w.total();
    sample_mc_graph(w, t_eff, rng)
}

/// Connected components sorted by mass descending, ties broken by smallest
/// member id ascending.
pub fn components(g: &SimpleGraph) -> Vec<Component> {
    let mut uf = UnionFind::new(g.n);
    for &(u, v) in &g.edges {
        uf.union(u, v);
    }
    let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for v in 0..g.n as u32 {
        members.entry(uf.find(v)).or_default().push(v);
    }
    let mut comps: Vec<Component> = members
        .into_values()
        .map(|vertices| {
            let mass = vertices
                .iter()
                .map(|&v| g.vertex_weights[v as usize])
                .sum();
            Component { vertices, mass }
        })
        .collect();
    comps.sort_by(|a, b| {
        b.mass
            .total_cmp(&a.mass)
            .then_with(|| a.vertices[0].cmp(&b.vertices[0]))
    });
    comps
}

/// Exact sample from the connectivity-conditioned law on `[m]` with
/// `q_ij = 1 - exp(-a p_i p_j)`: resample the full graph until connected.
/// Returns the graph and the number of attempts used.
pub fn sample_connected_conditioned<R: Rng>(
    p: &[f64],
    a: f64,
    max_attempts: usize,
    rng: &mut R,
) -> Result<(SimpleGraph, usize)> {
    let m = p.len();
    if m == 0 {
        return param_err("pmf must be nonempty");
    }
    if a <= 0.0 {
        return param_err(format!("a must be positive, got {a}"));
    }
    for attempt in 1..=max_attempts.max(1) {
        let mut edges = Vec::new();
        let mut uf = UnionFind::new(m);
        let mut parts = m;
        for i in 0..m {
            for j in (i + 1)..m {
                let q = 1.0 - (-a * p[i] * p[j]).exp();
                if rng.gen::<f64>() < q {
                    edges.push((i as u32, j as u32));
                    if uf.find(i as u32) != uf.find(j as u32) {
                        uf.union(i as u32, j as u32);
                        parts -= 1;
                    }
                }
            }
        }
        if parts == 1 {
            let g = SimpleGraph::new(m, edges, p.to_vec())?;
            return Ok((g, attempt));
        }
    }
    Err(Error::Exhausted(format!(
        "no connected sample in {max_attempts} attempts; acceptance probability below ~{:.2e}",
        1.0 / max_attempts.max(1) as f64
    )))
}

/// Histogram of vertex degrees.
pub fn degree_histogram(g: &SimpleGraph) -> BTreeMap<usize, u64> {
    let mut deg = vec![0usize; g.n];
    for &(u, v) in &g.edges {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    let mut hist = BTreeMap::new();
    for d in deg {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::weights::{critical_iota, power_law_weights};

    #[test]
    fn mc_zero_time_is_empty() {
        let x = WeightSequence::new(vec![1.0; 10]).unwrap();
        let g = sample_mc_graph(&x, 0.0, &mut rng_from_seed(1)).unwrap();
        assert!(g.edges.is_empty());
        assert!(sample_mc_graph(&x, -1.0, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn mc_half_probability_pairs() {
        // t x_i x_j = ln 2 for all pairs: every edge present w.p. 1/2.
        let x = WeightSequence::new(vec![1.0; 4]).unwrap();
        let t = std::f64::consts::LN_2;
        let mut rng = rng_from_seed(5);
        let reps = 40_000usize;
        let mut count = 0usize;
        for _ in 0..reps {
            count += sample_mc_graph(&x, t, &mut rng).unwrap().edges.len();
        }
        let mean_edges = count as f64 / reps as f64;
        // 6 pairs at 1/2 each: expect 3 +- 4 sigma.
        let se = (6.0 * 0.25 / reps as f64).sqrt();
        assert!((mean_edges - 3.0).abs() < 4.0 * se, "mean={mean_edges}");
    }

    #[test]
    fn mc_exactly_one_edge_probability() {
        // n=3 equal weights, q=1/2: P(exactly 1 edge) = 3*(1/2)(1/2)^2 = 3/8.
        let x = WeightSequence::new(vec![1.0; 3]).unwrap();
        let t = std::f64::consts::LN_2;
        let mut rng = rng_from_seed(17);
        let reps = 100_000usize;
        let mut one = 0usize;
        for _ in 0..reps {
            if sample_mc_graph(&x, t, &mut rng).unwrap().edges.len() == 1 {
                one += 1;
            }
        }
        let freq = one as f64 / reps as f64;
        assert!((freq - 0.375).abs() < 0.01, "freq={freq}");
    }

    #[test]
    fn nr_two_vertex_contrived() {
        // w chosen so w_1 w_2 / ell_n = ln 2: edge probability 1/2.
        let w2: f64 = 0.9;
        // Solve w1 * w2 = ln2 * (w1 + w2).
        let l2 = std::f64::consts::LN_2;
        let w1 = l2 * w2 / (w2 - l2);
        let w = WeightSequence::new(vec![w1, w2]).unwrap();
        let mut rng = rng_from_seed(23);
        let reps = 100_000usize;
        let mut hits = 0usize;
        for _ in 0..reps {
            // Any tau in (3,4) works: lambda = 0 makes the window factor 1.
            if !sample_nr_graph(&w, 0.0, 3.5, &mut rng).unwrap().edges.is_empty() {
                hits += 1;
            }
        }
        let freq = hits as f64 / reps as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq={freq}");
    }

    #[test]
    fn nr_edge_marginals_match_mc_marginals() {
        // sample_nr_graph(w, lambda) must agree with
        // sample_mc_graph(nr_to_mc_params(w, lambda)) on edge marginals.
        let n = 64;
        let tau = 3.5;
        let w = power_law_weights(n, tau, critical_iota(tau)).unwrap();
        let lambda = 0.8;
        let (x, t) = crate::weights::nr_to_mc_params(&w, lambda, tau).unwrap();
        let pairs: Vec<(usize, usize)> = (0..20).map(|k| (k % 5, 5 + 2 * k)).collect();
        let reps = 20_000usize;
        let mut rng = rng_from_seed(31);
        let count_pairs = |edges: &[(u32, u32)], hits: &mut [u64]| {
            for (idx, &(a, b)) in pairs.iter().enumerate() {
                let e = (a.min(b) as u32, a.max(b) as u32);
                if edges.binary_search(&e).is_ok() {
                    hits[idx] += 1;
                }
            }
        };
        let mut nr_hits = vec![0u64; pairs.len()];
        let mut mc_hits = vec![0u64; pairs.len()];
        for _ in 0..reps {
            let g = sample_nr_graph(&w, lambda, tau, &mut rng).unwrap();
            count_pairs(&g.edges, &mut nr_hits);
            let g = sample_mc_graph(&x, t, &mut rng).unwrap();
            count_pairs(&g.edges, &mut mc_hits);
        }
        let eta = (tau - 3.0) / (tau - 1.0);
        let mult = 1.0 + lambda * (n as f64).powf(-eta);
        for (idx, &(a, b)) in pairs.iter().enumerate() {
            let q = 1.0 - (-mult * w.values()[a] * w.values()[b] / w.total()).exp();
            let se = (q * (1.0 - q) / reps as f64).sqrt().max(1e-9);
            let fa = nr_hits[idx] as f64 / reps as f64;
            let fb = mc_hits[idx] as f64 / reps as f64;
            assert!((fa - q).abs() < 4.0 * se, "pair {idx}: {fa} vs {q}");
            assert!((fb - q).abs() < 4.0 * se, "pair {idx}: {fb} vs {q}");
        }
    }

    #[test]
    fn lambda_monotonicity_in_edge_count() {
        // Larger lambda gives stochastically more edges; check on means.
        let n = 256;
        let tau = 3.5;
        let w = power_law_weights(n, tau, critical_iota(tau)).unwrap();
        let mut rng = rng_from_seed(37);
        let reps = 2_000;
        let mut mean = |lambda: f64, rng: &mut crate::rng::Rng| {
            let mut tot = 0usize;
            for _ in 0..reps {
                tot += sample_nr_graph(&w, lambda, tau, rng).unwrap().edges.len();
            }
            tot as f64 / reps as f64
        };
        let lo = mean(-2.0, &mut rng);
        let mid = mean(0.0, &mut rng);
        let hi = mean(3.0, &mut rng);
        assert!(lo < mid && mid < hi, "{lo} {mid} {hi}");
    }

    #[test]
    fn components_path_plus_isolate() {
        let g = SimpleGraph::new(4, vec![(0, 1), (1, 2)], vec![1.0; 4]).unwrap();
        let comps = components(&g);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].vertices, vec![0, 1, 2]);
        assert!((comps[0].mass - 3.0).abs() < 1e-12);
        assert_eq!(comps[1].vertices, vec![3]);
    }

    #[test]
    fn components_partition_masses() {
        let tau = 3.5;
        let w = power_law_weights(200, tau, critical_iota(tau)).unwrap();
        let g = sample_nr_graph(&w, 0.0, tau, &mut rng_from_seed(41)).unwrap();
        let comps = components(&g);
        let total: f64 = comps.iter().map(|c| c.mass).sum();
        assert!((total - w.total()).abs() < 1e-9);
        let covered: usize = comps.iter().map(|c| c.len()).sum();
        assert_eq!(covered, g.n);
        // Sorted by mass descending.
        for pair in comps.windows(2) {
            assert!(pair[0].mass >= pair[1].mass);
        }
    }

    #[test]
    fn empty_graph_components_are_singletons() {
        let g = SimpleGraph::new(5, vec![], vec![1.0; 5]).unwrap();
        let comps = components(&g);
        assert_eq!(comps.len(), 5);
        // Equal masses: ties resolved by smallest member id.
        for (i, c) in comps.iter().enumerate() {
            assert_eq!(c.vertices, vec![i as u32]);
        }
    }

    #[test]
    fn conditioned_sampler_tiny_cases() {
        let mut rng = rng_from_seed(43);
        let (g, attempts) =
            sample_connected_conditioned(&[1.0], 1.0, 10, &mut rng).unwrap();
        assert_eq!(g.n, 1);
        assert_eq!(attempts, 1);
        let (g, _) =
            sample_connected_conditioned(&[0.5, 0.5], 4.0, 100_000, &mut rng).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
    }

    #[test]
    fn conditioned_sampler_triangle_probability() {
        // Uniform p on [3], a p_i p_j = ln 2: all 2^3 graphs equally likely,
        // so conditioned on connectivity the triangle has probability 1/4.
        let p = [1.0 / 3.0; 3];
        let a = std::f64::consts::LN_2 * 9.0;
        let mut rng = rng_from_seed(47);
        let reps = 100_000usize;
        let mut triangles = 0usize;
        for _ in 0..reps {
            let (g, _) = sample_connected_conditioned(&p, a, 10_000, &mut rng).unwrap();
            if g.edges.len() == 3 {
                triangles += 1;
            }
        }
        let freq = triangles as f64 / reps as f64;
        assert!((freq - 0.25).abs() < 0.01, "freq={freq}");
    }

    #[test]
    fn degree_histogram_identities() {
        let g = SimpleGraph::new(3, vec![(0, 1), (1, 2), (0, 2)], vec![1.0; 3]).unwrap();
        let h = degree_histogram(&g);
        assert_eq!(h.get(&2), Some(&3));
        let g = SimpleGraph::new(7, vec![], vec![1.0; 7]).unwrap();
        assert_eq!(degree_histogram(&g).get(&0), Some(&7));
        // Handshake identity on a random graph.
        let tau = 3.5;
        let w = power_law_weights(300, tau, critical_iota(tau)).unwrap();
        let g = sample_nr_graph(&w, 0.5, tau, &mut rng_from_seed(53)).unwrap();
        let h = degree_histogram(&g);
        let total: u64 = h.values().sum();
        assert_eq!(total as usize, g.n);
        let stubs: usize = h.iter().map(|(d, c)| d * *c as usize).sum();
        assert_eq!(stubs, 2 * g.edges.len());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = SimpleGraph::new(4, vec![(2, 0), (1, 3)], vec![0.5, 1.5, 2.5, 3.5]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let g2 = SimpleGraph::read_edge_list(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(g2.n, 4);
        assert_eq!(g2.edges, vec![(0, 2), (1, 3)]);
        assert_eq!(g2.vertex_weights, g.vertex_weights);
    }
}
