//! Stick-breaking approximation of inhomogeneous continuum random trees,
//! reduced spanning trees with root-to-leaf measures, p-tree surrogates and
//! the tilted glued limit spaces.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{param_err, Result};
use crate::graphgen::components;
use crate::levy::{build_levy_path, component_limit_params, excursions, reflect};
use crate::metric::{graph_metric_space_exact, graph_metric_space_landmarks, MeasuredMetricSpace};
use crate::ptree::{
    build_modified_graph, sample_ordered_ptree, OrderedTree, TiltedPtreeSampler,
};
use crate::rng::keyed_uniform;
use crate::weights::EntranceBoundary;

/// Descending positive hub rates; `normalized` when the square sum is 1.
#[derive(Debug, Clone)]
pub struct ThetaSequence {
    theta: Vec<f64>,
    normalized: bool,
}

impl ThetaSequence {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return param_err("theta must be nonempty");
        }
        for w in theta.windows(2) {
            if !(w[0] >= w[1]) {
                return param_err("theta must be descending");
            }
        }
        if *theta.last().unwrap() <= 0.0 {
            return param_err("theta entries must be positive");
        }
        let s2: f64 = theta.iter().map(|t| t * t).sum();
        Ok(Self {
            normalized: (s2 - 1.0).abs() < 1e-10,
            theta,
        })
    }

    /// Rescale so the square sum is exactly 1.
    pub fn normalize(mut self) -> Self {
        let s2: f64 = self.theta.iter().map(|t| t * t).sum();
        let root = s2.sqrt();
        for t in self.theta.iter_mut() {
            *t /= root;
        }
        self.normalized = true;
        self
    }

    /// Normalized truncation of an entrance boundary to its first `k` terms.
    pub fn from_entrance(c: &EntranceBoundary, k: usize) -> Result<Self> {
        if k == 0 || k > c.len() {
            return param_err("truncation out of range");
        }
        Ok(Self::new(c.values()[..k].to_vec())?.normalize())
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn square_sum(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }
}

/// One branch of the stick-breaking construction. Branch `k >= 1` covers the
/// tape interval `(start, end]` and hangs at tape position `attach_pos`
/// inside an earlier segment; segment 0 covers `[0, end]` and carries the
/// root at position 0.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub attach_seg: usize,
    pub attach_pos: f64,
    /// Hub whose joinpoint this segment attaches at (`usize::MAX` for the
    /// root segment).
    pub hub: usize,
    /// 1-based branch counter at that hub; subtree index 0 is the hub's
    /// continuation within its host segment.
    pub branch_idx: u64,
}

/// Truncated stick-breaking tree built from superposed Poisson processes of
/// rates `theta_i` on `[0, horizon]`. The first point of process `i` is hub
/// `i`'s joinpoint, the remaining points are cutpoints.
#[derive(Debug, Clone)]
pub struct StickBreakTree {
    theta: Vec<f64>,
    seed: u64,
    horizon: f64,
    pub segments: Vec<Segment>,
    /// Cutpoints in increasing order; cutpoint `k` (0-based) is the tip of
    /// segment `k` and the start of segment `k+1`.
    pub cutpoints: Vec<f64>,
    /// Joinpoint position and host segment per hub, when the joinpoint
    /// landed inside the horizon.
    pub hub_join: Vec<Option<(f64, usize)>>,
    /// Joinpoints contained in each segment, sorted by position.
    hubs_in_seg: Vec<Vec<(f64, usize)>>,
}

/// An atom of a root-to-leaf measure: a hub at a given distance from the
/// root carrying the stated mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAtom {
    pub distance_from_root: f64,
    pub hub: usize,
    pub mass: f64,
}

#[derive(Debug, Clone)]
struct ChainElem {
    seg: usize,
    entry: f64,
    /// Path length from the query point to `entry`.
    cum: f64,
}

impl StickBreakTree {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.end - s.start).sum()
    }

    pub fn n_cutpoints(&self) -> usize {
        self.cutpoints.len()
    }

    /// Uniform order mark of subtree `j` at hub `i` (0 = continuation,
    /// k >= 1 = k-th attached branch), generated lazily from the tree seed.
    pub fn order_mark(&self, hub: usize, subtree: u64) -> f64 {
        keyed_uniform(self.seed, hub as u64, subtree)
    }

    fn seg_of(&self, pos: f64) -> usize {
        self.cutpoints.partition_point(|&c| c < pos)
    }

    fn chain(&self, pos: f64) -> Vec<ChainElem> {
        let mut out = Vec::new();
        let mut seg = self.seg_of(pos);
        let mut entry = pos;
        let mut cum = 0.0f64;
        loop {
            out.push(ChainElem { seg, entry, cum });
            if seg == 0 {
                break;
            }
            let s = &self.segments[seg];
            cum += entry - s.start;
            entry = s.attach_pos;
            seg = s.attach_seg;
        }
        out
    }

    /// Tree distance between two tape positions.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let cx = self.chain(x);
        let cy = self.chain(y);
        use std::collections::HashMap;
        let mut by_seg: HashMap<usize, &ChainElem> = HashMap::new();
        for e in &cy {
            by_seg.insert(e.seg, e);
        }
        for ex in &cx {
            if let Some(ey) = by_seg.get(&ex.seg) {
                let meet = ex.entry.min(ey.entry);
                return ex.cum + (ex.entry - meet) + ey.cum + (ey.entry - meet);
            }
        }
        unreachable!("all chains share the root segment");
    }

    /// Truncated right-mass value at a point together with the hub atoms of
    /// the root-to-point measure (unnormalized masses `theta_i * U`).
    fn right_mass_atoms(&self, pos: f64) -> (f64, Vec<PathAtom>, f64) {
        let chain = self.chain(pos);
        let last = chain.last().unwrap();
        let total_len = last.cum + last.entry; // walk segment 0 down to the root
        let mut atoms = Vec::new();
        for (k, elem) in chain.iter().enumerate() {
            // Hubs whose joinpoints lie strictly inside the traversed part
            // of this segment: the point sits in their continuation subtree.
            for &(jp, hub) in &self.hubs_in_seg[elem.seg] {
                if jp > self.segments[elem.seg].start && jp < elem.entry {
                    let from_leaf = elem.cum + (elem.entry - jp);
                    atoms.push(PathAtom {
                        distance_from_root: total_len - from_leaf,
                        hub,
                        mass: self.theta[hub] * self.order_mark(hub, 0),
                    });
                }
            }
            // Transition through the hub this segment hangs at.
            if elem.seg != 0 {
                let s = &self.segments[elem.seg];
                let from_leaf = chain[k + 1].cum;
                atoms.push(PathAtom {
                    distance_from_root: total_len - from_leaf,
                    hub: s.hub,
                    mass: self.theta[s.hub] * self.order_mark(s.hub, s.branch_idx),
                });
            }
        }
        let d_a: f64 = atoms.iter().map(|a| a.mass).sum();
        (d_a, atoms, total_len)
    }

    /// Right-mass value `dA` at a sampled leaf, truncated to the simulated
    /// hubs, plus the probability measure it induces on the path hubs.
    pub fn leaf_value_and_measure(&self, leaf_pos: f64) -> (f64, Vec<PathAtom>) {
        let (d_a, mut atoms, _) = self.right_mass_atoms(leaf_pos);
        if d_a > 0.0 {
            for a in atoms.iter_mut() {
                a.mass /= d_a;
            }
        }
        (d_a, atoms)
    }

    /// Segment CSV: `index,length,attach_segment,attach_offset,hub`.
    /// The root segment reports attach fields of -1/0.
    pub fn write_segments_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "index,length,attach_segment,attach_offset,hub")?;
        for (i, s) in self.segments.iter().enumerate() {
            if i == 0 {
                writeln!(out, "0,{},-1,0,-1", s.end - s.start)?;
            } else {
                let host = &self.segments[s.attach_seg];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    i,
                    s.end - s.start,
                    s.attach_seg,
                    s.attach_pos - host.start,
                    s.hub
                )?;
            }
        }
        Ok(())
    }
}

/// Run the stick-breaking construction to the given horizon.
pub fn sample_icrt(theta: &ThetaSequence, horizon: f64, seed: u64) -> Result<StickBreakTree> {
    if !theta.is_normalized() {
        return param_err("theta must be normalized");
    }
    if horizon <= 0.0 {
        return param_err("horizon must be positive");
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    let k = theta.len();
    let mut join: Vec<Option<f64>> = vec![None; k];
    // (cutpoint position, owning hub), later sorted by position.
    let mut cuts: Vec<(f64, usize)> = Vec::new();
    for (i, &rate) in theta.values().iter().enumerate() {
        let exp = Exp::new(rate)
            .map_err(|e| crate::error::Error::Parameter(format!("bad rate: {e}")))?;
        let mut t = exp.sample(&mut rng);
        if t > horizon {
            continue;
        }
        join[i] = Some(t);
        loop {
            t += exp.sample(&mut rng);
            if t > horizon {
                break;
            }
            cuts.push((t, i));
        }
    }
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    cuts.dedup_by(|a, b| a.0 == b.0);

    let cutpoints: Vec<f64> = cuts.iter().map(|&(t, _)| t).collect();
    let seg_of = |pos: f64| cutpoints.partition_point(|&c| c < pos);

    let mut segments = Vec::with_capacity(cuts.len() + 1);
    segments.push(Segment {
        start: 0.0,
        end: if cuts.is_empty() { horizon } else { cuts[0].0 },
        attach_seg: usize::MAX,
        attach_pos: 0.0,
        hub: usize::MAX,
        branch_idx: 0,
    });
    let mut branch_count = vec![0u64; k];
    for (idx, &(cut, hub)) in cuts.iter().enumerate() {
        let end = if idx + 1 < cuts.len() {
            cuts[idx + 1].0
        } else {
            horizon
        };
        // The joinpoint of `hub` exists because the cutpoint is a later
        // point of the same Poisson process.
        let jp = join[hub].expect("cutpoint implies joinpoint");
        branch_count[hub] += 1;
        segments.push(Segment {
            start: cut,
            end,
            attach_seg: seg_of(jp),
            attach_pos: jp,
            hub,
            branch_idx: branch_count[hub],
        });
    }
    let mut hubs_in_seg = vec![Vec::new(); segments.len()];
    let mut hub_join = vec![None; k];
    for (i, j) in join.iter().enumerate() {
        if let Some(jp) = *j {
            let s = seg_of(jp);
            hubs_in_seg[s].push((jp, i));
            hub_join[i] = Some((jp, s));
        }
    }
    for v in hubs_in_seg.iter_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    // Attachments must reference strictly earlier segments.
    for (i, s) in segments.iter().enumerate().skip(1) {
        debug_assert!(s.attach_seg < i);
    }
    Ok(StickBreakTree {
        theta: theta.values().to_vec(),
        seed,
        horizon,
        segments,
        cutpoints,
        hub_join,
        hubs_in_seg,
    })
}

/// Node of a reduced spanning tree.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Root,
    /// 1-based sampled-leaf label.
    Leaf(usize),
    /// Hub index (0-based) retained because it is below the label cutoff.
    Hub(usize),
    Internal,
}

#[derive(Debug, Clone)]
pub struct ReducedNode {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    /// Length of the edge to the parent (0 for the root).
    pub edge_len: f64,
}

/// Subtree spanned by the root and the first `J` sampled leaves, with leaf
/// values and root-to-leaf hub measures.
#[derive(Debug, Clone)]
pub struct ReducedTree {
    pub nodes: Vec<ReducedNode>,
    /// `dA` value per leaf (index j-1 for leaf j+).
    pub leaf_values: Vec<f64>,
    /// Probability measure on the root-to-leaf path, per leaf.
    pub leaf_measures: Vec<Vec<PathAtom>>,
}

impl ReducedTree {
    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf(_)))
            .count()
    }
}

/// Build the reduced tree `r_{IJ}`: hubs with index < `i_max` keep their
/// labels, the leaves are the first `j_leaves` cutpoints.
pub fn reduced_tree(t: &StickBreakTree, i_max: usize, j_leaves: usize) -> Result<ReducedTree> {
    if j_leaves == 0 || j_leaves > t.cutpoints.len() {
        return param_err(format!(
            "requested {j_leaves} leaves but only {} cutpoints sampled",
            t.cutpoints.len()
        ));
    }
    use std::collections::BTreeMap;
    // Stations per segment: tape position -> node payload.
    #[derive(Clone, Copy, PartialEq)]
    enum Station {
        Root,
        Leaf(usize),
        Attach(usize), // hub id
    }
    let mut stations: BTreeMap<usize, BTreeMap<u64, (f64, Station)>> = BTreeMap::new();
    let key = |x: f64| x.to_bits();
    stations
        .entry(0)
        .or_default()
        .insert(key(0.0), (0.0, Station::Root));
    let mut leaf_values = Vec::with_capacity(j_leaves);
    let mut leaf_measures = Vec::with_capacity(j_leaves);
    for j in 1..=j_leaves {
        let pos = t.cutpoints[j - 1];
        let chain = t.chain(pos);
        stations
            .entry(chain[0].seg)
            .or_default()
            .insert(key(chain[0].entry), (chain[0].entry, Station::Leaf(j)));
        for elem in &chain[1..] {
            // This entry is the attach position of the previously exited
            // segment, i.e. a joinpoint of some hub.
            let hub = chain
                .iter()
                .find(|e| {
                    e.seg != elem.seg
                        && t.segments[e.seg].attach_seg == elem.seg
                        && t.segments[e.seg].attach_pos == elem.entry
                })
                .map(|e| t.segments[e.seg].hub)
                .unwrap_or(usize::MAX);
            stations
                .entry(elem.seg)
                .or_default()
                .entry(key(elem.entry))
                .or_insert((elem.entry, Station::Attach(hub)));
        }
        let (value, atoms) = t.leaf_value_and_measure(pos);
        leaf_values.push(value);
        leaf_measures.push(atoms);
    }
    // Wire stations into a tree: consecutive stations within a segment,
    // and the lowest station of a segment to the attach station.
    let mut nodes: Vec<ReducedNode> = Vec::new();
    let mut ids: BTreeMap<(usize, u64), usize> = BTreeMap::new();
    for (&seg, m) in &stations {
        for (&pk, &(_, st)) in m.iter() {
            let kind = match st {
                Station::Root => NodeKind::Root,
                Station::Leaf(j) => NodeKind::Leaf(j),
                Station::Attach(hub) => {
                    if hub < i_max {
                        NodeKind::Hub(hub)
                    } else {
                        NodeKind::Internal
                    }
                }
            };
            ids.insert((seg, pk), nodes.len());
            nodes.push(ReducedNode {
                kind,
                parent: None,
                edge_len: 0.0,
            });
        }
    }
    for (&seg, m) in &stations {
        let entries: Vec<(u64, f64)> = m.iter().map(|(&k, &(p, _))| (k, p)).collect();
        for w in entries.windows(2) {
            let lo = ids[&(seg, w[0].0)];
            let hi = ids[&(seg, w[1].0)];
            nodes[hi].parent = Some(lo);
            nodes[hi].edge_len = w[1].1 - w[0].1;
        }
        if seg != 0 {
            let s = &t.segments[seg];
            let first = ids[&(seg, entries[0].0)];
            let parent = ids[&(s.attach_seg, key(s.attach_pos))];
            nodes[first].parent = Some(parent);
            nodes[first].edge_len = entries[0].1 - s.start;
        }
    }
    // Contract unlabeled degree-2 internal nodes.
    let mut child_count = vec![0usize; nodes.len()];
    for n in &nodes {
        if let Some(p) = n.parent {
            child_count[p] += 1;
        }
    }
    let mut keep: Vec<bool> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| !(matches!(n.kind, NodeKind::Internal) && child_count[i] == 1))
        .collect();
    keep[0] = true;
    // Re-route parents through dropped nodes, accumulating lengths.
    let resolve = |mut v: usize, keep: &[bool], nodes: &[ReducedNode]| -> (usize, f64) {
        let mut extra = 0.0;
        while !keep[v] {
            extra += nodes[v].edge_len;
            v = nodes[v].parent.expect("dropped node has a parent");
        }
        (v, extra)
    };
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut out_nodes: Vec<ReducedNode> = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        if keep[i] {
            remap[i] = out_nodes.len();
            out_nodes.push(n.clone());
        }
    }
    for (i, n) in nodes.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        let ni = remap[i];
        match n.parent {
            None => {
                out_nodes[ni].parent = None;
            }
            Some(p) => {
                let (anc, extra) = resolve(p, &keep, &nodes);
                out_nodes[ni].parent = Some(remap[anc]);
                out_nodes[ni].edge_len = n.edge_len + extra;
            }
        }
    }
    Ok(ReducedTree {
        nodes: out_nodes,
        leaf_values,
        leaf_measures,
    })
}

/// Surrogate pmf on `[m]` whose first `K` coordinates mirror `theta` after
/// normalization by `sigma(p)`: `p_i = s theta_i` for hubs and a uniform
/// filler on the remaining `m - K` vertices.
///
/// When the truncated square sum is below 1 the scale `s` solves
/// `sigma(p) = s` exactly, making the hub ratios exact. At square sum 1 the
/// scale is taken as `(m-K)^{-1/4}` (capped so the filler stays positive):
/// the filler's share of the square sum then vanishes like `(m-K)^{-1/2}`,
/// so the ratios still converge to `theta` while `sigma(p) -> 0`.
pub fn surrogate_pmf(theta: &[f64], m: usize) -> Result<Vec<f64>> {
    let k = theta.len();
    if m <= k {
        return param_err("need m > K surrogate vertices");
    }
    if k == 0 {
        return Ok(vec![1.0 / m as f64; m]);
    }
    let s2: f64 = theta.iter().map(|t| t * t).sum();
    let t1: f64 = theta.iter().sum();
    if s2 > 1.0 + 1e-9 {
        return param_err("theta square sum exceeds 1; not a valid truncation");
    }
    let fill = (m - k) as f64;
    let (scale, filler) = if s2 < 1.0 - 1e-9 {
        let d = ((1.0 - s2) * fill).sqrt();
        let s = 1.0 / (t1 + d);
        (s, (1.0 - s * t1) / fill)
    } else {
        let s = fill.powf(-0.25).min(0.99 / t1);
        (s, (1.0 - s * t1) / fill)
    };
    if filler <= 0.0 || scale <= 0.0 {
        return param_err("theta mass too concentrated for chosen m");
    }
    let mut p: Vec<f64> = theta.iter().map(|&t| scale * t).collect();
    p.extend(std::iter::repeat(filler).take(m - k));
    let total: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= total;
    }
    Ok(p)
}

/// `sqrt(sum p_i^2)`.
pub fn sigma_p(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finite p-tree surrogate of the ICRT: untilted ordered p-tree under the
/// surrogate pmf.
pub fn icrt_via_ptree<R: Rng>(
    theta: &ThetaSequence,
    m: usize,
    rng: &mut R,
) -> Result<OrderedTree> {
    let p = surrogate_pmf(theta.values(), m)?;
    sample_ordered_ptree(&p, rng)
}

const EXACT_SPACE_CAP: usize = 2_000;
const LANDMARK_COUNT: usize = 512;

/// Glued limit-space approximation at scale `m`: tilted p-tree surrogate
/// with `a = gamma / sigma(p)`, Poisson identifications, distances scaled
/// by `sigma(p)`. Large `m` returns a landmark-sampled space.
pub fn build_limit_space<R: Rng>(
    theta: &ThetaSequence,
    gamma: f64,
    m: usize,
    rng: &mut R,
) -> Result<MeasuredMetricSpace> {
    if gamma < 0.0 {
        return param_err("gamma must be nonnegative");
    }
    let p = surrogate_pmf(theta.values(), m)?;
    let sigma = sigma_p(&p);
    let a = gamma / sigma;
    let tree = if a == 0.0 {
        sample_ordered_ptree(&p, rng)?
    } else {
        let pilot = (10_000_000 / m).clamp(500, crate::ptree::DEFAULT_PILOT);
        let mut sampler = TiltedPtreeSampler::new_rejection(&p, a, pilot, rng)?;
        sampler.sample(rng)?
    };
    let g = build_modified_graph(&tree, &p, a, rng)?;
    let comps = components(&g);
    let space = if g.n <= EXACT_SPACE_CAP {
        graph_metric_space_exact(&g, &comps[0])?
    } else {
        graph_metric_space_landmarks(&g, &comps[0], LANDMARK_COUNT.min(g.n), rng)?
    };
    space.scale(sigma)
}

/// Limit space of the `rank`-th largest excursion (0-based) of the reflected
/// path driven by `c` at window `lambda`: distances of the glued space are
/// further multiplied by `Gamma`.
pub fn limit_component_space<R: Rng>(
    c: &EntranceBoundary,
    lambda: f64,
    rank: usize,
    m: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<MeasuredMetricSpace> {
    let path = build_levy_path(c, lambda, horizon, rng)?;
    let set = excursions(&reflect(&path));
    let exc = set
        .complete()
        .nth(rank)
        .ok_or_else(|| {
            crate::error::Error::Parameter(format!(
                "excursion {rank} not present within horizon {horizon}"
            ))
        })?;
    let (gamma_bar, theta, gamma_scale) = component_limit_params(exc, c)?;
    let space = build_limit_space(&theta, gamma_bar, m, rng)?;
    space.scale(gamma_scale)
}
