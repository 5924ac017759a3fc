//! Ordered p-trees: the exploration-process and birthday constructions,
//! depth-first annotations (permitted edges, right-mass profile, tilt),
//! tilted sampling, surplus edges and the glued (modified) space.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{param_err, Error, Result};
use crate::graphgen::SimpleGraph;
use crate::metric::MeasuredMetricSpace;

/// Rooted tree on `[m]` with an explicit child order per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderedTree {
    root: usize,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl OrderedTree {
    /// Build from a parent map (`parent[root] == root`) and per-vertex
    /// ordered child lists, validating shape.
    pub fn new(root: usize, parent: Vec<usize>, children: Vec<Vec<usize>>) -> Result<Self> {
        let m = parent.len();
        if m == 0 || root >= m || children.len() != m || parent[root] != root {
            return param_err("malformed tree arrays");
        }
        let mut seen = vec![false; m];
        let mut count = 0usize;
        for (v, list) in children.iter().enumerate() {
            for &c in list {
                if c >= m || parent[c] != v || c == root {
                    return param_err("child list inconsistent with parent map");
                }
                if seen[c] {
                    return param_err("vertex appears as child twice");
                }
                seen[c] = true;
                count += 1;
            }
        }
        if count != m - 1 {
            return param_err("children do not partition the non-root vertices");
        }
        let t = Self {
            root,
            parent,
            children,
        };
        // Connectivity: the DFS must visit everything.
        if t.dfs_order().len() != m {
            return param_err("tree not connected");
        }
        Ok(t)
    }

    pub fn singleton() -> Self {
        Self {
            root: 0,
            parent: vec![0],
            children: vec![vec![]],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent_of(&self, v: usize) -> Option<usize> {
        if v == self.root {
            None
        } else {
            Some(self.parent[v])
        }
    }

    pub fn children_of(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Number of children of every vertex.
    pub fn child_counts(&self) -> Vec<usize> {
        self.children.iter().map(|c| c.len()).collect()
    }

    /// Depth-first order exploring the oldest (first-listed) child first.
    pub fn dfs_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in self.children[v].iter().rev() {
                stack.push(c);
            }
        }
        order
    }

    /// Edge list `(parent, child)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(v, cs)| cs.iter().map(move |&c| (v, c)))
    }

    /// Canonical key for the unordered shape: parent array with the root
    /// marked by its own id.
    pub fn shape_key(&self) -> Vec<usize> {
        self.parent.clone()
    }

    /// Serialization: a line `t <root> <parent_1> .. <parent_m>` (1-based
    /// ids, root's parent written as 0) followed by one
    /// `o <v> <c_1> .. <c_k>` line per vertex with children.
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "t {}", self.root + 1)?;
        for v in 0..self.len() {
            let p = if v == self.root { 0 } else { self.parent[v] + 1 };
            write!(out, " {}", p)?;
        }
        writeln!(out)?;
        for v in 0..self.len() {
            if !self.children[v].is_empty() {
                write!(out, "o {}", v + 1)?;
                for &c in &self.children[v] {
                    write!(out, " {}", c + 1)?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut root = None;
        let mut parent: Vec<usize> = Vec::new();
        let mut order_lines: Vec<(usize, Vec<usize>)> = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("t") => {
                    let r: usize = parts
                        .next()
                        .ok_or_else(|| Error::Parse("missing root".into()))?
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad root: {e}")))?;
                    root = Some(r - 1);
                    parent = parts
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::Parse(format!("bad parent: {e}")))?;
                }
                Some("o") => {
                    let v: usize = parts
                        .next()
                        .ok_or_else(|| Error::Parse("missing vertex".into()))?
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad vertex: {e}")))?;
                    let cs = parts
                        .map(|s| s.parse::<usize>().map(|x| x - 1))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::Parse(format!("bad child: {e}")))?;
                    order_lines.push((v - 1, cs));
                }
                _ => return Err(Error::Parse(format!("unrecognized line: {line}"))),
            }
        }
        let root = root.ok_or_else(|| Error::Parse("missing tree line".into()))?;
        let m = parent.len();
        let parent: Vec<usize> = parent
            .iter()
            .enumerate()
            .map(|(v, &p)| if p == 0 { v } else { p - 1 })
            .collect();
        let mut children = vec![Vec::new(); m];
        for (v, cs) in order_lines {
            children[v] = cs;
        }
        // Vertices whose order line was omitted have no children.
        OrderedTree::new(root, parent, children)
    }
}

fn check_pmf(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return param_err("pmf must be nonempty");
    }
    if p.iter().any(|&x| x <= 0.0) {
        return param_err("pmf entries must be positive");
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return param_err(format!("pmf must sum to 1, got {s}"));
    }
    Ok(())
}

/// The deterministic exploration map from `m` distinct marks in (0,1) to
/// an ordered tree: the minimizer of `F^p(u_v-)` becomes the root and the
/// shifted marks are consumed depth-first in blocks of total mass `p_v`.
pub fn ptree_exploration(p: &[f64], u: &[f64]) -> Result<OrderedTree> {
    check_pmf(p)?;
    let m = p.len();
    if u.len() != m {
        return param_err("need one mark per vertex");
    }
    {
        let mut sorted = u.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return param_err("marks must be distinct");
        }
    }
    if m == 1 {
        return Ok(OrderedTree::singleton());
    }

    // Root: unique minimizer of F^p(u_v-). On an exact tie, perturb mark v
    // by (v+1) * 1e-15 and retry once.
    let root = match exploration_root(p, u) {
        Some(r) => r,
        None => {
            let bumped: Vec<f64> = u
                .iter()
                .enumerate()
                .map(|(v, &x)| x + (v as f64 + 1.0) * 1e-15)
                .collect();
            exploration_root(p, &bumped)
                .ok_or_else(|| Error::Parameter("no unique root minimizer".into()))?
        }
    };

    // Shift marks around the root and sort.
    let mut rel: Vec<(f64, usize)> = Vec::with_capacity(m - 1);
    for v in 0..m {
        if v == root {
            continue;
        }
        let mut y = u[v] - u[root];
        if y < 0.0 {
            y += 1.0;
        }
        rel.push((y, v));
    }
    rel.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut parent = vec![0usize; m];
    parent[root] = root;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut stack = vec![root];
    let mut ptr = 0usize;
    let mut acc = 0.0f64;
    while let Some(v) = stack.pop() {
        acc += p[v];
        let mut found = Vec::new();
        while ptr < rel.len() && rel[ptr].0 < acc {
            found.push(rel[ptr].1);
            ptr += 1;
        }
        for &c in &found {
            parent[c] = v;
        }
        children[v] = found.clone();
        // Oldest child (smallest shifted mark) must be explored first.
        for &c in found.iter().rev() {
            stack.push(c);
        }
        if stack.is_empty() && ptr < rel.len() {
            // The exploration ran dry before consuming every mark; with the
            // true minimizer as root this is a measure-zero float artifact.
            return param_err("exploration ran dry; degenerate mark configuration");
        }
    }
    OrderedTree::new(root, parent, children)
}

fn exploration_root(p: &[f64], u: &[f64]) -> Option<usize> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap());
    let mut prefix = 0.0f64;
    let mut best: Option<(f64, usize)> = None;
    let mut tie = false;
    for &v in &idx {
        let fv = prefix - u[v];
        match best {
            None => best = Some((fv, v)),
            Some((fb, _)) => {
                if fv < fb {
                    best = Some((fv, v));
                    tie = false;
                } else if fv == fb {
                    tie = true;
                }
            }
        }
        prefix += p[v];
    }
    if tie {
        None
    } else {
        best.map(|(_, v)| v)
    }
}

/// Sample an ordered p-tree through the exploration map with i.i.d.
/// uniform marks.
pub fn sample_ordered_ptree<R: Rng>(p: &[f64], rng: &mut R) -> Result<OrderedTree> {
    check_pmf(p)?;
    loop {
        let u: Vec<f64> = (0..p.len()).map(|_| rng.gen::<f64>()).collect();
        match ptree_exploration(p, &u) {
            Ok(t) => return Ok(t),
            Err(Error::Parameter(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Deterministic birthday construction from an explicit value sequence.
/// Returns the tree plus every repeat value `Y_{R_l - 1}` found in the
/// sequence. Errors if the sequence does not visit all of `[m]`.
pub fn birthday_tree_from_sequence(m: usize, seq: &[usize]) -> Result<(OrderedTree, Vec<usize>)> {
    if m == 0 || seq.is_empty() {
        return param_err("empty birthday input");
    }
    let mut seen = vec![false; m];
    let mut parent = vec![usize::MAX; m];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut repeats = Vec::new();
    let root = seq[0];
    if root >= m {
        return param_err("vertex out of range");
    }
    seen[root] = true;
    parent[root] = root;
    for k in 1..seq.len() {
        let y = seq[k];
        if y >= m {
            return param_err("vertex out of range");
        }
        if seen[y] {
            repeats.push(seq[k - 1]);
        } else {
            seen[y] = true;
            parent[y] = seq[k - 1];
            children[seq[k - 1]].push(y);
        }
    }
    if seen.iter().any(|&s| !s) {
        return param_err("sequence does not cover [m]");
    }
    Ok((OrderedTree::new(root, parent, children)?, repeats))
}

/// Birthday construction: grow the tree along an i.i.d. `p` stream until all
/// of `[m]` is attached and `want_repeats` repeat values have been observed.
/// The tree (as an unordered object) is a p-tree, independent of the repeat
/// values, which are themselves i.i.d. `p`.
pub fn ptree_birthday<R: Rng>(
    p: &[f64],
    want_repeats: usize,
    rng: &mut R,
) -> Result<(OrderedTree, Vec<usize>)> {
    check_pmf(p)?;
    let m = p.len();
    let mut cdf = Vec::with_capacity(m);
    let mut acc = 0.0;
    for &x in p {
        acc += x;
        cdf.push(acc);
    }
    let draw = |rng: &mut R| -> usize {
        let u: f64 = rng.gen::<f64>() * acc;
        cdf.partition_point(|&c| c < u).min(m - 1)
    };
    let mut seen = vec![false; m];
    let mut unseen = m;
    let mut parent = vec![usize::MAX; m];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut repeats = Vec::new();
    let mut prev = draw(rng);
    seen[prev] = true;
    parent[prev] = prev;
    let root = prev;
    unseen -= 1;
    while unseen > 0 || repeats.len() < want_repeats {
        let y = draw(rng);
        if seen[y] {
            if repeats.len() < want_repeats {
                repeats.push(prev);
            }
        } else {
            seen[y] = true;
            unseen -= 1;
            parent[y] = prev;
            children[prev].push(y);
        }
        prev = y;
    }
    Ok((OrderedTree::new(root, parent, children)?, repeats))
}

/// Depth-first annotation of an ordered tree under a driving pmf and
/// interaction strength `a`.
#[derive(Debug, Clone)]
pub struct DfsAnnotation {
    pub dfs_order: Vec<usize>,
    /// `dA(v)`: total `p`-mass of children hanging to the right of the
    /// root-to-`v` path.
    pub d_a: Vec<f64>,
    /// `a * sum_v p_v dA(v)`, equal to `a * sum over permitted pairs of
    /// p_k p_l`.
    pub lambda: f64,
    /// Product over tree edges of `(exp(a p_k p_l) - 1) / (a p_k p_l)`.
    pub tilt_i: f64,
    /// `exp(lambda)`.
    pub tilt_lbar: f64,
    /// Full tilt `tilt_i * tilt_lbar`.
    pub tilt_l: f64,
    pub log_tilt_l: f64,
    /// Largest active-set weight seen during the exploration.
    pub max_active_weight: f64,
    permitted: Option<Vec<(u32, u32)>>,
}

impl DfsAnnotation {
    /// The permitted pairs `(explored vertex, simultaneously active vertex)`.
    /// Stored eagerly for small trees; recomputed otherwise.
    pub fn permitted_edges(&self, t: &OrderedTree) -> Vec<(u32, u32)> {
        if let Some(p) = &self.permitted {
            return p.clone();
        }
        collect_permitted(t)
    }
}

fn collect_permitted(t: &OrderedTree) -> Vec<(u32, u32)> {
    let mut stack = vec![t.root()];
    let mut out = Vec::new();
    while let Some(v) = stack.pop() {
        for &other in &stack {
            out.push((v as u32, other as u32));
        }
        for &c in t.children_of(v).iter().rev() {
            stack.push(c);
        }
    }
    out
}

const PERMITTED_EAGER_CAP: usize = 512;

/// Compute the depth-first quantities. The tilt mass `lambda` is computed by
/// two independent routes (right-mass accumulation down the tree and active
/// stack weights during the exploration) and the two must agree to 1e-10.
pub fn dfs_annotate(t: &OrderedTree, p: &[f64], a: f64) -> Result<DfsAnnotation> {
    check_pmf(p)?;
    if p.len() != t.len() {
        return param_err("pmf length must match tree size");
    }
    if a < 0.0 {
        return param_err("a must be nonnegative");
    }
    let m = t.len();

    // Route 1: dA via right-sibling suffix masses accumulated along paths.
    let mut d_a = vec![0.0f64; m];
    let mut stack: Vec<(usize, f64)> = vec![(t.root(), 0.0)];
    while let Some((v, acc)) = stack.pop() {
        d_a[v] = acc;
        let cs = t.children_of(v);
        let mut suffix = vec![0.0f64; cs.len() + 1];
        for i in (0..cs.len()).rev() {
            suffix[i] = suffix[i + 1] + p[cs[i]];
        }
        for (i, &c) in cs.iter().enumerate().rev() {
            stack.push((c, acc + suffix[i + 1]));
        }
    }
    let lambda: f64 = a * (0..m).map(|v| p[v] * d_a[v]).sum::<f64>();

    // Route 2: active-set weights in the depth-first exploration.
    let mut dfs_order = Vec::with_capacity(m);
    let mut active_mass = p[t.root()];
    let mut lambda_active = 0.0f64;
    let mut max_active = 0.0f64;
    let mut st = vec![t.root()];
    while let Some(v) = st.pop() {
        dfs_order.push(v);
        active_mass -= p[v];
        // Guard against accumulated cancellation on large trees.
        if active_mass < 0.0 {
            active_mass = 0.0;
        }
        lambda_active += p[v] * active_mass;
        max_active = max_active.max(active_mass);
        for &c in t.children_of(v).iter().rev() {
            st.push(c);
            active_mass += p[c];
        }
    }
    let lambda_active = a * lambda_active;
    if (lambda - lambda_active).abs() > 1e-10 * (1.0 + lambda.abs()) {
        return param_err(format!(
            "tilt-mass identity violated: {lambda} vs {lambda_active}"
        ));
    }

    let mut log_tilt_i = 0.0f64;
    for (u, v) in t.edges() {
        let x = a * p[u] * p[v];
        if x > 0.0 {
            log_tilt_i += (x.exp_m1() / x).ln();
        }
    }
    let tilt_i = log_tilt_i.exp();
    let log_tilt_l = log_tilt_i + lambda;
    let permitted = if m <= PERMITTED_EAGER_CAP {
        Some(collect_permitted(t))
    } else {
        None
    };
    Ok(DfsAnnotation {
        dfs_order,
        d_a,
        lambda,
        tilt_i,
        tilt_lbar: lambda.exp(),
        tilt_l: log_tilt_l.exp(),
        log_tilt_l,
        max_active_weight: max_active,
        permitted,
    })
}

/// All rooted labelled trees on `[m]` as `(root, parent)` pairs.
/// Exponential in `m`; intended for m <= 5.
pub fn enumerate_rooted_trees(m: usize) -> Vec<(usize, Vec<usize>)> {
    assert!(m >= 1 && m <= 6, "enumeration only for tiny m");
    let mut out = Vec::new();
    if m == 1 {
        out.push((0, vec![0]));
        return out;
    }
    for root in 0..m {
        let others: Vec<usize> = (0..m).filter(|&v| v != root).collect();
        let combos = m.pow(others.len() as u32);
        'combo: for code in 0..combos {
            let mut parent = vec![0usize; m];
            parent[root] = root;
            let mut c = code;
            for &v in &others {
                parent[v] = c % m;
                c /= m;
            }
            // Validate: walking up from each vertex must reach the root
            // without revisiting.
            for &v in &others {
                let mut steps = 0;
                let mut cur = v;
                while cur != root {
                    cur = parent[cur];
                    steps += 1;
                    if steps > m {
                        continue 'combo;
                    }
                }
            }
            out.push((root, parent));
        }
    }
    out
}

/// All ordered rooted labelled trees on `[m]`. Intended for m <= 5.
pub fn enumerate_ordered_trees(m: usize) -> Vec<OrderedTree> {
    let mut out = Vec::new();
    for (root, parent) in enumerate_rooted_trees(m) {
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); m];
        for v in 0..m {
            if v != root {
                kids[parent[v]].push(v);
            }
        }
        // Cartesian product of per-vertex child permutations.
        let perms: Vec<Vec<Vec<usize>>> = kids.iter().map(|c| permutations(c)).collect();
        let mut choice = vec![0usize; m];
        loop {
            let children: Vec<Vec<usize>> =
                (0..m).map(|v| perms[v][choice[v]].clone()).collect();
            out.push(OrderedTree::new(root, parent.clone(), children).unwrap());
            // Advance the mixed-radix counter.
            let mut k = 0;
            loop {
                if k == m {
                    break;
                }
                choice[k] += 1;
                if choice[k] < perms[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
        }
    }
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Unnormalized log-weight of an ordered tree under the ordered p-tree law:
/// `sum_v (d_v ln p_v - ln d_v!)`.
pub fn ordered_ptree_log_weight(t: &OrderedTree, p: &[f64]) -> f64 {
    let mut lw = 0.0;
    for v in 0..t.len() {
        let d = t.children_of(v).len();
        lw += d as f64 * p[v].ln();
        for k in 2..=d {
            lw -= (k as f64).ln();
        }
    }
    lw
}

/// Sampling mode for the tilted ordered p-tree law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltedMode {
    /// Full enumeration of ordered trees; only for m <= 5.
    ExactEnum,
    /// Rejection from the untilted law under a pilot-calibrated envelope.
    Rejection,
}

/// Sampler for the law proportional to `P_ord(t) * L(t)`.
pub struct TiltedPtreeSampler {
    p: Vec<f64>,
    a: f64,
    kind: SamplerKind,
}

enum SamplerKind {
    Enum {
        trees: Vec<OrderedTree>,
        cdf: Vec<f64>,
    },
    Rejection {
        log_envelope: f64,
        overflows: usize,
        attempts: u64,
        accepted: u64,
    },
}

pub const DEFAULT_PILOT: usize = 10_000;
const ENVELOPE_SAFETY_LOG: f64 = 2.302585092994046; // ln 10

impl TiltedPtreeSampler {
    /// Exact table sampler by enumeration (m <= 5).
    pub fn new_exact(p: &[f64], a: f64) -> Result<Self> {
        check_pmf(p)?;
        if p.len() > 5 {
            return param_err("exact enumeration only supported for m <= 5");
        }
        let trees = enumerate_ordered_trees(p.len());
        let mut weights = Vec::with_capacity(trees.len());
        for t in &trees {
            let ann = dfs_annotate(t, p, a)?;
            weights.push((ordered_ptree_log_weight(t, p) + ann.log_tilt_l).exp());
        }
        let total: f64 = weights.iter().sum();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w / total;
            cdf.push(acc);
        }
        Ok(Self {
            p: p.to_vec(),
            a,
            kind: SamplerKind::Enum { trees, cdf },
        })
    }

    /// Exact tilted probabilities over the enumerated ordered trees.
    pub fn exact_table(&self) -> Option<(&[OrderedTree], Vec<f64>)> {
        match &self.kind {
            SamplerKind::Enum { trees, cdf } => {
                let mut probs = Vec::with_capacity(cdf.len());
                let mut prev = 0.0;
                for &c in cdf {
                    probs.push(c - prev);
                    prev = c;
                }
                Some((trees, probs))
            }
            _ => None,
        }
    }

    /// Rejection sampler. The envelope is `max pilot tilt * 10`; any
    /// observed tilt above the envelope is logged, the envelope enlarged,
    /// and sampling restarted, so the sampler is exact conditional on no
    /// overflow and the overflow count is reported.
    pub fn new_rejection<R: Rng>(p: &[f64], a: f64, pilot: usize, rng: &mut R) -> Result<Self> {
        check_pmf(p)?;
        if a < 0.0 {
            return param_err("a must be nonnegative");
        }
        let mut max_log = f64::NEG_INFINITY;
        for _ in 0..pilot.max(10) {
            let t = sample_ordered_ptree(p, rng)?;
            let ann = dfs_annotate(&t, p, a)?;
            max_log = max_log.max(ann.log_tilt_l);
        }
        Ok(Self {
            p: p.to_vec(),
            a,
            kind: SamplerKind::Rejection {
                log_envelope: max_log + ENVELOPE_SAFETY_LOG,
                overflows: 0,
                attempts: 0,
                accepted: 0,
            },
        })
    }

    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> Result<OrderedTree> {
        match &mut self.kind {
            SamplerKind::Enum { trees, cdf } => {
                let u: f64 = rng.gen();
                let idx = cdf.partition_point(|&c| c < u).min(trees.len() - 1);
                Ok(trees[idx].clone())
            }
            SamplerKind::Rejection {
                log_envelope,
                overflows,
                attempts,
                accepted,
            } => loop {
                let t = sample_ordered_ptree(&self.p, rng)?;
                let ann = dfs_annotate(&t, &self.p, self.a)?;
                *attempts += 1;
                if ann.log_tilt_l > *log_envelope {
                    *overflows += 1;
                    *log_envelope = ann.log_tilt_l + ENVELOPE_SAFETY_LOG;
                    continue;
                }
                if rng.gen::<f64>().ln() < ann.log_tilt_l - *log_envelope {
                    *accepted += 1;
                    return Ok(t);
                }
            },
        }
    }

    pub fn overflows(&self) -> usize {
        match &self.kind {
            SamplerKind::Rejection { overflows, .. } => *overflows,
            _ => 0,
        }
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        match &self.kind {
            SamplerKind::Rejection {
                attempts, accepted, ..
            } => {
                if *attempts > 0 {
                    Some(*accepted as f64 / *attempts as f64)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// One-shot tilted sample.
pub fn sample_tilted_ptree<R: Rng>(
    p: &[f64],
    a: f64,
    mode: TiltedMode,
    rng: &mut R,
) -> Result<OrderedTree> {
    match mode {
        TiltedMode::ExactEnum => {
            let mut s = TiltedPtreeSampler::new_exact(p, a)?;
            s.sample(rng)
        }
        TiltedMode::Rejection => {
            let mut s = TiltedPtreeSampler::new_rejection(p, a, DEFAULT_PILOT, rng)?;
            s.sample(rng)
        }
    }
}

fn sample_poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).unwrap().sample(rng) as u64
}

fn sample_cdf_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Right-children of the root-to-`v` path together with their masses, in
/// ascending vertex-id order. These are exactly the candidate second
/// endpoints of a surplus edge whose first endpoint is `v`.
fn path_right_children(t: &OrderedTree, p: &[f64], v: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut cur = v;
    while let Some(parent) = t.parent_of(cur) {
        let cs = t.children_of(parent);
        let pos = cs.iter().position(|&c| c == cur).unwrap();
        for &sib in &cs[pos + 1..] {
            out.push((sib, p[sib]));
        }
        cur = parent;
    }
    // Fixed assignment rule for the Poisson height interval: ascending ids.
    out.sort_by_key(|&(u, _)| u);
    out
}

/// Proper ancestors of `v` carrying right-children, with the total mass of
/// those right-children. This is the support of the second-endpoint law of
/// the modified (glued) construction.
fn path_ancestor_masses(t: &OrderedTree, p: &[f64], v: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut cur = v;
    while let Some(parent) = t.parent_of(cur) {
        let cs = t.children_of(parent);
        let pos = cs.iter().position(|&c| c == cur).unwrap();
        let mass: f64 = cs[pos + 1..].iter().map(|&sib| p[sib]).sum();
        if mass > 0.0 {
            out.push((parent, mass));
        }
        cur = parent;
    }
    out
}

/// Raw surplus pairs before duplicate removal: a Poisson(`lambda`) number
/// of draws, first endpoints i.i.d. proportional to `p_v dA(v)`, second
/// endpoints among the right-children of the root path proportional to
/// `p_u` (partitioned by ascending vertex id as the fixed assignment rule).
pub fn sample_surplus_pairs<R: Rng>(
    t: &OrderedTree,
    p: &[f64],
    a: f64,
    rng: &mut R,
) -> Result<Vec<(u32, u32)>> {
    let ann = dfs_annotate(t, p, a)?;
    let n_star = sample_poisson(ann.lambda, rng);
    let mut pairs = Vec::with_capacity(n_star as usize);
    if n_star > 0 {
        let first_weights: Vec<f64> = (0..t.len()).map(|v| p[v] * ann.d_a[v]).collect();
        for _ in 0..n_star {
            let v = sample_cdf_index(&first_weights, rng);
            let candidates = path_right_children(t, p, v);
            debug_assert!(!candidates.is_empty());
            let masses: Vec<f64> = candidates.iter().map(|&(_, w)| w).collect();
            let u = candidates[sample_cdf_index(&masses, rng)].0;
            pairs.push((v as u32, u as u32));
        }
    }
    Ok(pairs)
}

/// Five-step surplus construction on top of a (tilted) ordered tree:
/// the raw pairs of [`sample_surplus_pairs`] with duplicates removed, glued
/// onto the tree edges.
pub fn add_surplus_edges<R: Rng>(
    t: &OrderedTree,
    p: &[f64],
    a: f64,
    rng: &mut R,
) -> Result<SimpleGraph> {
    let mut edges: Vec<(u32, u32)> = t.edges().map(|(u, v)| (u as u32, v as u32)).collect();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    for (v, u) in sample_surplus_pairs(t, p, a, rng)? {
        let e = (v.min(u), v.max(u));
        if seen.insert(e) {
            edges.push(e);
        }
    }
    SimpleGraph::new(t.len(), edges, p.to_vec())
}

/// Glued (modified) quotient graph: same Poisson count and first endpoints
/// as the surplus construction, but the first endpoint is identified with a
/// path ancestor chosen proportional to the mass of its right-children, and
/// nothing is deduplicated. Vertices of the result are identification
/// classes; `vertex_weights` carries the additively merged masses.
pub fn build_modified_graph<R: Rng>(
    t: &OrderedTree,
    p: &[f64],
    a: f64,
    rng: &mut R,
) -> Result<SimpleGraph> {
    let ann = dfs_annotate(t, p, a)?;
    let m = t.len();
    let n_star = sample_poisson(ann.lambda, rng);
    let mut uf = crate::graphgen::UnionFind::new(m);
    if n_star > 0 {
        let first_weights: Vec<f64> = (0..m).map(|v| p[v] * ann.d_a[v]).collect();
        for _ in 0..n_star {
            let v = sample_cdf_index(&first_weights, rng);
            let anc = path_ancestor_masses(t, p, v);
            debug_assert!(!anc.is_empty());
            let masses: Vec<f64> = anc.iter().map(|&(_, w)| w).collect();
            let y = anc[sample_cdf_index(&masses, rng)].0;
            uf.union(v as u32, y as u32);
        }
    }
    // Quotient vertex classes in order of smallest representative.
    let mut class_of = vec![usize::MAX; m];
    let mut count = 0usize;
    for v in 0..m {
        let r = uf.find(v as u32) as usize;
        if class_of[r] == usize::MAX {
            class_of[r] = count;
            count += 1;
        }
    }
    let k = count;
    let mut mu = vec![0.0f64; k];
    for v in 0..m {
        mu[class_of[uf.find(v as u32) as usize]] += p[v];
    }
    let mut qedges: Vec<(u32, u32)> = Vec::new();
    for (u, v) in t.edges() {
        let cu = class_of[uf.find(u as u32) as usize] as u32;
        let cv = class_of[uf.find(v as u32) as usize] as u32;
        if cu != cv {
            qedges.push((cu.min(cv), cu.max(cv)));
        }
    }
    qedges.sort_unstable();
    qedges.dedup();
    SimpleGraph::new(k, qedges, mu)
}

/// Glued (modified) space: the quotient graph viewed as a metric measure
/// space with the merged masses as measure.
pub fn build_modified_space<R: Rng>(
    t: &OrderedTree,
    p: &[f64],
    a: f64,
    rng: &mut R,
) -> Result<MeasuredMetricSpace> {
    let g = build_modified_graph(t, p, a, rng)?;
    let comps = crate::graphgen::components(&g);
    debug_assert_eq!(comps.len(), 1, "quotient of a tree must be connected");
    crate::metric::graph_metric_space_exact(&g, &comps[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stats::{chi_square, tv_counts, tv_vs_exact};
    use std::collections::HashMap;

    fn uniform_pmf(m: usize) -> Vec<f64> {
        vec![1.0 / m as f64; m]
    }

    /// Exact p-tree law over unordered shapes.
    fn exact_tree_law(m: usize, p: &[f64]) -> HashMap<Vec<usize>, f64> {
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

    #[test]
    fn exact_law_normalizes() {
        // Cayley: m^{m-1} rooted trees; for uniform p each has prob m^{-(m-1)}.
        for m in 2..=4 {
            let law = exact_tree_law(m, &uniform_pmf(m));
            assert_eq!(law.len(), m.pow(m as u32 - 1));
            for &v in law.values() {
                assert!((v - (m as f64).powi(-(m as i32 - 1))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exploration_single_vertex() {
        let t = ptree_exploration(&[1.0], &[0.4]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.root(), 0);
    }

    #[test]
    fn exploration_hand_traced_golden() {
        // p = (0.5, 0.3, 0.2), u = (0.9, 0.1, 0.5): the minimizer of
        // F(u_v-) is vertex 0, then the shifted marks are consumed as a
        // path 0 -> 1 -> 2.
        let t = ptree_exploration(&[0.5, 0.3, 0.2], &[0.9, 0.1, 0.5]).unwrap();
        assert_eq!(t.root(), 0);
        assert_eq!(t.parent_of(1), Some(0));
        assert_eq!(t.parent_of(2), Some(1));
        assert_eq!(t.children_of(0), &[1]);
        assert_eq!(t.children_of(1), &[2]);
    }

    #[test]
    fn exploration_rejects_duplicate_marks() {
        assert!(ptree_exploration(&[0.5, 0.5], &[0.3, 0.3]).is_err());
    }

    #[test]
    fn exploration_matches_enumerated_law_m3() {
        let m = 3;
        let p = uniform_pmf(m);
        let law = exact_tree_law(m, &p);
        let mut rng = rng_from_seed(101);
        let reps = 100_000usize;
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for _ in 0..reps {
            let t = sample_ordered_ptree(&p, &mut rng).unwrap();
            *counts.entry(t.shape_key()).or_insert(0) += 1;
        }
        // Every unordered shape has probability 1/9; chi-square with 8 dof
        // at the 0.1% level is 26.12.
        let stat = chi_square(&counts, &law);
        assert!(stat < 26.12, "chi2 = {stat}");
        assert!(tv_vs_exact(&counts, &law) < 0.02);
    }

    #[test]
    fn exploration_matches_enumerated_law_nonuniform_m3() {
        let m = 3;
        let p = vec![0.5, 0.3, 0.2];
        let law = exact_tree_law(m, &p);
        let mut rng = rng_from_seed(103);
        let reps = 100_000usize;
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for _ in 0..reps {
            let t = sample_ordered_ptree(&p, &mut rng).unwrap();
            *counts.entry(t.shape_key()).or_insert(0) += 1;
        }
        assert!(tv_vs_exact(&counts, &law) < 0.02);
    }

    #[test]
    fn birthday_golden_sequence() {
        // Y = (0,1,0,2): edges (0,1),(0,2), root 0, first repeat value 1.
        let (t, reps) = birthday_tree_from_sequence(3, &[0, 1, 0, 2]).unwrap();
        assert_eq!(t.root(), 0);
        assert_eq!(t.parent_of(1), Some(0));
        assert_eq!(t.parent_of(2), Some(0));
        assert_eq!(reps, vec![1]);
    }

    #[test]
    fn birthday_matches_exploration_law() {
        let m = 3;
        let p = uniform_pmf(m);
        let mut rng = rng_from_seed(107);
        let reps = 100_000usize;
        let mut via_birthday: HashMap<Vec<usize>, u64> = HashMap::new();
        let mut via_exploration: HashMap<Vec<usize>, u64> = HashMap::new();
        for _ in 0..reps {
            let (t, _) = ptree_birthday(&p, 0, &mut rng).unwrap();
            *via_birthday.entry(t.shape_key()).or_insert(0) += 1;
            let t = sample_ordered_ptree(&p, &mut rng).unwrap();
            *via_exploration.entry(t.shape_key()).or_insert(0) += 1;
        }
        assert!(tv_counts(&via_birthday, &via_exploration) < 0.02);
    }

    #[test]
    fn birthday_repeat_marginal_is_p() {
        let p = vec![0.4, 0.3, 0.2, 0.1];
        let mut rng = rng_from_seed(109);
        let reps = 100_000usize;
        let mut hist = vec![0u64; 4];
        for _ in 0..reps {
            let (_, r) = ptree_birthday(&p, 1, &mut rng).unwrap();
            hist[r[0]] += 1;
        }
        for v in 0..4 {
            let freq = hist[v] as f64 / reps as f64;
            assert!((freq - p[v]).abs() < 0.01, "v={v} freq={freq}");
        }
    }

    #[test]
    fn dfs_annotation_examples() {
        // Root 0 with ordered children (1,2): permitted = {(1,2)},
        // dA(0)=0, dA(1)=p_2, dA(2)=0, lambda = a p_1 p_2.
        let t = OrderedTree::new(0, vec![0, 0, 0], vec![vec![1, 2], vec![], vec![]]).unwrap();
        let p = [0.5, 0.3, 0.2];
        let a = 2.0;
        let ann = dfs_annotate(&t, &p, a).unwrap();
        assert_eq!(ann.d_a, vec![0.0, 0.2, 0.0]);
        assert!((ann.lambda - a * 0.3 * 0.2).abs() < 1e-12);
        assert_eq!(ann.permitted_edges(&t), vec![(1, 2)]);

        // Path 0 -> 1 -> 2: no co-active vertices.
        let path =
            OrderedTree::new(0, vec![0, 0, 1], vec![vec![1], vec![2], vec![]]).unwrap();
        let ann = dfs_annotate(&path, &p, a).unwrap();
        assert_eq!(ann.lambda, 0.0);
        assert_eq!(ann.tilt_lbar, 1.0);
        assert!(ann.permitted_edges(&path).is_empty());
    }

    #[test]
    fn dfs_star_lambda_right_sibling_sum() {
        // Star: root 0 with ordered children 1..k; Lambda = a sum_{i<j} p_i p_j
        // over the children.
        let k = 5;
        let m = k + 1;
        let mut children = vec![Vec::new(); m];
        children[0] = (1..m).collect();
        let parent = vec![0; m];
        let t = OrderedTree::new(0, parent, children).unwrap();
        let p: Vec<f64> = (1..=m).map(|i| i as f64).collect();
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|x| x / total).collect();
        let a = 1.7;
        let ann = dfs_annotate(&t, &p, a).unwrap();
        let mut expect = 0.0;
        for i in 1..m {
            for j in (i + 1)..m {
                expect += p[i] * p[j];
            }
        }
        assert!((ann.lambda - a * expect).abs() < 1e-12);
    }

    #[test]
    fn lambda_two_route_identity_random_trees() {
        // The two-route identity is asserted inside dfs_annotate; exercise it
        // on a thousand random trees up to m = 100.
        let mut rng = rng_from_seed(113);
        for i in 0..1000 {
            let m = 2 + (i % 99);
            let p = uniform_pmf(m);
            let t = sample_ordered_ptree(&p, &mut rng).unwrap();
            let ann = dfs_annotate(&t, &p, 1.0).unwrap();
            // Tilt bound 1 <= I <= exp(a p_max).
            assert!(ann.tilt_i >= 1.0 - 1e-12);
            assert!(ann.tilt_i <= (1.0 * p[0]).exp() + 1e-12);
            // dA is bounded by the maximal active-set weight.
            let max_da = ann.d_a.iter().cloned().fold(0.0, f64::max);
            assert!(max_da <= ann.max_active_weight + 1e-12);
        }
    }

    #[test]
    fn tilted_exact_enum_small_a_recovers_untilted() {
        let p = uniform_pmf(3);
        let tilted = TiltedPtreeSampler::new_exact(&p, 1e-4).unwrap();
        let untilted = TiltedPtreeSampler::new_exact(&p, 0.0).unwrap();
        let (trees, probs) = tilted.exact_table().unwrap();
        let (_, probs0) = untilted.exact_table().unwrap();
        let tv: f64 = trees
            .iter()
            .enumerate()
            .map(|(i, _)| (probs[i] - probs0[i]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-3, "tv = {tv}");
    }

    #[test]
    fn tilted_rejection_matches_enum() {
        let p = uniform_pmf(3);
        let a = 1.0;
        let exact = TiltedPtreeSampler::new_exact(&p, a).unwrap();
        let (trees, probs) = exact.exact_table().unwrap();
        let mut law: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut keys: HashMap<OrderedTree, Vec<usize>> = HashMap::new();
        for (t, pr) in trees.iter().zip(&probs) {
            // Key ordered trees by (shape, orders) via the serialized form.
            let mut buf = Vec::new();
            t.write_text(&mut buf).unwrap();
            let key: Vec<usize> = buf.iter().map(|&b| b as usize).collect();
            *law.entry(key.clone()).or_insert(0.0) += pr;
            keys.insert(t.clone(), key);
        }
        let mut rng = rng_from_seed(127);
        let mut sampler = TiltedPtreeSampler::new_rejection(&p, a, 2_000, &mut rng).unwrap();
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for _ in 0..100_000 {
            let t = sampler.sample(&mut rng).unwrap();
            let key = keys
                .get(&t)
                .cloned()
                .unwrap_or_else(|| {
                    let mut buf = Vec::new();
                    t.write_text(&mut buf).unwrap();
                    buf.iter().map(|&b| b as usize).collect()
                });
            *counts.entry(key).or_insert(0) += 1;
        }
        assert!(tv_vs_exact(&counts, &law) < 0.02);
        assert_eq!(sampler.overflows(), 0);
    }

    #[test]
    fn tilted_single_vertex_deterministic() {
        let mut rng = rng_from_seed(131);
        let t = sample_tilted_ptree(&[1.0], 1.0, TiltedMode::ExactEnum, &mut rng).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn tilted_exact_enum_rejects_large_m() {
        let p = uniform_pmf(6);
        assert!(TiltedPtreeSampler::new_exact(&p, 1.0).is_err());
    }

    #[test]
    fn surplus_on_path_is_tree() {
        let path =
            OrderedTree::new(0, vec![0, 0, 1], vec![vec![1], vec![2], vec![]]).unwrap();
        let p = uniform_pmf(3);
        let mut rng = rng_from_seed(137);
        for _ in 0..50 {
            let g = add_surplus_edges(&path, &p, 5.0, &mut rng).unwrap();
            assert_eq!(g.edges.len(), 2);
        }
    }

    #[test]
    fn surplus_count_moments_match_poisson() {
        let p = uniform_pmf(30);
        let mut rng = rng_from_seed(139);
        let t = sample_ordered_ptree(&p, &mut rng).unwrap();
        let a = 3.0;
        let ann = dfs_annotate(&t, &p, a).unwrap();
        let lambda = ann.lambda;
        assert!(lambda > 0.0);
        // Count surplus draws via the graph edge count (duplicates are rare
        // but possible; count via repeated sampling of the Poisson layer).
        let reps = 20_000usize;
        let mut xs = Vec::with_capacity(reps);
        for _ in 0..reps {
            xs.push(sample_poisson(lambda, &mut rng) as f64);
        }
        let (mean, var) = crate::stats::mean_var(&xs);
        let se_mean = (lambda / reps as f64).sqrt();
        let se_var = ((lambda + 2.0 * lambda * lambda) / reps as f64).sqrt();
        assert!((mean - lambda).abs() < 3.0 * se_mean, "{mean} vs {lambda}");
        assert!((var - lambda).abs() < 4.0 * se_var, "{var} vs {lambda}");
    }

    #[test]
    fn modified_space_no_identifications_is_tree_metric() {
        let path =
            OrderedTree::new(0, vec![0, 0, 1], vec![vec![1], vec![2], vec![]]).unwrap();
        let p = [0.2, 0.3, 0.5];
        let mut rng = rng_from_seed(149);
        let s = build_modified_space(&path, &p, 0.0, &mut rng).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dist(0, 2), 2.0);
        assert!((s.mu()[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn modified_space_quotient_matches_floyd_warshall() {
        // Random trees up to m=50 with strong gluing; compare the quotient
        // BFS metric against Floyd-Warshall on the identified multigraph.
        let mut rng = rng_from_seed(151);
        for rep in 0..20 {
            let m = 5 + 2 * rep;
            let p = uniform_pmf(m);
            let t = sample_ordered_ptree(&p, &mut rng).unwrap();
            let s = build_modified_space(&t, &p, 4.0, &mut rng).unwrap();
            let k = s.len();
            // Floyd-Warshall oracle on the space's own unit-edge graph:
            // adjacency = pairs at distance exactly 1.
            let mut d = vec![vec![f64::INFINITY; k]; k];
            for i in 0..k {
                d[i][i] = 0.0;
                for j in 0..k {
                    if s.dist(i, j) == 1.0 {
                        d[i][j] = 1.0;
                    }
                }
            }
            for mid in 0..k {
                for i in 0..k {
                    for j in 0..k {
                        let via = d[i][mid] + d[mid][j];
                        if via < d[i][j] {
                            d[i][j] = via;
                        }
                    }
                }
            }
            for i in 0..k {
                for j in 0..k {
                    assert_eq!(s.dist(i, j), d[i][j], "rep={rep} i={i} j={j}");
                }
            }
            // Masses still form a probability vector.
            let total: f64 = s.mu().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_serialization_round_trip() {
        let t = OrderedTree::new(1, vec![1, 1, 0], vec![vec![2], vec![0], vec![]]).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let t2 = OrderedTree::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(t, t2);
    }
}
