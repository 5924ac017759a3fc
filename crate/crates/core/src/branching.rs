//! Size-biased distributions, mixed-Poisson branching processes, the exact
//! total-progeny formula and Monte-Carlo height tails.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{param_err, Result};

/// Finite discrete distribution on positive support values.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return param_err("support and probabilities must match and be nonempty");
        }
        if values.iter().any(|&v| v < 0.0) || probs.iter().any(|&p| p < 0.0) {
            return param_err("support and probabilities must be nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return param_err(format!("probabilities must sum to 1, got {total}"));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self { values, probs, cdf })
    }

    /// Point mass at `v`.
    pub fn degenerate(v: f64) -> Self {
        Self {
            values: vec![v],
            probs: vec![1.0],
            cdf: vec![1.0],
        }
    }

    /// Uniform distribution over the atoms of a weight sequence.
    pub fn from_atoms(atoms: &[f64]) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return param_err("no atoms");
        }
        Self::new(atoms.to_vec(), vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * v * p)
            .sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c < u);
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// Size-biased reweighting: `p°(x) = x p(x) / mean`.
pub fn size_biased(d: &DiscreteDistribution) -> Result<DiscreteDistribution> {
    let mean = d.mean();
    if mean <= 0.0 {
        return param_err("size-biasing requires positive mean");
    }
    let probs: Vec<f64> = d
        .values()
        .iter()
        .zip(d.probs())
        .map(|(v, p)| v * p / mean)
        .collect();
    let total: f64 = probs.iter().sum();
    // Renormalize away the last-digit rounding so the constructor's
    // invariant holds exactly.
    let probs = probs.into_iter().map(|p| p / total).collect();
    DiscreteDistribution::new(d.values().to_vec(), probs)
}

/// Branching tree with mixed-Poisson offspring: each vertex draws a mixing
/// value and then a Poisson number of children.
#[derive(Debug, Clone)]
pub struct BranchingTree {
    pub generation_sizes: Vec<usize>,
    /// Parent index per vertex in breadth-first order (root = 0 points to
    /// itself).
    pub parents: Vec<usize>,
    /// True when growth was cut off at `max_generations`.
    pub truncated: bool,
}

impl BranchingTree {
    pub fn total_size(&self) -> usize {
        self.parents.len()
    }

    pub fn height(&self) -> usize {
        self.generation_sizes.len() - 1
    }
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).unwrap().sample(rng) as usize
}

/// Source of Poisson mixing values.
pub trait PoissonMixer {
    fn sample_mix<R: Rng>(&self, rng: &mut R) -> f64;
    fn mean(&self) -> f64;
}

impl PoissonMixer for DiscreteDistribution {
    fn sample_mix<R: Rng>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }

    fn mean(&self) -> f64 {
        DiscreteDistribution::mean(self)
    }
}

/// The exact (continuous) size-biased variable of the power law
/// `F(x) = 1 - (iota/x)^(tau-1)`: tail `P(X > x) = (x/iota)^-(tau-2)`.
/// Its mean `iota (tau-2)/(tau-3)` equals 1 exactly at the critical
/// `iota = (tau-3)/(tau-2)`. Unlike any finite discretization, it keeps the
/// infinite-variance tail that drives the height-tail exponent.
#[derive(Debug, Clone, Copy)]
pub struct SizeBiasedPareto {
    pub tau: f64,
    pub iota: f64,
}

impl SizeBiasedPareto {
    pub fn new(tau: f64, iota: f64) -> Result<Self> {
        if !(3.0 < tau && tau < 4.0) || iota <= 0.0 {
            return param_err("need tau in (3,4) and iota > 0");
        }
        Ok(Self { tau, iota })
    }
}

impl PoissonMixer for SizeBiasedPareto {
    fn sample_mix<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        // Inverse transform on the tail; u in [0,1) keeps the value finite.
        self.iota * (1.0 - u).powf(-1.0 / (self.tau - 2.0))
    }

    fn mean(&self) -> f64 {
        self.iota * (self.tau - 2.0) / (self.tau - 3.0)
    }
}

/// Sample the tree, roots mixing with `root_mix`, everyone else with
/// `offspring_mix`, stopping after `max_gen` generations.
pub fn sample_mixed_poisson_bp<R: Rng>(
    offspring_mix: &DiscreteDistribution,
    root_mix: &DiscreteDistribution,
    max_gen: usize,
    rng: &mut R,
) -> BranchingTree {
    let mut parents = vec![0usize];
    let mut generation_sizes = vec![1usize];
    let mut current: Vec<usize> = vec![0];
    let mut truncated = false;
    for gen in 0..=max_gen {
        if current.is_empty() {
            break;
        }
        if gen == max_gen {
            truncated = true;
            break;
        }
        let mut next = Vec::new();
        for &v in &current {
            let mix = if v == 0 {
                root_mix.sample(rng)
            } else {
                offspring_mix.sample(rng)
            };
            let kids = poisson_count(mix, rng);
            for _ in 0..kids {
                next.push(parents.len());
                parents.push(v);
            }
        }
        if next.is_empty() {
            break;
        }
        generation_sizes.push(next.len());
        current = next;
    }
    BranchingTree {
        generation_sizes,
        parents,
        truncated,
    }
}

/// Generation-size-only simulation: returns `(total progeny, height,
/// truncated)`. Exploits that a sum of independent Poissons is Poisson of
/// the summed means.
pub fn simulate_progeny<R: Rng, M: PoissonMixer, N: PoissonMixer>(
    offspring_mix: &M,
    root_mix: &N,
    max_gen: usize,
    max_size: usize,
    rng: &mut R,
) -> (usize, usize, bool) {
    let mut total = 1usize;
    let mut gen_size = 1usize;
    let mut height = 0usize;
    let mut is_root = true;
    for _ in 0..max_gen {
        let mut mean = 0.0;
        for _ in 0..gen_size {
            mean += if is_root {
                root_mix.sample_mix(rng)
            } else {
                offspring_mix.sample_mix(rng)
            };
        }
        is_root = false;
        let next = poisson_count(mean, rng);
        if next == 0 {
            return (total, height, false);
        }
        total += next;
        height += 1;
        gen_size = next;
        if total >= max_size {
            return (total, height, true);
        }
    }
    (total, height, true)
}

/// Poisson mixture pmf `p(j) = E[e^-W W^j / j!]` over `0..=support_cap`,
/// returning the distribution and the truncated tail mass.
pub fn poisson_mixture_pmf(
    mix: &DiscreteDistribution,
    support_cap: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut pmf = vec![0.0f64; support_cap + 1];
    for (&w, &pw) in mix.values().iter().zip(mix.probs()) {
        // e^-w w^j / j! built iteratively.
        let mut term = (-w).exp();
        for (j, slot) in pmf.iter_mut().enumerate() {
            *slot += pw * term;
            term *= w / (j as f64 + 1.0);
        }
    }
    let mass: f64 = pmf.iter().sum();
    Ok((pmf, (1.0 - mass).max(0.0)))
}

/// Exact total-progeny probability `P(|T| = k) = (1/k) P(X_1+..+X_k = k-1)`
/// for integer-supported offspring, via k-fold convolution. Returns the
/// value and the accumulated truncation deficit of the convolution support.
pub fn otter_dwass_pmf(offspring_pmf: &[f64], k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return param_err("progeny size must be at least 1");
    }
    if offspring_pmf.is_empty() {
        return param_err("offspring pmf must be nonempty");
    }
    let cap = k; // only values 0..=k-1 of the sum matter
    let mut deficit = 1.0 - offspring_pmf.iter().sum::<f64>();
    let mut cur = vec![0.0f64; cap];
    for (j, &p) in offspring_pmf.iter().enumerate() {
        if j < cap {
            cur[j] = p;
        }
    }
    let mut acc = vec![0.0f64; cap];
    acc[0] = 1.0;
    // acc = offspring^(*k) restricted to 0..k-1.
    let mut remaining = k;
    let mut base = cur;
    while remaining > 0 {
        if remaining & 1 == 1 {
            acc = convolve_truncated(&acc, &base, cap);
        }
        remaining >>= 1;
        if remaining > 0 {
            base = convolve_truncated(&base, &base, cap);
        }
    }
    deficit = deficit.max(0.0);
    Ok((acc[k - 1] / k as f64, deficit))
}

fn convolve_truncated(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; cap];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if i + j >= cap {
                break;
            }
            out[i + j] += x * y;
        }
    }
    out
}

/// Monte-Carlo estimates of `P(height >= m)` over a grid of heights.
/// Returns `(m, p_hat, stderr)` rows.
pub fn height_tail<R: Rng, M: PoissonMixer>(
    offspring_mix: &M,
    m_values: &[usize],
    replicas: usize,
    rng: &mut R,
) -> Vec<(usize, f64, f64)> {
    let max_m = m_values.iter().copied().max().unwrap_or(0);
    let mut reached = vec![0u64; m_values.len()];
    for _ in 0..replicas {
        let (_, height, truncated) =
            simulate_progeny(offspring_mix, offspring_mix, max_m, usize::MAX, rng);
        let h = if truncated { max_m } else { height };
        for (i, &m) in m_values.iter().enumerate() {
            if h >= m {
                reached[i] += 1;
            }
        }
    }
    m_values
        .iter()
        .zip(&reached)
        .map(|(&m, &r)| {
            let p = r as f64 / replicas as f64;
            (m, p, (p * (1.0 - p) / replicas as f64).sqrt())
        })
        .collect()
}

/// Write `(m, p_hat, stderr)` rows as CSV.
pub fn write_tail_csv<W: Write>(rows: &[(usize, f64, f64)], out: &mut W) -> Result<()> {
    writeln!(out, "m,p_hat,stderr")?;
    for (m, p, se) in rows {
        writeln!(out, "{m},{p},{se}")?;
    }
    Ok(())
}

/// Size-biased mixing distribution built from the critical power-law weight
/// atoms themselves (the default discretization grid), rescaled so its mean
/// is exactly 1: the finite grid's second-to-first moment ratio approaches
/// criticality only at rate n^{-(tau-3)/(tau-1)}, and the branching bounds
/// assume an exactly critical mixer.
pub fn power_law_size_biased_mixer(tau: f64, iota: f64, grid_n: usize) -> Result<DiscreteDistribution> {
    let w = crate::weights::power_law_weights(grid_n, tau, iota)?;
    let base = DiscreteDistribution::from_atoms(w.values())?;
    let sb = size_biased(&base)?;
    let m = sb.mean();
    DiscreteDistribution::new(sb.values().iter().map(|v| v / m).collect(), sb.probs().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn size_biased_two_atoms() {
        let d = DiscreteDistribution::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let sb = size_biased(&d).unwrap();
        assert!((sb.probs()[1] - 2.0 / 3.0).abs() < 1e-12);
        // Degenerate stays degenerate.
        let c = DiscreteDistribution::degenerate(3.0);
        let sbc = size_biased(&c).unwrap();
        assert_eq!(sbc.values(), &[3.0]);
        assert_eq!(sbc.probs(), &[1.0]);
        // Mean of the size-biased law is E[X^2]/E[X].
        assert!((sb.mean() - d.second_moment() / d.mean()).abs() < 1e-12);
    }

    #[test]
    fn size_biased_twice_weights_by_square() {
        let d =
            DiscreteDistribution::new(vec![1.0, 2.0, 4.0], vec![0.5, 0.25, 0.25]).unwrap();
        let twice = size_biased(&size_biased(&d).unwrap()).unwrap();
        let m2 = d.second_moment();
        for ((v, p), q) in d.values().iter().zip(d.probs()).zip(twice.probs()) {
            assert!((q - v * v * p / m2).abs() < 1e-12);
        }
    }

    #[test]
    fn size_biased_needs_positive_mean() {
        let d = DiscreteDistribution::new(vec![0.0], vec![1.0]).unwrap();
        assert!(size_biased(&d).is_err());
    }

    #[test]
    fn bp_zero_offspring_is_root_only() {
        let zero = DiscreteDistribution::degenerate(0.0);
        let mut rng = rng_from_seed(3);
        let t = sample_mixed_poisson_bp(&zero, &zero, 10, &mut rng);
        assert_eq!(t.total_size(), 1);
        assert_eq!(t.height(), 0);
        assert!(!t.truncated);
    }

    #[test]
    fn bp_survival_one_generation() {
        // P(height >= 1) = 1 - E[e^-W_root] for a two-atom root mixer.
        let root = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.6, 0.4]).unwrap();
        let off = DiscreteDistribution::degenerate(1.0);
        let expect = 1.0 - (0.6 * (-0.5f64).exp() + 0.4 * (-2.0f64).exp());
        let mut rng = rng_from_seed(5);
        let reps = 100_000;
        let mut hits = 0usize;
        for _ in 0..reps {
            let t = sample_mixed_poisson_bp(&off, &root, 2, &mut rng);
            if t.height() >= 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / reps as f64;
        let se = (expect * (1.0 - expect) / reps as f64).sqrt();
        assert!((freq - expect).abs() < 3.5 * se, "freq={freq} expect={expect}");
    }

    #[test]
    fn bp_parent_links_consistent() {
        let off = DiscreteDistribution::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        let mut rng = rng_from_seed(7);
        for _ in 0..50 {
            let t = sample_mixed_poisson_bp(&off, &off, 30, &mut rng);
            assert_eq!(t.generation_sizes.iter().sum::<usize>(), t.total_size());
            for (v, &p) in t.parents.iter().enumerate() {
                assert!(p <= v);
            }
        }
    }

    #[test]
    fn critical_survival_decreasing_in_generation() {
        let off = DiscreteDistribution::degenerate(1.0);
        let mut rng = rng_from_seed(11);
        let reps = 20_000;
        let mut survive = [0u64; 3];
        let gens = [4usize, 8, 16];
        for _ in 0..reps {
            let (_, h, truncated) = simulate_progeny(&off, &off, 17, usize::MAX, &mut rng);
            let h = if truncated { 17 } else { h };
            for (i, &g) in gens.iter().enumerate() {
                if h >= g {
                    survive[i] += 1;
                }
            }
        }
        assert!(survive[0] > survive[1] && survive[1] > survive[2]);
    }

    #[test]
    fn otter_dwass_poisson_one() {
        // Poisson(1) offspring: P(|T|=1) = e^-1, P(|T|=2) = e^-2.
        let (pmf, deficit) =
            poisson_mixture_pmf(&DiscreteDistribution::degenerate(1.0), 40).unwrap();
        assert!(deficit < 1e-12);
        let (p1, _) = otter_dwass_pmf(&pmf, 1).unwrap();
        assert!((p1 - (-1.0f64).exp()).abs() < 1e-12);
        let (p2, _) = otter_dwass_pmf(&pmf, 2).unwrap();
        assert!((p2 - (-2.0f64).exp()).abs() < 1e-10, "p2={p2}");
    }

    #[test]
    fn otter_dwass_matches_simulation() {
        let mix = DiscreteDistribution::degenerate(1.0);
        let (pmf, _) = poisson_mixture_pmf(&mix, 60).unwrap();
        let mut rng = rng_from_seed(13);
        let reps = 200_000usize;
        let mut hist = vec![0u64; 21];
        for _ in 0..reps {
            let (size, _, truncated) = simulate_progeny(&mix, &mix, 10_000, 100_000, &mut rng);
            if !truncated && size <= 20 {
                hist[size] += 1;
            }
        }
        for k in 1..=20 {
            let (expect, _) = otter_dwass_pmf(&pmf, k).unwrap();
            let freq = hist[k] as f64 / reps as f64;
            assert!(
                (freq - expect).abs() < 0.005,
                "k={k} freq={freq} expect={expect}"
            );
        }
    }

    #[test]
    fn critical_power_law_mean_progeny_diverges() {
        // Criticality witness: partial sums of k P(|T|=k) keep growing.
        let mixer = power_law_size_biased_mixer(3.5, crate::weights::critical_iota(3.5), 2000)
            .unwrap();
        assert!((mixer.mean() - 1.0).abs() < 1e-9, "mean={}", mixer.mean());
        let mut rng = rng_from_seed(17);
        let reps = 30_000usize;
        let cap = 10_000usize;
        let mut sizes = Vec::with_capacity(reps);
        for _ in 0..reps {
            let (size, _, _) = simulate_progeny(&mixer, &mixer, usize::MAX, cap, &mut rng);
            sizes.push(size.min(cap));
        }
        let partial = |kmax: usize| -> f64 {
            sizes
                .iter()
                .filter(|&&s| s <= kmax)
                .map(|&s| s as f64)
                .sum::<f64>()
                / reps as f64
        };
        let s100 = partial(100);
        let s1000 = partial(1000);
        let s10000 = partial(10_000);
        // Gaps between successive decades must not shrink (divergence), in
        // contrast with a convergent series.
        assert!(s1000 - s100 > 0.5 * s100, "{s100} {s1000}");
        assert!(s10000 - s1000 > 0.5 * (s1000 - s100), "{s100} {s1000} {s10000}");
    }

    #[test]
    fn height_tail_basics() {
        let off = DiscreteDistribution::degenerate(0.9);
        let mut rng = rng_from_seed(19);
        let rows = height_tail(&off, &[0, 100], 20_000, &mut rng);
        assert_eq!(rows[0].1, 1.0); // m = 0 has probability 1
        assert!(rows[1].1 < 1e-3, "subcritical tail {}", rows[1].1);
    }
}
