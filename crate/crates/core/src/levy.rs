//! Event-exact simulation of the jump-drift process driven by an entrance
//! boundary, its reflection at the running minimum, excursion extraction,
//! per-excursion limit parameters, rank-one limit constants, and the
//! thinned Lévy process with hitting times.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{param_err, Result};
use crate::icrt::ThetaSequence;
use crate::weights::{entrance_boundary, EntranceBoundary};

/// A jump of the path: `(time, size, index of the driving coordinate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
    pub index: usize,
}

/// Piecewise-linear path: `value(s) = start + drift*s + sum of jump sizes
/// with time <= s`. Jump times are strictly increasing.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearPath {
    pub start: f64,
    pub drift: f64,
    pub jumps: Vec<Jump>,
    pub horizon: f64,
}

impl PiecewiseLinearPath {
    pub fn new(start: f64, drift: f64, mut jumps: Vec<Jump>, horizon: f64) -> Result<Self> {
        if horizon <= 0.0 {
            return param_err("horizon must be positive");
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        // Ties perturbed deterministically (measure-zero under sampling).
        for i in 1..jumps.len() {
            if jumps[i].time <= jumps[i - 1].time {
                jumps[i].time = jumps[i - 1].time * (1.0 + 1e-15) + 1e-300;
            }
        }
        if jumps.iter().any(|j| j.time < 0.0 || j.size < 0.0) {
            return param_err("jumps must have nonnegative time and size");
        }
        Ok(Self {
            start,
            drift,
            jumps,
            horizon,
        })
    }

    pub fn value(&self, s: f64) -> f64 {
        let mut v = self.start + self.drift * s;
        for j in &self.jumps {
            if j.time <= s {
                v += j.size;
            } else {
                break;
            }
        }
        v
    }

    /// Event CSV: `time,value` rows at 0, each jump (post-jump value) and
    /// the horizon.
    pub fn write_events_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "time,value")?;
        writeln!(out, "0,{}", self.start)?;
        for j in &self.jumps {
            writeln!(out, "{},{}", j.time, self.value(j.time))?;
        }
        writeln!(out, "{},{}", self.horizon, self.value(self.horizon))?;
        Ok(())
    }
}

/// `V(s) = lambda s + sum_j (c_j 1{xi_j <= s} - c_j^2 s)` with independent
/// `xi_j ~ Exp(c_j)`, truncated at the boundary's length: the compensator
/// drift uses exactly the simulated coordinates.
pub fn build_levy_path<R: Rng>(
    c: &EntranceBoundary,
    lambda: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<PiecewiseLinearPath> {
    if horizon <= 0.0 {
        return param_err("horizon must be positive");
    }
    let mut jumps = Vec::new();
    let mut drift = lambda;
    for (idx, &cj) in c.values().iter().enumerate() {
        drift -= cj * cj;
        let xi = Exp::new(cj)
            .map_err(|e| crate::error::Error::Parameter(format!("bad rate: {e}")))?
            .sample(rng);
        if xi <= horizon {
            jumps.push(Jump {
                time: xi,
                size: cj,
                index: idx,
            });
        }
    }
    PiecewiseLinearPath::new(0.0, drift, jumps, horizon)
}

/// Reflection `V - running_min(V)` with the minimum tracked segment by
/// segment (it can only advance along negative-drift stretches).
#[derive(Debug, Clone)]
pub struct ReflectedPath {
    pub path: PiecewiseLinearPath,
    /// Per segment: `(t0, value_at_t0, min_up_to_t0)`; segment `i` spans
    /// from `t0[i]` to `t0[i+1]` (or the horizon).
    segs: Vec<(f64, f64, f64)>,
}

pub fn reflect(path: &PiecewiseLinearPath) -> ReflectedPath {
    let mut segs = Vec::with_capacity(path.jumps.len() + 1);
    let mut t0 = 0.0f64;
    let mut v0 = path.start;
    let mut m0 = path.start;
    segs.push((t0, v0, m0));
    let d = path.drift;
    for j in &path.jumps {
        // End of current segment at the jump time.
        let dt = j.time - t0;
        let v_end = v0 + d * dt;
        if d < 0.0 {
            m0 = m0.min(v_end);
        }
        t0 = j.time;
        v0 = v_end + j.size;
        segs.push((t0, v0, m0));
    }
    ReflectedPath {
        path: path.clone(),
        segs,
    }
}

impl ReflectedPath {
    fn locate(&self, s: f64) -> (f64, f64, f64) {
        let idx = self
            .segs
            .partition_point(|&(t0, _, _)| t0 <= s)
            .saturating_sub(1);
        self.segs[idx]
    }

    /// Raw path value at `s`.
    pub fn raw(&self, s: f64) -> f64 {
        let (t0, v0, _) = self.locate(s);
        v0 + self.path.drift * (s - t0)
    }

    /// Exact running minimum of the raw path over `[0, s]`.
    pub fn min_up_to(&self, s: f64) -> f64 {
        let (t0, v0, m0) = self.locate(s);
        let v = v0 + self.path.drift * (s - t0);
        if self.path.drift < 0.0 {
            m0.min(v)
        } else {
            m0.min(v0)
        }
    }

    /// Reflected value, nonnegative by construction.
    pub fn value(&self, s: f64) -> f64 {
        (self.raw(s) - self.min_up_to(s)).max(0.0)
    }

    pub fn horizon(&self) -> f64 {
        self.path.horizon
    }
}

/// One excursion of the reflected path above zero.
#[derive(Debug, Clone)]
pub struct Excursion {
    pub start: f64,
    pub end: f64,
    pub length: f64,
    pub jump_indices: Vec<usize>,
    /// False when the horizon clipped the excursion.
    pub complete: bool,
}

/// Excursions sorted by length descending (ties by start time ascending);
/// incomplete excursions are excluded from the ranking and appended last.
#[derive(Debug, Clone)]
pub struct ExcursionSet {
    pub excursions: Vec<Excursion>,
}

impl ExcursionSet {
    pub fn complete(&self) -> impl Iterator<Item = &Excursion> {
        self.excursions.iter().filter(|e| e.complete)
    }

    pub fn largest_complete(&self) -> Option<&Excursion> {
        self.complete().next()
    }

    /// `rank,start,end,length,n_jumps` rows (complete excursions first).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "rank,start,end,length,n_jumps,complete")?;
        for (rank, e) in self.excursions.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rank + 1,
                e.start,
                e.end,
                e.length,
                e.jump_indices.len(),
                e.complete
            )?;
        }
        Ok(())
    }
}

/// Extract the maximal intervals where the reflected path is positive; all
/// endpoints are exact roots of the piecewise-linear structure. The scan
/// tracks the "pinned to the running minimum" state symbolically, so no
/// floating-point equality tests are involved.
pub fn excursions(r: &ReflectedPath) -> ExcursionSet {
    let path = &r.path;
    let d = path.drift;
    let mut out: Vec<Excursion> = Vec::new();
    let mut t = 0.0f64;
    let mut v = path.start;
    let mut pinned = true; // V(0) equals its own running min
    let mut cur_start = 0.0f64;
    let mut cur_jumps: Vec<usize> = Vec::new();
    let mut m = path.start;

    let mut close = |start: f64, end: f64, jumps: &mut Vec<usize>, complete: bool| {
        out.push(Excursion {
            start,
            end,
            length: end - start,
            jump_indices: std::mem::take(jumps),
            complete,
        });
    };

    let mut events: Vec<(f64, Option<&Jump>)> = path.jumps.iter().map(|j| (j.time, Some(j))).collect();
    events.push((path.horizon, None));
    for (te, jump) in events {
        let dt = te - t;
        if dt > 0.0 {
            if pinned {
                if d > 0.0 {
                    // Lifts off the minimum: an excursion starts here.
                    pinned = false;
                    cur_start = t;
                    cur_jumps.clear();
                    v += d * dt;
                } else {
                    v += d * dt;
                    m = v;
                }
            } else if d < 0.0 && v + d * dt <= m {
                // Hits the running minimum inside this segment.
                let s_end = t + (m - v) / d;
                close(cur_start, s_end, &mut cur_jumps, true);
                pinned = true;
                v += d * dt;
                m = v;
            } else {
                v += d * dt;
            }
        }
        match jump {
            Some(j) => {
                if j.size > 0.0 {
                    if pinned {
                        pinned = false;
                        cur_start = j.time;
                        cur_jumps.clear();
                    }
                    cur_jumps.push(j.index);
                }
                v += j.size;
                t = j.time;
            }
            None => {
                t = te;
                if !pinned {
                    close(cur_start, path.horizon, &mut cur_jumps, false);
                }
            }
        }
    }
    let mut complete: Vec<Excursion> = Vec::new();
    let mut clipped: Vec<Excursion> = Vec::new();
    for e in out {
        if e.complete {
            complete.push(e);
        } else {
            clipped.push(e);
        }
    }
    complete.sort_by(|a, b| {
        b.length
            .total_cmp(&a.length)
            .then_with(|| a.start.total_cmp(&b.start))
    });
    complete.extend(clipped);
    ExcursionSet {
        excursions: complete,
    }
}

/// Per-excursion scaling parameters: with `s2 = sum of c_j^2` over the
/// excursion's jumps and `Z` its length, returns
/// `(gamma_bar, theta, Gamma) = (Z sqrt(s2), (c_j/sqrt(s2)) desc, Z/sqrt(s2))`.
pub fn component_limit_params(
    exc: &Excursion,
    c: &EntranceBoundary,
) -> Result<(f64, ThetaSequence, f64)> {
    if !exc.complete {
        return param_err("excursion clipped by the horizon");
    }
    if exc.jump_indices.is_empty() {
        return param_err("excursion carries no jumps");
    }
    let mut vals: Vec<f64> = exc
        .jump_indices
        .iter()
        .map(|&j| c.values()[j])
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let s2: f64 = vals.iter().map(|v| v * v).sum();
    let root = s2.sqrt();
    let theta = ThetaSequence::new(vals.iter().map(|v| v / root).collect())?;
    Ok((exc.length * root, theta, exc.length / root))
}

/// Limit constants of the rank-one model: the boundary
/// `c_j = (1/EW)(c_F/j)^{1/(tau-1)}`, the drift shift `zeta` (series summed
/// to relative accuracy 1e-8 with an Euler-Maclaurin tail), and
/// `t_nr = (lambda + zeta)/EW`.
#[derive(Debug, Clone)]
pub struct NrConstants {
    pub c: EntranceBoundary,
    pub zeta: f64,
    pub t_nr: f64,
}

pub fn nr_limit_constants(
    tau: f64,
    c_f: f64,
    mean_w: f64,
    lambda: f64,
    j_max: usize,
) -> Result<NrConstants> {
    if !(3.0 < tau && tau < 4.0) {
        return param_err("tau must be in (3,4)");
    }
    if c_f <= 0.0 || mean_w <= 0.0 {
        return param_err("c_F and E[W] must be positive");
    }
    let alpha = c_f.powf(1.0 / (tau - 1.0)) / mean_w;
    let c = entrance_boundary(alpha, tau, j_max)?;
    let beta = 2.0 / (tau - 1.0);
    // sum_{i>=1} [ int_{i-1}^i u^-beta du - i^-beta ]; every term is
    // nonnegative because the integrand is decreasing.
    let m_terms = 100_000usize;
    let mut s = 1.0 / (1.0 - beta) - 1.0; // i = 1 term
    for i in 2..=m_terms {
        let im1 = (i - 1) as f64;
        // (i^{1-b} - (i-1)^{1-b})/(1-b) computed cancellation-free.
        let inc = im1.powf(1.0 - beta) * ((1.0 - beta) * (1.0 / im1).ln_1p()).exp_m1()
            / (1.0 - beta);
        s += inc - (i as f64).powf(-beta);
    }
    // Euler-Maclaurin tail: M^-b/2 - b M^-(b+1)/12 + O(M^-(b+3)).
    let mf = m_terms as f64;
    s += mf.powf(-beta) / 2.0 - beta * mf.powf(-beta - 1.0) / 12.0;
    let zeta = -(c_f.powf(beta) / mean_w) * s;
    Ok(NrConstants {
        c,
        zeta,
        t_nr: (lambda + zeta) / mean_w,
    })
}

/// Reusable sampler for the thinned Lévy process
/// `S_t = b - a b t + c t + sum_{j != i, j <= J} (b j^{-1/(tau-1)}) [I_j(t) - a t j^{-1/(tau-1)}]`
/// where `I_j` flips at an independent `Exp(a j^{-1/(tau-1)})` time. The
/// compensator series is summed once at construction, and the flip set is
/// drawn with geometric skips under the (monotone in `j`) within-horizon
/// flip probabilities, so one path costs O(number of flips).
#[derive(Debug, Clone)]
pub struct ThinnedLevySampler {
    pub a: f64,
    pub b: f64,
    pub c_const: f64,
    pub tau: f64,
    pub j_thin: usize,
    pub horizon: f64,
    inv: f64,
    compensator_sum: f64,
}

impl ThinnedLevySampler {
    pub fn new(
        a: f64,
        b: f64,
        c_const: f64,
        tau: f64,
        j_thin: usize,
        horizon: f64,
    ) -> Result<Self> {
        if !(3.0 < tau && tau < 4.0) {
            return param_err("tau must be in (3,4)");
        }
        if a <= 0.0 || b < 0.0 || horizon <= 0.0 || j_thin == 0 {
            return param_err("need a > 0, b >= 0, horizon > 0, j_thin >= 1");
        }
        let inv = 1.0 / (tau - 1.0);
        let compensator_sum = (1..=j_thin)
            .map(|j| (j as f64).powf(-2.0 * inv))
            .sum::<f64>();
        Ok(Self {
            a,
            b,
            c_const,
            tau,
            j_thin,
            horizon,
            inv,
            compensator_sum,
        })
    }

    /// Sample the path with coordinate `i_skip` excluded; returns the path
    /// and the hitting time of zero if one occurs within the horizon.
    pub fn sample<R: Rng>(&self, i_skip: usize, rng: &mut R) -> (PiecewiseLinearPath, Option<f64>) {
        let mut comp = self.compensator_sum;
        if (1..=self.j_thin).contains(&i_skip) {
            comp -= (i_skip as f64).powf(-2.0 * self.inv);
        }
        let drift = self.c_const - self.a * self.b - self.a * self.b * comp;
        let mut jumps = Vec::new();
        if self.b > 0.0 {
            // Within-horizon flip probability p_j = 1 - exp(-a h j^-inv) is
            // decreasing in j: skip geometrically under the envelope of the
            // current position and thin, exactly as in the edge sampler.
            let mut j = 1usize;
            let mut pbar = 1.0 - (-self.a * self.horizon).exp();
            while j <= self.j_thin {
                if pbar <= 0.0 {
                    break;
                }
                let skip = if pbar >= 1.0 {
                    0u64
                } else {
                    (rng.gen::<f64>().ln() / (-pbar).ln_1p()).floor() as u64
                };
                if skip >= (self.j_thin - j + 1) as u64 {
                    break;
                }
                j += skip as usize;
                let jf = j as f64;
                let rate = self.a * jf.powf(-self.inv);
                let pj = 1.0 - (-rate * self.horizon).exp();
                if rng.gen::<f64>() < pj / pbar && j != i_skip {
                    // Flip time conditioned to land inside the horizon.
                    let u: f64 = rng.gen();
                    let flip = -(-u * pj).ln_1p() / rate;
                    jumps.push(Jump {
                        time: flip,
                        size: self.b * jf.powf(-self.inv),
                        index: j,
                    });
                }
                pbar = pj;
                j += 1;
            }
        }
        let path = PiecewiseLinearPath::new(self.b, drift, jumps, self.horizon)
            .expect("validated parameters");
        let hit = hitting_time_of_zero(&path);
        (path, hit)
    }
}

/// One-shot thinned Lévy sample; see [`ThinnedLevySampler`].
#[allow(clippy::too_many_arguments)]
pub fn thinned_levy<R: Rng>(
    i: usize,
    a: f64,
    b: f64,
    c_const: f64,
    tau: f64,
    j_thin: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<(PiecewiseLinearPath, Option<f64>)> {
    Ok(ThinnedLevySampler::new(a, b, c_const, tau, j_thin, horizon)?.sample(i, rng))
}

/// First time the path reaches level zero from above (or starts at or below
/// zero with non-upward motion).
pub fn hitting_time_of_zero(path: &PiecewiseLinearPath) -> Option<f64> {
    let mut t = 0.0f64;
    let mut v = path.start;
    if v < 0.0 {
        return Some(0.0);
    }
    if v == 0.0 && path.drift <= 0.0 {
        return Some(0.0);
    }
    let d = path.drift;
    for j in path
        .jumps
        .iter()
        .map(Some)
        .chain(std::iter::once(None))
    {
        let te = j.map_or(path.horizon, |j| j.time);
        let dt = te - t;
        if d < 0.0 && v + d * dt <= 0.0 {
            return Some(t - v / d);
        }
        v += d * dt;
        t = te;
        if let Some(j) = j {
            v += j.size;
        }
    }
    None
}
