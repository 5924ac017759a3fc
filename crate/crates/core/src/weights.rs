//! Weight sequences, entrance boundaries and exponent bookkeeping.
//!
//! Vertex weights follow the exact power law `F(x) = 1 - (iota/x)^(tau-1)`
//! on `[iota, inf)`, inverted at the grid `i/n`. The critical window
//! multiplies weights by `1 + lambda * n^{-eta}` and the rank-one graph maps
//! onto the multiplicative-coalescent parametrization `(x, t)` with
//! `x_i = n^{-rho} w_i`.

use crate::error::{param_err, Result};

/// Descending positive vertex weights with cached power sums.
#[derive(Debug, Clone)]
pub struct WeightSequence {
    values: Vec<f64>,
    sigma: [f64; 3],
}

impl WeightSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return param_err("weight sequence must be nonempty");
        }
        for w in values.windows(2) {
            if !(w[0] >= w[1]) {
                return param_err("weights must be descending");
            }
        }
        if *values.last().unwrap() <= 0.0 {
            return param_err("weights must be positive");
        }
        let mut sigma = [0.0; 3];
        for &v in &values {
            sigma[0] += v;
            sigma[1] += v * v;
            sigma[2] += v * v * v;
        }
        Ok(Self { values, sigma })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Power sum `sigma_r = sum_i values[i]^r` for `r` in 1..=3.
    pub fn sigma(&self, r: usize) -> f64 {
        assert!((1..=3).contains(&r));
        self.sigma[r - 1]
    }

    /// Total weight, `sigma_1`.
    pub fn total(&self) -> f64 {
        self.sigma[0]
    }

    /// Rescale every weight by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor <= 0.0 {
            return param_err(format!("scale factor must be positive, got {factor}"));
        }
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// Exponents derived from the tail index `tau` in (3,4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSet {
    pub tau: f64,
    /// Distance exponent `(tau-3)/(tau-1)`.
    pub eta: f64,
    /// Mass exponent `(tau-2)/(tau-1)`.
    pub rho: f64,
    /// Limit Minkowski dimension `(tau-2)/(tau-3)`.
    pub pi_dim: f64,
}

impl ExponentSet {
    pub fn new(tau: f64) -> Result<Self> {
        if !(3.0 < tau && tau < 4.0) {
            return param_err(format!("tau must be in (3,4), got {tau}"));
        }
        let set = Self {
            tau,
            eta: (tau - 3.0) / (tau - 1.0),
            rho: (tau - 2.0) / (tau - 1.0),
            pi_dim: (tau - 2.0) / (tau - 3.0),
        };
        debug_assert!((set.eta + 1.0 / (tau - 1.0) - set.rho).abs() < 1e-12);
        Ok(set)
    }
}

/// The value of `iota` that puts the exact power law at the critical point
/// `E[W^2]/E[W] = 1`.
pub fn critical_iota(tau: f64) -> f64 {
    (tau - 3.0) / (tau - 2.0)
}

/// Weights `w_i = iota * (n/i)^{1/(tau-1)}` (1-indexed `i`), the generalized
/// inverse of the exact power law evaluated at `i/n`.
pub fn power_law_weights(n: usize, tau: f64, iota: f64) -> Result<WeightSequence> {
    if n == 0 {
        return param_err("n must be at least 1");
    }
    // The exponent bookkeeping only admits tau in (3,4), but the inverse
    // formula itself is fine for any tau > 1; keep the spec's precondition
    // for (3,4) at call sites that need exponents. Here we accept tau in
    // (3,4) strictly.
    if !(3.0 < tau && tau < 4.0) {
        return param_err(format!("tau must be in (3,4), got {tau}"));
    }
    if iota <= 0.0 {
        return param_err(format!("iota must be positive, got {iota}"));
    }
    let inv = 1.0 / (tau - 1.0);
    let values = (1..=n)
        .map(|i| iota * (n as f64 / i as f64).powf(inv))
        .collect();
    WeightSequence::new(values)
}

/// Multiply every weight by `1 + lambda * n^{-(tau-3)/(tau-1)}`.
pub fn critical_window(w: &WeightSequence, lambda: f64, tau: f64) -> Result<WeightSequence> {
    let exps = ExponentSet::new(tau)?;
    let n = w.len() as f64;
    let mult = 1.0 + lambda * n.powf(-exps.eta);
    if mult <= 0.0 {
        return param_err(format!(
            "window multiplier 1 + lambda n^-eta = {mult} is not positive"
        ));
    }
    w.scaled(mult)
}

/// Map rank-one weights at window parameter `lambda` to the
/// multiplicative-coalescent pair `(x, t)`:
/// `x_i = n^{-rho} w_i` and `t = (1 + lambda n^{-eta}) n^{2 rho} / ell_n`,
/// so that `t x_i x_j = (1 + lambda n^{-eta}) w_i w_j / ell_n` exactly.
pub fn nr_to_mc_params(
    w: &WeightSequence,
    lambda: f64,
    tau: f64,
) -> Result<(WeightSequence, f64)> {
    let exps = ExponentSet::new(tau)?;
    let n = w.len() as f64;
    let mult = 1.0 + lambda * n.powf(-exps.eta);
    if mult <= 0.0 {
        return param_err(format!(
            "window multiplier 1 + lambda n^-eta = {mult} is not positive"
        ));
    }
    let x = w.scaled(n.powf(-exps.rho))?;
    let t = mult * n.powf(2.0 * exps.rho) / w.total();
    Ok((x, t))
}

/// Truncated entrance-boundary sequence. When built from `(alpha, tau)` the
/// entries are `c_j = alpha * j^{-1/(tau-1)}`.
#[derive(Debug, Clone)]
pub struct EntranceBoundary {
    c: Vec<f64>,
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
}

impl EntranceBoundary {
    /// Wrap an explicit descending positive sequence.
    pub fn from_values(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return param_err("entrance boundary must be nonempty");
        }
        for w in c.windows(2) {
            if !(w[0] >= w[1]) {
                return param_err("entrance boundary must be descending");
            }
        }
        if *c.last().unwrap() <= 0.0 {
            return param_err("entrance boundary entries must be positive");
        }
        Ok(Self {
            c,
            alpha: None,
            tau: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn sum_squares(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum()
    }

    pub fn sum_squares_upto(&self, j: usize) -> f64 {
        self.c.iter().take(j).map(|v| v * v).sum()
    }

    pub fn sum_cubes(&self) -> f64 {
        self.c.iter().map(|v| v * v * v).sum()
    }
}

/// The special sequence `c_j = alpha * j^{-1/(tau-1)}` truncated at `j_max`.
pub fn entrance_boundary(alpha: f64, tau: f64, j_max: usize) -> Result<EntranceBoundary> {
    if alpha <= 0.0 {
        return param_err(format!("alpha must be positive, got {alpha}"));
    }
    if !(3.0 < tau && tau < 4.0) {
        return param_err(format!("tau must be in (3,4), got {tau}"));
    }
    if j_max == 0 {
        return param_err("truncation index must be at least 1");
    }
    let inv = 1.0 / (tau - 1.0);
    let c = (1..=j_max)
        .map(|j| alpha * (j as f64).powf(-inv))
        .collect();
    Ok(EntranceBoundary {
        c,
        alpha: Some(alpha),
        tau: Some(tau),
    })
}

/// One row of the entrance-boundary diagnostic report.
#[derive(Debug, Clone)]
pub struct EntranceRow {
    pub n: usize,
    pub sigma2: f64,
    /// `sigma_3 / sigma_2^3`, which should approach `sum c_j^3`.
    pub third_moment_ratio: f64,
    /// `max_{j <= J} |x_j / sigma_2 - c_j|` over the first few coordinates.
    pub max_coordinate_gap: f64,
}

/// Diagnostic report for the three entrance-boundary limits.
#[derive(Debug, Clone)]
pub struct EntranceDiagnostics {
    pub rows: Vec<EntranceRow>,
    pub target_cube_sum: f64,
    pub flags: Vec<String>,
}

impl EntranceDiagnostics {
    pub fn clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Evaluate the three entrance-boundary limits along a family of weight
/// vectors indexed by increasing `n`, flagging non-monotone convergence.
pub fn check_entrance_assumptions(
    family: &[WeightSequence],
    c: &EntranceBoundary,
    coords: usize,
) -> Result<EntranceDiagnostics> {
    if family.len() < 2 {
        return param_err("need at least two weight vectors to judge a trend");
    }
    let target = c.sum_cubes();
    let mut rows = Vec::with_capacity(family.len());
    for x in family {
        let sigma2 = x.sigma(2);
        let ratio = x.sigma(3) / sigma2.powi(3);
        let j = coords.min(c.len()).min(x.len());
        let gap = (0..j)
            .map(|k| (x.values()[k] / sigma2 - c.values()[k]).abs())
            .fold(0.0_f64, f64::max);
        rows.push(EntranceRow {
            n: x.len(),
            sigma2,
            third_moment_ratio: ratio,
            max_coordinate_gap: gap,
        });
    }
    let mut flags = Vec::new();
    for w in rows.windows(2) {
        if w[1].sigma2 >= w[0].sigma2 {
            flags.push(format!(
                "sigma_2 not decreasing between n={} and n={}",
                w[0].n, w[1].n
            ));
        }
        if (w[1].third_moment_ratio - target).abs() > (w[0].third_moment_ratio - target).abs() {
            flags.push(format!(
                "third-moment gap grew between n={} and n={}",
                w[0].n, w[1].n
            ));
        }
        if w[1].max_coordinate_gap > w[0].max_coordinate_gap {
            flags.push(format!(
                "coordinate gap grew between n={} and n={}",
                w[0].n, w[1].n
            ));
        }
    }
    Ok(EntranceDiagnostics {
        rows,
        target_cube_sum: target,
        flags,
    })
}
