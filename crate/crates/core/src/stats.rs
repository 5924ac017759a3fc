//! Small statistics toolkit shared by tests and the experiment harness:
//! total-variation and Kolmogorov-Smirnov distances, chi-square statistics,
//! least-squares fits and moment helpers.

use std::collections::HashMap;
use std::hash::Hash;

/// Total variation distance between two empirical distributions given as
/// count maps (each normalized by its own total).
pub fn tv_counts<K: Eq + Hash + Clone>(a: &HashMap<K, u64>, b: &HashMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    assert!(na > 0 && nb > 0, "empty sample");
    let mut keys: Vec<&K> = a.keys().collect();
    for k in b.keys() {
        if !a.contains_key(k) {
            keys.push(k);
        }
    }
    let mut tv = 0.0;
    for k in keys {
        let pa = *a.get(k).unwrap_or(&0) as f64 / na as f64;
        let pb = *b.get(k).unwrap_or(&0) as f64 / nb as f64;
        tv += (pa - pb).abs();
    }
    tv / 2.0
}

/// Total variation distance between an empirical count map and an exact law.
pub fn tv_vs_exact<K: Eq + Hash>(counts: &HashMap<K, u64>, exact: &HashMap<K, f64>) -> f64 {
    let n: u64 = counts.values().sum();
    assert!(n > 0, "empty sample");
    let mut tv = 0.0;
    let mut seen_mass = 0.0;
    for (k, p) in exact {
        let pe = *counts.get(k).unwrap_or(&0) as f64 / n as f64;
        tv += (pe - p).abs();
        seen_mass += pe;
    }
    // Mass the sample put on keys outside the exact support.
    tv += 1.0 - seen_mass;
    tv / 2.0
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F1 - F2|.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Advance both samples past the smallest pending value so ties are
        // handled symmetrically.
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Pearson chi-square statistic for observed counts against expected
/// probabilities (expected counts must all be positive).
pub fn chi_square<K: Eq + Hash>(counts: &HashMap<K, u64>, exact: &HashMap<K, f64>) -> f64 {
    let n: u64 = counts.values().sum();
    let mut stat = 0.0;
    for (k, p) in exact {
        let e = p * n as f64;
        assert!(e > 0.0);
        let o = *counts.get(k).unwrap_or(&0) as f64;
        stat += (o - e) * (o - e) / e;
    }
    stat
}

/// Ordinary least squares fit `y = a + b x`; returns `(slope, intercept,
/// slope_stderr)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(xs.len() >= 2);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    assert!(sxx > 0.0, "degenerate abscissa grid");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        sse += r * r;
    }
    let stderr = if xs.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Sample mean and (unbiased) variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    assert!(xs.len() >= 2);
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Median of a sample (destructive on a copy).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_of_identical_counts_is_zero() {
        let mut a = HashMap::new();
        a.insert(1, 10u64);
        a.insert(2, 30u64);
        assert_eq!(tv_counts(&a, &a), 0.0);
    }

    #[test]
    fn tv_disjoint_is_one() {
        let mut a = HashMap::new();
        a.insert(1, 5u64);
        let mut b = HashMap::new();
        b.insert(2, 7u64);
        assert!((tv_counts(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_simple() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [10.0, 11.0];
        assert!((ks_two_sample(&xs, &ys) - 1.0).abs() < 1e-12);
        assert!(ks_two_sample(&xs, &xs) < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (s, a, se) = linear_fit(&xs, &ys);
        assert!((s - 2.5).abs() < 1e-12);
        assert!((a + 1.0).abs() < 1e-12);
        assert!(se < 1e-9);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
