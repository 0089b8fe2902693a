//! Scalar statistics: max statistics, the smooth max, empirical laws and
//! the distance/concentration functionals used to compare them.

use serde::{Deserialize, Serialize};

use crate::datagen::DataMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaxMode {
    /// `max_j z_j`
    #[default]
    OneSided,
    /// `max_j |z_j|`
    Absolute,
}

impl MaxMode {
    #[inline]
    pub fn reduce(self, z: &[f64]) -> f64 {
        match self {
            MaxMode::OneSided => z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            MaxMode::Absolute => z.iter().fold(0.0, |m, &v| m.max(v.abs())),
        }
    }
}

/// Sorted sample of a scalar statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sample: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Sorts `sample`; NaN and infinities are rejected.
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty(
                "empirical distribution needs at least one value",
            ));
        }
        if let Some(pos) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        sample.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sample })
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    pub fn size(&self) -> usize {
        self.sample.len()
    }

    /// `#{x <= t} / size`
    pub fn cdf(&self, t: f64) -> f64 {
        self.sample.partition_point(|&x| x <= t) as f64 / self.size() as f64
    }

    /// Left limit `#{x < t} / size`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        self.sample.partition_point(|&x| x < t) as f64 / self.size() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sample.iter().sum::<f64>() / self.size() as f64
    }
}

/// `max_j √n (X̄_j - center_j)`, or its absolute version.
pub fn max_statistic(data: &DataMatrix, center: &[f64], mode: MaxMode) -> Result<f64> {
    if center.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            actual: center.len(),
        });
    }
    let n = data.n() as f64;
    let mut sums = vec![0.0; data.p()];
    for row in data.rows() {
        for (s, (&x, &c)) in sums.iter_mut().zip(row.iter().zip(center)) {
            *s += x - c;
        }
    }
    let scale = 1.0 / n.sqrt();
    sums.iter_mut().for_each(|s| *s *= scale);
    Ok(mode.reduce(&sums))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    Ok(())
}

/// Log-sum-exp smooth max `F_β(z) = β⁻¹ log Σ e^{β z_j}`.
pub fn smooth_max(z: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if z.is_empty() {
        return Err(Error::Empty("smooth_max of an empty vector"));
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = z.iter().map(|&v| (beta * (v - m)).exp()).sum();
    Ok(m + s.ln() / beta)
}

/// Softmax weights `π_j = e^{β z_j} / Σ_k e^{β z_k}`, the gradient of [`smooth_max`].
pub fn softmax_weights(z: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if z.is_empty() {
        return Err(Error::Empty("softmax of an empty vector"));
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = z.iter().map(|&v| (beta * (v - m)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Ok(w)
}

/// Bootstrap critical value `inf{t : #{x > t}/B <= α}`, i.e. the
/// `⌈(1-α)B⌉`-th order statistic (1-indexed).
pub fn upper_quantile(dist: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0,1), got {alpha}"),
        ));
    }
    let b = dist.size();
    // ⌈(1-α)B⌉ = B - ⌊αB⌋; the nudge absorbs representation error in αB.
    let allowed = (alpha * b as f64 * (1.0 + 1e-12)).floor() as usize;
    let k = b.saturating_sub(allowed).max(1);
    Ok(dist.sample[k - 1])
}

/// Exact two-sample Kolmogorov–Smirnov distance `sup_t |F_a(t) - F_b(t)|`.
pub fn two_sample_ks(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (xa, xb) = (a.sample(), b.sample());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    // Both CDFs are right-continuous steps; checking after each distinct
    // pooled value covers every left limit too.
    while i < xa.len() || j < xb.len() {
        let t = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(
            "eps",
            format!("must be positive, got {eps}"),
        ));
    }
    Ok(())
}

/// One-sided Lévy–Prokhorov pre-distance
/// `sup_t max[F_a(t-ε) - F_b(t⁻), F_b(t-ε) - F_a(t⁻), 0]`.
pub fn levy_prokhorov_pre(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    let mut pooled: Vec<f64> = a.sample().iter().chain(b.sample()).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let mut grid = Vec::with_capacity(pooled.len() * 3);
    grid.extend(pooled.iter().copied());
    grid.extend(pooled.iter().map(|x| x + eps));
    grid.extend(pooled.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let eta = grid
        .into_iter()
        .map(|t| {
            let g1 = a.cdf(t - eps) - b.cdf_left(t);
            let g2 = b.cdf(t - eps) - a.cdf_left(t);
            g1.max(g2)
        })
        .fold(0.0, f64::max);
    Ok(eta)
}

/// Lévy concentration function `sup_t #{t-ε < x < t} / size`.
pub fn concentration_fn(dist: &EmpiricalDistribution, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let x = dist.sample();
    // An optimal open window can be slid until its left end sits just below
    // some sample point x_i; it then holds the x_j in [x_i, x_i + ε).
    let mut best = 0usize;
    let mut hi = 0usize;
    for lo in 0..x.len() {
        if hi < lo {
            hi = lo;
        }
        while hi < x.len() && x[hi] - x[lo] < eps {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    Ok(best as f64 / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ed(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empirical_distribution_rejects_nan_and_empty() {
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        assert!(EmpiricalDistribution::new(vec![1.0, f64::NAN]).is_err());
        let d = ed(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(d.sample(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf_left(2.0), 0.25);
        assert_eq!(d.cdf(0.0), 0.0);
    }

    #[test]
    fn max_statistic_examples() {
        let zeros = DataMatrix::new(3, 4, vec![0.0; 12]).unwrap();
        for mode in [MaxMode::OneSided, MaxMode::Absolute] {
            assert_eq!(max_statistic(&zeros, &[0.0; 4], mode).unwrap(), 0.0);
        }
        let one = DataMatrix::from_rows(&[[3.0, -5.0]]).unwrap();
        assert_eq!(
            max_statistic(&one, &[0.0, 0.0], MaxMode::OneSided).unwrap(),
            3.0
        );
        assert_eq!(
            max_statistic(&one, &[0.0, 0.0], MaxMode::Absolute).unwrap(),
            5.0
        );
        assert!(max_statistic(&one, &[0.0], MaxMode::OneSided).is_err());
    }

    #[test]
    fn max_statistic_centering_identity() {
        let d =
            DataMatrix::from_rows(&[[1.0, 4.0, -2.0], [0.5, 2.0, 7.0], [3.0, -1.0, 0.25]]).unwrap();
        let means = d.column_means();
        let c = d.centered(&means).unwrap();
        for mode in [MaxMode::OneSided, MaxMode::Absolute] {
            let a = max_statistic(&d, &means, mode).unwrap();
            let b = max_statistic(&c, &[0.0; 3], mode).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn smooth_max_examples() {
        assert_eq!(smooth_max(&[1.7], 3.0).unwrap(), 1.7);
        let p = 7;
        let v = smooth_max(&vec![0.3; p], 2.0).unwrap();
        assert!((v - (0.3 + (p as f64).ln() / 2.0)).abs() < 1e-15);
        let v = smooth_max(&[0.0, -1000.0], 1.0).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(smooth_max(&[], 1.0).is_err());
        assert!(smooth_max(&[1.0], 0.0).is_err());
    }

    #[test]
    fn softmax_examples() {
        let w = softmax_weights(&[2.0; 4], 1.3).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let e = std::f64::consts::E;
        let w = softmax_weights(&[1.0, 0.0], 1.0).unwrap();
        assert!((w[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((w[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((w[0] - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn softmax_is_gradient_of_smooth_max() {
        // Central-difference oracle.
        let z = [0.4, -1.2, 0.9, 0.1, 0.85];
        let beta = 2.0;
        let h = 1e-6;
        let w = softmax_weights(&z, beta).unwrap();
        for j in 0..z.len() {
            let mut up = z;
            let mut dn = z;
            up[j] += h;
            dn[j] -= h;
            let fd = (smooth_max(&up, beta).unwrap() - smooth_max(&dn, beta).unwrap()) / (2.0 * h);
            assert!((fd - w[j]).abs() < 1e-6, "{j}: {fd} vs {}", w[j]);
        }
    }

    #[test]
    fn upper_quantile_examples() {
        let s: Vec<f64> = (1..=20).map(f64::from).collect();
        let d = ed(&s);
        // Enumerate the infimum definition directly.
        let brute = |alpha: f64| {
            *s.iter()
                .find(|&&t| s.iter().filter(|&&x| x > t).count() as f64 / 20.0 <= alpha)
                .unwrap()
        };
        assert_eq!(upper_quantile(&d, 0.05).unwrap(), 19.0);
        assert_eq!(upper_quantile(&d, 0.5).unwrap(), 10.0);
        for k in 1..100 {
            let a = k as f64 / 100.0;
            assert_eq!(upper_quantile(&d, a).unwrap(), brute(a), "alpha {a}");
        }
        assert_eq!(upper_quantile(&ed(&[4.2]), 0.3).unwrap(), 4.2);
        assert!(upper_quantile(&d, 0.0).is_err());
        assert!(upper_quantile(&d, 1.0).is_err());
    }

    #[test]
    fn ks_examples() {
        let a = ed(&[0.3, 1.0, 2.5]);
        assert_eq!(two_sample_ks(&a, &a), 0.0);
        assert_eq!(two_sample_ks(&ed(&[0.0, 0.0]), &ed(&[1.0, 1.0])), 1.0);
        assert_eq!(two_sample_ks(&ed(&[1.0, 3.0]), &ed(&[2.0, 4.0])), 0.5);
    }

    #[test]
    fn levy_prokhorov_examples() {
        let z = ed(&[0.0]);
        assert_eq!(levy_prokhorov_pre(&z, &z, 0.1).unwrap(), 0.0);
        assert_eq!(levy_prokhorov_pre(&z, &ed(&[1.0]), 0.5).unwrap(), 1.0);
        assert!(levy_prokhorov_pre(&z, &z, 0.0).is_err());
    }

    #[test]
    fn concentration_examples() {
        assert_eq!(concentration_fn(&ed(&[0.0]), 0.3).unwrap(), 1.0);
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(concentration_fn(&ed(&s), 0.5).unwrap(), 0.01);
        // Spacing δ, ε = 2.5δ: the open window (x_i - 0.01δ, x_i + 2.49δ)
        // holds x_i, x_i + δ and x_i + 2δ.
        let delta = 0.25;
        let g: Vec<f64> = (0..40).map(|k| k as f64 * delta).collect();
        assert_eq!(concentration_fn(&ed(&g), 2.5 * delta).unwrap(), 3.0 / 40.0);
        assert!(concentration_fn(&ed(&g), -1.0).is_err());
    }

    /// Brute-force ω(ε) over a dense grid of window positions.
    fn concentration_brute(x: &[f64], eps: f64) -> f64 {
        let mut cands: Vec<f64> = x
            .iter()
            .flat_map(|&v| [v + 1e-9, v + eps, v + eps - 1e-9])
            .collect();
        cands.extend(x.iter().map(|&v| v + 0.5 * eps));
        cands
            .into_iter()
            .map(|t| x.iter().filter(|&&v| t - eps < v && v < t).count())
            .max()
            .unwrap() as f64
            / x.len() as f64
    }

    /// Brute-force KS over a fine grid spanning the data.
    fn ks_brute(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
        a.sample()
            .iter()
            .chain(b.sample())
            .flat_map(|&t| [t, t - 1e-9])
            .map(|t| (a.cdf(t) - b.cdf(t)).abs())
            .fold(0.0, f64::max)
    }

    fn small_sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-20i32..20).prop_map(|k| k as f64 * 0.5), 1..25)
    }

    proptest! {
        #[test]
        fn smooth_max_sandwich(z in prop::collection::vec(-50.0f64..50.0, 1..200), beta in 0.01f64..50.0) {
            let f = smooth_max(&z, beta).unwrap();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = (z.len() as f64).ln() / beta;
            prop_assert!(f - m >= -1e-12);
            prop_assert!(f - m <= slack + 1e-12);
        }

        #[test]
        fn softmax_sums_to_one(z in prop::collection::vec(-30.0f64..30.0, 1..100), beta in 0.01f64..5.0) {
            let w = softmax_weights(&z, beta).unwrap();
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-14);
            prop_assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
        }

        #[test]
        fn ks_symmetric_bounded_exact(a in small_sample(), b in small_sample()) {
            let (da, db) = (ed(&a), ed(&b));
            let d = two_sample_ks(&da, &db);
            prop_assert_eq!(d, two_sample_ks(&db, &da));
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((d - ks_brute(&da, &db)).abs() < 1e-15);
        }

        #[test]
        fn quantile_monotone_in_alpha(a in small_sample()) {
            let d = ed(&a);
            let qs: Vec<f64> = (1..100).map(|k| upper_quantile(&d, k as f64 / 100.0).unwrap()).collect();
            prop_assert!(qs.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn levy_prokhorov_monotone_and_below_ks(a in small_sample(), b in small_sample(), e1 in 0.05f64..3.0, de in 0.0f64..3.0) {
            let (da, db) = (ed(&a), ed(&b));
            let small = levy_prokhorov_pre(&da, &db, e1).unwrap();
            let large = levy_prokhorov_pre(&da, &db, e1 + de).unwrap();
            prop_assert!(large <= small + 1e-15);
            prop_assert!(small <= two_sample_ks(&da, &db) + 1e-15);
        }

        #[test]
        fn concentration_matches_brute_force(a in small_sample(), eps in 0.1f64..4.0) {
            let d = ed(&a);
            prop_assert_eq!(concentration_fn(&d, eps).unwrap(), concentration_brute(d.sample(), eps));
        }
    }
}
