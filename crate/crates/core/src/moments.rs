//! Plug-in moment functionals, the truncation operator, moment-tensor
//! differences and constant-free rate certificates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{resampling_center, BootstrapPlan};
use crate::datagen::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// Orders stored in the `mcal_m1` / `mcal_m2` maps.
pub const MCAL_ORDERS: [u32; 4] = [2, 3, 4, 6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenterMode {
    /// Center by the data's `known_mean`.
    KnownMean,
    /// Center by the column means.
    SampleMean,
}

fn center_of(data: &DataMatrix, mode: CenterMode) -> Result<Vec<f64>> {
    match mode {
        CenterMode::SampleMean => Ok(data.column_means()),
        CenterMode::KnownMean => data.known_mean().map(<[f64]>::to_vec).ok_or_else(|| {
            Error::invalid("center", "KnownMean requested but data has no known mean")
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    /// `max_j (n⁻¹ Σ_i |X_ij - c_j|²)^{1/2}`
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
    /// `min_j (n⁻¹ Σ_i |X_ij - c_j|²)^{1/2}`
    pub sigma_lower: f64,
    /// `(n⁻¹ Σ_i max_j |X_ij - c_j|⁴)^{1/4}`
    pub mcal4: f64,
    /// Average of the per-row maximal moment, by order.
    pub mcal_m1: BTreeMap<u32, f64>,
    /// Expected maximal average power, by order.
    pub mcal_m2: BTreeMap<u32, f64>,
}

/// Plug-in estimates with expectations replaced by averages over rows.
///
/// With one draw per row, the per-row expectation inside `𝓜_{m,1}` and the
/// outer expectation of `𝓜_{m,2}` are both estimated from the column
/// averages, so for i.i.d. rows each coincides with `M_m`.
pub fn estimate_moment_summary(data: &DataMatrix, center: CenterMode) -> Result<MomentSummary> {
    if data.n() < 2 {
        return Err(Error::invalid(
            "n",
            format!("needs n >= 2, got {}", data.n()),
        ));
    }
    let c = center_of(data, center)?;
    let (n, p) = (data.n(), data.p());
    let orders = [2u32, 3, 4, 6];
    // col_pow[k][j] = n⁻¹ Σ_i |X_ij - c_j|^{orders[k]}
    let mut col_pow = vec![vec![0.0; p]; orders.len()];
    let mut row_max4 = 0.0;
    for row in data.rows() {
        let mut mx: f64 = 0.0;
        for j in 0..p {
            let a = (row[j] - c[j]).abs();
            let a2 = a * a;
            col_pow[0][j] += a2;
            col_pow[1][j] += a2 * a;
            col_pow[2][j] += a2 * a2;
            col_pow[3][j] += a2 * a2 * a2;
            mx = mx.max(a);
        }
        row_max4 += mx.powi(4);
    }
    let inv = 1.0 / n as f64;
    for v in col_pow.iter_mut().flatten() {
        *v *= inv;
    }
    let max_root = |k: usize| {
        let m = col_pow[k].iter().copied().fold(0.0, f64::max);
        m.powf(1.0 / orders[k] as f64)
    };
    let m_by_order: BTreeMap<u32, f64> = orders
        .iter()
        .enumerate()
        .map(|(k, &o)| (o, max_root(k)))
        .collect();
    let sigma_lower = col_pow[0]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    Ok(MomentSummary {
        m2: m_by_order[&2],
        m4: m_by_order[&4],
        m6: m_by_order[&6],
        sigma_lower,
        mcal4: (row_max4 * inv).powf(0.25),
        mcal_m1: m_by_order.clone(),
        mcal_m2: m_by_order,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertScheme {
    Empirical,
    Wild,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    TailBranch,
    MomentBranch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub scheme: CertScheme,
    pub gamma_star: f64,
    pub branch: Branch,
    pub tail_value: f64,
    pub moment_value: f64,
    /// `b_n⁴ (log p)³ n⁻¹ M₄⁴`
    pub kappa_n4: f64,
    pub b_n: f64,
    /// Smallest admissible `M` for the scheme.
    pub m_const: f64,
    pub n: usize,
    pub p: usize,
}

/// `γ*_n = min{((log p)²(log np)³/n)^{1/6} M/σ̲, ((log np)⁵/n)^{1/6} (𝓜/σ̲)^{2/3}}`
/// with `M = 2(σ̲/M₄)^{1/3} M₄` and `𝓜 = 𝓜₄` for the empirical bootstrap,
/// `M = (σ̲/M₄)^{1/3} M₄` and `𝓜 = 𝓜_{4,2}` for the wild bootstrap.
///
/// `b_n` defaults to `{n^{1/2}/(M₄² σ̲ log p)}^{1/3} / t_n` with
/// `t_n = (M/σ̲)/(M₄/σ̲)^{2/3}`.
pub fn rate_certificate(
    summary: &MomentSummary,
    n: usize,
    p: usize,
    scheme: CertScheme,
    b_n: Option<f64>,
) -> Result<RateCertificate> {
    if n < 2 || p < 2 {
        return Err(Error::invalid(
            "n, p",
            format!("need n >= 2 and p >= 2, got n={n}, p={p}"),
        ));
    }
    let sl = summary.sigma_lower;
    if !(sl > 0.0) {
        return Err(Error::invalid(
            "sigma_lower",
            "degenerate: minimum column variance is zero",
        ));
    }
    let m4 = summary.m4;
    let (nf, pf) = (n as f64, p as f64);
    let (lp, lnp) = (pf.ln(), (nf * pf).ln());
    let factor = match scheme {
        CertScheme::Empirical => 2.0,
        CertScheme::Wild => 1.0,
    };
    let m_const = factor * (sl / m4).cbrt() * m4;
    let mcal = match scheme {
        CertScheme::Empirical => summary.mcal4,
        CertScheme::Wild => *summary
            .mcal_m2
            .get(&4)
            .ok_or_else(|| Error::invalid("mcal_m2", "order 4 missing"))?,
    };
    let tail_value = (lp.powi(2) * lnp.powi(3) / nf).powf(1.0 / 6.0) * m_const / sl;
    let moment_value = (lnp.powi(5) / nf).powf(1.0 / 6.0) * (mcal / sl).powf(2.0 / 3.0);
    let b_n = b_n.unwrap_or_else(|| {
        let t_n = (m_const / sl) / (m4 / sl).powf(2.0 / 3.0);
        (nf.sqrt() / (m4 * m4 * sl * lp)).cbrt() / t_n
    });
    let kappa_n4 = b_n.powi(4) * lp.powi(3) / nf * m4.powi(4);
    let (gamma_star, branch) = if tail_value <= moment_value {
        (tail_value, Branch::TailBranch)
    } else {
        (moment_value, Branch::MomentBranch)
    };
    Ok(RateCertificate {
        scheme,
        gamma_star,
        branch,
        tail_value,
        moment_value,
        kappa_n4,
        b_n,
        m_const,
        n,
        p,
    })
}

/// `X̃_ij = X_ij 1{|X_ij| ≤ a_n} - c_j`. With `SampleMean`, `c_j` is the mean
/// of the truncated column; with `KnownMean`, `c_j` is the data's known mean.
pub fn truncate_centered(data: &DataMatrix, a_n: f64, center: CenterMode) -> Result<DataMatrix> {
    if !(a_n > 0.0) {
        return Err(Error::invalid(
            "a_n",
            format!("must be positive, got {a_n}"),
        ));
    }
    let p = data.p();
    let mut vals: Vec<f64> = data
        .values()
        .iter()
        .map(|&x| if x.abs() <= a_n { x } else { 0.0 })
        .collect();
    let c = match center {
        CenterMode::KnownMean => center_of(data, CenterMode::KnownMean)?,
        CenterMode::SampleMean => {
            let mut m = vec![0.0; p];
            for row in vals.chunks_exact(p) {
                for (a, &x) in m.iter_mut().zip(row) {
                    *a += x;
                }
            }
            m.iter_mut().for_each(|a| *a /= data.n() as f64);
            m
        }
    };
    for row in vals.chunks_exact_mut(p) {
        for (x, cj) in row.iter_mut().zip(&c) {
            *x -= cj;
        }
    }
    DataMatrix::new(data.n(), p, vals)
}

/// Largest `p` allowed for a dense order-`m` moment tensor.
pub fn tensor_guard(order: usize) -> Option<usize> {
    match order {
        2 => Some(1024),
        3 => Some(64),
        4 => Some(16),
        _ => None,
    }
}

/// Nondecreasing index tuples `j_1 ≤ … ≤ j_m`; moment tensors are symmetric
/// so these cover every distinct entry.
pub fn sorted_tuples(p: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; m];
    loop {
        out.push(cur.clone());
        // advance like an odometer keeping the tuple nondecreasing
        let mut k = m;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] + 1 < p {
                let v = cur[k] + 1;
                for c in cur.iter_mut().skip(k) {
                    *c = v;
                }
                break;
            }
        }
    }
}

/// `‖μ̂^{(m)} − ν̂^{(m)}‖_max` and, when requested, the same norm with `ν̂`
/// replaced by a Monte Carlo average over bootstrap replicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorDiff {
    pub exact: f64,
    pub monte_carlo: Option<f64>,
}

/// Max-norm difference between the average moment tensor of the centered
/// data and the exact conditional moment tensor of the bootstrap draws.
///
/// Wild schemes have `ν^{(m)} = E W^m · n⁻¹ Σ X̃_i^{⊗m}`; the empirical
/// bootstrap has `ν^{(m)} = n⁻¹ Σ_k X̃_k^{⊗m}`. `b_reps_for_nu > 0` adds a
/// Monte Carlo estimate of `ν` as a cross-check.
pub fn moment_tensor_diff_max(
    data: &DataMatrix,
    plan: &BootstrapPlan,
    order: usize,
    b_reps_for_nu: usize,
    seed: SeedSpec,
) -> Result<TensorDiff> {
    plan.validate()?;
    let limit = tensor_guard(order)
        .ok_or_else(|| Error::invalid("order", format!("must be 2, 3 or 4, got {order}")))?;
    if data.p() > limit {
        return Err(Error::TensorGuard {
            order,
            p: data.p(),
            limit,
        });
    }
    if data.n() < 2 {
        return Err(Error::invalid("n", "needs n >= 2"));
    }
    let centered = data.centered(&resampling_center(data, &plan.scheme))?;
    let tuples = sorted_tuples(data.p(), order);
    let nf = data.n() as f64;
    let product = |row: &[f64], t: &[usize]| t.iter().map(|&j| row[j]).product::<f64>();

    let mu: Vec<f64> = tuples
        .iter()
        .map(|t| centered.rows().map(|r| product(r, t)).sum::<f64>() / nf)
        .collect();

    let nu: Vec<f64> = match plan.scheme.multiplier() {
        Some(kind) => {
            let ew = kind.moment(order as u32);
            tuples
                .iter()
                .map(|t| centered.rows().map(|r| ew * product(r, t)).sum::<f64>() / nf)
                .collect()
        }
        None => {
            // E*(X*_i)^{⊗m} = n⁻¹ Σ_k X̃_k^{⊗m}, identical for every i.
            let per_draw: Vec<f64> = tuples
                .iter()
                .map(|t| centered.rows().map(|r| product(r, t)).sum::<f64>() / nf)
                .collect();
            per_draw
        }
    };
    let exact = mu
        .iter()
        .zip(&nu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let monte_carlo = (b_reps_for_nu > 0).then(|| {
        let mut acc = vec![0.0; tuples.len()];
        let mut draw = vec![0.0; data.p()];
        for r in 0..b_reps_for_nu {
            let mut rng = crate::bootstrap::rep_seed(seed, r).rng();
            for i in 0..data.n() {
                match plan.scheme.multiplier() {
                    Some(kind) => {
                        let w = kind.sample(&mut rng);
                        draw.iter_mut()
                            .zip(centered.row(i))
                            .for_each(|(d, &x)| *d = w * x);
                    }
                    None => {
                        use rand::Rng;
                        let k = rng.random_range(0..data.n());
                        draw.copy_from_slice(centered.row(k));
                    }
                }
                for (a, t) in acc.iter_mut().zip(&tuples) {
                    *a += product(&draw, t);
                }
            }
        }
        let scale = 1.0 / (nf * b_reps_for_nu as f64);
        mu.iter()
            .zip(&acc)
            .map(|(m, a)| (m - a * scale).abs())
            .fold(0.0, f64::max)
    });
    Ok(TensorDiff { exact, monte_carlo })
}
