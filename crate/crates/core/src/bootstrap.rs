//! Resampling schemes for the max statistic.
//!
//! * Empirical: rows drawn uniformly with replacement from `X_i - X̄`.
//! * Wild: `X*_i = W_i (X_i - X̄)` with i.i.d. multipliers.
//! * Mixed wild: `X**_i = W**_i (X_i - μ)` with the Gaussian/Mammen mixture
//!   multiplier and no sample-mean centering.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datagen::DataMatrix;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{tag, SeedSpec, StreamRng};
use crate::stat_core::{EmpiricalDistribution, MaxMode};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Mammen's two-point law on `(1 ± √5)/2`.
pub mod mammen {
    use super::SQRT5;
    /// `(1 + √5)/2`
    pub const UPPER: f64 = (1.0 + SQRT5) / 2.0;
    /// `(1 - √5)/2`
    pub const LOWER: f64 = (1.0 - SQRT5) / 2.0;
    /// `P{W = (1 + √5)/2} = (√5 - 1)/(2√5)`
    pub const P_UPPER: f64 = (SQRT5 - 1.0) / (2.0 * SQRT5);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MultiplierKind {
    Gaussian,
    Rademacher,
    Mammen,
    /// `a₀ δ Z + b₀ (1-δ) W⁰`, `δ ~ Bernoulli(p₀)`, `Z ~ N(0,1)`, `W⁰` Mammen.
    Mixed {
        p0: f64,
    },
}

/// Coefficients `(a₀, b₀)` of the mixed multiplier, fixed by
/// `a₀² p₀ + b₀² (1-p₀) = 1` and `b₀³ (1-p₀) = 1`.
pub fn mixed_coefficients(p0: f64) -> Result<(f64, f64)> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::invalid("p0", format!("must lie in (0,1), got {p0}")));
    }
    let c = (1.0 - p0).cbrt();
    Ok((((1.0 - c) / p0).sqrt(), 1.0 / c))
}

fn mammen_draw(rng: &mut StreamRng) -> f64 {
    if rng.random::<f64>() < mammen::P_UPPER {
        mammen::UPPER
    } else {
        mammen::LOWER
    }
}

impl MultiplierKind {
    pub fn validate(&self) -> Result<()> {
        if let MultiplierKind::Mixed { p0 } = *self {
            mixed_coefficients(p0)?;
        }
        Ok(())
    }

    /// Exact population moment `E W^m`.
    pub fn moment(&self, m: u32) -> f64 {
        match *self {
            MultiplierKind::Gaussian => {
                if m % 2 == 1 {
                    0.0
                } else {
                    // (m-1)!!
                    (1..m).step_by(2).map(f64::from).product()
                }
            }
            MultiplierKind::Rademacher => {
                if m % 2 == 1 {
                    0.0
                } else {
                    1.0
                }
            }
            MultiplierKind::Mammen => {
                mammen::P_UPPER * mammen::UPPER.powi(m as i32)
                    + (1.0 - mammen::P_UPPER) * mammen::LOWER.powi(m as i32)
            }
            MultiplierKind::Mixed { p0 } => {
                let (a0, b0) = mixed_coefficients(p0).expect("validated p0");
                let g = MultiplierKind::Gaussian.moment(m);
                let w = MultiplierKind::Mammen.moment(m);
                p0 * a0.powi(m as i32) * g + (1.0 - p0) * b0.powi(m as i32) * w
            }
        }
    }

    /// `(E W, E W², E W³)`.
    pub fn moments(&self) -> (f64, f64, f64) {
        (self.moment(1), self.moment(2), self.moment(3))
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.sample_tagged(rng).0
    }

    /// Draw plus whether the Gaussian branch fired (always `true` for
    /// [`MultiplierKind::Gaussian`], always `false` for the two-point laws).
    pub fn sample_tagged(&self, rng: &mut StreamRng) -> (f64, bool) {
        match *self {
            MultiplierKind::Gaussian => (StandardNormal.sample(rng), true),
            MultiplierKind::Rademacher => (if rng.random::<bool>() { 1.0 } else { -1.0 }, false),
            MultiplierKind::Mammen => (mammen_draw(rng), false),
            MultiplierKind::Mixed { p0 } => {
                let (a0, b0) = mixed_coefficients(p0).expect("validated p0");
                if rng.random::<f64>() < p0 {
                    let z: f64 = StandardNormal.sample(rng);
                    (a0 * z, true)
                } else {
                    (b0 * mammen_draw(rng), false)
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            MultiplierKind::Gaussian => "Gaussian".into(),
            MultiplierKind::Rademacher => "Rademacher".into(),
            MultiplierKind::Mammen => "Mammen".into(),
            MultiplierKind::Mixed { p0 } => format!("Mixed({p0})"),
        }
    }
}

/// `(E W, E W², E W³)` of the multiplier law.
pub fn multiplier_moments(kind: MultiplierKind) -> (f64, f64, f64) {
    kind.moments()
}

/// `n` i.i.d. multipliers from `seed`'s stream.
pub fn draw_multipliers(kind: MultiplierKind, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    kind.validate()?;
    let mut rng = seed.rng();
    Ok((0..n).map(|_| kind.sample(&mut rng)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    Empirical,
    Wild(MultiplierKind),
    MixedWild { p0: f64 },
}

impl Scheme {
    pub fn label(&self) -> String {
        match *self {
            Scheme::Empirical => "Empirical".into(),
            Scheme::Wild(k) => k.label(),
            Scheme::MixedWild { p0 } => format!("MixedWild({p0})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Scheme::Empirical => Ok(()),
            Scheme::Wild(k) => k.validate(),
            Scheme::MixedWild { p0 } => mixed_coefficients(p0).map(|_| ()),
        }
    }

    /// Empirical and wild schemes subtract `X̄`; the mixed scheme does not.
    pub fn centers_by_sample_mean(&self) -> bool {
        !matches!(self, Scheme::MixedWild { .. })
    }

    /// Multiplier law driving the scheme, if any.
    pub fn multiplier(&self) -> Option<MultiplierKind> {
        match *self {
            Scheme::Empirical => None,
            Scheme::Wild(k) => Some(k),
            Scheme::MixedWild { p0 } => Some(MultiplierKind::Mixed { p0 }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub scheme: Scheme,
    pub b_reps: usize,
}

impl BootstrapPlan {
    pub const DEFAULT_B_REPS: usize = 500;

    pub fn new(scheme: Scheme, b_reps: usize) -> Result<Self> {
        let plan = BootstrapPlan { scheme, b_reps };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_reps == 0 {
            return Err(Error::invalid("b_reps", "must be at least 1"));
        }
        self.scheme.validate()
    }

    pub fn center_by_sample_mean(&self) -> bool {
        self.scheme.centers_by_sample_mean()
    }
}

/// Center applied to the data before resampling. Mixed wild uses the known
/// mean when present and falls back to `X̄` with a warning.
pub fn resampling_center(data: &DataMatrix, scheme: &Scheme) -> Vec<f64> {
    if scheme.centers_by_sample_mean() {
        return data.column_means();
    }
    match data.known_mean() {
        Some(m) => m.to_vec(),
        None => {
            log::warn!("mixed wild bootstrap without a known mean: centering by the sample mean");
            data.column_means()
        }
    }
}

/// Data centered once, reused by every replicate.
pub(crate) struct Prepared {
    centered: DataMatrix,
    scheme: Scheme,
}

impl Prepared {
    pub(crate) fn new(data: &DataMatrix, scheme: Scheme) -> Result<Self> {
        if data.n() < 2 {
            return Err(Error::invalid(
                "n",
                format!("bootstrap needs n >= 2, got {}", data.n()),
            ));
        }
        scheme.validate()?;
        let center = resampling_center(data, &scheme);
        Ok(Prepared {
            centered: data.centered(&center)?,
            scheme,
        })
    }

    /// Scaled bootstrap sum `Σ_i X*_i / √n` into `acc`.
    pub(crate) fn scaled_sum(&self, rng: &mut StreamRng, acc: &mut [f64]) {
        let d = &self.centered;
        let n = d.n();
        acc.iter_mut().for_each(|a| *a = 0.0);
        match self.scheme {
            Scheme::Empirical => {
                for _ in 0..n {
                    let k = rng.random_range(0..n);
                    for (a, &x) in acc.iter_mut().zip(d.row(k)) {
                        *a += x;
                    }
                }
            }
            Scheme::Wild(kind) => {
                for row in d.rows() {
                    let w = kind.sample(rng);
                    for (a, &x) in acc.iter_mut().zip(row) {
                        *a += w * x;
                    }
                }
            }
            Scheme::MixedWild { p0 } => {
                let kind = MultiplierKind::Mixed { p0 };
                for row in d.rows() {
                    let w = kind.sample(rng);
                    for (a, &x) in acc.iter_mut().zip(row) {
                        *a += w * x;
                    }
                }
            }
        }
        let s = 1.0 / (n as f64).sqrt();
        acc.iter_mut().for_each(|a| *a *= s);
    }

    pub(crate) fn stat(&self, seed: SeedSpec, mode: MaxMode, acc: &mut [f64]) -> f64 {
        let mut rng = seed.rng();
        self.scaled_sum(&mut rng, acc);
        mode.reduce(acc)
    }

    pub(crate) fn p(&self) -> usize {
        self.centered.p()
    }
}

/// One draw of the bootstrapped max statistic.
pub fn bootstrap_stat_once(
    data: &DataMatrix,
    plan: &BootstrapPlan,
    mode: MaxMode,
    seed: SeedSpec,
) -> Result<f64> {
    plan.validate()?;
    let prep = Prepared::new(data, plan.scheme)?;
    let mut acc = vec![0.0; prep.p()];
    Ok(prep.stat(seed, mode, &mut acc))
}

/// Seed of replicate `rep` within a bootstrap distribution.
pub fn rep_seed(seed: SeedSpec, rep: usize) -> SeedSpec {
    seed.derive(tag::REP, rep as u64)
}

/// `b_reps` conditionally independent draws of the bootstrapped statistic.
/// Replicate `r` always uses [`rep_seed`]`(seed, r)`, so the result does not
/// depend on evaluation order.
pub fn bootstrap_distribution(
    data: &DataMatrix,
    plan: &BootstrapPlan,
    mode: MaxMode,
    seed: SeedSpec,
) -> Result<EmpiricalDistribution> {
    plan.validate()?;
    let prep = Prepared::new(data, plan.scheme)?;
    let p = prep.p();
    let stats = par::map_indexed(plan.b_reps, |r| {
        let mut acc = vec![0.0; p];
        prep.stat(rep_seed(seed, r), mode, &mut acc)
    });
    EmpiricalDistribution::new(stats)
}

/// Sequential variant of [`bootstrap_distribution`] with a reused buffer;
/// produces the identical distribution.
pub fn bootstrap_distribution_seq(
    data: &DataMatrix,
    plan: &BootstrapPlan,
    mode: MaxMode,
    seed: SeedSpec,
) -> Result<EmpiricalDistribution> {
    plan.validate()?;
    let prep = Prepared::new(data, plan.scheme)?;
    let mut acc = vec![0.0; prep.p()];
    let stats = (0..plan.b_reps)
        .map(|r| prep.stat(rep_seed(seed, r), mode, &mut acc))
        .collect();
    EmpiricalDistribution::new(stats)
}

/// Conditional mean and standard deviation of the mixed wild sum
/// `Z**_j = n^{-1/2} Σ_i W**_i X_{i,j}` given the branch indicators and the
/// Mammen draws: `μ_j = b₀ n^{-1/2} Σ (1-δ_i) W⁰_i X_{i,j}`,
/// `σ_j = (a₀² n⁻¹ Σ δ_i X_{i,j}²)^{1/2}`. `data` is used as given.
pub fn mixed_conditional_moments(
    data: &DataMatrix,
    p0: f64,
    gaussian_branch: &[bool],
    mammen_draws: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a0, b0) = mixed_coefficients(p0)?;
    let n = data.n();
    for len in [gaussian_branch.len(), mammen_draws.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let p = data.p();
    let mut mu = vec![0.0; p];
    let mut var = vec![0.0; p];
    for (i, row) in data.rows().enumerate() {
        for j in 0..p {
            if gaussian_branch[i] {
                var[j] += row[j] * row[j];
            } else {
                mu[j] += mammen_draws[i] * row[j];
            }
        }
    }
    let nf = n as f64;
    mu.iter_mut().for_each(|m| *m *= b0 / nf.sqrt());
    let sd = var.into_iter().map(|v| (a0 * a0 * v / nf).sqrt()).collect();
    Ok((mu, sd))
}
