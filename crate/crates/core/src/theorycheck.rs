//! Numerical checks of the smooth-max and interpolation machinery:
//! derivative tensors of `F_β` and their ℓ₁ bounds, softmax stability under
//! perturbation, the permutation-averaged Lindeberg identity, and Gaussian
//! anti-concentration.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{tag, SeedSpec};
use crate::stat_core::{smooth_max, softmax_weights};

/// `‖β^{1-m} F_β^{(m)}‖₁ ≤ C_m` for m = 1..4.
pub const L1_BOUNDS: [f64; 4] = [1.0, 2.0, 6.0, 26.0];

/// Largest `p` for a dense derivative tensor.
pub const DERIVATIVE_P_MAX: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub details: String,
}

impl CheckReport {
    fn new(
        name: impl Into<String>,
        max_violation: f64,
        tolerance: f64,
        trials: usize,
        details: String,
    ) -> Self {
        CheckReport {
            name: name.into(),
            passed: max_violation <= tolerance,
            max_violation,
            tolerance,
            trials,
            details,
        }
    }
}

/// Dense symmetric tensor with `dim^order` entries, first index slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeTensor {
    pub order: usize,
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl DerivativeTensor {
    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.dim + j)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.offset(idx)]
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entry difference under any transposition of two axes.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.order];
        for code in 0..self.entries.len() {
            decode(code, self.dim, &mut idx);
            for a in 0..self.order {
                for b in a + 1..self.order {
                    let mut t = idx.clone();
                    t.swap(a, b);
                    worst = worst.max((self.entries[code] - self.get(&t)).abs());
                }
            }
        }
        worst
    }
}

fn decode(mut code: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = code % dim;
        code /= dim;
    }
}

/// `F_β^{(m)}(z)` for `m = 1..4` from the softmax expansion
///
/// ```text
/// F^{(1)}       = π
/// β^{-1} F^{(2)} = π^{(2)} − π^{(1,1)}
/// β^{-2} F^{(3)} = π^{(3)} − 3π^{(2,1)} + 2π^{(1,1,1)}
/// β^{-3} F^{(4)} = π^{(4)} − 4π^{(3,1)} − 3π^{(2,2)} + 12π^{(2,1,1)} − 6π^{(1,1,1,1)}
/// ```
///
/// where `π^{(k)}` is the order-k diagonal tensor carrying the softmax
/// weights and `π^{(k₁,…)}` symmetrizes their outer product. Each Sym term is
/// evaluated as the average over the distinct ways of splitting the index
/// positions into blocks of the given sizes.
pub fn fbeta_derivative(z: &[f64], beta: f64, order: usize) -> Result<DerivativeTensor> {
    if !(1..=4).contains(&order) {
        return Err(Error::invalid(
            "order",
            format!("must be 1..=4, got {order}"),
        ));
    }
    let p = z.len();
    if p > DERIVATIVE_P_MAX {
        return Err(Error::TensorGuard {
            order,
            p,
            limit: DERIVATIVE_P_MAX,
        });
    }
    let w = softmax_weights(z, beta)?;
    let scale = beta.powi(order as i32 - 1);
    let len = p.pow(order as u32);
    let mut entries = Vec::with_capacity(len);
    let mut idx = vec![0usize; order];
    for code in 0..len {
        decode(code, p, &mut idx);
        entries.push(scale * softmax_combination(&w, &idx));
    }
    Ok(DerivativeTensor {
        order,
        dim: p,
        entries,
    })
}

fn softmax_combination(w: &[f64], idx: &[usize]) -> f64 {
    let eq = |a: usize, b: usize| idx[a] == idx[b];
    let pi = |a: usize| w[idx[a]];
    match idx.len() {
        1 => pi(0),
        2 => {
            let d2 = if eq(0, 1) { pi(0) } else { 0.0 };
            d2 - pi(0) * pi(1)
        }
        3 => {
            let d3 = if eq(0, 1) && eq(1, 2) { pi(0) } else { 0.0 };
            // π^{(2,1)}: the singleton is one of the three positions.
            let mut p21 = 0.0;
            for (s, (a, b)) in [(2, (0, 1)), (1, (0, 2)), (0, (1, 2))] {
                if eq(a, b) {
                    p21 += pi(a) * pi(s);
                }
            }
            p21 /= 3.0;
            let p111 = pi(0) * pi(1) * pi(2);
            d3 - 3.0 * p21 + 2.0 * p111
        }
        4 => {
            let all = eq(0, 1) && eq(1, 2) && eq(2, 3);
            let d4 = if all { pi(0) } else { 0.0 };
            // π^{(3,1)}: singleton position s, the other three share an index.
            let mut p31 = 0.0;
            for s in 0..4 {
                let o: Vec<usize> = (0..4).filter(|&k| k != s).collect();
                if eq(o[0], o[1]) && eq(o[1], o[2]) {
                    p31 += pi(o[0]) * pi(s);
                }
            }
            p31 /= 4.0;
            // π^{(2,2)}: three pairings.
            let mut p22 = 0.0;
            for ((a, b), (c, d)) in [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))] {
                if eq(a, b) && eq(c, d) {
                    p22 += pi(a) * pi(c);
                }
            }
            p22 /= 3.0;
            // π^{(2,1,1)}: six choices of the paired positions.
            let mut p211 = 0.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    if eq(a, b) {
                        let rest: f64 = (0..4).filter(|&k| k != a && k != b).map(pi).product();
                        p211 += pi(a) * rest;
                    }
                }
            }
            p211 /= 6.0;
            let p1111 = pi(0) * pi(1) * pi(2) * pi(3);
            d4 - 4.0 * p31 - 3.0 * p22 + 12.0 * p211 - 6.0 * p1111
        }
        _ => unreachable!(),
    }
}

/// Fourth-order central difference of the order-(m−1) closed form (or of
/// `F_β` itself for m = 1) along each axis, compared with the order-m
/// tensor. Returns the max-norm error relative to the tensor's max entry.
pub fn derivative_fd_error(z: &[f64], beta: f64, order: usize, h: f64) -> Result<f64> {
    let exact = fbeta_derivative(z, beta, order)?;
    let p = z.len();
    let lower = |zz: &[f64]| -> Result<Vec<f64>> {
        if order == 1 {
            Ok(vec![smooth_max(zz, beta)?])
        } else {
            Ok(fbeta_derivative(zz, beta, order - 1)?.entries)
        }
    };
    let mut worst: f64 = 0.0;
    for axis in 0..p {
        let shifted = |k: f64| -> Result<Vec<f64>> {
            let mut zz = z.to_vec();
            zz[axis] += k * h;
            lower(&zz)
        };
        let (p2, p1, m1, m2) = (shifted(2.0)?, shifted(1.0)?, shifted(-1.0)?, shifted(-2.0)?);
        // Entry (i_1..i_{m-1}, axis) of the order-m tensor.
        for (pos, ((a, b), (c, d))) in p2.iter().zip(&p1).zip(m1.iter().zip(&m2)).enumerate() {
            let fd = (-a + 8.0 * b - 8.0 * c + d) / (12.0 * h);
            let code = pos * p + axis;
            worst = worst.max((fd - exact.entries[code]).abs());
        }
    }
    Ok(worst / exact.max_abs().max(f64::MIN_POSITIVE))
}

/// Finite-difference tolerances by derivative order.
pub fn fd_tolerance(order: usize) -> f64 {
    if order <= 3 {
        1e-5
    } else {
        1e-3
    }
}

/// One report per derivative order, each over `points` random `z ∈ R^p`.
pub fn check_derivative_identities(
    points: usize,
    p: usize,
    beta: f64,
    seed: SeedSpec,
) -> Result<Vec<CheckReport>> {
    let mut rng = seed.derive(tag::CHECK, 1).rng();
    let zs: Vec<Vec<f64>> = (0..points)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    (1..=4)
        .map(|order| {
            let mut worst: f64 = 0.0;
            for z in &zs {
                worst = worst.max(derivative_fd_error(z, beta, order, 1e-3)?);
            }
            Ok(CheckReport::new(
                format!("derivative_fd_order{order}"),
                worst,
                fd_tolerance(order),
                points,
                format!("p={p} beta={beta} max relative error {worst:.3e}"),
            ))
        })
        .collect()
}

fn random_point(rng: &mut crate::rng::StreamRng, p_max: usize) -> (Vec<f64>, f64) {
    let p = rng.random_range(1..=p_max);
    let spread = 10f64.powf(rng.random_range(-2.0..2.0));
    let z = (0..p)
        .map(|_| {
            spread * {
                let v: f64 = StandardNormal.sample(rng);
                v
            }
        })
        .collect();
    let beta = 10f64.powf(rng.random_range(-1.0..1.0));
    (z, beta)
}

/// `‖β^{1−m} F_β^{(m)}(z)‖₁ ≤ C_m` over random `(z, β, p ≤ p_max)`.
pub fn check_l1_bounds(trials: usize, p_max: usize, seed: SeedSpec) -> Result<CheckReport> {
    if p_max == 0 || p_max > DERIVATIVE_P_MAX {
        return Err(Error::invalid(
            "p_max",
            format!("must be in 1..={DERIVATIVE_P_MAX}"),
        ));
    }
    let mut rng = seed.derive(tag::CHECK, 2).rng();
    let mut violation: f64 = 0.0;
    let mut ratio = [0.0f64; 4];
    for _ in 0..trials {
        let (z, beta) = random_point(&mut rng, p_max);
        for m in 1..=4 {
            let t = fbeta_derivative(&z, beta, m)?;
            let norm = t.l1_norm() / beta.powi(m as i32 - 1);
            let c = L1_BOUNDS[m - 1];
            violation = violation.max(norm - c);
            ratio[m - 1] = ratio[m - 1].max(norm / c);
        }
    }
    Ok(CheckReport::new(
        "l1_bounds",
        violation.max(0.0),
        1e-12,
        trials,
        format!(
            "max ||.||_1 / C_m for m=1..4: {:.6} {:.6} {:.6} {:.6}",
            ratio[0], ratio[1], ratio[2], ratio[3]
        ),
    ))
}

/// `0 ≤ F_β(z) − max z ≤ log p / β` over random draws with `p ≤ p_max`.
pub fn check_smooth_max_sandwich(
    trials: usize,
    p_max: usize,
    seed: SeedSpec,
) -> Result<CheckReport> {
    let mut rng = seed.derive(tag::CHECK, 3).rng();
    let mut violation: f64 = 0.0;
    for _ in 0..trials {
        let (z, beta) = random_point(&mut rng, p_max.max(1));
        let f = smooth_max(&z, beta)?;
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = f - m;
        violation = violation.max(-gap).max(gap - (z.len() as f64).ln() / beta);
    }
    Ok(CheckReport::new(
        "smooth_max_sandwich",
        violation.max(0.0),
        1e-12,
        trials,
        format!("p <= {p_max}"),
    ))
}

/// `e^{−2‖t‖β} π_j(z) ≤ π_j(z+t) ≤ e^{2‖t‖β} π_j(z)` over random `(z, t, β)`.
pub fn check_softmax_stability(trials: usize, seed: SeedSpec) -> Result<CheckReport> {
    let mut rng = seed.derive(tag::CHECK, 4).rng();
    let mut violation: f64 = 0.0;
    for _ in 0..trials {
        let (z, beta) = random_point(&mut rng, 50);
        let t_scale = 10f64.powf(rng.random_range(-3.0..0.5));
        let t: Vec<f64> = z
            .iter()
            .map(|_| t_scale * rng.random_range(-1.0..1.0))
            .collect();
        violation = violation.max(softmax_stability_violation(&z, &t, beta)?);
    }
    Ok(CheckReport::new(
        "softmax_stability",
        violation,
        1e-12,
        trials,
        String::new(),
    ))
}

/// Largest amount by which `π(z+t)` leaves the multiplicative band.
pub fn softmax_stability_violation(z: &[f64], t: &[f64], beta: f64) -> Result<f64> {
    if z.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            actual: t.len(),
        });
    }
    let base = softmax_weights(z, beta)?;
    let zt: Vec<f64> = z.iter().zip(t).map(|(a, b)| a + b).collect();
    let moved = softmax_weights(&zt, beta)?;
    let tn = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let factor = (2.0 * tn * beta).exp();
    Ok(base
        .iter()
        .zip(&moved)
        .map(|(&b, &m)| (m - factor * b).max(b / factor - m))
        .fold(0.0, f64::max))
}

/// Test functions `f(x_1, …, x_n)` for the permutation-averaging identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `F_β(Σ x_i / √n)`
    SmoothMaxOfSum {
        beta: f64,
    },
    /// `(Σ x_i)ᵀ (Σ x_i)`
    SquaredNormOfSum,
    Constant(f64),
    /// First coordinate of `x_1`; not permutation invariant.
    FirstArgument,
}

impl TestFunction {
    pub fn is_permutation_invariant(&self) -> bool {
        !matches!(self, TestFunction::FirstArgument)
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "smoothmax" => Ok(TestFunction::SmoothMaxOfSum { beta: 2.0 }),
            "sqnorm" => Ok(TestFunction::SquaredNormOfSum),
            "const" => Ok(TestFunction::Constant(1.0)),
            "first" => Ok(TestFunction::FirstArgument),
            other => Err(Error::invalid(
                "f",
                format!("unknown test function `{other}`"),
            )),
        }
    }

    pub fn eval(&self, args: &[&[f64]]) -> f64 {
        let sum = || {
            let p = args[0].len();
            let mut s = vec![0.0; p];
            for a in args {
                s.iter_mut().zip(a.iter()).for_each(|(x, y)| *x += y);
            }
            s
        };
        match *self {
            TestFunction::SmoothMaxOfSum { beta } => {
                let r = 1.0 / (args.len() as f64).sqrt();
                let z: Vec<f64> = sum().into_iter().map(|v| v * r).collect();
                smooth_max(&z, beta).expect("beta > 0, nonempty")
            }
            TestFunction::SquaredNormOfSum => sum().iter().map(|v| v * v).sum(),
            TestFunction::Constant(c) => c,
            TestFunction::FirstArgument => args[0][0],
        }
    }
}

/// All permutations of `0..n` (Heap's algorithm).
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// `A_{σ,k}(1{σ_k = i} f(U_{σ,k}, ζ_{k,i}))` for every `i`, by exhaustive
/// enumeration over permutations `σ`, positions `k` and both branches of
/// `δ_k` (weights `k/(n+1)` and `(n+1−k)/(n+1)`).
///
/// `U_{σ,k} = (X_{σ_1}, …, X_{σ_{k−1}}, X*_{σ_{k+1}}, …, X*_{σ_n})`.
pub fn lindeberg_averages(x: &[Vec<f64>], x_star: &[Vec<f64>], f: &TestFunction) -> Vec<f64> {
    let n = x.len();
    let mut acc = vec![0.0; n];
    let perms = permutations(n);
    let np1 = (n + 1) as f64;
    let mut args: Vec<&[f64]> = Vec::with_capacity(n);
    for sigma in &perms {
        for k in 1..=n {
            let i = sigma[k - 1];
            args.clear();
            args.extend(sigma[..k - 1].iter().map(|&s| x[s].as_slice()));
            args.extend(sigma[k..].iter().map(|&s| x_star[s].as_slice()));
            args.push(x[i].as_slice());
            let with_x = f.eval(&args);
            *args.last_mut().unwrap() = x_star[i].as_slice();
            let with_star = f.eval(&args);
            acc[i] += (k as f64 * with_x + (np1 - k as f64) * with_star) / np1;
        }
    }
    let denom = (n * perms.len()) as f64;
    acc.iter_mut().for_each(|v| *v /= denom);
    acc
}

/// Draws `X` (Gaussian) and `X*` (Mammen-multiplied Gaussian) of size `n × p`
/// and checks that the permutation average does not depend on `i`.
pub fn check_lindeberg_permutation(
    n: usize,
    p: usize,
    f: TestFunction,
    seed: SeedSpec,
) -> Result<CheckReport> {
    if !(2..=6).contains(&n) {
        return Err(Error::invalid("n", format!("must be in 2..=6, got {n}")));
    }
    if !(1..=3).contains(&p) {
        return Err(Error::invalid("p", format!("must be in 1..=3, got {p}")));
    }
    if !f.is_permutation_invariant() {
        return Err(Error::invalid(
            "f",
            format!("{f:?} is not permutation invariant"),
        ));
    }
    let mut rng = seed.derive(tag::CHECK, 5).rng();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mammen = crate::bootstrap::MultiplierKind::Mammen;
    let x_star: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let w = mammen.sample(&mut rng);
            (0..p)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    w * g + 0.5
                })
                .collect()
        })
        .collect();
    let values = lindeberg_averages(&x, &x_star, &f);
    let dev = values
        .iter()
        .map(|v| (v - values[0]).abs())
        .fold(0.0, f64::max);
    Ok(CheckReport::new(
        format!("lindeberg_n{n}_p{p}"),
        dev,
        1e-12,
        1,
        format!("{f:?}: value {:.12}", values[0]),
    ))
}

/// Independent Gaussian coordinates `ξ_j ~ N(μ_j, σ_j²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianModel {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl GaussianModel {
    pub fn iid(p: usize, sd: f64) -> Self {
        GaussianModel {
            means: vec![0.0; p],
            sds: vec![sd; p],
        }
    }
}

/// `(ε/σ̲){4 + √(2 log(pσ̲/ε))}`, with the logarithm floored at zero.
pub fn anticoncentration_bound(p: usize, sigma_lower: f64, eps: f64) -> f64 {
    let l = (p as f64 * sigma_lower / eps).ln().max(0.0);
    eps / sigma_lower * (4.0 + (2.0 * l).sqrt())
}

pub const ANTICONC_GRID: usize = 512;

/// Monte Carlo `sup_a P{a < max_j ξ_j ≤ a + ε}` over a 512-point grid of `a`
/// spanning `[m − 4s, m + 4s + ε]` (m, s the mean and sd of the simulated
/// maxima), returned with its binomial standard error.
pub fn sup_interval_probability(
    model: &GaussianModel,
    eps: f64,
    mc_reps: usize,
    seed: SeedSpec,
) -> (f64, f64) {
    let mut rng = seed.derive(tag::CHECK, 6).rng();
    let mut maxima: Vec<f64> = (0..mc_reps)
        .map(|_| {
            model
                .means
                .iter()
                .zip(&model.sds)
                .map(|(&mu, &sd)| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    mu + sd * g
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    maxima.sort_by(f64::total_cmp);
    let r = mc_reps as f64;
    let mean = maxima.iter().sum::<f64>() / r;
    let sd = (maxima.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r).sqrt();
    let (lo, hi) = (mean - 4.0 * sd, mean + 4.0 * sd + eps);
    let mut best = (0.0, 0.0);
    for g in 0..ANTICONC_GRID {
        let a = lo + (hi - lo) * g as f64 / (ANTICONC_GRID - 1) as f64;
        let count = maxima.partition_point(|&v| v <= a + eps) - maxima.partition_point(|&v| v <= a);
        let prob = count as f64 / r;
        if prob > best.0 {
            best = (prob, (prob * (1.0 - prob) / r).sqrt());
        }
    }
    best
}

pub fn check_gaussian_anticoncentration(
    p: usize,
    sigma_lower: f64,
    eps: f64,
    mc_reps: usize,
    seed: SeedSpec,
    model: Option<GaussianModel>,
) -> Result<CheckReport> {
    if mc_reps < 10_000 {
        return Err(Error::invalid(
            "mc_reps",
            format!("must be at least 10^4, got {mc_reps}"),
        ));
    }
    if !(sigma_lower > 0.0) || !(eps > 0.0) || p == 0 {
        return Err(Error::invalid("p, sigma_lower, eps", "must be positive"));
    }
    let model = model.unwrap_or_else(|| GaussianModel::iid(p, sigma_lower));
    if model.means.len() != p || model.sds.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: model.means.len().min(model.sds.len()),
        });
    }
    if model.sds.iter().any(|&s| s < sigma_lower) {
        return Err(Error::invalid(
            "model",
            "every sd must be at least sigma_lower",
        ));
    }
    let bound = anticoncentration_bound(p, sigma_lower, eps);
    let (prob, se) = sup_interval_probability(&model, eps, mc_reps, seed);
    let upper = prob + 4.0 * se;
    Ok(CheckReport::new(
        format!("anticoncentration_p{p}_eps{eps}"),
        (upper - bound).max(0.0),
        0.0,
        mc_reps,
        format!("sup prob {prob:.5} + 4se = {upper:.5} vs bound {bound:.5}"),
    ))
}

/// Groups of checks run by `maxboot check`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    SmoothMax,
    Lindeberg,
    AntiConc,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "smoothmax" => Ok(Suite::SmoothMax),
            "lindeberg" => Ok(Suite::Lindeberg),
            "anticonc" => Ok(Suite::AntiConc),
            other => Err(Error::Config(format!(
                "unknown suite `{other}` (expected all, smoothmax, lindeberg or anticonc)"
            ))),
        }
    }
}

/// Sandwich, derivative and stability checks on `F_β`.
pub fn smoothmax_suite(seed: SeedSpec) -> Result<Vec<CheckReport>> {
    let mut out = vec![check_smooth_max_sandwich(10_000, 1000, seed)?];
    out.extend(check_derivative_identities(100, 4, 1.5, seed)?);
    out.push(check_l1_bounds(10_000, 8, seed)?);
    out.push(check_softmax_stability(10_000, seed)?);
    Ok(out)
}

/// Permutation identity for `n = 2..6`, `p = 1, 2` and both test functions.
pub fn lindeberg_suite(seed: SeedSpec) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for f in [
        TestFunction::SmoothMaxOfSum { beta: 2.0 },
        TestFunction::SquaredNormOfSum,
    ] {
        for n in 2..=6 {
            for p in 1..=2 {
                let mut r = check_lindeberg_permutation(
                    n,
                    p,
                    f,
                    seed.derive(tag::CHECK, (10 * n + p) as u64),
                )?;
                r.name = format!(
                    "{}_{}",
                    r.name,
                    if f == TestFunction::SquaredNormOfSum {
                        "sqnorm"
                    } else {
                        "smoothmax"
                    }
                );
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Anti-concentration for `p ∈ {1, 10, 100}`, `ε ∈ {0.05, 0.1, 0.2}`, `σ̲ = 1`.
pub fn anticonc_suite(seed: SeedSpec) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for p in [1usize, 10, 100] {
        for eps in [0.05, 0.1, 0.2] {
            let cell = seed.derive(tag::CHECK, (p as u64) << 8 | (eps * 100.0) as u64);
            out.push(check_gaussian_anticoncentration(
                p, 1.0, eps, 100_000, cell, None,
            )?);
        }
    }
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: SeedSpec) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::SmoothMax) {
        out.extend(smoothmax_suite(seed)?);
    }
    if matches!(suite, Suite::All | Suite::Lindeberg) {
        out.extend(lindeberg_suite(seed)?);
    }
    if matches!(suite, Suite::All | Suite::AntiConc) {
        out.extend(anticonc_suite(seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::standard_normal_cdf;
    use proptest::prelude::*;

    #[test]
    fn order_two_equal_entries() {
        let beta = 1.7;
        let t = fbeta_derivative(&[0.3, 0.3], beta, 2).unwrap();
        let want = [0.25, -0.25, -0.25, 0.25].map(|v| v * beta);
        for (a, b) in t.entries.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((t.l1_norm() / beta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_one_is_softmax() {
        let z = [0.1, -2.0, 1.3];
        let t = fbeta_derivative(&z, 0.8, 1).unwrap();
        assert_eq!(t.entries, softmax_weights(&z, 0.8).unwrap());
    }

    #[test]
    fn guards() {
        assert!(fbeta_derivative(&[0.0; 17], 1.0, 2).is_err());
        assert!(fbeta_derivative(&[0.0; 3], 1.0, 5).is_err());
        assert!(check_l1_bounds(1, 17, SeedSpec::new(0, 0)).is_err());
    }

    /// Direct mixed partials of F_β by nested central differences; only
    /// usable at low order, but independent of the softmax expansion.
    #[test]
    fn order_two_direct_finite_differences() {
        let z = [0.2, -0.4, 0.9, 0.0];
        let beta = 1.5;
        let t = fbeta_derivative(&z, beta, 2).unwrap();
        let h = 1e-4;
        let f = |dz: &[(usize, f64)]| {
            let mut zz = z.to_vec();
            for &(j, d) in dz {
                zz[j] += d;
            }
            smooth_max(&zz, beta).unwrap()
        };
        for a in 0..4 {
            for b in 0..4 {
                let fd = (f(&[(a, h), (b, h)]) - f(&[(a, h), (b, -h)]) - f(&[(a, -h), (b, h)])
                    + f(&[(a, -h), (b, -h)]))
                    / (4.0 * h * h);
                assert!((fd - t.get(&[a, b])).abs() < 1e-6, "({a},{b})");
            }
        }
    }

    #[test]
    fn finite_difference_ladder() {
        let z = [0.5, -0.3, 1.1, 0.2];
        for order in 1..=4 {
            let err = derivative_fd_error(&z, 1.5, order, 1e-3).unwrap();
            assert!(err < fd_tolerance(order), "order {order}: {err}");
        }
    }

    #[test]
    fn tensors_symmetric_and_rows_sum_to_zero() {
        let z = [0.7, -0.1, 0.4];
        for order in 2..=4 {
            let t = fbeta_derivative(&z, 2.0, order).unwrap();
            assert!(t.asymmetry() < 1e-15);
            // F(z + c·1) = F(z) + c, so every derivative of order ≥ 2 along 1 vanishes.
            let s: f64 = t.entries.iter().sum();
            assert!(s.abs() < 1e-12, "order {order}: {s}");
        }
    }

    #[test]
    fn l1_bound_order_one_exact() {
        let r = check_l1_bounds(200, 8, SeedSpec::new(1, 0)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r
            .details
            .starts_with("max ||.||_1 / C_m for m=1..4: 1.000000"));
    }

    #[test]
    fn stability_edge_cases() {
        let z = [0.3, -1.0, 2.0];
        assert_eq!(
            softmax_stability_violation(&z, &[0.0; 3], 1.3).unwrap(),
            0.0
        );
        assert!(softmax_stability_violation(&z, &[0.7; 3], 1.3).unwrap() <= 1e-15);
        let r = check_softmax_stability(500, SeedSpec::new(2, 0)).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn lindeberg_small_cases() {
        for f in [
            TestFunction::SmoothMaxOfSum { beta: 2.0 },
            TestFunction::SquaredNormOfSum,
        ] {
            let r = check_lindeberg_permutation(2, 1, f, SeedSpec::new(3, 0)).unwrap();
            assert!(r.max_violation < 1e-14, "{r:?}");
        }
        let x = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]];
        let xs = vec![vec![0.0, 1.0], vec![2.0, -2.0], vec![1.0, 1.0]];
        let v = lindeberg_averages(&x, &xs, &TestFunction::Constant(3.5));
        // Each (σ, k) contributes to exactly one i, so a constant averages to c/n.
        assert!(v.iter().all(|&a| (a - 3.5 / 3.0).abs() < 1e-14));
        let r = check_lindeberg_permutation(
            4,
            2,
            TestFunction::SmoothMaxOfSum { beta: 2.0 },
            SeedSpec::new(4, 0),
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn lindeberg_requires_invariance() {
        assert!(check_lindeberg_permutation(
            3,
            1,
            TestFunction::FirstArgument,
            SeedSpec::new(0, 0)
        )
        .is_err());
        // Without invariance the averages really do depend on i.
        let x = vec![vec![1.0], vec![-1.0], vec![4.0]];
        let xs = vec![vec![0.5], vec![2.0], vec![-3.0]];
        let v = lindeberg_averages(&x, &xs, &TestFunction::FirstArgument);
        assert!(v.iter().any(|a| (a - v[0]).abs() > 1e-3));
        assert!(TestFunction::parse("nope").is_err());
        assert_eq!(
            TestFunction::parse("sqnorm").unwrap(),
            TestFunction::SquaredNormOfSum
        );
    }

    #[test]
    fn permutation_enumeration() {
        let ps = permutations(4);
        assert_eq!(ps.len(), 24);
        let mut sorted = ps.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn anticoncentration_bound_values() {
        assert!((anticoncentration_bound(10, 1.0, 0.1) - 0.7035).abs() < 1e-4);
        // ε ≥ σ̲/4 makes the bound exceed 1.
        assert!(anticoncentration_bound(5, 1.0, 0.25) >= 1.0);
    }

    #[test]
    fn anticoncentration_single_coordinate() {
        // For p = 1 the sup interval mass is Φ(ε/2σ) − Φ(−ε/2σ) ≤ ε/(σ√(2π)).
        let eps = 0.2;
        let exact = standard_normal_cdf(eps / 2.0) - standard_normal_cdf(-eps / 2.0);
        assert!(exact <= eps / (2.0 * std::f64::consts::PI).sqrt());
        assert!(exact <= anticoncentration_bound(1, 1.0, eps));
        let (prob, se) = sup_interval_probability(
            &GaussianModel::iid(1, 1.0),
            eps,
            200_000,
            SeedSpec::new(6, 0),
        );
        // Grid sup sits at or slightly below the exact sup (plus selection noise).
        assert!(prob <= exact + 5.0 * se, "{prob} vs {exact}");
        assert!(prob >= exact - 0.005);
        let r = check_gaussian_anticoncentration(1, 1.0, eps, 20_000, SeedSpec::new(7, 0), None)
            .unwrap();
        assert!(r.passed);
        assert!(
            check_gaussian_anticoncentration(1, 1.0, eps, 100, SeedSpec::new(7, 0), None).is_err()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn derivative_tensors_symmetric(z in prop::collection::vec(-3.0f64..3.0, 1..5), beta in 0.2f64..4.0, order in 2usize..=4) {
            let t = fbeta_derivative(&z, beta, order).unwrap();
            prop_assert!(t.asymmetry() <= 1e-14 * (1.0 + t.max_abs()));
            prop_assert!(t.l1_norm() / beta.powi(order as i32 - 1) <= L1_BOUNDS[order - 1] + 1e-12);
        }
    }
}
