//! Gaussian copula simulation with gamma marginals.
//!
//! Rows are i.i.d. `X_i` with `X_{i,j} = F⁻¹(Φ(Y_{i,j}))`, where `F` is the
//! Gamma(α, 1) CDF and `Y_i ~ N(0, Σ)` has unit variances. Σ is generated
//! structurally: one common factor for the equicorrelated case, the AR(1)
//! recursion otherwise. Both cost O(np).

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedSpec;
use crate::special::gamma_quantile_of_normal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    /// `Σ_{jk} = ρ + (1-ρ) 1{j=k}`.
    Equicorrelated,
    /// `Σ_{jk} = ρ^{|j-k|}`.
    AR1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub structure: Structure,
    pub rho: f64,
    pub shape_alpha: f64,
}

impl CopulaSpec {
    pub fn new(structure: Structure, rho: f64, shape_alpha: f64) -> Result<Self> {
        let spec = CopulaSpec {
            structure,
            rho,
            shape_alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(
                "rho",
                format!("must lie in [0,1), got {}", self.rho),
            ));
        }
        if !(self.shape_alpha > 0.0 && self.shape_alpha.is_finite()) {
            return Err(Error::invalid(
                "shape_alpha",
                format!("must be positive, got {}", self.shape_alpha),
            ));
        }
        Ok(())
    }
}

/// Row-major `n × p` matrix of observations.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    known_mean: Option<Vec<f64>>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Empty("data matrix needs n >= 1 and p >= 1"));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(DataMatrix {
            n,
            p,
            values,
            known_mean: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(n * p);
        for r in rows {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        DataMatrix::new(n, p, values)
    }

    pub fn with_known_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: mean.len(),
            });
        }
        if let Some(pos) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        self.known_mean = Some(mean);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn known_mean(&self) -> Option<&[f64]> {
        self.known_mean.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for r in self.rows() {
            for (a, &x) in m.iter_mut().zip(r) {
                *a += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|a| *a *= inv);
        m
    }

    /// `X_i - c` for every row, dropping `known_mean`.
    pub fn centered(&self, center: &[f64]) -> Result<DataMatrix> {
        if center.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: center.len(),
            });
        }
        let mut values = self.values.clone();
        for r in values.chunks_exact_mut(self.p) {
            for (x, c) in r.iter_mut().zip(center) {
                *x -= c;
            }
        }
        Ok(DataMatrix {
            n: self.n,
            p: self.p,
            values,
            known_mean: None,
        })
    }
}

/// Latent `Y` matrix: rows i.i.d. `N(0, Σ)` with Σ per `structure` and `rho`.
pub fn sample_latent_gaussian(
    structure: Structure,
    rho: f64,
    n: usize,
    p: usize,
    seed: SeedSpec,
) -> Result<DataMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(
            "rho",
            format!("must lie in [0,1), got {rho}"),
        ));
    }
    if n == 0 || p == 0 {
        return Err(Error::Empty("n and p must be at least 1"));
    }
    let mut rng = seed.rng();
    let mut values = vec![0.0; n * p];
    match structure {
        Structure::Equicorrelated => {
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            for row in values.chunks_exact_mut(p) {
                let z0: f64 = StandardNormal.sample(&mut rng);
                for y in row.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *y = a * z0 + b * e;
                }
            }
        }
        Structure::AR1 => {
            let b = (1.0 - rho * rho).sqrt();
            for row in values.chunks_exact_mut(p) {
                let mut prev: f64 = StandardNormal.sample(&mut rng);
                row[0] = prev;
                for y in row.iter_mut().skip(1) {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    prev = rho * prev + b * e;
                    *y = prev;
                }
            }
        }
    }
    DataMatrix::new(n, p, values)
}

/// Gaussian copula data with Gamma(α, 1) marginals; `known_mean` is α in every column.
pub fn sample_gaussian_copula(
    spec: &CopulaSpec,
    n: usize,
    p: usize,
    seed: SeedSpec,
) -> Result<DataMatrix> {
    spec.validate()?;
    let mut latent = sample_latent_gaussian(spec.structure, spec.rho, n, p, seed)?;
    for v in latent.values.iter_mut() {
        *v = gamma_quantile_of_normal(*v, spec.shape_alpha);
    }
    latent.with_known_mean(vec![spec.shape_alpha; p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma_cdf;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(CopulaSpec::new(Structure::AR1, 1.0, 1.0).is_err());
        assert!(CopulaSpec::new(Structure::AR1, -0.1, 1.0).is_err());
        assert!(CopulaSpec::new(Structure::AR1, 0.5, 0.0).is_err());
        assert!(CopulaSpec::new(Structure::Equicorrelated, 0.0, 2.0).is_ok());
        let bad = CopulaSpec {
            structure: Structure::AR1,
            rho: 1.2,
            shape_alpha: 1.0,
        };
        assert!(sample_gaussian_copula(&bad, 5, 5, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn data_matrix_validation() {
        assert!(DataMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(DataMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(DataMatrix::new(0, 1, vec![]).is_err());
        let d = DataMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(d.column(1), vec![2.0, 4.0]);
        assert_eq!(d.column_means(), vec![2.0, 3.0]);
        assert!(d.clone().with_known_mean(vec![0.0]).is_err());
    }

    #[test]
    fn ar1_rho_zero_decouples_columns() {
        let n = 20_000;
        let y = sample_latent_gaussian(Structure::AR1, 0.0, n, 6, SeedSpec::new(3, 1)).unwrap();
        for j in 0..5 {
            let r = pearson(&y.column(j), &y.column(j + 1));
            assert!(r.abs() < 3.0 / (n as f64).sqrt(), "corr {j}: {r}");
        }
    }

    #[test]
    fn ar1_lag_correlations() {
        let n = 50_000;
        let rho = 0.8;
        let y = sample_latent_gaussian(Structure::AR1, rho, n, 4, SeedSpec::new(5, 0)).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        assert!((pearson(&y.column(0), &y.column(1)) - rho).abs() < tol);
        assert!((pearson(&y.column(0), &y.column(3)) - rho.powi(3)).abs() < tol);
    }

    #[test]
    fn equicorrelated_common_factor() {
        let n = 100_000;
        let y = sample_latent_gaussian(Structure::Equicorrelated, 0.2, n, 2, SeedSpec::new(11, 0))
            .unwrap();
        let r = pearson(&y.column(0), &y.column(1));
        assert!((r - 0.2).abs() < 3.0 / (n as f64).sqrt(), "{r}");
    }

    #[test]
    fn experiment_two_marginal_means() {
        let spec = CopulaSpec::new(Structure::AR1, 0.8, 3.0).unwrap();
        let (n, p) = (200, 400);
        let x = sample_gaussian_copula(&spec, n, p, SeedSpec::new(2024, 0)).unwrap();
        assert_eq!(x.known_mean().unwrap(), vec![3.0; p].as_slice());
        let tol = 4.0 * (3.0f64 / n as f64).sqrt();
        let bad = x
            .column_means()
            .iter()
            .filter(|m| (*m - 3.0).abs() > tol)
            .count();
        // 4σ band: expect essentially no exceedances among 400 columns.
        assert!(bad <= 1, "{bad} columns outside the band");
    }

    fn ks_one_sample(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        sample.sort_by(f64::total_cmp);
        let n = sample.len() as f64;
        sample
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn marginals_pass_ks_against_gamma() {
        let n = 100_000;
        for (k, (structure, rho, a)) in [
            (Structure::AR1, 0.2, 1.0),
            (Structure::AR1, 0.8, 3.0),
            (Structure::Equicorrelated, 0.2, 3.0),
            (Structure::Equicorrelated, 0.8, 0.5),
        ]
        .into_iter()
        .enumerate()
        {
            let spec = CopulaSpec::new(structure, rho, a).unwrap();
            let x = sample_gaussian_copula(&spec, n, 2, SeedSpec::new(77, k as u64)).unwrap();
            let mut col = x.column(1);
            let d = ks_one_sample(&mut col, |t| gamma_cdf(t, a));
            // Asymptotic 1% critical value of the one-sample KS statistic.
            assert!(
                d < 1.628 / (n as f64).sqrt(),
                "{structure:?} {rho} {a}: D={d}"
            );
        }
    }

    #[test]
    fn skewness_converges_to_two_over_root_alpha() {
        let alpha = 3.0;
        let spec = CopulaSpec::new(Structure::AR1, 0.0, alpha).unwrap();
        let batches = 100;
        let per = 10_000;
        let x = sample_gaussian_copula(&spec, batches * per, 1, SeedSpec::new(8, 8)).unwrap();
        let col = x.column(0);
        let skew = |v: &[f64]| {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
            m3 / m2.powf(1.5)
        };
        let pooled = skew(&col);
        let per_batch: Vec<f64> = col.chunks(per).map(skew).collect();
        let mb = per_batch.iter().sum::<f64>() / batches as f64;
        let sd =
            (per_batch.iter().map(|s| (s - mb).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
        let se = sd / (batches as f64).sqrt();
        let target = 2.0 / alpha.sqrt();
        assert!(
            (pooled - target).abs() < 3.0 * se,
            "{pooled} vs {target} (se {se})"
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn generation_ignores_thread_count() {
        let spec = CopulaSpec::new(Structure::Equicorrelated, 0.2, 3.0).unwrap();
        let seed = SeedSpec::new(99, 4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_gaussian_copula(&spec, 50, 30, seed).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
