//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string. The logic lives in plain functions
//! returning `Result<String, String>` so it can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use maxboot::bootstrap::{bootstrap_distribution, draw_multipliers};
use maxboot::harness::{parse_schemes, run_truth, Experiment, ExperimentConfig};
use maxboot::stat_core::{smooth_max, two_sample_ks, upper_quantile};
use maxboot::{datagen, BootstrapPlan, EmpiricalDistribution, MaxMode, MultiplierKind, SeedSpec};

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SmoothMaxProfile {
    betas: Vec<f64>,
    smooth: Vec<f64>,
    max: f64,
    upper: Vec<f64>,
}

/// `F_β(z)` on a log-spaced grid of β, with `max z` and `max z + log p / β`.
pub fn smooth_max_profile_json(
    z: &[f64],
    beta_min: f64,
    beta_max: f64,
    steps: usize,
) -> Result<String, String> {
    if z.is_empty() {
        return Err("z must be nonempty".into());
    }
    if !(beta_min > 0.0 && beta_max > beta_min) || !(2..=10_000).contains(&steps) {
        return Err("need 0 < beta_min < beta_max and 2 <= steps <= 10000".into());
    }
    let (lo, hi) = (beta_min.ln(), beta_max.ln());
    let betas: Vec<f64> = (0..steps)
        .map(|k| (lo + (hi - lo) * k as f64 / (steps - 1) as f64).exp())
        .collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let smooth = betas
        .iter()
        .map(|&b| smooth_max(z, b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let log_p = (z.len() as f64).ln();
    let upper = betas.iter().map(|b| max + log_p / b).collect();
    to_json(&SmoothMaxProfile {
        betas,
        smooth,
        max,
        upper,
    })
}

#[derive(Serialize)]
struct Histogram {
    kind: String,
    edges: Vec<f64>,
    density: Vec<f64>,
    sampled_moments: [f64; 3],
    exact_moments: [f64; 3],
}

pub fn parse_multiplier(kind: &str) -> Result<MultiplierKind, String> {
    match kind {
        "gaussian" => Ok(MultiplierKind::Gaussian),
        "rademacher" => Ok(MultiplierKind::Rademacher),
        "mammen" => Ok(MultiplierKind::Mammen),
        "mixed" => Ok(MultiplierKind::Mixed { p0: 0.5 }),
        other => Err(format!("unknown multiplier `{other}`")),
    }
}

/// Density histogram of `draws` multipliers on `[-3, 3]` and their first
/// three sample moments next to the exact ones.
pub fn multiplier_histogram_json(
    kind: &str,
    draws: usize,
    bins: usize,
    seed: u64,
) -> Result<String, String> {
    let k = parse_multiplier(kind)?;
    if draws == 0 || draws > 5_000_000 || bins == 0 || bins > 1000 {
        return Err("need 1 <= draws <= 5e6 and 1 <= bins <= 1000".into());
    }
    let w = draw_multipliers(k, draws, SeedSpec::new(seed, 0)).map_err(|e| e.to_string())?;
    let (lo, hi) = (-3.0, 3.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &w {
        if (lo..hi).contains(&v) {
            counts[((v - lo) / width) as usize] += 1;
        }
    }
    let nf = draws as f64;
    let moment = |m: i32| w.iter().map(|v| v.powi(m)).sum::<f64>() / nf;
    to_json(&Histogram {
        kind: k.label(),
        edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
        density: counts.iter().map(|&c| c as f64 / (nf * width)).collect(),
        sampled_moments: [moment(1), moment(2), moment(3)],
        exact_moments: [k.moment(1), k.moment(2), k.moment(3)],
    })
}

#[derive(Serialize)]
struct Law {
    scheme: String,
    ks: f64,
    quantile_95: f64,
    /// Sorted sample; the empirical CDF steps at these points.
    sample: Vec<f64>,
}

#[derive(Serialize)]
struct Comparison {
    t_n: f64,
    truth: Law,
    bootstrap: Vec<Law>,
}

/// Truth law of `T_n` next to the bootstrap laws built from one dataset.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_vs_truth_json(
    experiment: &str,
    rho: f64,
    shape: f64,
    n: usize,
    p: usize,
    truth_reps: usize,
    b_reps: usize,
    schemes: &str,
    seed: u64,
) -> Result<String, String> {
    let err = |e: maxboot::Error| e.to_string();
    if n * p > 200_000 || truth_reps > 20_000 || b_reps > 20_000 {
        return Err("problem too large for the browser demo".into());
    }
    let experiment: Experiment = experiment.parse().map_err(err)?;
    let mut config = ExperimentConfig::full_scale(experiment, rho, shape).map_err(err)?;
    config.n = n;
    config.p = p;
    config.truth_reps = truth_reps;
    config.b_reps = b_reps;
    config.outer_reps = 1;
    config.master_seed = seed;
    config.schemes = parse_schemes(schemes, 0.5)
        .map_err(err)?
        .into_iter()
        .map(|s| BootstrapPlan::new(s, b_reps))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let truth = run_truth(&config).map_err(err)?;
    let data = datagen::sample_gaussian_copula(&config.copula, n, p, SeedSpec::new(seed, 1))
        .map_err(err)?;
    let mean = data.known_mean().expect("copula data has a mean").to_vec();
    let t_n = maxboot::stat_core::max_statistic(&data, &mean, MaxMode::OneSided).map_err(err)?;
    let law = |scheme: String, dist: EmpiricalDistribution| -> Result<Law, String> {
        Ok(Law {
            scheme,
            ks: two_sample_ks(&truth, &dist),
            quantile_95: upper_quantile(&dist, 0.05).map_err(err)?,
            sample: dist.sample().to_vec(),
        })
    };
    let bootstrap = config
        .schemes
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let dist = bootstrap_distribution(
                &data,
                plan,
                MaxMode::OneSided,
                SeedSpec::new(seed, 2 + i as u64),
            )
            .map_err(err)?;
            law(plan.scheme.label(), dist)
        })
        .collect::<Result<Vec<_>, _>>()?;
    to_json(&Comparison {
        t_n,
        truth: law("Truth".into(), truth.clone())?,
        bootstrap,
    })
}

#[wasm_bindgen]
pub fn smooth_max_profile(
    z: Vec<f64>,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
) -> Result<String, JsValue> {
    smooth_max_profile_json(&z, beta_min, beta_max, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn multiplier_histogram(
    kind: &str,
    draws: usize,
    bins: usize,
    seed: u64,
) -> Result<String, JsValue> {
    multiplier_histogram_json(kind, draws, bins, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_vs_truth(
    experiment: &str,
    rho: f64,
    shape: f64,
    n: usize,
    p: usize,
    truth_reps: usize,
    b_reps: usize,
    schemes: &str,
    seed: u64,
) -> Result<String, JsValue> {
    bootstrap_vs_truth_json(
        experiment, rho, shape, n, p, truth_reps, b_reps, schemes, seed,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn profile_stays_in_band() {
        let z = [0.3, -1.0, 0.9, 0.85];
        let v: Value =
            serde_json::from_str(&smooth_max_profile_json(&z, 0.1, 100.0, 50).unwrap()).unwrap();
        let smooth = v["smooth"].as_array().unwrap();
        let upper = v["upper"].as_array().unwrap();
        assert_eq!(smooth.len(), 50);
        for (s, u) in smooth.iter().zip(upper) {
            let (s, u) = (s.as_f64().unwrap(), u.as_f64().unwrap());
            assert!(s >= 0.9 - 1e-12 && s <= u + 1e-12);
        }
        assert!(smooth_max_profile_json(&[], 0.1, 1.0, 5).is_err());
        assert!(smooth_max_profile_json(&z, 1.0, 0.5, 5).is_err());
    }

    #[test]
    fn histogram_integrates_to_mass_in_range() {
        let v: Value =
            serde_json::from_str(&multiplier_histogram_json("mammen", 20_000, 60, 3).unwrap())
                .unwrap();
        let edges = v["edges"].as_array().unwrap();
        let width = edges[1].as_f64().unwrap() - edges[0].as_f64().unwrap();
        let mass: f64 = v["density"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d.as_f64().unwrap() * width)
            .sum();
        assert!((mass - 1.0).abs() < 1e-9);
        assert_eq!(v["exact_moments"][2].as_f64().unwrap().round(), 1.0);
        assert!(multiplier_histogram_json("uniform", 10, 10, 0).is_err());
    }

    #[test]
    fn comparison_shapes() {
        let s = bootstrap_vs_truth_json("II", 0.2, 1.0, 30, 10, 100, 80, "m,g", 4).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["truth"]["sample"].as_array().unwrap().len(), 100);
        let boots = v["bootstrap"].as_array().unwrap();
        assert_eq!(boots.len(), 2);
        assert_eq!(boots[0]["scheme"], "Mammen");
        for b in boots {
            let ks = b["ks"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&ks));
            assert_eq!(b["sample"].as_array().unwrap().len(), 80);
        }
        assert_eq!(
            s,
            bootstrap_vs_truth_json("II", 0.2, 1.0, 30, 10, 100, 80, "m,g", 4).unwrap()
        );
        assert!(bootstrap_vs_truth_json("III", 0.2, 1.0, 30, 10, 100, 80, "m", 4).is_err());
    }
}
