//! Simulation experiments comparing bootstrap laws of the max statistic
//! with its Monte Carlo truth, plus configuration and result emission.
//!
//! Configuration is a flat `key = value` map. Sources are merged in the
//! order defaults < preset < config file < command line; see
//! [`RunConfig::from_settings`] for the recognised keys.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_distribution, BootstrapPlan, MultiplierKind, Scheme};
use crate::datagen::{sample_gaussian_copula, CopulaSpec, DataMatrix, Structure};
use crate::error::{Error, Result};
use crate::moments::{
    estimate_moment_summary, rate_certificate, CenterMode, CertScheme, MomentSummary,
    RateCertificate,
};
use crate::par;
use crate::rng::{tag, SeedSpec};
use crate::stat_core::{
    max_statistic, two_sample_ks, upper_quantile, EmpiricalDistribution, MaxMode,
};

/// Experiment I uses an equicorrelated latent covariance, II an AR(1) one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Experiment {
    I,
    II,
}

impl Experiment {
    pub fn structure(self) -> Structure {
        match self {
            Experiment::I => Structure::Equicorrelated,
            Experiment::II => Structure::AR1,
        }
    }

    fn code(self) -> u64 {
        match self {
            Experiment::I => 1,
            Experiment::II => 2,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::I => "I",
            Experiment::II => "II",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(Experiment::I),
            "II" | "ii" | "2" => Ok(Experiment::II),
            other => Err(Error::Config(format!(
                "unknown experiment `{other}` (expected I or II)"
            ))),
        }
    }
}

/// How a single dataset contributes to the coverage metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverageMode {
    /// `1{T_n ≤ t*_α}` for the dataset's own statistic.
    #[default]
    Indicator,
    /// `P_truth{T ≤ t*_α}` under the Monte Carlo truth law.
    TruthCdf,
}

impl FromStr for CoverageMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "indicator" => Ok(CoverageMode::Indicator),
            "truth_cdf" | "truthcdf" => Ok(CoverageMode::TruthCdf),
            other => Err(Error::Config(format!(
                "unknown coverage mode `{other}` (expected indicator or truth_cdf)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

pub fn parse_mode(s: &str) -> Result<MaxMode> {
    match s.trim() {
        "onesided" | "one-sided" => Ok(MaxMode::OneSided),
        "abs" | "absolute" => Ok(MaxMode::Absolute),
        other => Err(Error::Config(format!(
            "unknown mode `{other}` (expected onesided or abs)"
        ))),
    }
}

/// Parses a comma list of scheme codes: `g`, `m`, `r`, `e`, `mix`.
pub fn parse_schemes(s: &str, mix_p0: f64) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for code in s.split(',').map(str::trim).filter(|c| !c.is_empty()) {
        let scheme = match code {
            "g" => Scheme::Wild(MultiplierKind::Gaussian),
            "m" => Scheme::Wild(MultiplierKind::Mammen),
            "r" => Scheme::Wild(MultiplierKind::Rademacher),
            "e" => Scheme::Empirical,
            "mix" => Scheme::MixedWild { p0: mix_p0 },
            other => return Err(Error::Config(format!("unknown scheme code `{other}`"))),
        };
        if out.contains(&scheme) {
            return Err(Error::Config(format!("scheme `{code}` listed twice")));
        }
        out.push(scheme);
    }
    if out.is_empty() {
        return Err(Error::Config("no bootstrap schemes selected".into()));
    }
    Ok(out)
}

/// Position of a scheme in the emitted tables.
pub fn scheme_order(scheme: &Scheme) -> u8 {
    match scheme {
        Scheme::Wild(MultiplierKind::Gaussian) => 0,
        Scheme::Wild(MultiplierKind::Mammen) => 1,
        Scheme::Wild(MultiplierKind::Rademacher) => 2,
        Scheme::Empirical => 3,
        Scheme::MixedWild { .. } => 4,
        Scheme::Wild(MultiplierKind::Mixed { .. }) => 5,
    }
}

fn label_order(label: &str) -> u8 {
    match label {
        "Gaussian" => 0,
        "Mammen" => 1,
        "Rademacher" => 2,
        "Empirical" => 3,
        l if l.starts_with("MixedWild") => 4,
        _ => 5,
    }
}

/// One simulation setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub copula: CopulaSpec,
    pub n: usize,
    pub p: usize,
    pub schemes: Vec<BootstrapPlan>,
    pub alpha_level: f64,
    pub outer_reps: usize,
    pub truth_reps: usize,
    pub b_reps: usize,
    pub mode: MaxMode,
    pub master_seed: u64,
    pub coverage: CoverageMode,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Full-scale Experiment `experiment` at `(rho, shape_alpha)` with the
    /// Gaussian, Mammen, Rademacher and empirical schemes.
    pub fn full_scale(experiment: Experiment, rho: f64, shape_alpha: f64) -> Result<Self> {
        let schemes = parse_schemes("g,m,r,e", 0.5)?
            .into_iter()
            .map(|s| BootstrapPlan::new(s, 500))
            .collect::<Result<_>>()?;
        let cfg = ExperimentConfig {
            experiment,
            copula: CopulaSpec::new(experiment.structure(), rho, shape_alpha)?,
            n: 200,
            p: 400,
            schemes,
            alpha_level: 0.05,
            outer_reps: 500,
            truth_reps: 5000,
            b_reps: 500,
            mode: MaxMode::OneSided,
            master_seed: 20_240_601,
            coverage: CoverageMode::Indicator,
            output_path: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.copula.validate()?;
        if self.copula.structure != self.experiment.structure() {
            return Err(Error::Config(format!(
                "experiment {} requires {:?} structure",
                self.experiment,
                self.experiment.structure()
            )));
        }
        for (name, v) in [
            ("outer_reps", self.outer_reps),
            ("truth_reps", self.truth_reps),
            ("b_reps", self.b_reps),
            ("p", self.p),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.n < 2 {
            return Err(Error::Config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::Config(format!(
                "alpha_level must lie in (0,1), got {}",
                self.alpha_level
            )));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no bootstrap schemes selected".into()));
        }
        for plan in &self.schemes {
            plan.validate()?;
        }
        Ok(())
    }

    /// Root of every stream used by this setting. Depends on the experiment,
    /// ρ and α only, so a setting gives the same numbers alone or in a sweep.
    pub fn setting_seed(&self) -> SeedSpec {
        SeedSpec::new(self.master_seed, 0)
            .derive(tag::SETTING, self.experiment.code())
            .derive(tag::SETTING, self.copula.rho.to_bits())
            .derive(tag::SETTING, self.copula.shape_alpha.to_bits())
    }
}

/// Monte Carlo law of `T_n` from `truth_reps` fresh datasets centered at
/// the known mean.
pub fn run_truth(config: &ExperimentConfig) -> Result<EmpiricalDistribution> {
    config.validate()?;
    let root = config.setting_seed();
    let stats = par::map_indexed(config.truth_reps, |r| {
        let data = sample_gaussian_copula(
            &config.copula,
            config.n,
            config.p,
            root.derive(tag::TRUTH, r as u64),
        )?;
        let mean = data
            .known_mean()
            .expect("copula data carries its mean")
            .to_vec();
        max_statistic(&data, &mean, config.mode)
    });
    EmpiricalDistribution::new(stats.into_iter().collect::<Result<Vec<_>>>()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    KS,
    Coverage,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::KS => "KS",
            Metric::Coverage => "Coverage",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub rho: f64,
    pub shape_alpha: f64,
    pub scheme: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
}

/// Per-replicate values behind the rows of one setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSeries {
    pub scheme: String,
    pub ks: Vec<f64>,
    pub coverage: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub series: Vec<SchemeSeries>,
    pub truth: EmpiricalDistribution,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Runs one setting and keeps the per-replicate values.
pub fn run_experiment_detailed(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let truth = run_truth(config)?;
    log::info!(
        "experiment {} rho={} alpha={}: truth law from {} datasets",
        config.experiment,
        config.copula.rho,
        config.copula.shape_alpha,
        truth.size()
    );
    let root = config.setting_seed();
    // (ks, coverage) per scheme, per outer replicate.
    let per_rep = par::map_indexed(config.outer_reps, |r| -> Result<Vec<(f64, f64)>> {
        let data = sample_gaussian_copula(
            &config.copula,
            config.n,
            config.p,
            root.derive(tag::OUTER, r as u64),
        )?;
        let mean = data
            .known_mean()
            .expect("copula data carries its mean")
            .to_vec();
        let t_n = max_statistic(&data, &mean, config.mode)?;
        let boot_root = root.derive(tag::BOOT, r as u64);
        config
            .schemes
            .iter()
            .map(|plan| {
                let seed = boot_root.derive(tag::BOOT, scheme_order(&plan.scheme) as u64);
                let law = bootstrap_distribution(&data, plan, config.mode, seed)?;
                let q = upper_quantile(&law, config.alpha_level)?;
                let cov = match config.coverage {
                    CoverageMode::Indicator => f64::from(u8::from(t_n <= q)),
                    CoverageMode::TruthCdf => truth.cdf(q),
                };
                Ok((two_sample_ks(&truth, &law), cov))
            })
            .collect()
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

    let mut series = Vec::new();
    let mut rows = Vec::new();
    for (s, plan) in config.schemes.iter().enumerate() {
        let label = plan.scheme.label();
        let ks: Vec<f64> = per_rep.iter().map(|v| v[s].0).collect();
        let coverage: Vec<f64> = per_rep.iter().map(|v| v[s].1).collect();
        for (metric, values) in [(Metric::KS, &ks), (Metric::Coverage, &coverage)] {
            let (mean, std) = mean_std(values);
            rows.push(ResultRow {
                experiment: config.experiment.to_string(),
                rho: config.copula.rho,
                shape_alpha: config.copula.shape_alpha,
                scheme: label.clone(),
                metric,
                mean,
                std,
                reps: values.len(),
            });
        }
        series.push(SchemeSeries {
            scheme: label,
            ks,
            coverage,
        });
    }
    sort_rows(&mut rows);
    Ok(ExperimentOutcome {
        rows,
        series,
        truth,
    })
}

/// Mean and standard deviation of KS distance and coverage per scheme.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_experiment_detailed(config)?.rows)
}

/// Emission order: experiment, ρ ascending, α descending, scheme, metric.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.experiment
            .cmp(&b.experiment)
            .then(a.rho.total_cmp(&b.rho))
            .then(b.shape_alpha.total_cmp(&a.shape_alpha))
            .then(label_order(&a.scheme).cmp(&label_order(&b.scheme)))
            .then(a.scheme.cmp(&b.scheme))
            .then(a.metric.cmp(&b.metric))
    });
}

/// `x` rounded to 6 significant digits (ties and all, through decimal text).
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn fmt6(x: f64) -> String {
    format!("{}", round_sig6(x))
}

pub const RESULT_HEADER: [&str; 8] = [
    "experiment",
    "rho",
    "shape_alpha",
    "scheme",
    "metric",
    "mean",
    "std",
    "reps",
];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Result rows as CSV or JSON text, floats at 6 significant digits.
pub fn format_results(rows: &[ResultRow], format: OutputFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("no result rows to emit"));
    }
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let to_parse = |e: csv::Error| Error::Parse {
                path: "<memory>".into(),
                message: e.to_string(),
            };
            w.write_record(RESULT_HEADER).map_err(to_parse)?;
            for r in &rows {
                w.write_record([
                    r.experiment.clone(),
                    fmt6(r.rho),
                    fmt6(r.shape_alpha),
                    r.scheme.clone(),
                    r.metric.to_string(),
                    fmt6(r.mean),
                    fmt6(r.std),
                    r.reps.to_string(),
                ])
                .map_err(to_parse)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        OutputFormat::Json => {
            let rounded: Vec<ResultRow> = rows
                .into_iter()
                .map(|r| ResultRow {
                    rho: round_sig6(r.rho),
                    shape_alpha: round_sig6(r.shape_alpha),
                    mean: round_sig6(r.mean),
                    std: round_sig6(r.std),
                    ..r
                })
                .collect();
            let mut s =
                serde_json::to_string_pretty(&rounded).map_err(|e| Error::Config(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit_results(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    let text = format_results(rows, format)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Reads rows written by [`emit_results`].
pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
            if header.iter().ne(RESULT_HEADER) {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("unexpected header {:?}", header),
                });
            }
            r.deserialize()
                .map(|row| row.map_err(|e| csv_err(path, e)))
                .collect()
        }
        OutputFormat::Json => serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
    }
}

/// Long-format `scheme,rep,value` rows, one per scheme and replicate, with
/// values at full precision.
pub fn format_figure_data(per_rep: &[(String, Vec<f64>)]) -> Result<String> {
    if per_rep.is_empty() || per_rep.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::Empty("no figure data to emit"));
    }
    let mut out = String::from("scheme,rep,value\n");
    for (scheme, values) in per_rep {
        for (rep, v) in values.iter().enumerate() {
            out.push_str(&format!("{scheme},{rep},{v:?}\n"));
        }
    }
    Ok(out)
}

pub fn emit_figure_data(per_rep: &[(String, Vec<f64>)], path: &Path) -> Result<()> {
    let text = format_figure_data(per_rep)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes `<dir>/fig_<exp>_rho<ρ>_alpha<α>_{ks,coverage}.csv` for one setting.
pub fn emit_setting_figures(
    outcome: &ExperimentOutcome,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let stem = format!(
        "fig_{}_rho{}_alpha{}",
        config.experiment, config.copula.rho, config.copula.shape_alpha
    );
    let ks: Vec<_> = outcome
        .series
        .iter()
        .map(|s| (s.scheme.clone(), s.ks.clone()))
        .collect();
    let cov: Vec<_> = outcome
        .series
        .iter()
        .map(|s| (s.scheme.clone(), s.coverage.clone()))
        .collect();
    emit_figure_data(&ks, &dir.join(format!("{stem}_ks.csv")))?;
    emit_figure_data(&cov, &dir.join(format!("{stem}_coverage.csv")))
}

/// Named scale presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// outer 100, truth 2000, breps 200, p 100, n 200
    Desk,
    /// outer 500, truth 5000, breps 500, p 400, n 200
    Paper,
}

impl Preset {
    fn settings(self) -> [(&'static str, &'static str); 5] {
        match self {
            Preset::Desk => [
                ("outer", "100"),
                ("truth", "2000"),
                ("breps", "200"),
                ("p", "100"),
                ("n", "200"),
            ],
            Preset::Paper => [
                ("outer", "500"),
                ("truth", "5000"),
                ("breps", "500"),
                ("p", "400"),
                ("n", "200"),
            ],
        }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected desk or paper)"
            ))),
        }
    }
}

/// Values of ρ and α visited by a sweep.
pub const SWEEP_RHO: [f64; 2] = [0.2, 0.8];
pub const SWEEP_SHAPE: [f64; 2] = [3.0, 1.0];

/// Keys accepted in config files and their command-line equivalents.
pub const CONFIG_KEYS: [&str; 20] = [
    "experiment",
    "rho",
    "shape",
    "n",
    "p",
    "outer",
    "truth",
    "breps",
    "seed",
    "mode",
    "schemes",
    "mix_p0",
    "alpha_level",
    "coverage",
    "preset",
    "sweep",
    "output",
    "format",
    "figures",
    "threads",
];

/// A whole invocation of `maxboot run`: one setting or a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub base: ExperimentConfig,
    pub experiments: Vec<Experiment>,
    pub sweep: bool,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    pub figures: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{origin}:{}: expected key = value",
                lineno + 1
            )));
        };
        let key = k.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{origin}:{}: unknown key `{key}`",
                lineno + 1
            )));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "{origin}:{}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config_text(&text, &path.display().to_string())
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "`{key}`: expected true or false, got `{v}`"
        ))),
    }
}

impl RunConfig {
    /// Builds a run from merged settings (command line entries already
    /// override file entries). The preset named by `preset` is applied
    /// first, so any explicit key still wins over it.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self> {
        for key in settings.keys() {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        let mut merged: BTreeMap<String, String> = BTreeMap::new();
        if let Some(preset) = settings.get("preset") {
            for (k, v) in preset.parse::<Preset>()?.settings() {
                merged.insert(k.into(), v.into());
            }
        }
        merged.extend(settings.iter().map(|(k, v)| (k.clone(), v.clone())));
        let get = |k: &str| merged.get(k).map(String::as_str);

        let experiments: Vec<Experiment> = match get("experiment") {
            None => vec![Experiment::II],
            Some("all") => vec![Experiment::I, Experiment::II],
            Some(list) => list.split(',').map(str::parse).collect::<Result<_>>()?,
        };
        let sweep = get("sweep")
            .map(|v| parse_bool("sweep", v))
            .transpose()?
            .unwrap_or(false);
        if experiments.len() > 1 && !sweep {
            return Err(Error::Config(
                "several experiments require sweep = true".into(),
            ));
        }
        let rho: f64 = get("rho")
            .map(|v| parse_num("rho", v))
            .transpose()?
            .unwrap_or(0.2);
        let shape: f64 = get("shape")
            .map(|v| parse_num("shape", v))
            .transpose()?
            .unwrap_or(1.0);
        let mix_p0: f64 = get("mix_p0")
            .map(|v| parse_num("mix_p0", v))
            .transpose()?
            .unwrap_or(0.5);
        let b_reps: usize = get("breps")
            .map(|v| parse_num("breps", v))
            .transpose()?
            .unwrap_or(500);
        let schemes = parse_schemes(get("schemes").unwrap_or("g,m,r,e"), mix_p0)?
            .into_iter()
            .map(|s| BootstrapPlan::new(s, b_reps.max(1)))
            .collect::<Result<Vec<_>>>()?;
        let threads = get("threads")
            .map(|v| parse_num::<usize>("threads", v))
            .transpose()?;
        if threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let experiment = experiments[0];
        let base = ExperimentConfig {
            experiment,
            copula: CopulaSpec {
                structure: experiment.structure(),
                rho,
                shape_alpha: shape,
            },
            n: get("n")
                .map(|v| parse_num("n", v))
                .transpose()?
                .unwrap_or(200),
            p: get("p")
                .map(|v| parse_num("p", v))
                .transpose()?
                .unwrap_or(400),
            schemes,
            alpha_level: get("alpha_level")
                .map(|v| parse_num("alpha_level", v))
                .transpose()?
                .unwrap_or(0.05),
            outer_reps: get("outer")
                .map(|v| parse_num("outer", v))
                .transpose()?
                .unwrap_or(500),
            truth_reps: get("truth")
                .map(|v| parse_num("truth", v))
                .transpose()?
                .unwrap_or(5000),
            b_reps,
            mode: get("mode").map(parse_mode).transpose()?.unwrap_or_default(),
            master_seed: get("seed")
                .map(|v| parse_num("seed", v))
                .transpose()?
                .unwrap_or(20_240_601),
            coverage: get("coverage")
                .map(str::parse)
                .transpose()?
                .unwrap_or_default(),
            output_path: get("output").map(PathBuf::from),
        };
        let run = RunConfig {
            base,
            experiments,
            sweep,
            format: get("format")
                .map(str::parse)
                .transpose()?
                .unwrap_or_default(),
            output: get("output").map(PathBuf::from),
            figures: get("figures").map(PathBuf::from),
            threads,
        };
        for s in run.settings()? {
            s.validate().map_err(|e| match e {
                Error::Config(_) => e,
                other => Error::Config(other.to_string()),
            })?;
        }
        Ok(run)
    }

    /// Settings visited, in run order.
    pub fn settings(&self) -> Result<Vec<ExperimentConfig>> {
        if !self.sweep {
            return Ok(vec![self.base.clone()]);
        }
        let mut out = Vec::new();
        for &experiment in &self.experiments {
            for rho in SWEEP_RHO {
                for shape in SWEEP_SHAPE {
                    out.push(ExperimentConfig {
                        experiment,
                        copula: CopulaSpec::new(experiment.structure(), rho, shape)?,
                        ..self.base.clone()
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Runs every setting, rewriting the output after each one so that an
/// interrupted sweep leaves the finished settings on disk.
pub fn run_all(run: &RunConfig) -> Result<Vec<ResultRow>> {
    with_threads(run.threads, || {
        let mut rows = Vec::new();
        for setting in run.settings()? {
            let outcome = run_experiment_detailed(&setting)?;
            rows.extend(outcome.rows.iter().cloned());
            sort_rows(&mut rows);
            if let Some(path) = &run.output {
                emit_results(&rows, run.format, path)?;
            }
            if let Some(dir) = &run.figures {
                emit_setting_figures(&outcome, &setting, dir)?;
            }
        }
        Ok(rows)
    })
}

/// Writes rows to stdout when no output file is configured.
pub fn print_results(rows: &[ResultRow], format: OutputFormat) -> Result<()> {
    let text = format_results(rows, format)?;
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {t}-thread pool ({e}); using the global pool");
                f()
            }
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

/// Numeric matrix from a CSV file, one row per observation. A first line
/// that does not parse as numbers is taken as a header.
pub fn read_matrix_csv(path: &Path) -> Result<DataMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        message: format!("line {line}: {message}"),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(parse_err(i + 1, e.to_string())),
        }
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no numeric rows".into()));
    }
    DataMatrix::from_rows(&rows).map_err(|e| parse_err(0, e.to_string()))
}

/// Moment summary and both rate certificates for observed data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub n: usize,
    pub p: usize,
    pub center: CenterMode,
    pub summary: MomentSummary,
    pub certificates: Vec<RateCertificate>,
}

pub fn certify(data: &DataMatrix, b_n: Option<f64>) -> Result<CertifyReport> {
    let center = if data.known_mean().is_some() {
        CenterMode::KnownMean
    } else {
        CenterMode::SampleMean
    };
    let summary = estimate_moment_summary(data, center)?;
    let certificates = [CertScheme::Empirical, CertScheme::Wild]
        .into_iter()
        .map(|s| rate_certificate(&summary, data.n(), data.p(), s, b_n))
        .collect::<Result<_>>()?;
    Ok(CertifyReport {
        n: data.n(),
        p: data.p(),
        center,
        summary,
        certificates,
    })
}
