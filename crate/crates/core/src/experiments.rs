//! Monte Carlo runners, the combinatorics battery and report emission.
//!
//! Every runner draws sample `i` from streams keyed by `(seed, i)`, collects
//! per-sample results in index order and reduces them sequentially, so the
//! output does not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::combinatorics::{catalan, ratio_f64};
use crate::correspondence::{correspondence_census, mean_k_statistic, preimage_bound_check, verify_count_identity};
use crate::dyck_stats::{
    ballot_count, bounded_path_count, class_count_bound_check, dyck_decompose, tail_bound_check, DEFAULT_C0,
};
use crate::ensembles::{
    regime_of, sample_deformed, sample_normalized_wigner, EnsembleConfig, LawKind, RegimeLabel, SymmetryClass,
};
use crate::error::{Error, Result};
use crate::moment_oracle::{exact_trace_expectation, trace_universality_probe, MomentModel, PATH_SUM_LIMIT};
use crate::path_model::{count_trajectories, count_trajectories_factorial, enumerate_trajectories};
use crate::report::Check;
use crate::rng;
use crate::spectral::{
    eigenvalues, interlacing_check, outlier_census, rescaled_fluctuation, trace_power, trace_power_direct,
};
use crate::stats::{gaussian_cdf, ks_one_sample, ks_two_sample, mean_and_se, semicircle_cdf, KsMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parse(format!("unknown output format '{other}' (csv|json)"))),
        }
    }
}

/// Monte Carlo tolerances. The limits theorems give no rates, so these are
/// engineering choices and live in the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub ks_one_sample: f64,
    pub ks_two_sample: f64,
    pub ks_esd: f64,
    pub mean_rel: f64,
    pub trace_eps_rel: f64,
    pub even_trace_rel: f64,
    pub se_band: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ks_one_sample: 0.06,
            ks_two_sample: 0.12,
            ks_esd: 0.03,
            mean_rel: 0.05,
            trace_eps_rel: 0.1,
            even_trace_rel: 0.15,
            se_band: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: EnsembleConfig,
    pub n_samples: usize,
    /// `t` in `s_N = floor(t sqrt(N))`.
    pub t_scale: f64,
    pub top_k: usize,
    pub baseline: Option<EnsembleConfig>,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub thresholds: Thresholds,
    /// Trace powers for the oracle comparison.
    pub powers: Vec<u32>,
    pub threads: Option<usize>,
}

/// Keys accepted in a config file (hyphens and underscores are equivalent).
pub const CONFIG_KEYS: &[&str] = &[
    "n",
    "samples",
    "theta",
    "sigma",
    "diag_sigma",
    "law",
    "symmetry",
    "seed",
    "t_scale",
    "top_k",
    "baseline_theta",
    "baseline_law",
    "baseline_seed",
    "out",
    "format",
    "power",
    "threads",
    "ks_one_sample_max",
    "ks_two_sample_max",
    "ks_esd_max",
    "mean_rel_tol",
    "trace_eps_rel_max",
    "even_trace_rel_tol",
    "se_band",
];

/// Parses flat `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidConfig(format!("line {}: unknown key '{key}'", i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| Error::InvalidConfig(format!("bad value for {key}: '{v}'"))))
        .transpose()
}

impl ExperimentConfig {
    pub fn new(base: EnsembleConfig, n_samples: usize) -> Result<Self> {
        let cfg = ExperimentConfig {
            top_k: base.n.min(1),
            base,
            n_samples,
            t_scale: 1.0,
            baseline: None,
            output_path: None,
            output_format: OutputFormat::Csv,
            thresholds: Thresholds::default(),
            powers: vec![2, 3, 4],
            threads: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a configuration from key/value pairs, with defaults for
    /// anything missing.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let seed = get(map, "seed")?.unwrap_or(0u64);
        let sigma = get(map, "sigma")?.unwrap_or(1.0);
        let mut base = EnsembleConfig::new(
            get(map, "n")?.unwrap_or(100),
            sigma,
            get(map, "theta")?.unwrap_or(0.0),
            get(map, "symmetry")?.unwrap_or(SymmetryClass::ComplexHermitian),
            get(map, "law")?.unwrap_or(LawKind::Gaussian),
            seed,
        )?;
        if let Some(d) = get(map, "diag_sigma")? {
            base = base.with_diag_sigma(d)?;
        }
        let wants_baseline = ["baseline_theta", "baseline_law", "baseline_seed"].iter().any(|k| map.contains_key(*k));
        let baseline = if wants_baseline {
            let mut b = base.clone();
            b.theta = get(map, "baseline_theta")?.unwrap_or(base.theta);
            b.law = get(map, "baseline_law")?.unwrap_or(LawKind::Gaussian);
            b.master_seed = get(map, "baseline_seed")?.unwrap_or_else(|| rng::sub_seed(seed, "baseline"));
            b.validate()?;
            Some(b)
        } else {
            None
        };
        let d = Thresholds::default();
        let thresholds = Thresholds {
            ks_one_sample: get(map, "ks_one_sample_max")?.unwrap_or(d.ks_one_sample),
            ks_two_sample: get(map, "ks_two_sample_max")?.unwrap_or(d.ks_two_sample),
            ks_esd: get(map, "ks_esd_max")?.unwrap_or(d.ks_esd),
            mean_rel: get(map, "mean_rel_tol")?.unwrap_or(d.mean_rel),
            trace_eps_rel: get(map, "trace_eps_rel_max")?.unwrap_or(d.trace_eps_rel),
            even_trace_rel: get(map, "even_trace_rel_tol")?.unwrap_or(d.even_trace_rel),
            se_band: get(map, "se_band")?.unwrap_or(d.se_band),
        };
        let powers = match map.get("power") {
            None => vec![2, 3, 4],
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse::<u32>().map_err(|_| Error::InvalidConfig(format!("bad power '{p}'"))))
                .collect::<Result<Vec<_>>>()?,
        };
        let cfg = ExperimentConfig {
            top_k: get(map, "top_k")?.unwrap_or(1),
            n_samples: get(map, "samples")?.unwrap_or(100),
            t_scale: get(map, "t_scale")?.unwrap_or(1.0),
            baseline,
            output_path: map.get("out").map(PathBuf::from),
            output_format: get(map, "format")?.unwrap_or(OutputFormat::Csv),
            thresholds,
            powers,
            threads: get(map, "threads")?,
            base,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        if self.top_k > self.base.n {
            return Err(Error::InvalidConfig(format!("top_k = {} exceeds n = {}", self.top_k, self.base.n)));
        }
        if !(self.t_scale.is_finite() && self.t_scale > 0.0) {
            return Err(Error::InvalidConfig(format!("t_scale must be > 0, got {}", self.t_scale)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if let Some(b) = &self.baseline {
            b.validate()?;
            if b.n != self.base.n {
                return Err(Error::DimensionMismatch { left: self.base.n, right: b.n });
            }
        }
        Ok(())
    }

    fn params(&self) -> serde_json::Value {
        json!({
            "n": self.base.n,
            "samples": self.n_samples,
            "theta": self.base.theta,
            "sigma": self.base.sigma,
            "law": self.base.law.as_str(),
            "symmetry": self.base.symmetry.as_str(),
            "seed": self.base.master_seed,
        })
    }

    fn with_seed_tag(&self, theta: f64, law: LawKind, tag: &str) -> EnsembleConfig {
        let mut b = self.base.clone();
        b.theta = theta;
        b.law = law;
        b.master_seed = rng::sub_seed(self.base.master_seed, tag);
        b
    }
}

/// One `(sample, statistic, value)` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub sample: String,
    pub statistic: String,
    pub value: f64,
}

impl Record {
    fn new(sample: impl fmt::Display, statistic: impl Into<String>, value: f64) -> Self {
        Record { sample: sample.to_string(), statistic: statistic.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
}

impl Report {
    fn new(command: &str) -> Self {
        Report { command: command.into(), records: Vec::new(), checks: Vec::new() }
    }

    /// All non-informational checks pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.check == name)
    }

    /// CSV with header `sample,statistic,value`; each check adds the rows
    /// `check,<name>.value,<value>` and `check,<name>.pass,<0|1>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["sample", "statistic", "value"])?;
        for r in &self.records {
            w.serialize(r)?;
        }
        for c in &self.checks {
            if let Some(v) = c.value {
                w.serialize(Record::new("check", format!("{}.value", c.check), v))?;
            }
            w.serialize(Record::new("check", format!("{}.pass", c.check), if c.pass { 1.0 } else { 0.0 }))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: OutputFormat, out: W) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(out),
            OutputFormat::Json => self.write_json(out),
        }
    }

    pub fn write_to_path(&self, format: OutputFormat, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(format, file)
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (the global pool when `None`).
pub fn run_in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Top-`k` edge statistics `N^{2/3} (lambda_j - 2 sigma)`, one vector per sample.
fn edge_samples(cfg: &EnsembleConfig, samples: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let regime = cfg.regime()?;
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = eigenvalues(&sample_deformed(cfg, i))?;
            let f = rescaled_fluctuation(&s, &regime, cfg.n, k)?;
            Ok((f.lambda_1, f.edge_u))
        })
        .collect()
}

/// Phase-transition Monte Carlo for the largest eigenvalue.
pub fn run_fluctuations(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let base = &cfg.base;
    let regime = base.regime()?;
    let th = &cfg.thresholds;
    let mut report = Report::new("fluctuations");
    let params = cfg.params();
    if regime.is_supercritical() {
        let rho = regime.rho_theta()?;
        let var_theta = regime.sigma_theta()?.powi(2);
        let rows = (0..cfg.n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let s = eigenvalues(&sample_deformed(base, i))?;
                let f = rescaled_fluctuation(&s, &regime, base.n, cfg.top_k.max(1))?;
                let census = outlier_census(&s, base.theta, base.sigma, base.n)?;
                Ok((f.lambda_1, f.leading_deviation()?, census))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut devs = Vec::with_capacity(rows.len());
        let mut lambdas = Vec::with_capacity(rows.len());
        let mut with_mid = 0usize;
        for (i, (l1, d, c)) in rows.iter().enumerate() {
            report.records.push(Record::new(i, "lambda_1", *l1));
            report.records.push(Record::new(i, "leading_deviation", *d));
            report.records.push(Record::new(i, "count_mid", c.count_mid as f64));
            report.records.push(Record::new(i, "count_far", c.count_far as f64));
            devs.push(*d);
            lambdas.push(*l1);
            with_mid += (c.count_mid > 0) as usize;
        }
        let (limit_var, label, conjecture) = match base.symmetry {
            SymmetryClass::ComplexHermitian => (var_theta, "ks_leading_deviation", false),
            SymmetryClass::RealSymmetric => (2.0 * var_theta, "ks_leading_deviation_conjecture", true),
        };
        let ks = ks_one_sample(&devs, |x| gaussian_cdf(x, 0.0, limit_var), KsMode::OneSampleGaussian)?;
        let mut c = Check::new(label, json!({"run": params, "limit_variance": limit_var}), ks.statistic <= th.ks_one_sample)
            .value(ks.statistic)
            .threshold(th.ks_one_sample);
        if conjecture {
            c = c.note("real symmetric limit variance 2 sigma_theta^2 is conjectural").informational();
        }
        report.checks.push(c);
        let m = mean(&lambdas);
        let rel = (m - rho).abs() / rho;
        report.checks.push(
            Check::new("mean_lambda_1", json!({"run": params, "target": rho}), rel <= th.mean_rel)
                .value(m)
                .threshold(th.mean_rel)
                .note(format!("relative error {rel}")),
        );
        report.checks.push(
            Check::new("no_mid_outliers", json!({"run": params}), with_mid == 0)
                .value(with_mid as f64)
                .threshold(0.0),
        );
        return Ok(report);
    }

    // at or below the transition: N^{2/3} edge statistics vs baselines
    let k = cfg.top_k.max(1);
    let critical = regime.label == RegimeLabel::Critical;
    let mut baselines: Vec<(String, EnsembleConfig)> = vec![(
        "baseline".into(),
        cfg.baseline.clone().unwrap_or_else(|| cfg.with_seed_tag(base.theta, LawKind::Gaussian, "baseline")),
    )];
    if regime.label == RegimeLabel::Subcritical && baselines[0].1.theta != 0.0 {
        baselines.push(("baseline_theta0".into(), cfg.with_seed_tag(0.0, LawKind::Gaussian, "baseline_theta0")));
    }
    let own = edge_samples(base, cfg.n_samples, k)?;
    for (i, (l1, u)) in own.iter().enumerate() {
        report.records.push(Record::new(i, "lambda_1", *l1));
        for (j, v) in u.iter().enumerate() {
            report.records.push(Record::new(i, format!("edge_u{}", j + 1), *v));
        }
    }
    let lambdas: Vec<f64> = own.iter().map(|r| r.0).collect();
    let m = mean(&lambdas);
    let rel = (m - 2.0 * base.sigma).abs() / (2.0 * base.sigma);
    let mut mc = Check::new("mean_lambda_1", json!({"run": params, "target": 2.0 * base.sigma}), rel <= th.mean_rel)
        .value(m)
        .threshold(th.mean_rel)
        .note(format!("relative error {rel}"));
    if critical {
        mc = mc.informational();
    }
    report.checks.push(mc);
    for (name, bcfg) in &baselines {
        let other = edge_samples(bcfg, cfg.n_samples, k)?;
        for (i, (_, u)) in other.iter().enumerate() {
            for (j, v) in u.iter().enumerate() {
                report.records.push(Record::new(format!("{name}:{i}"), format!("edge_u{}", j + 1), *v));
            }
        }
        for j in 0..k {
            let a: Vec<f64> = own.iter().map(|r| r.1[j]).collect();
            let b: Vec<f64> = other.iter().map(|r| r.1[j]).collect();
            let ks = ks_two_sample(&a, &b)?;
            let mut c = Check::new(
                format!("ks_edge_u{}_vs_{name}", j + 1),
                json!({
                    "run": params,
                    "baseline": {"theta": bcfg.theta, "law": bcfg.law.as_str(), "seed": bcfg.master_seed},
                }),
                ks.statistic <= th.ks_two_sample,
            )
            .value(ks.statistic)
            .threshold(th.ks_two_sample);
            if critical {
                c = c.note("critical regime: descriptive only").informational();
            }
            report.checks.push(c);
        }
    }
    Ok(report)
}

/// `t` values of the boundedness grid.
pub const TRACE_T_GRID: [f64; 3] = [0.5, 1.0, 2.0];

struct TraceTerms {
    trace_even: f64,
    trace_odd: f64,
    exp_sum: f64,
}

/// `Tr (M/rho)^{2s}`, `Tr (M/rho)^{2s+1}` and `sum_{|xi| <= N^{1/6}} e^{t xi}`
/// with `s = floor(t sqrt(N))`.
fn trace_terms(values: &[f64], rho: f64, n: usize, t: f64) -> TraceTerms {
    let sn = (n as f64).sqrt();
    let s = (t * sn).floor() as i32;
    let cutoff = (n as f64).powf(1.0 / 6.0);
    let mut te = 0.0;
    let mut to = 0.0;
    let mut ex = 0.0;
    for &x in values {
        let r = x / rho;
        let p = r.powi(2 * s);
        te += p;
        to += p * r;
        if x > 0.0 {
            let xi = 2.0 * sn * (r - 1.0);
            if xi.abs() <= cutoff {
                ex += (t * xi).exp();
            }
        }
    }
    TraceTerms { trace_even: te, trace_odd: to, exp_sum: ex }
}

/// Trace of high powers against the exponential sum over the outlier.
pub fn run_trace_growth(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let base = &cfg.base;
    let regime = base.regime()?;
    if !regime.is_supercritical() {
        return Err(Error::Regime(format!(
            "trace growth needs theta > sigma (theta = {}, sigma = {})",
            base.theta, base.sigma
        )));
    }
    let rho = regime.rho_theta()?;
    let mut grid: Vec<f64> = TRACE_T_GRID.to_vec();
    if !grid.contains(&cfg.t_scale) {
        grid.push(cfg.t_scale);
    }
    let spectra = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| eigenvalues(&sample_deformed(base, i)).map(|s| s.values))
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new("trace-growth");
    let params = cfg.params();
    let mut grid_means = Vec::new();
    for &t in &grid {
        let mut abs_eps = Vec::with_capacity(spectra.len());
        let mut exps = Vec::with_capacity(spectra.len());
        let mut evens = Vec::with_capacity(spectra.len());
        for (i, v) in spectra.iter().enumerate() {
            let tt = trace_terms(v, rho, base.n, t);
            let eps = 0.5 * (tt.trace_even + tt.trace_odd) - tt.exp_sum;
            if t == cfg.t_scale {
                report.records.push(Record::new(i, "trace_even", tt.trace_even));
                report.records.push(Record::new(i, "trace_odd", tt.trace_odd));
                report.records.push(Record::new(i, "exp_sum", tt.exp_sum));
                report.records.push(Record::new(i, "epsilon", eps));
            }
            abs_eps.push(eps.abs());
            exps.push(tt.exp_sum);
            evens.push(tt.trace_even);
        }
        let (me, mx, mt) = (mean(&abs_eps), mean(&exps), mean(&evens));
        report.records.push(Record::new(format!("t={t}"), "mean_abs_epsilon", me));
        report.records.push(Record::new(format!("t={t}"), "mean_exp_sum", mx));
        report.records.push(Record::new(format!("t={t}"), "mean_trace_even", mt));
        grid_means.push(mt);
        if t == cfg.t_scale {
            let rel = me / mx;
            report.checks.push(
                Check::new(
                    "trace_vs_exp_sum",
                    json!({"run": params, "t": t, "s": ((t * (base.n as f64).sqrt()).floor())}),
                    rel <= cfg.thresholds.trace_eps_rel,
                )
                .value(rel)
                .threshold(cfg.thresholds.trace_eps_rel),
            );
        }
    }
    let sup = grid_means.iter().copied().fold(0.0, f64::max);
    report.checks.push(
        Check::new("trace_bounded_on_t_grid", json!({"run": params, "t": grid, "means": grid_means}), sup.is_finite())
            .value(sup)
            .note("largest mean of Tr (M/rho)^{2s} over the grid; no explicit constant is asserted")
            .informational(),
    );
    Ok(report)
}

/// Semicircle fit, interlacing against the undeformed draw, outlier tallies.
pub fn run_spectrum_census(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let base = &cfg.base;
    let regime = base.regime()?;
    let rows = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let deformed = eigenvalues(&sample_deformed(base, i))?;
            let plain = eigenvalues(&sample_normalized_wigner(base, i))?;
            let ks = ks_one_sample(&deformed.values, |x| semicircle_cdf(x, base.sigma), KsMode::OneSampleSemicircle)?;
            let il = interlacing_check(&deformed, &plain)?;
            let census = if regime.is_supercritical() {
                Some(outlier_census(&deformed, base.theta, base.sigma, base.n)?)
            } else {
                None
            };
            Ok((ks.statistic, il, census, deformed.largest()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new("census");
    let params = cfg.params();
    let mut worst_ks = 0.0f64;
    let mut violations = 0usize;
    let mut first_violation = None;
    let mut with_mid = 0usize;
    for (i, (ks, il, census, l1)) in rows.iter().enumerate() {
        report.records.push(Record::new(i, "esd_ks", *ks));
        report.records.push(Record::new(i, "interlacing_violations", il.violations as f64));
        report.records.push(Record::new(i, "lambda_1", *l1));
        if let Some(c) = census {
            report.records.push(Record::new(i, "count_mid", c.count_mid as f64));
            report.records.push(Record::new(i, "count_far", c.count_far as f64));
            with_mid += (c.count_mid > 0) as usize;
        }
        worst_ks = worst_ks.max(*ks);
        violations += il.violations;
        if il.violations > 0 && first_violation.is_none() {
            first_violation = Some(format!("sample {i}: index {:?}, gap {}", il.worst_index, il.max_violation));
        }
    }
    report.checks.push(
        Check::new("esd_semicircle_ks", params.clone(), worst_ks <= cfg.thresholds.ks_esd)
            .value(worst_ks)
            .threshold(cfg.thresholds.ks_esd),
    );
    report.checks.push(
        Check::new("interlacing", params.clone(), violations == 0)
            .value(violations as f64)
            .threshold(0.0)
            .counterexample(first_violation),
    );
    if regime.is_supercritical() {
        report.checks.push(
            Check::new("no_mid_outliers", params, with_mid == 0).value(with_mid as f64).threshold(0.0),
        );
    }
    Ok(report)
}

/// Ranges for the exact combinatorics battery. A zero limit or an empty grid
/// skips that check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyLimits {
    /// Enumeration against both closed forms for `l + 2m <= count_max_len`.
    pub count_max_len: u64,
    /// `sum_p T_{m-p,l+2p} = C(L, m-1)` for `l + 2m <= sum_max_len`.
    pub sum_max_len: u64,
    pub decomposition_max_len: u64,
    pub ballot_max_len: u64,
    pub correspondence_max_len: usize,
    pub correspondence_vertices: u32,
    pub glue_max_len: usize,
    pub glue_vertices: u32,
    pub class_bound_s_max: u64,
    pub tail_m_grid: Vec<u64>,
    pub k_stat_m: Vec<u64>,
    pub k_stat_l: Vec<u64>,
    pub k_stat_samples: u64,
    pub k_stat_bound: f64,
    pub seed: u64,
    /// Adds one to the tabulated `T_{m,l}` at this entry (fault injection).
    pub corrupt_count: Option<(u64, u64)>,
}

impl Default for VerifyLimits {
    fn default() -> Self {
        VerifyLimits {
            count_max_len: 14,
            sum_max_len: 24,
            decomposition_max_len: 14,
            ballot_max_len: 20,
            correspondence_max_len: 10,
            correspondence_vertices: 5,
            glue_max_len: 3,
            glue_vertices: 3,
            class_bound_s_max: 200,
            tail_m_grid: vec![25, 100, 400, 900],
            k_stat_m: vec![10, 50, 100, 200],
            k_stat_l: vec![0, 10, 20, 40],
            k_stat_samples: 400,
            k_stat_bound: 1.0,
            seed: 0,
            corrupt_count: None,
        }
    }
}

impl VerifyLimits {
    pub fn empty() -> Self {
        VerifyLimits {
            count_max_len: 0,
            sum_max_len: 0,
            decomposition_max_len: 0,
            ballot_max_len: 0,
            correspondence_max_len: 0,
            correspondence_vertices: 0,
            glue_max_len: 0,
            glue_vertices: 0,
            class_bound_s_max: 0,
            tail_m_grid: Vec::new(),
            k_stat_m: Vec::new(),
            k_stat_l: Vec::new(),
            k_stat_samples: 0,
            k_stat_bound: 1.0,
            seed: 0,
            corrupt_count: None,
        }
    }
}

fn classes_up_to(max_len: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..=max_len / 2).flat_map(move |m| (0..=max_len - 2 * m).map(move |l| (m, l)))
}

pub fn count_identity_check(limits: &VerifyLimits) -> Result<Check> {
    let mut failures = 0u64;
    let mut first = None;
    for (m, l) in classes_up_to(limits.count_max_len) {
        if m == 0 && l == 0 {
            continue;
        }
        let mut table = count_trajectories(m, l);
        if limits.corrupt_count == Some((m, l)) {
            table += 1u32;
        }
        let enumerated = enumerate_trajectories(m, l)?.len();
        if table != enumerated.into() || count_trajectories_factorial(m, l) != table {
            failures += 1;
            first.get_or_insert_with(|| format!("T({m},{l}): table {table}, enumerated {enumerated}"));
        }
    }
    Ok(Check::new("trajectory_count", json!({"max_len": limits.count_max_len}), failures == 0)
        .value(failures as f64)
        .threshold(0.0)
        .counterexample(first))
}

/// The exact checks of the path model, the correspondence and the Dyck
/// statistics; no check is run for a zero limit.
pub fn run_combinatorics_verify(limits: &VerifyLimits) -> Result<Report> {
    let mut report = Report::new("verify-combinatorics");
    if limits.count_max_len > 0 {
        report.checks.push(count_identity_check(limits)?);
    }
    if limits.sum_max_len > 0 {
        let bad: Vec<String> = classes_up_to(limits.sum_max_len)
            .filter(|&(m, l)| m >= 1 && !verify_count_identity(m, l))
            .map(|(m, l)| format!("m={m}, l={l}"))
            .collect();
        report.checks.push(
            Check::new("shifted_count_sum", json!({"max_len": limits.sum_max_len}), bad.is_empty())
                .value(bad.len() as f64)
                .threshold(0.0)
                .counterexample(bad.first().cloned()),
        );
    }
    if limits.decomposition_max_len > 0 {
        let mut failures = 0u64;
        let mut first = None;
        for (m, l) in classes_up_to(limits.decomposition_max_len) {
            for x in enumerate_trajectories(m, l)? {
                let d = dyck_decompose(&x);
                if d.reconstruct() != x || d.rises.iter().sum::<u64>() != l {
                    failures += 1;
                    first.get_or_insert_with(|| x.to_string());
                }
            }
        }
        report.checks.push(
            Check::new("dyck_decomposition_round_trip", json!({"max_len": limits.decomposition_max_len}), failures == 0)
                .value(failures as f64)
                .threshold(0.0)
                .counterexample(first),
        );
    }
    if limits.ballot_max_len > 0 {
        let mut bad = None;
        for len in (2..=limits.ballot_max_len).step_by(2) {
            for k in (0..=len).step_by(2) {
                if bounded_path_count(len, len, k) != ballot_count(len, k) {
                    bad.get_or_insert_with(|| format!("length {len}, end {k}"));
                }
            }
        }
        report.checks.push(
            Check::new("ballot_transfer_agreement", json!({"max_len": limits.ballot_max_len}), bad.is_none())
                .counterexample(bad),
        );
    }
    if limits.correspondence_max_len > 0 && limits.correspondence_vertices > 0 {
        report.checks.push(correspondence_census(limits.correspondence_max_len, limits.correspondence_vertices)?);
    }
    if limits.glue_max_len > 0 && limits.glue_vertices > 0 {
        for len in 1..=limits.glue_max_len {
            let mut c = preimage_bound_check(len, limits.glue_vertices)?;
            c.check = format!("{}_L{len}", c.check);
            report.checks.push(c);
        }
    }
    if limits.class_bound_s_max > 0 {
        report.checks.push(class_count_bound_check(limits.class_bound_s_max, None));
    }
    if !limits.tail_m_grid.is_empty() {
        for mut c in tail_bound_check(&limits.tail_m_grid, DEFAULT_C0)? {
            if let (Some(f), Some(k)) = (c.params.get("family"), c.params.get("C")) {
                c.check = format!("{}_{}_C{}", c.check, f.as_str().unwrap_or(""), k);
            }
            report.checks.push(c);
        }
    }
    if !limits.k_stat_m.is_empty() && !limits.k_stat_l.is_empty() && limits.k_stat_samples > 0 {
        let mut ratios = Vec::new();
        for &m in &limits.k_stat_m {
            for &l in &limits.k_stat_l {
                let k = mean_k_statistic(m, l, limits.k_stat_samples, limits.seed);
                let lo = (l + 2 * m) as f64;
                let r = k / (l as f64 + lo.sqrt());
                report.records.push(Record::new(format!("m={m},l={l}"), "mean_k_ratio", r));
                ratios.push(r);
            }
        }
        let sup = ratios.iter().copied().fold(0.0, f64::max);
        report.checks.push(
            Check::new(
                "k_statistic_growth",
                json!({"m": limits.k_stat_m, "l": limits.k_stat_l, "samples": limits.k_stat_samples}),
                sup <= limits.k_stat_bound,
            )
            .value(sup)
            .threshold(limits.k_stat_bound)
            .note("sup over the grid of mean K_N / (l + sqrt(L_o))"),
        );
    }
    Ok(report)
}

/// Traces `Tr M^L` for each `L` in `powers`, by repeated multiplication.
fn trace_powers(m: &crate::ensembles::MatrixSample, powers: &[u32]) -> Vec<f64> {
    powers.iter().map(|&l| trace_power_direct(m, l)).collect()
}

/// Monte Carlo means of `Tr M^L` against the exact path-sum oracle, plus the
/// Gaussian-vs-Rademacher oracle probe.
pub fn run_oracle_compare(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let base = &cfg.base;
    let max_l = cfg.powers.iter().copied().max().ok_or(Error::EmptyInput)?;
    if (base.n as f64).powi(max_l as i32) > PATH_SUM_LIMIT as f64 {
        return Err(Error::SizeGuard { what: format!("n^L = {}^{max_l} walks", base.n), limit: PATH_SUM_LIMIT });
    }
    let model = MomentModel::new(base.symmetry, base.law, base.sigma, base.diag_sigma, max_l);
    let rows: Vec<Vec<f64>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| trace_powers(&sample_deformed(base, i), &cfg.powers))
        .collect();
    let mut report = Report::new("oracle-compare");
    let params = cfg.params();
    for (j, &l) in cfg.powers.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (m, se) = mean_and_se(&xs);
        let exact = exact_trace_expectation(base.n, l, &model, base.theta)?;
        let diff = (m - exact).abs();
        // rounding allowance for degenerate (zero variance) cases
        let slack = 1e-9 * exact.abs().max(1.0);
        let excess = (diff - slack).max(0.0);
        let bands = if excess == 0.0 { 0.0 } else if se > 0.0 { excess / se } else { f64::INFINITY };
        report.records.push(Record::new("all", format!("mc_mean_L{l}"), m));
        report.records.push(Record::new("all", format!("mc_se_L{l}"), se));
        report.records.push(Record::new("all", format!("exact_L{l}"), exact));
        report.checks.push(
            Check::new(
                format!("oracle_agreement_L{l}"),
                json!({"run": params, "L": l, "exact": exact, "mc_mean": m, "se": se}),
                diff <= cfg.thresholds.se_band * se + slack,
            )
            .value(bands)
            .threshold(cfg.thresholds.se_band),
        );
    }
    let probe_n: Vec<usize> = (base.n..base.n + 4).filter(|&n| (n as f64).powi(max_l as i32) <= PATH_SUM_LIMIT as f64).collect();
    if probe_n.len() >= 2 {
        let g = MomentModel::new(base.symmetry, LawKind::Gaussian, base.sigma, base.diag_sigma, max_l);
        let r = MomentModel::new(base.symmetry, LawKind::Rademacher, base.sigma, base.diag_sigma, max_l);
        for &l in &cfg.powers {
            let (rows, mut check) = trace_universality_probe(&probe_n, l, base.theta, (&g, &r))?;
            for row in rows {
                report.records.push(Record::new(format!("n={}", row.n), format!("universality_delta_L{l}"), row.delta));
            }
            check.check = format!("trace_universality_L{l}");
            report.checks.push(check);
        }
    }
    Ok(report)
}

/// Leading order of `E Tr (W/sqrt(N))^{2s}`: the sample mean should be
/// within `even_trace_rel` of `Catalan(s) N sigma^{2s}`, and the mean of the
/// odd power `2s+1` within `se_band` standard errors of zero. Runs on the
/// undeformed matrix regardless of `theta`.
pub fn run_even_trace(cfg: &ExperimentConfig, s: u32) -> Result<Report> {
    cfg.validate()?;
    let base = &cfg.base;
    if s == 0 {
        return Err(Error::InvalidConfig("s must be >= 1".into()));
    }
    let rows = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let sp = eigenvalues(&sample_normalized_wigner(base, i))?;
            Ok((trace_power(&sp, 2 * s), trace_power(&sp, 2 * s + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new("even-trace");
    for (i, (e, o)) in rows.iter().enumerate() {
        report.records.push(Record::new(i, format!("trace_{}", 2 * s), *e));
        report.records.push(Record::new(i, format!("trace_{}", 2 * s + 1), *o));
    }
    let evens: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let odds: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let target = ratio_f64(&catalan(s as u64), &1u32.into()) * base.n as f64 * base.sigma.powi(2 * s as i32);
    let me = mean(&evens);
    let rel = (me - target).abs() / target;
    let params = cfg.params();
    report.checks.push(
        Check::new("even_trace_leading_order", json!({"run": params, "s": s, "target": target}), rel <= cfg.thresholds.even_trace_rel)
            .value(rel)
            .threshold(cfg.thresholds.even_trace_rel),
    );
    let (mo, se) = mean_and_se(&odds);
    let bands = if se > 0.0 { mo.abs() / se } else { f64::INFINITY };
    report.checks.push(
        Check::new("odd_trace_zero", json!({"run": params, "power": 2 * s + 1, "mean": mo, "se": se}), bands <= cfg.thresholds.se_band)
            .value(bands)
            .threshold(cfg.thresholds.se_band),
    );
    Ok(report)
}

/// Regime summary used by the CLI banner.
pub fn describe(cfg: &ExperimentConfig) -> Result<String> {
    let r = regime_of(cfg.base.theta, cfg.base.sigma)?;
    Ok(format!(
        "n={} theta={} sigma={} law={} symmetry={} regime={}",
        cfg.base.n, cfg.base.theta, cfg.base.sigma, cfg.base.law, cfg.base.symmetry, r.label
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::MatrixSample;

    fn cfg(n: usize, theta: f64, samples: usize) -> ExperimentConfig {
        let base =
            EnsembleConfig::new(n, 1.0, theta, SymmetryClass::ComplexHermitian, LawKind::Gaussian, 11).unwrap();
        ExperimentConfig::new(base, samples).unwrap()
    }

    #[test]
    fn key_values() {
        let map = parse_key_values("n = 40\n# comment\nt-scale=0.5 # trailing\nlaw=rademacher\n").unwrap();
        let c = ExperimentConfig::from_map(&map).unwrap();
        assert_eq!((c.base.n, c.t_scale, c.base.law), (40, 0.5, LawKind::Rademacher));
        assert!(parse_key_values("bogus=1").is_err());
        assert!(parse_key_values("n 4").is_err());
        let mut bad = map.clone();
        bad.insert("top_k".into(), "41".into());
        assert!(ExperimentConfig::from_map(&bad).is_err());
    }

    #[test]
    fn trace_terms_single_outlier() {
        // one eigenvalue at rho, the rest at zero
        let rho = 2.5;
        let t = trace_terms(&[rho, 0.0, 0.0], rho, 400, 1.0);
        assert_eq!((t.trace_even, t.trace_odd, t.exp_sum), (1.0, 1.0, 1.0));
    }

    #[test]
    fn identical_baseline_gives_zero_ks() {
        let mut c = cfg(20, 0.0, 30);
        c.baseline = Some(c.base.clone());
        let r = run_fluctuations(&c).unwrap();
        assert_eq!(r.check("ks_edge_u1_vs_baseline").unwrap().value, Some(0.0));
    }

    #[test]
    fn empty_limits_are_a_pass() {
        let r = run_combinatorics_verify(&VerifyLimits::empty()).unwrap();
        assert!(r.checks.is_empty() && r.passed());
    }

    #[test]
    fn corrupted_table_fails() {
        let mut limits = VerifyLimits::empty();
        limits.count_max_len = 8;
        assert!(run_combinatorics_verify(&limits).unwrap().passed());
        limits.corrupt_count = Some((2, 3));
        let r = run_combinatorics_verify(&limits).unwrap();
        assert!(!r.passed());
        assert!(r.checks[0].counterexample.as_deref().unwrap().contains("T(2,3)"));
    }

    #[test]
    fn trace_growth_needs_supercritical() {
        assert!(matches!(run_trace_growth(&cfg(10, 0.5, 2)), Err(Error::Regime(_))));
    }

    #[test]
    fn oracle_compare_size_guard() {
        let mut c = cfg(200, 0.0, 2);
        c.powers = vec![6];
        assert!(matches!(run_oracle_compare(&c), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn csv_layout() {
        let mut r = Report::new("x");
        r.records.push(Record::new(0, "a", 1.5));
        r.checks.push(Check::new("c", json!({}), true).value(0.25));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample,statistic,value\n0,a,1.5\ncheck,c.value,0.25\ncheck,c.pass,1.0\n");
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let c = cfg(12, 2.0, 16);
        let out = |t| {
            let r = run_in_pool(Some(t), || run_spectrum_census(&c)).unwrap().unwrap();
            let mut buf = Vec::new();
            r.write_json(&mut buf).unwrap();
            buf
        };
        assert_eq!(out(1), out(3));
    }

    #[test]
    fn trace_powers_match_spectrum() {
        let m = MatrixSample::real(2, vec![1.0, 2.0, 2.0, -1.0]);
        let t = trace_powers(&m, &[2, 3, 4]);
        assert!((t[0] - 10.0).abs() < 1e-12 && t[1].abs() < 1e-12 && (t[2] - 50.0).abs() < 1e-12);
    }
}
