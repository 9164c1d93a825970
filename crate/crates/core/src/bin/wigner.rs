use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wigner_core::experiments::{
    self, parse_key_values, run_in_pool, ExperimentConfig, OutputFormat, Report, VerifyLimits,
};
use wigner_core::Error;

#[derive(Parser)]
#[command(name = "wigner", version, about = "Deformed Wigner matrix experiments and exact path-combinatorics checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Largest-eigenvalue fluctuations across the phase transition
    Fluctuations(RunArgs),
    /// High trace powers against the outlier exponential sum
    TraceGrowth(RunArgs),
    /// Semicircle fit, interlacing and outlier census
    Census(RunArgs),
    /// Exact combinatorial identities and bounds
    VerifyCombinatorics(VerifyArgs),
    /// Monte Carlo trace moments against the exact path-sum oracle
    OracleCompare(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    diag_sigma: Option<f64>,
    /// gaussian | rademacher | uniform
    #[arg(long)]
    law: Option<String>,
    /// complex | real
    #[arg(long)]
    symmetry: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_scale: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    baseline_theta: Option<f64>,
    #[arg(long)]
    baseline_law: Option<String>,
    #[arg(long)]
    baseline_seed: Option<u64>,
    /// Comma-separated trace powers (oracle-compare)
    #[arg(long)]
    power: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Default)]
struct OutArgs {
    /// Report destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run no checks at all
    #[arg(long)]
    empty: bool,
    #[arg(long)]
    count_max_len: Option<u64>,
    #[arg(long)]
    sum_max_len: Option<u64>,
    #[arg(long)]
    census_max_len: Option<usize>,
    #[arg(long)]
    census_vertices: Option<u32>,
    #[arg(long)]
    glue_max_len: Option<usize>,
    #[arg(long)]
    class_s_max: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Corrupt the tabulated T_{m,l} at `M,L`
    #[arg(long, value_name = "M,L")]
    inject_fault: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

impl RunArgs {
    fn to_config(&self) -> Result<ExperimentConfig, Error> {
        let mut map = match &self.config {
            Some(path) => parse_key_values(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("n", self.n.map(|v| v.to_string()));
        set("samples", self.samples.map(|v| v.to_string()));
        set("theta", self.theta.map(|v| v.to_string()));
        set("sigma", self.sigma.map(|v| v.to_string()));
        set("diag_sigma", self.diag_sigma.map(|v| v.to_string()));
        set("law", self.law.clone());
        set("symmetry", self.symmetry.clone());
        set("seed", self.seed.map(|v| v.to_string()));
        set("t_scale", self.t_scale.map(|v| v.to_string()));
        set("top_k", self.top_k.map(|v| v.to_string()));
        set("baseline_theta", self.baseline_theta.map(|v| v.to_string()));
        set("baseline_law", self.baseline_law.clone());
        set("baseline_seed", self.baseline_seed.map(|v| v.to_string()));
        set("power", self.power.clone());
        set("out", self.out.out.as_ref().map(|p| p.display().to_string()));
        set("format", self.out.format.clone());
        set("threads", self.out.threads.map(|v| v.to_string()));
        ExperimentConfig::from_map(&map)
    }
}

impl VerifyArgs {
    fn limits(&self) -> Result<VerifyLimits, Error> {
        let mut l = if self.empty { VerifyLimits::empty() } else { VerifyLimits::default() };
        if let Some(v) = self.count_max_len {
            l.count_max_len = v;
        }
        if let Some(v) = self.sum_max_len {
            l.sum_max_len = v;
        }
        if let Some(v) = self.census_max_len {
            l.correspondence_max_len = v;
        }
        if let Some(v) = self.census_vertices {
            l.correspondence_vertices = v;
        }
        if let Some(v) = self.glue_max_len {
            l.glue_max_len = v;
        }
        if let Some(v) = self.class_s_max {
            l.class_bound_s_max = v;
        }
        if let Some(v) = self.seed {
            l.seed = v;
        }
        if let Some(f) = &self.inject_fault {
            let (m, k) = f
                .split_once(',')
                .and_then(|(m, k)| Some((m.trim().parse().ok()?, k.trim().parse().ok()?)))
                .ok_or_else(|| Error::Parse(format!("--inject-fault expects M,L, got '{f}'")))?;
            l.corrupt_count = Some((m, k));
        }
        Ok(l)
    }
}

fn emit(report: &Report, format: OutputFormat, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => report.write_to_path(format, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write(format, &mut lock)?;
            lock.flush()?;
        }
    }
    for c in &report.checks {
        let status = if c.pass {
            "PASS"
        } else if c.informational {
            "INFO"
        } else {
            "FAIL"
        };
        let value = c.value.map(|v| format!(" value={v}")).unwrap_or_default();
        eprintln!("[{status}] {}{value}", c.check);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    let (report, format, out) = match cli.command {
        Command::VerifyCombinatorics(args) => {
            let limits = args.limits()?;
            let format = args.out.format.as_deref().map(str::parse).transpose()?.unwrap_or(OutputFormat::Csv);
            let report = run_in_pool(args.out.threads, || experiments::run_combinatorics_verify(&limits))??;
            (report, format, args.out.out)
        }
        Command::Fluctuations(a) => dispatch(&a, experiments::run_fluctuations)?,
        Command::TraceGrowth(a) => dispatch(&a, experiments::run_trace_growth)?,
        Command::Census(a) => dispatch(&a, experiments::run_spectrum_census)?,
        Command::OracleCompare(a) => dispatch(&a, experiments::run_oracle_compare)?,
    };
    emit(&report, format, out.as_ref())?;
    Ok(report.passed())
}

fn dispatch(
    args: &RunArgs,
    f: fn(&ExperimentConfig) -> Result<Report, Error>,
) -> Result<(Report, OutputFormat, Option<PathBuf>), Error> {
    let cfg = args.to_config()?;
    eprintln!("{}", experiments::describe(&cfg)?);
    let report = run_in_pool(cfg.threads, || f(&cfg))??;
    Ok((report, cfg.output_format, cfg.output_path.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(
            e @ (Error::InvalidConfig(_)
            | Error::Parse(_)
            | Error::Regime(_)
            | Error::SizeGuard { .. }
            | Error::DimensionMismatch { .. }),
        ) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
