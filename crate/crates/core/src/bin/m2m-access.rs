//! Command-line front end: single-load analyses, arrival-rate sweeps and
//! closed-form quantities.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use m2m_access::config::{emit_csv, parse_config_with_env, RunConfig, SEED_ENV};
use m2m_access::model::TrafficModel;
use m2m_access::sim::{aggregate, analytic_sweep, run_point, run_sweep, Coordination, Scheme, SchemeConfig, SchemeTag, SweepRow};
use m2m_access::uncoordinated::{
    noma_device_cap, noma_required_snr, optimize_design, uncoordinated_throughput, UncoordinatedDesign,
};
use m2m_access::Access;

#[derive(Parser)]
#[command(name = "m2m-access", version, about = "Uplink multiple-access throughput for cellular M2M traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coordinated FDMA/TDMA/NOMA at one arrival rate (Monte Carlo).
    Coordinated(PointArgs),
    /// Uncoordinated FDMA/TDMA/NOMA at one arrival rate: design, closed form
    /// and Monte Carlo.
    Uncoordinated(PointArgs),
    /// Throughput over the configured arrival-rate grid, written as CSV.
    Sweep(CommonArgs),
    /// Closed-form quantities as `key=value` lines.
    Cap(CapArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file of `key=value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (`-` for standard output).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Arrival rate in packets per second (defaults to lambda_min).
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct CapArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Arrival rate for the optimized FDMA/TDMA designs.
    #[arg(long)]
    lambda: Option<f64>,
    /// Transmitter count for the NOMA target SNR.
    #[arg(long = "np")]
    n_p: Option<f64>,
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    let mut overrides = Vec::new();
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
        overrides.push((k.trim().to_string(), v.to_string()));
    }
    if let Some(t) = args.trials {
        overrides.push(("trials".into(), t.to_string()));
    }
    if let Some(s) = args.seed {
        overrides.push(("master_seed".into(), s.to_string()));
    }
    if let Some(o) = &args.output {
        overrides.push(("output_path".into(), o.display().to_string()));
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    Ok(parse_config_with_env(&text, &overrides, env_seed.as_deref())?)
}

fn schemes_of(config: &RunConfig, coordination: Coordination) -> Vec<Scheme> {
    let mut tags: Vec<SchemeTag> = config
        .schemes
        .iter()
        .copied()
        .filter(|t| t.coordination == coordination)
        .collect();
    if tags.is_empty() {
        tags = Access::ALL.map(|access| SchemeTag { coordination, access }).to_vec();
    }
    tags.into_iter()
        .map(|t| Scheme::from_tag(t, config.enforce_minimum, config.noma_eq20_variant))
        .collect()
}

fn describe(config: &SchemeConfig) -> String {
    match config {
        SchemeConfig::Coordinated { enforce_minimum, .. } => format!("minima={enforce_minimum}"),
        SchemeConfig::Uncoordinated(d) if d.scheme == Access::Noma => format!("gamma0={:.6e}", d.target_snr),
        SchemeConfig::Uncoordinated(d) => format!("p_c={:.6} N={}", d.access_prob, d.partitions),
    }
}

fn point(args: &PointArgs, coordination: Coordination) -> Result<()> {
    let config = load_config(&args.common)?;
    let lambda = args.lambda.unwrap_or(config.lambda_min);
    let traffic = TrafficModel::new(lambda)?;
    let params = config.params;
    let mut rows = Vec::new();

    println!("lambda = {lambda} packets/s, trials = {}, seed = {}", config.trials, config.master_seed);
    println!("{}", params.digest());
    println!(
        "{:<22} {:<28} {:>14} {:>14} {:>12} {:>14}",
        "scheme", "design", "analytic_pps", "mc_pps", "ci95", "mean_arrivals"
    );
    for scheme in schemes_of(&config, coordination) {
        let resolved = scheme.resolve(&params, &traffic)?;
        let analytic = match resolved {
            SchemeConfig::Uncoordinated(design) if config.mode.runs_analytic() => {
                let a = uncoordinated_throughput(&design, &params, &traffic)?;
                Some(a.expected_success / params.slot_s)
            }
            _ => None,
        };
        let mc = if config.mode.runs_montecarlo() || coordination == Coordination::Coordinated {
            let outcomes = run_point(&resolved, &params, &traffic, config.trials, config.master_seed, 0)?;
            Some(aggregate(&outcomes)?)
        } else {
            None
        };
        let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:<22} {:<28} {:>14} {:>14} {:>12} {:>14}",
            scheme.tag().to_string(),
            describe(&resolved),
            fmt_opt(analytic),
            fmt_opt(mc.map(|s| s.mean_served / params.slot_s)),
            fmt_opt(mc.map(|s| s.ci95_halfwidth / params.slot_s)),
            fmt_opt(mc.map(|s| s.mean_arrivals)),
        );
        if let Some(stats) = mc {
            rows.push(SweepRow {
                scheme: scheme.tag().to_string(),
                lambda,
                trials: stats.trials,
                mean_throughput: stats.mean_served / params.slot_s,
                ci95_halfwidth: stats.ci95_halfwidth / params.slot_s,
                seed: config.master_seed,
                params,
            });
        }
    }
    if config.output_path != Path::new("-") {
        emit_csv(&rows, &config.output_path)?;
    }
    Ok(())
}

fn sweep(args: &CommonArgs) -> Result<()> {
    let config = load_config(args)?;
    let grid = config.lambda_grid();
    let mut rows = Vec::new();
    for scheme in config.scheme_list() {
        if config.mode.runs_montecarlo() {
            rows.extend(run_sweep(&scheme, &config.params, &grid, config.trials, config.master_seed)?);
        }
        if config.mode.runs_analytic() && matches!(scheme, Scheme::Uncoordinated { .. }) {
            rows.extend(analytic_sweep(&scheme, &config.params, &grid, config.master_seed)?);
        }
    }
    emit_csv(&rows, &config.output_path)?;
    eprintln!("wrote {} rows to {}", rows.len(), config.output_path.display());
    Ok(())
}

fn cap(args: &CapArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let params = config.params;
    let cap = noma_device_cap(&params);
    println!("noma_device_cap={cap}");
    println!("sinr_threshold={}", params.sinr_threshold());
    if let Some(n_p) = args.n_p {
        let snr = noma_required_snr(n_p, &params, config.noma_eq20_variant)?;
        println!("noma_required_snr={snr}");
    }
    let lambda = args.lambda.unwrap_or(config.lambda_min);
    let traffic = TrafficModel::new(lambda)?;
    println!("lambda={lambda}");
    for access in [Access::Fdma, Access::Tdma] {
        let design: UncoordinatedDesign = optimize_design(access, &params, &traffic)?;
        let analysis = uncoordinated_throughput(&design, &params, &traffic)?;
        println!("{access}_access_prob={}", design.access_prob);
        println!("{access}_partitions={}", design.partitions);
        println!("{access}_expected_success={}", analysis.expected_success);
    }
    let noma = m2m_access::uncoordinated::noma_design(&params, &traffic, config.noma_eq20_variant);
    let analysis = uncoordinated_throughput(&noma, &params, &traffic)?;
    println!("noma_target_snr={}", noma.target_snr);
    println!("noma_expected_success={}", analysis.expected_success);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Coordinated(args) => point(args, Coordination::Coordinated),
        Command::Uncoordinated(args) => point(args, Coordination::Uncoordinated),
        Command::Sweep(args) => sweep(args),
        Command::Cap(args) => cap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
