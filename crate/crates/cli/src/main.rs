mod config;

use std::env;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ou_bounds::report::{write_csv, BoundsRow};
use ou_bounds::validate::{run_all, CheckStatus, ValidateSpec};
use ou_bounds::{fit_scaling, regime_table, sweep, BoundsError, FitTarget, PowerLaw, SweepSpec};

use config::{parse_n_grid, parse_power, ConfigError, RunConfig};

const EXIT_NUMERIC: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ou-bounds",
    version,
    about = "Distortion bounds for dense sensor networks observing an OU process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep N and write the bounds table as CSV.
    Bounds(BoundsArgs),
    /// Monte Carlo and inequality checks.
    Validate(ValidateArgs),
    /// Regime classification and bound orders for a list of power laws.
    Regimes(RegimesArgs),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    quad_order: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Sum power law, e.g. `constant:1`, `linear:1`, `power:1:-2`, `exp-root:0.5`.
    #[arg(long, value_parser = parse_power, allow_hyphen_values = true)]
    power: Option<PowerLaw>,
    /// Comma-separated sensor counts.
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_power, allow_hyphen_values = true)]
    power: Option<PowerLaw>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sensor count for the Monte Carlo check.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct RegimesArgs {
    #[command(flatten)]
    common: Common,
    /// Power laws to tabulate; repeatable. Replaces the list from the config file.
    #[arg(long = "power", value_parser = parse_power, allow_hyphen_values = true)]
    powers: Vec<PowerLaw>,
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::InvalidParameter { .. } | BoundsError::TooFewTrials(_) => Failure::Config(e.to_string()),
            _ => Failure::Numeric(format!("{} module: {e}", e.module())),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    let overrides = [
        (&mut cfg.sigma, common.sigma),
        (&mut cfg.eta, common.eta),
        (&mut cfg.t0, common.t0),
        (&mut cfg.h, common.h),
        (&mut cfg.alpha, common.alpha),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(q) = common.quad_order {
        cfg.quad_order = q;
    }
    Ok(cfg)
}

fn checked(cfg: &RunConfig) -> Result<(), Failure> {
    for w in cfg.check()? {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = env::var("OU_BOUNDS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Failure::Config(format!(
            "invalid OU_BOUNDS_THREADS: expected a non-negative integer, got '{raw}'"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let mut cfg = load(&args.common)?;
    if let Some(p) = args.power {
        cfg.power = p;
    }
    if let Some(grid) = args.n_grid {
        cfg.n_grid = parse_n_grid(&grid).map_err(|e| Failure::Config(format!("invalid n_grid: {e}")))?;
    }
    if let Some(out) = args.out {
        cfg.out_path = out;
    }
    checked(&cfg)?;
    let spec = SweepSpec {
        params: cfg.ou_params()?,
        power: cfg.power,
        h: cfg.h,
        alpha: cfg.alpha,
        quad_order: cfg.quad_order,
    };
    let rows = sweep(&spec, &cfg.n_grid)?;

    let file = File::create(&cfg.out_path)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", cfg.out_path.display())))?;
    let mut out = BufWriter::new(file);
    write_csv(&mut out, &rows)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", cfg.out_path.display())))?;

    let ok: Vec<BoundsRow> = rows.iter().filter_map(|r| r.outcome.as_ref().ok().cloned()).collect();
    println!("{}", summary(&ok, rows.len(), &cfg));
    let failures: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.outcome
                .as_ref()
                .err()
                .map(|e| format!("N={}: {} module: {e}", r.n, e.module()))
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numeric(failures.join("; ")))
    }
}

fn summary(rows: &[BoundsRow], total: usize, cfg: &RunConfig) -> String {
    let slope = |t| match fit_scaling(rows, t) {
        Ok(f) => format!("{:.4}", f.slope),
        Err(_) => "n/a".into(),
    };
    let spread = |t| match fit_scaling(rows, t) {
        Ok(f) => f.ratio_spread.map_or("n/a".into(), |s| format!("{s:.3}")),
        Err(_) => "n/a".into(),
    };
    format!(
        "wrote {} ({}/{total} rows): D_s slope vs N = {}, D_l slope vs ln ln NP = {} (spread {}), \
         D_u slope vs ln ln NP = {} (spread {})",
        cfg.out_path.display(),
        rows.len(),
        slope(FitTarget::SampleVsN),
        slope(FitTarget::LowerVsLogNp),
        spread(FitTarget::LowerVsLogNp),
        slope(FitTarget::UpperVsLogNp),
        spread(FitTarget::UpperVsLogNp),
    )
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let mut cfg = load(&args.common)?;
    if let Some(p) = args.power {
        cfg.power = p;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.n {
        cfg.validate_n = n;
    }
    checked(&cfg)?;
    if cfg.trials < 100 {
        return Err(Failure::Config(format!(
            "invalid trials: need at least 100, got {}",
            cfg.trials
        )));
    }
    let mut spec = ValidateSpec::new(cfg.ou_params()?, cfg.power, cfg.alpha);
    spec.quad_order = cfg.quad_order;
    spec.trials = cfg.trials;
    spec.seed = cfg.seed;
    spec.mc_n = cfg.validate_n;

    let checks = run_all(&spec)?;
    for c in &checks {
        println!("{} {}: {}", c.status, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("{failed} validation check(s) failed")))
    }
}

fn cmd_regimes(args: RegimesArgs) -> Result<(), Failure> {
    let mut cfg = load(&args.common)?;
    if !args.powers.is_empty() {
        cfg.powers = args.powers;
    }
    checked(&cfg)?;
    if cfg.powers.is_empty() {
        return Err(Failure::Config("invalid powers: the power-law list is empty".into()));
    }
    println!("power,regime,lower_order,upper_order,bounds_meet,rationale");
    for row in regime_table(&cfg.powers, cfg.alpha) {
        println!(
            "{},{},{},{},{},{}",
            row.power,
            row.regime,
            row.lower_order,
            row.upper_order,
            row.meet.as_str(),
            row.rationale
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Regimes(a) => cmd_regimes(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: numeric failure in {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
