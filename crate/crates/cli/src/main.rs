use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leo_noma::allocation::{optimize_ut_counts, optimizer_csv, LogBase, OptimizerOptions, PaScheme};
use leo_noma::coverage::{CoverageOptions, NomaSetup, Ordering};
use leo_noma::experiments::{
    run_sweep, run_table1, run_validation, Engine, Metric, SecondaryAxis, SweepAxis, SweepRange, SweepSpec,
    ValidationOptions, DEFAULT_KAPPA, DEFAULT_RI_FACTOR, DEFAULT_SEED, TABLE1_TOLERANCE,
};
use leo_noma::geometry::WalkerDeltaParams;
use leo_noma::interference::FadingModel;
use leo_noma::montecarlo::{compare_constellations, sweep_csv, McAllocation, McOptions, SWEEP_TRIALS};
use leo_noma::{db_to_linear, Error, Network, SystemConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "leo-noma", version, about = "Coverage and sum-SE experiments for NOMA downlink in LEO constellations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON file with `SystemConfig` overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<u64>,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Nakagami shape of every link.
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: u32,
    /// Report sum SE in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EngineArg {
    Analytic,
    MonteCarlo,
    Both,
}

#[derive(Copy, Clone, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OrderingArg {
    Msp,
    Isinr,
}

impl From<OrderingArg> for Ordering {
    fn from(o: OrderingArg) -> Self {
        match o {
            OrderingArg::Msp => Ordering::Msp,
            OrderingArg::Isinr => Ordering::Isinr,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AxisArg {
    ThetaDb,
    NumSatellites,
    AltitudeKm,
    UtCount,
    RiFactor,
    MainlobeGain,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::ThetaDb => SweepAxis::ThetaDb,
            AxisArg::NumSatellites => SweepAxis::NumSatellites,
            AxisArg::AltitudeKm => SweepAxis::AltitudeKm,
            AxisArg::UtCount => SweepAxis::UtCount,
            AxisArg::RiFactor => SweepAxis::RiFactor,
            AxisArg::MainlobeGain => SweepAxis::MainlobeGain,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MetricArg {
    Coverage,
    MeanCoverage,
    MeanCoverageUnconditional,
    SumSe,
    OmaSumSe,
    OptimizedSumSe,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Coverage => Metric::CoveragePerUt,
            MetricArg::MeanCoverage => Metric::MeanCoverage,
            MetricArg::MeanCoverageUnconditional => Metric::MeanCoverageUnconditional,
            MetricArg::SumSe => Metric::SumSe,
            MetricArg::OmaSumSe => Metric::OmaSumSe,
            MetricArg::OptimizedSumSe => Metric::OptimizedSumSe,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one or two parameters and tabulate the chosen metrics.
    Sweep(SweepArgs),
    /// Reproduce the reference table of optimal three-user allocations.
    Table1 {
        #[command(flatten)]
        common: Common,
        /// Nakagami shapes to run (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2])]
        kappas: Vec<u32>,
        /// Relative sum-SE tolerance.
        #[arg(long, default_value_t = TABLE1_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_RI_FACTOR)]
        ri: f64,
    },
    /// Run the invariant suite; exits nonzero if any check fails.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Absolute analytic-vs-simulation tolerance.
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
    /// Best ascending grid allocation per threshold and user count.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Thresholds in dB (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0])]
        theta_db: Vec<f64>,
        /// User counts to search (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [3usize])]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value_t = OrderingArg::Msp)]
        ordering: OrderingArg,
        #[arg(long, default_value_t = DEFAULT_RI_FACTOR)]
        ri: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Quadrature relative tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Simulated coverage for the Poisson model and a Walker-Delta shell on shared trials.
    McCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        stop: f64,
        #[arg(long, default_value_t = 13)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value_t = OrderingArg::Isinr)]
        ordering: OrderingArg,
        /// Allocation: `etpa`, `erpa` or comma-separated coefficients.
        #[arg(long, default_value = "erpa")]
        pa: String,
        #[arg(long, default_value_t = DEFAULT_RI_FACTOR)]
        ri: f64,
        /// Orbital planes of the Walker-Delta shell (default: largest divisor near the square root).
        #[arg(long)]
        planes: Option<u32>,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Full sweep specification as JSON; other sweep flags are ignored.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AxisArg::ThetaDb)]
    axis: AxisArg,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    start: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    stop: f64,
    #[arg(long, default_value_t = 13)]
    points: usize,
    #[arg(long, value_enum)]
    secondary_axis: Option<AxisArg>,
    #[arg(long, allow_hyphen_values = true)]
    secondary_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    secondary_stop: Option<f64>,
    #[arg(long)]
    secondary_points: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MetricArg::Coverage])]
    metrics: Vec<MetricArg>,
    #[arg(long, value_enum, default_value_t = EngineArg::Analytic)]
    engine: EngineArg,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, value_enum, default_value_t = OrderingArg::Msp)]
    ordering: OrderingArg,
    /// Allocation: `etpa`, `erpa` or comma-separated coefficients.
    #[arg(long, default_value = "etpa")]
    pa: String,
    #[arg(long, default_value_t = DEFAULT_RI_FACTOR)]
    ri: f64,
    /// Threshold when it is not the swept axis.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta_db: f64,
    /// Quadrature relative tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

fn load_config(path: &Option<PathBuf>) -> Result<SystemConfig, Error> {
    match path {
        Some(p) => SystemConfig::from_json_file(p),
        None => Ok(SystemConfig::default()),
    }
}

fn parse_pa(s: &str) -> Result<PaScheme, Error> {
    match s {
        "etpa" => Ok(PaScheme::etpa()),
        "erpa" => Ok(PaScheme::erpa()),
        list => {
            let p = list
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Setup(format!("bad coefficient {x:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(PaScheme::fpa(p))
        }
    }
}

fn base(common: &Common) -> LogBase {
    if common.bits {
        LogBase::Two
    } else {
        LogBase::E
    }
}

fn emit(common: &Common, text: &str) -> Result<(), Error> {
    match &common.out {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn provenance(config: &SystemConfig, seed: u64, extra: serde_json::Value) -> String {
    format!("# config={}\n# seed={seed}\n# run={extra}\n", serde_json::to_string(config).expect("serializable"))
}

fn sweep(args: SweepArgs) -> Result<bool, Error> {
    let common = &args.common;
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<SweepSpec>(&text)?
        }
        None => {
            let secondary = match (args.secondary_axis, args.secondary_start, args.secondary_stop, args.secondary_points) {
                (None, ..) => None,
                (Some(axis), Some(start), Some(stop), Some(points)) => {
                    Some(SecondaryAxis { axis: axis.into(), range: SweepRange { start, stop, points } })
                }
                _ => {
                    return Err(Error::Config {
                        field: "secondary",
                        reason: "--secondary-axis needs --secondary-start, --secondary-stop and --secondary-points".into(),
                    })
                }
            };
            SweepSpec {
                axis: args.axis.into(),
                range: SweepRange { start: args.start, stop: args.stop, points: args.points },
                secondary,
                config: load_config(&common.config)?,
                kappa: common.kappa,
                num_uts: args.n,
                ordering: args.ordering.into(),
                pa: parse_pa(&args.pa)?,
                ri_factor: args.ri,
                theta_db: args.theta_db,
                metrics: args.metrics.iter().map(|&m| m.into()).collect(),
                engines: match args.engine {
                    EngineArg::Analytic => vec![Engine::Analytic],
                    EngineArg::MonteCarlo => vec![Engine::MonteCarlo],
                    EngineArg::Both => vec![Engine::Analytic, Engine::MonteCarlo],
                },
                trials: common.trials.unwrap_or(SWEEP_TRIALS),
                seed: common.seed,
                rel_tol: args.tol,
                log_base: base(common),
            }
        }
    };
    let out = run_sweep(&spec)?;
    emit(common, &if common.format == Format::Json { out.to_json() + "\n" } else { out.to_csv() })?;
    Ok(true)
}

fn table1(common: &Common, kappas: &[u32], tol: f64, ri: f64) -> Result<bool, Error> {
    let config = load_config(&common.config)?;
    let opt = OptimizerOptions { ri_factor: ri, base: base(common), ..Default::default() };
    let report = run_table1(&config, kappas, &opt, tol)?;
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let mut s = provenance(&config, common.seed, json!({ "command": "table1", "ri_factor": ri, "tolerance": tol }));
            s.push_str("ordering,theta_db,kappa,found_pa,found_sum_se,reference_pa,reference_sum_se,rel_error,pa_match,se_within_tol,passed\n");
            for r in &report.rows {
                let pa = r.found_pa.as_ref().map(|p| p.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")).unwrap_or_default();
                let rp = r.reference_pa.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
                s.push_str(&format!(
                    "{},{},{},{pa},{},{rp},{},{},{},{},{}\n",
                    r.ordering.as_str(),
                    r.theta_db,
                    r.kappa,
                    r.found_sum_se,
                    r.reference_sum_se,
                    r.rel_error,
                    r.pa_match,
                    r.se_within_tol,
                    r.passed()
                ));
            }
            s
        }
    };
    eprint!("{}", report.render());
    emit(common, &text)?;
    Ok(true)
}

fn validate(common: &Common, tol: f64) -> Result<bool, Error> {
    let config = load_config(&common.config)?;
    let mut opts = ValidationOptions { seed: common.seed, mc_tol: tol, ..Default::default() };
    if let Some(t) = common.trials {
        opts.trials = t;
    }
    let report = run_validation(&config, &opts)?;
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => report.render(),
    };
    emit(common, &text)?;
    Ok(report.passed())
}

#[allow(clippy::too_many_arguments)]
fn optimize(common: &Common, theta_db: &[f64], counts: &[usize], ordering: Ordering, ri: f64, step: f64, tol: f64) -> Result<bool, Error> {
    let config = load_config(&common.config)?;
    let net = Network::new(config.clone(), FadingModel::nakagami(common.kappa)?)?;
    let opt = OptimizerOptions { step, ri_factor: ri, base: base(common), coverage: CoverageOptions { rel_tol: tol, ..Default::default() } };
    let mut results = Vec::new();
    for &t in theta_db {
        results.push(optimize_ut_counts(db_to_linear(t), ordering, counts, &net, &opt)?);
    }
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "config": config, "kappa": common.kappa, "ordering": ordering, "ri_factor": ri, "step": step,
            "theta_db": theta_db, "results": results,
        }))? + "\n",
        Format::Csv => {
            let run = json!({ "command": "optimize", "kappa": common.kappa, "ordering": ordering, "ri_factor": ri, "step": step, "counts": counts });
            let mut thetas = Vec::new();
            let mut rows = Vec::new();
            for (t, r) in theta_db.iter().zip(&results) {
                for best in &r.per_n {
                    thetas.push(*t);
                    rows.push(best.clone());
                }
            }
            provenance(&config, common.seed, run) + &optimizer_csv(&thetas, &rows)
        }
    };
    emit(common, &text)?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn mc_compare(common: &Common, start: f64, stop: f64, points: usize, n: usize, ordering: Ordering, pa: &str, ri: f64, planes: Option<u32>) -> Result<bool, Error> {
    if points < 2 {
        return Err(Error::Config { field: "points", reason: "a sweep needs at least two points".into() });
    }
    let config = load_config(&common.config)?;
    let net = Network::new(config.clone(), FadingModel::nakagami(common.kappa)?)?;
    let scheme = parse_pa(pa)?;
    let setup = NomaSetup::uniform(ordering, scheme.coefficients(n, &net)?, ri, 1.0)?;
    let allocation = if pa == "erpa" { McAllocation::ErpaPerRealization } else { McAllocation::Fixed };
    let mc = McOptions { trials: common.trials.unwrap_or(SWEEP_TRIALS), seed: common.seed, allocation, ..Default::default() };
    let mut walker = WalkerDeltaParams::default_for(config.num_satellites);
    if let Some(p) = planes {
        walker.num_planes = p;
    }
    let grid = SweepRange { start, stop, points }.values();
    let cmp = compare_constellations(&setup, &grid, &walker, &net, &mc)?;
    eprintln!("max per-user coverage gap {:.4} (standard error {:.4})", cmp.max_gap, cmp.gap_std_error);
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "config": config, "seed": common.seed, "trials": mc.trials, "walker": walker, "comparison": cmp,
        }))? + "\n",
        Format::Csv => {
            let run = json!({ "command": "mc-compare", "kappa": common.kappa, "trials": mc.trials, "walker": walker, "max_gap": cmp.max_gap });
            let walker_rows: String = sweep_csv(&cmp.walker, false).lines().skip(1).map(|l| format!("{l}\n")).collect();
            provenance(&config, common.seed, run) + &sweep_csv(&cmp.sppp, false) + &walker_rows
        }
    };
    emit(common, &text)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Table1 { common, kappas, tol, ri } => table1(&common, &kappas, tol, ri),
        Command::Validate { common, tol } => validate(&common, tol),
        Command::Optimize { common, theta_db, n, ordering, ri, step, tol } => {
            optimize(&common, &theta_db, &n, ordering.into(), ri, step, tol)
        }
        Command::McCompare { common, start, stop, points, n, ordering, pa, ri, planes } => {
            mc_compare(&common, start, stop, points, n, ordering.into(), &pa, ri, planes)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let record = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
