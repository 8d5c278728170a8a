use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use transit_mp::control::ControllerKind;
use transit_mp::harness::{
    self, calibrate_to_file, Overrides, PenetrationArg, RunDescriptor, RunSummary, SweepAxis,
    SweepDescriptor,
};
use transit_mp::network::{validate_network, ScenarioDoc, SegmentationStrategy};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "transit-mp",
    version,
    about = "Max-pressure signal control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one controller over several seeds.
    Run(RunArgs),
    /// Repeat runs along one parameter axis.
    Sweep(SweepArgs),
    /// Measure per-movement historical rates from a full-observation run.
    Calibrate(CalibrateArgs),
    /// Solve the admissible-demand LP for the scenario's peak demand.
    CheckRegion(RegionArgs),
    /// Report every schema or invariant violation in a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    controller: Option<ControllerKind>,
    /// Global value, or `link=p,...` with `*=p` for the rest.
    #[arg(long)]
    penetration: Option<PenetrationArg>,
    /// S0..S5 or a length in metres.
    #[arg(long)]
    segmentation: Option<SegmentationStrategy>,
    /// Fraction or percentage, e.g. -0.2 or -20%.
    #[arg(long, allow_hyphen_values = true)]
    error_level: Option<String>,
    /// Comma-separated seeds; `a-b` expands to an inclusive range.
    #[arg(long, default_value = "1,2,3")]
    seeds: String,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
    /// Historical stats CSV for mtransit-mp.
    #[arg(long)]
    historical: Option<PathBuf>,
    #[arg(long, env = "TRANSIT_MP_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Also write per-substep snapshot CSVs.
    #[arg(long)]
    snapshots: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// penetration, segmentation, error-level or controller.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Controllers crossed with each value.
    #[arg(long, value_delimiter = ',', default_value = "transit-mp")]
    controllers: Vec<ControllerKind>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    penetration: Option<PenetrationArg>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = harness::CALIBRATION_SEED)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Shrink by the min/max ratio of entry-link penetration.
    #[arg(long)]
    reduced: bool,
    #[arg(long)]
    penetration: Option<PenetrationArg>,
    /// Write the certificate here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    if out.is_empty() {
        bail!("no seeds given");
    }
    Ok(out)
}

fn parse_error_level(s: &str) -> Result<f64> {
    let v = s.trim();
    let (num, pct) = match v.strip_suffix('%') {
        Some(n) => (n, true),
        None => (v, false),
    };
    let x: f64 = num
        .parse()
        .with_context(|| format!("bad error level `{s}`"))?;
    Ok(if pct || x.abs() > 1.0 { x / 100.0 } else { x })
}

impl Common {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            controller: self.controller,
            penetration: self.penetration.clone(),
            segmentation: self.segmentation,
            error_level: self
                .error_level
                .as_deref()
                .map(parse_error_level)
                .transpose()?,
            horizon: self.horizon,
            warmup: self.warmup,
            historical: self.historical.clone(),
        })
    }

    fn descriptor(&self, snapshots: bool) -> Result<RunDescriptor> {
        Ok(RunDescriptor {
            scenario: self.scenario.clone(),
            overrides: self.overrides()?,
            seeds: parse_seeds(&self.seeds)?,
            out: self.out.clone(),
            workers: self.workers,
            snapshots,
        })
    }
}

fn print_summaries(rows: &[RunSummary]) {
    println!(
        "{:<12} {:>5} {:>8} {:>9} {:>9} {:>10} {:>11}  verdict",
        "controller", "seed", "max_veh", "max_spill", "max_unsv", "delay_s", "pax_delay_s"
    );
    for r in rows {
        println!(
            "{:<12} {:>5} {:>8} {:>9} {:>9} {:>10.1} {:>11.1}  {}",
            r.controller,
            r.seed,
            r.max_vehicle_count,
            r.max_spillover,
            r.max_unserved,
            r.mean_vehicle_delay,
            r.mean_passenger_delay,
            r.verdict
        );
    }
}

/// Returns the process exit code for a completed command.
fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { scenario } => {
            let text = std::fs::read_to_string(&scenario)
                .with_context(|| format!("cannot read {}", scenario.display()))?;
            let doc = match toml::from_str::<ScenarioDoc>(&text) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("parse error in {}: {e}", scenario.display());
                    return Ok(EXIT_CONFIG);
                }
            };
            let violations = validate_network(&doc);
            if violations.is_empty() {
                println!("{}: ok", scenario.display());
                Ok(0)
            } else {
                for v in &violations {
                    println!("{v}");
                }
                Ok(EXIT_CONFIG)
            }
        }
        Command::Run(args) => {
            let d = args.common.descriptor(args.snapshots)?;
            let (rows, failed) = harness::run(&d)?;
            print_summaries(&rows);
            for (seed, e) in &failed {
                eprintln!("seed {seed} failed: {e}");
            }
            Ok(if failed.is_empty() { 0 } else { EXIT_RUNTIME })
        }
        Command::Sweep(args) => {
            let d = SweepDescriptor {
                base: args.common.descriptor(false)?,
                axis: args.axis,
                values: args
                    .values
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .collect(),
                controllers: args.controllers,
            };
            let report = harness::sweep(&d)?;
            println!(
                "{:<10} {:<12} {:>4} {:>9} {:>9} {:>10} {:>11}",
                "value", "controller", "runs", "max_spill", "max_unsv", "delay_s", "pax_delay_s"
            );
            for g in &report.groups {
                println!(
                    "{:<10} {:<12} {:>4} {:>9.1} {:>9.1} {:>10.2} {:>11.2}",
                    g.axis_value,
                    g.controller,
                    g.runs,
                    g.max_spillover,
                    g.max_unserved,
                    g.mean_vehicle_delay,
                    g.mean_passenger_delay
                );
            }
            for (v, k, seed, e) in &report.failures {
                eprintln!("{v} / {k} / seed {seed} failed: {e}");
            }
            Ok(if report.failures.is_empty() {
                0
            } else {
                EXIT_RUNTIME
            })
        }
        Command::Calibrate(args) => {
            let o = Overrides {
                penetration: args.penetration,
                horizon: args.horizon,
                ..Overrides::default()
            };
            let scenario = harness::prepare(&args.scenario, &o)?;
            let h = calibrate_to_file(&scenario, args.seed, &args.out)?;
            let flagged: usize = h.periods.values().flatten().filter(|p| p.flagged).count();
            println!(
                "wrote {} ({} movements, {} flagged windows)",
                args.out.display(),
                h.periods.len(),
                flagged
            );
            Ok(0)
        }
        Command::CheckRegion(args) => {
            let o = Overrides {
                penetration: args.penetration,
                ..Overrides::default()
            };
            let scenario = harness::prepare(&args.scenario, &o)?;
            let cert = harness::check_region(&scenario, args.reduced)?;
            print!("{}", toml::to_string(&cert)?);
            if let Some(p) = &args.out {
                harness::write_region_report(&cert, p)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = match e.downcast_ref::<transit_mp::Error>() {
                Some(err) => err.is_config(),
                // Anything failing before the library ran is a bad argument.
                None => true,
            };
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
