use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use qsd::cohring::GeometryTriple;
use qsd::hypergeo::TwistSpec;
use qsd_cli::codec::{encode_parts, PartsRepr};
use qsd_cli::{exit_code, load_theory, parse_scenarios, render_text, run_scenario, Cache, CliError, Report, ScenarioSpec};

#[derive(Parser)]
#[command(name = "qsd", version, about = "Verify quantum Serre duality identities on projective spaces")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for cached series
    #[arg(long, global = true, env = "QSD_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Skip the cache entirely
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Largest q-order a scenario may request
    #[arg(long, global = true, default_value_t = qsd_cli::DEFAULT_MAX_ORDER)]
    max_order: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a JSON file
    Run { file: PathBuf },
    /// Run verification suites on one geometry
    Verify {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long)]
        order: usize,
        /// Suite names, or `all`
        #[arg(long = "suite", value_delimiter = ',', default_value = "all")]
        suites: Vec<String>,
    },
    /// Local invariants of the total space up to a degree
    Invariants {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long)]
        degrees: usize,
    },
    /// Print the I-function, mirror data, J-function and fundamental solution
    Series {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value = "untwisted")]
        twist: String,
        #[arg(long)]
        order: usize,
    },
}

#[derive(Args)]
struct GeometryArgs {
    /// Projective space, P1 to P4
    #[arg(long)]
    space: String,
    /// Line bundle degrees, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bundle: Vec<i64>,
}

impl GeometryArgs {
    fn spec(&self, order: usize, suites: Vec<String>) -> ScenarioSpec {
        ScenarioSpec { space: self.space.clone(), bundle: self.bundle.clone(), order, suites, cache: true }
    }
}

fn default_cache_dir() -> PathBuf {
    std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .unwrap_or_else(std::env::temp_dir)
        .join("qsd")
}

#[derive(Serialize)]
struct Batch<'a> {
    reports: &'a [Report],
}

#[derive(Serialize)]
struct SeriesOutput {
    space: String,
    bundle: Vec<i64>,
    twist: String,
    order: usize,
    data: PartsRepr,
}

fn emit_reports(reports: &[Report], format: Format) -> anyhow::Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&Batch { reports })?),
        Format::Text => print!("{}", render_text(reports)),
    }
    Ok(())
}

fn run_batch(specs: Vec<qsd_cli::Scenario>, cache: Option<&Cache>, format: Format) -> anyhow::Result<u8> {
    let start = Instant::now();
    let results: Vec<_> = specs.par_iter().map(|s| run_scenario(s, cache)).collect();
    let mut reports = Vec::with_capacity(results.len());
    for (report, log) in results {
        for line in log.lines {
            eprintln!("{line}");
        }
        reports.push(report);
    }
    eprintln!("total: {:.3} s", start.elapsed().as_secs_f64());
    emit_reports(&reports, format)?;
    Ok(exit_code(&reports))
}

fn series(common: &Common, cache: Option<&Cache>, geometry: &GeometryArgs, twist: &str, order: usize) -> anyhow::Result<u8> {
    let scenario = geometry.spec(order, vec!["all".into()]).validate(common.max_order)?;
    let twist = TwistSpec::parse(twist)?;
    let built = GeometryTriple::new(scenario.dim(), scenario.bundle.clone())
        .and_then(|g| load_theory(cache, &g, twist, order));
    let theory = match built {
        Ok((t, _)) => t,
        Err(e) if e.is_scope() => {
            eprintln!("out of scope: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    };
    let parts = theory.parts();
    match common.format {
        Format::Json => {
            let out = SeriesOutput {
                space: scenario.space,
                bundle: scenario.bundle,
                twist: twist.name().into(),
                order,
                data: encode_parts(&parts),
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Format::Text => {
            let vec_lines = |name: &str, v: &[qsd::series::Series<qsd::Rat>]| {
                for (k, s) in v.iter().enumerate() {
                    println!("{name}[H^{k}] = {}", s.render());
                }
            };
            vec_lines("I", &parts.i_function);
            println!("F = {}", parts.f.render());
            println!("tau0 = {}", parts.tau0.render());
            println!("tau2 = {}", parts.tau2.render());
            println!("q(Q) = {}", parts.inverse_map.render());
            vec_lines("J", &parts.j);
            for (r, row) in parts.l.entries.iter().enumerate() {
                for (c, s) in row.iter().enumerate() {
                    println!("L[{r},{c}] = {}", s.render());
                }
            }
            for (r, row) in parts.product_h.entries.iter().enumerate() {
                for (c, s) in row.iter().enumerate() {
                    println!("H*[{r},{c}] = {}", s.render());
                }
            }
        }
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let common = &cli.common;
    let cache = (!common.no_cache).then(|| Cache::new(common.cache_dir.clone().unwrap_or_else(default_cache_dir)));
    let cache = cache.as_ref();
    match &cli.command {
        Command::Run { file } => {
            let text = std::fs::read_to_string(file)?;
            run_batch(parse_scenarios(&text, common.max_order)?, cache, common.format)
        }
        Command::Verify { geometry, order, suites } => {
            let s = geometry.spec(*order, suites.clone()).validate(common.max_order)?;
            run_batch(vec![s], cache, common.format)
        }
        Command::Invariants { geometry, degrees } => {
            let s = geometry.spec(*degrees, vec!["invariants".into()]).validate(common.max_order)?;
            run_batch(vec![s], cache, common.format)
        }
        Command::Series { geometry, twist, order } => series(common, cache, geometry, twist, *order),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            // malformed input shares clap's usage-error status
            let invalid = e.downcast_ref::<CliError>().is_some_and(|c| matches!(c, CliError::InvalidScenario(_)))
                || e.downcast_ref::<qsd::QsdError>().is_some();
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}
