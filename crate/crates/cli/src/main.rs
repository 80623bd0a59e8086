//! `logcave`: sample, fit, approximate, compare and benchmark log-concave
//! densities.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use logcave::families::{read_samples, write_samples};
use logcave::oracle::{brute_force_best, TinyInstance};
use logcave::{
    from_json, l1_distance, learn_logconcave, pwl_approximate, shortest_path, to_json, tv_to_reference,
    verify_lc_facts, AnyDensity, Constants, Contaminated, DomainKind, Family, Scenario,
};

#[derive(Parser, Debug)]
#[command(name = "logcave", version, about = "Proper learning of univariate log-concave densities")]
struct Cli {
    /// Constants ledger (`key = value` lines). Defaults to $LOGCAVE_CONSTANTS.
    #[arg(long, global = true, env = "LOGCAVE_CONSTANTS")]
    constants: Option<PathBuf>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Domain {
    Real,
    Int,
}

impl From<Domain> for DomainKind {
    fn from(d: Domain) -> Self {
        match d {
            Domain::Real => DomainKind::Real,
            Domain::Int => DomainKind::Integer,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw samples from a family, optionally contaminated
    /// (`gaussian:0,1+0.1*uniform:-10,10`).
    Gen {
        #[arg(long)]
        family: String,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit a log-concave density to samples.
    Fit {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum)]
        domain: Domain,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Recorded in the report; the fit itself uses no randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Piecewise linear approximation of a family.
    Approx {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Total variation and L1 distance between a density file and another
    /// file or a family.
    Eval {
        a: PathBuf,
        b: Option<PathBuf>,
        #[arg(long, conflicts_with = "b")]
        family: Option<Family>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a benchmark scenario and write one CSV row per run.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Leave the wall_time column empty so the output is byte-reproducible.
        #[arg(long)]
        no_timings: bool,
    },
    /// Quick internal consistency checks.
    Selftest {
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_constants(path: Option<&Path>) -> Result<Constants> {
    let c = match path {
        Some(p) => Constants::parse(&read(p)?).with_context(|| format!("constants file {}", p.display()))?,
        None => Constants::default(),
    };
    c.validate()?;
    Ok(c)
}

fn load_density(path: &Path) -> Result<AnyDensity<f64>> {
    from_json(&read(path)?).with_context(|| format!("density file {}", path.display()))
}

/// Runs the command; `Ok(true)` means success with warnings.
fn run(cli: Cli) -> Result<bool> {
    let constants = load_constants(cli.constants.as_deref())?;
    match cli.command {
        Command::Gen { family, n, seed, output } => {
            let target: Contaminated = family.parse()?;
            let samples = target.sample(n, seed);
            let header = format!("family={target} n={n} seed={seed}");
            write(&output, &write_samples(&header, &samples, target.domain()))?;
            Ok(false)
        }
        Command::Fit { epsilon, domain, input, output, report, seed } => {
            let samples = read_samples(&read(&input)?)?;
            let (h, rep) = learn_logconcave::<f64>(&samples, epsilon, domain.into(), &constants)?;
            write(&output, &to_json(&AnyDensity::Exp(h)))?;
            for w in &rep.warnings {
                log::warn!("{w}");
            }
            if let Some(path) = report {
                let mut v = serde_json::to_value(&rep)?;
                v["seed"] = seed.into();
                v["constants"] = constants.to_ledger().into();
                write(&path, &serde_json::to_string_pretty(&v)?)?;
            }
            println!("tv bound {:.6}, {} warnings", rep.tv_bound, rep.warnings.len());
            Ok(rep.flags.any_warning())
        }
        Command::Approx { family, epsilon, output } => {
            let g = pwl_approximate::<f64, _>(&family, epsilon, &constants)?;
            let tv = tv_to_reference(&g, &family)?;
            write(&output, &to_json(&AnyDensity::Linear(g.clone())))?;
            println!("pieces {}", g.piece_count());
            println!("tv {tv:.6}");
            Ok(false)
        }
        Command::Eval { a, b, family, report } => {
            let fa = load_density(&a)?;
            let (tv, l1) = match (b, family) {
                (Some(b), None) => {
                    let fb = load_density(&b)?;
                    let l1 = l1_distance(&fa, &fb)?;
                    ((0.5 * l1).min(1.0), l1)
                }
                (None, Some(fam)) => {
                    let tv = tv_to_reference(&fa, &fam)?;
                    (tv, 2.0 * tv)
                }
                _ => bail!("eval needs a second density file or --family"),
            };
            println!("tv {tv:.6}");
            println!("l1 {l1:.6}");
            if let Some(path) = report {
                write(&path, &serde_json::json!({ "tv": tv, "l1": l1 }).to_string())?;
            }
            Ok(false)
        }
        Command::Bench { scenario, out, no_timings } => {
            let s = Scenario::parse(&read(&scenario)?)?;
            let rows = logcave::run_scenario(&s, &constants, !no_timings)?;
            write(&out, &logcave::bench::write_csv(&rows)?)?;
            let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
            println!("{} rows, {failed} failed", rows.len());
            Ok(failed > 0)
        }
        Command::Selftest { instances } => selftest(instances, &constants),
    }
}

fn selftest(instances: u64, constants: &Constants) -> Result<bool> {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        for domain in [DomainKind::Real, DomainKind::Integer] {
            let inst = TinyInstance::random(seed, domain, 2000, constants)?;
            let (_, brute) = brute_force_best(&inst)?;
            let dp: f64 = shortest_path(&inst.grid, &mut inst.table.clone()).cost;
            worst = worst.max((dp - brute).abs());
        }
    }
    let dp_ok = worst <= 1e-9;
    println!("{} dp matches brute force on {} instances (max diff {worst:.2e})", verdict(dp_ok), 2 * instances);

    let families = [
        "gaussian:0,1",
        "laplace:0,1",
        "exponential:1",
        "logistic:0,1",
        "uniform:0,1",
        "poisson:20",
        "binomial:40,0.3",
        "geometric:0.2",
    ];
    let mut facts_ok = true;
    for f in families {
        let fam: Family = f.parse()?;
        let ok = verify_lc_facts(&fam, constants).passed();
        facts_ok &= ok;
        println!("{} structural facts for {fam}", verdict(ok));
    }
    if !(dp_ok && facts_ok) {
        bail!("selftest failed");
    }
    Ok(false)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
