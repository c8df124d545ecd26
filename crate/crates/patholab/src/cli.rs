use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

use crate::config::{Command, FamilyChoice, RunConfig};
use crate::output::write_artifacts;
use crate::report::Status;
use crate::suite::execute;

/// Builds and verifies explicit pathological solutions of -div(A grad u) = 0.
#[derive(Debug, Parser)]
#[command(name = "patholab", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    #[arg(long, value_enum)]
    pub family: Option<FamilyChoice>,
    /// Space dimension (2 or 3).
    #[arg(long)]
    pub n: Option<usize>,
    /// Log exponent of the W11 family.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Exponent of the power family.
    #[arg(long)]
    pub a: Option<f64>,
    /// Log offset: `auto` or a number.
    #[arg(long, value_parser = parse_r0)]
    pub r0: Option<R0Arg>,
    /// Ellipticity margin used by `--r0 auto`.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Sample count for point sweeps; Monte Carlo uses multiples of it.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of dyadic annuli.
    #[arg(short = 'J', long = "annuli")]
    pub annuli: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    /// Smallest excised radius for the weak form.
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single membership test: llogl, lp:P, exp:C or hessian:P.
    #[arg(long)]
    pub functional: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Treat INCONCLUSIVE rows as failures.
    #[arg(long)]
    pub strict: bool,
    /// Start from a saved config.json; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Arg(pub Option<f64>);

fn parse_r0(s: &str) -> Result<R0Arg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(R0Arg(None));
    }
    s.parse::<f64>().map(|v| R0Arg(Some(v))).map_err(|_| format!("expected `auto` or a number, got `{s}`"))
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::new(self.command),
        };
        cfg.command = self.command;
        let f = &self.flags;
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = f.$field.clone() { cfg.$field = v; })* };
        }
        take!(family, n, beta, a, margin, samples, annuli, p_grid, c_grid, rho_min, seed, out);
        if let Some(R0Arg(v)) = f.r0 {
            cfg.r0 = v;
        }
        if f.functional.is_some() {
            cfg.functional = f.functional.clone();
        }
        cfg.strict |= f.strict;
        Ok(cfg)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PATHOLAB_THREADS") {
        let k: usize = v.trim().parse().with_context(|| format!("PATHOLAB_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global().ok();
    }
    Ok(())
}

/// Runs the configured command and returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    let (report, tables) = execute(cfg)?;
    write_artifacts(&cfg.out, &report, cfg, &tables)?;
    for c in &report.checks {
        println!("{:<12} {}  {:.6e}", c.status.label(), c.name, c.value);
    }
    let tally: Vec<String> = [Status::Pass, Status::Fail, Status::Converges, Status::Diverges, Status::Inconclusive, Status::Info]
        .iter()
        .filter(|s| report.count(**s) > 0)
        .map(|s| format!("{} {}", report.count(*s), s.label()))
        .collect();
    println!("{} checks: {}; written to {}", report.checks.len(), tally.join(", "), cfg.out.display());
    Ok(report.exit_code(cfg.strict))
}

pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            e.print().ok();
            return e.exit_code();
        }
    };
    let outcome = configure_threads().and_then(|_| cli.resolve()).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
