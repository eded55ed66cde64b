//! The `sievekit` command line.
//!
//! Exit codes: 0 on success, 1 when a check fails or a precondition is
//! violated, 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissible::{self, AdmissibleError};
use crate::bounds::{BoundTable, BoundsError, GridConfig, Side};
use crate::driver::{self, DriverError, IterationConfig, ParamSearch, RuleChoice, RunReport, SearchConfig, SearchStrategy, TPolicy};
use crate::exactcomb::{self, CombError, RuleFamily};
use crate::quadrature::{QuadConfig, QuadError, RuleSpec};
use crate::simulate::{self, CampaignConfig, SimError};

pub const JOBS_ENV: &str = "SIEVEKIT_JOBS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Admissible(#[from] AdmissibleError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sievekit", version, about = "Generalized Buchstab iteration rules for sieve bounds")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = JOBS_ENV)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the binomial-basis identities and sign certificates.
    Verify(VerifyArgs),
    /// Check every rule on random finite sets by exact counting.
    Simulate(SimulateArgs),
    /// Compute bound tables: classical iteration, then rule refinement.
    Iterate(IterateArgs),
    /// Best admissible parameters for one rule at one (s, t).
    Search(SearchArgs),
    /// Smallest s with f(s) above a threshold in a table.
    SiftLimit(SiftLimitArgs),
}

fn default_families() -> Vec<String> {
    ["UB3", "UB5", "UB7", "UB9", "UB11", "UB2D", "UB4D", "UB6D", "LB3D", "LB5D"]
        .map(String::from)
        .to_vec()
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Comma-separated families, e.g. UB2D,UB5,LB3D.
    #[arg(long, value_delimiter = ',', default_values_t = default_families())]
    families: Vec<String>,
    /// Random parameter vectors per family with free parameters.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    max_den: i64,
    #[arg(long, default_value_t = 9)]
    max_odd_k: i64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Largest element of the generated sets.
    #[arg(long, default_value_t = 100_000)]
    nmax: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = ["UB5", "UB2D", "UB4D", "UB6D", "LB3D", "LB5D"].map(String::from).to_vec())]
    families: Vec<String>,
    /// Most primes in [w, z).
    #[arg(long, default_value_t = 12)]
    max_primes: usize,
}

/// Everything that determines an `iterate` table; echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IterateParams {
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub smin: f64,
    #[arg(long, default_value_t = 20.0)]
    pub smax: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Round cap for each phase.
    #[arg(long, default_value_t = 200)]
    pub rounds: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Initial F value on the whole grid.
    #[arg(long, default_value_t = 100.0)]
    pub seed_f: f64,
    /// Refinement rules; empty skips refinement.
    #[arg(long, value_delimiter = ',', default_values_t = ["UB2D", "LB3D"].map(String::from).to_vec())]
    pub rules: Vec<String>,
    /// Search rule parameters instead of using the base configuration.
    #[arg(long)]
    pub search: bool,
    #[arg(long, default_value = "1/4")]
    pub grid_step: String,
    #[arg(long, default_value_t = 0.5)]
    pub t_step: f64,
    #[arg(long, default_value_t = 12)]
    pub t_count: usize,
    #[arg(long, default_value_t = 32)]
    pub panels: usize,
    #[arg(long, default_value_t = 128)]
    pub sigma_cells: usize,
    /// Threshold for the reported sifting limit.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
struct IterateArgs {
    #[command(flatten)]
    params: IterateParams,
    #[arg(long, required_unless_present = "from_manifest")]
    out: Option<PathBuf>,
    /// Re-run with the configuration recorded in a manifest; other table flags are ignored.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Grid,
    CoordinateDescent,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    family: String,
    #[arg(long, default_value = "1/4")]
    grid_step: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Grid)]
    strategy: StrategyArg,
    #[arg(long)]
    no_polish: bool,
    /// Table to search against; without it the classical iteration is run first.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    smax: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

#[derive(Debug, Args)]
struct SiftLimitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
}

/// Provenance written next to every table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub config: IterateParams,
    pub input: Option<String>,
    pub output: String,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    manifest: &'a RunManifest,
    reports: &'a [RunReport],
}

#[derive(Debug, Deserialize)]
struct SidecarIn {
    manifest: RunManifest,
}

/// Path of the manifest written next to a table.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn parse_families(list: &[String]) -> Result<Vec<RuleFamily>> {
    list.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<RuleFamily>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn parse_rational_arg(s: &str) -> Result<exactcomb::Rational> {
    exactcomb::parse_rational(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return 2;
        }
        builder = builder.num_threads(jobs);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Iterate(a) => iterate(a),
        Command::Search(a) => search(a),
        Command::SiftLimit(a) => sift_limit(a),
    }
}

fn verify(a: VerifyArgs) -> Result<i32> {
    let families = parse_families(&a.families)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut all_ok = true;
    for family in families {
        let mut configs = vec![family.base_params()?];
        if !matches!(family, RuleFamily::UbK(_)) {
            configs.extend((0..a.samples).map(|_| admissible::random_params(family, &mut rng, a.max_den, a.max_odd_k)));
        }
        let (mut ident, mut sign) = (0, 0);
        for p in &configs {
            if exactcomb::verify_identity(family, p)? {
                ident += 1;
            } else {
                println!("{family} {p}: identity FAILED");
            }
            if admissible::certify_sign(p)?.matches_kind() {
                sign += 1;
            } else {
                println!("{family} {p}: sign certificate FAILED");
            }
        }
        let n = configs.len();
        let ok = ident == n && sign == n;
        all_ok &= ok;
        println!(
            "{family}: identity {ident}/{n}, sign {sign}/{n} {}",
            if ok { "ok" } else { "FAIL" }
        );
    }
    Ok(if all_ok { 0 } else { 1 })
}

fn simulate_cmd(a: SimulateArgs) -> Result<i32> {
    let cfg = CampaignConfig {
        n_max: a.nmax,
        trials: a.trials,
        seed: a.seed,
        families: parse_families(&a.families)?,
        max_primes: a.max_primes,
        ..CampaignConfig::default()
    };
    let checks = simulate::run_campaign(&cfg)?;
    let failed = checks.iter().filter(|c| !c.holds).count();
    for c in &checks {
        println!("{c}");
    }
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

fn build_iteration(p: &IterateParams) -> Result<(GridConfig, QuadConfig, IterationConfig)> {
    let grid = GridConfig::new(p.smin, p.smax, p.step)?;
    let quad = QuadConfig {
        panels_per_unit: p.panels,
        sigma_cells: p.sigma_cells,
        ..QuadConfig::default()
    };
    quad.validate()?;
    let search = SearchConfig {
        grid_step: parse_rational_arg(&p.grid_step)?,
        ..SearchConfig::default()
    };
    let mut rules = Vec::new();
    for family in parse_families(&p.rules)? {
        let searchable = !matches!(family, RuleFamily::UbK(_));
        rules.push(if p.search && searchable {
            RuleChoice::Search(family)
        } else {
            RuleChoice::Fixed(RuleSpec::new(family, family.base_params()?)?)
        });
    }
    let itcfg = IterationConfig {
        max_rounds: p.rounds,
        convergence_tol: p.tol,
        seed_f: p.seed_f,
        t_policy: TPolicy {
            step: p.t_step,
            max_candidates: p.t_count,
        },
        rules,
        search,
        sifting_threshold: p.threshold,
        ..IterationConfig::default()
    };
    itcfg.validate()?;
    Ok((grid, quad, itcfg))
}

/// Classical iteration followed by refinement with the configured rules.
pub fn compute_table(p: &IterateParams) -> std::result::Result<(BoundTable, Vec<RunReport>), CliError> {
    let (grid, quad, itcfg) = build_iteration(p)?;
    let (table, beta) = driver::run_beta_iteration(p.kappa, grid, &quad, &itcfg)?;
    let mut reports = vec![beta];
    let table = if itcfg.rules.is_empty() {
        table
    } else {
        let (refined, report) = driver::refine_with_rules(&table, &itcfg, &quad)?;
        reports.push(report);
        refined
    };
    Ok((table, reports))
}

fn read_manifest(path: &Path) -> Result<RunManifest> {
    let file = File::open(path).map_err(io_err(path))?;
    let side: SidecarIn = serde_json::from_reader(BufReader::new(file)).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(side.manifest)
}

fn iterate(a: IterateArgs) -> Result<i32> {
    let (params, input) = match &a.from_manifest {
        Some(path) => (read_manifest(path)?.config, Some(path.display().to_string())),
        None => (a.params.clone(), None),
    };
    let out = match (&a.out, &a.from_manifest) {
        (Some(out), _) => out.clone(),
        (None, Some(path)) => PathBuf::from(read_manifest(path)?.output),
        (None, None) => return Err(CliError::Usage("--out is required".into())),
    };

    let (table, reports) = compute_table(&params)?;
    table.validate(None)?;

    let file = File::create(&out).map_err(io_err(&out))?;
    let mut w = BufWriter::new(file);
    table.write_csv(&mut w)?;
    w.flush().map_err(io_err(&out))?;

    let manifest = RunManifest {
        command: "iterate".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: params,
        input,
        output: out.display().to_string(),
    };
    let mpath = manifest_path(&out);
    let file = File::create(&mpath).map_err(io_err(&mpath))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &Sidecar { manifest: &manifest, reports: &reports }).map_err(|source| {
        CliError::Json {
            path: mpath.clone(),
            source,
        }
    })?;

    for r in &reports {
        println!(
            "{}: rounds {} converged {} max delta {:.3e}",
            r.phase, r.rounds_used, r.converged, r.final_max_delta
        );
    }
    for s in [2.0, 3.0, 4.0] {
        if s >= table.grid.s_min && s <= table.grid.s_max {
            println!(
                "F({s}) = {:.6}  f({s}) = {:.6}",
                table.evaluate(Side::Upper, s)?,
                table.evaluate(Side::Lower, s)?
            );
        }
    }
    match reports.last().and_then(|r| r.sifting_limit) {
        Some(b) => println!("sifting limit estimate {b}"),
        None => println!("sifting limit not attained"),
    }
    println!("wrote {} and {}", out.display(), mpath.display());
    Ok(0)
}

fn search(a: SearchArgs) -> Result<i32> {
    let family: RuleFamily = a.family.parse().map_err(|e: CombError| CliError::Usage(e.to_string()))?;
    let quad = QuadConfig::default();
    let table = match &a.input {
        Some(path) => {
            let file = File::open(path).map_err(io_err(path))?;
            BoundTable::read_csv(BufReader::new(file), a.kappa)?
        }
        None => {
            let grid = GridConfig::new(1.0, a.smax, a.step)?;
            driver::run_beta_iteration(a.kappa, grid, &quad, &IterationConfig::default())?.0
        }
    };
    let cfg = SearchConfig {
        strategy: match a.strategy {
            StrategyArg::Grid => SearchStrategy::Grid,
            StrategyArg::CoordinateDescent => SearchStrategy::CoordinateDescent,
        },
        grid_step: parse_rational_arg(&a.grid_step)?,
        polish: !a.no_polish,
        ..SearchConfig::default()
    };
    let ps = ParamSearch::new(family, &cfg)?;
    let (params, value) = driver::search_params(&table, a.s, a.t, &ps, &quad)?;
    let current = table.evaluate(crate::quadrature::lead_side(family.kind()), a.s)?;
    println!("{family} {params} value {} (table {})", crate::bounds::sig10(value), crate::bounds::sig10(current));
    Ok(0)
}

fn sift_limit(a: SiftLimitArgs) -> Result<i32> {
    if !(a.threshold > 0.0) {
        return Err(CliError::Usage("--threshold must be positive".into()));
    }
    let file = File::open(&a.input).map_err(io_err(&a.input))?;
    let table = BoundTable::read_csv(BufReader::new(file), 1.0)?;
    match driver::sifting_limit(&table, a.threshold) {
        Some(b) => println!("{b}"),
        None => println!("not attained"),
    }
    Ok(0)
}
