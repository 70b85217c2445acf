//! `splitree`: command-line front end for the split-tree library.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration, 3 budget,
//! 4 failed assertion, 5 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use splitree::acceptance::{all_passed, Profile, Status, Suite, CRITERIA};
use splitree::experiments::{self, slug, ExperimentConfig, Measures};
use splitree::fixpoint::{iterate_with, FixpointConfig};
use splitree::models::{catalogue, ModelSelector};
use splitree::par::{with_threads, Execution};
use splitree::renewal::{renewal_u, RenewalConfig, RenewalMethod};
use splitree::{compute_constants, Error};

const DEFAULT_OUT: &str = "splitree-out";

#[derive(Parser)]
#[command(name = "splitree", version, about = "Random split trees: simulation, limit constants and verification")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the model presets.
    Models,
    /// Limit constants of a model, e.g. `constants trie 0.5 0.5`.
    Constants(ConstantsArgs),
    /// Replicated path-length simulation.
    Simulate(SimulateArgs),
    /// Fixed point of the smoothing transform.
    Fixpoint(FixpointArgs),
    /// Renewal function table.
    Renewal(RenewalArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Flat JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model preset, e.g. `bst`, `trie:0.6,0.4`, `mary(3)`.
    #[arg(long)]
    model: Option<String>,
    /// Node parameters `s0,s1,s` overriding the preset's.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    params: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $SPLITREE_OUT, then ./splitree-out).
    #[arg(long, env = "SPLITREE_OUT")]
    out: Option<PathBuf>,
    /// Also print the result to stdout in this format.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ConstantsArgs {
    /// Preset name followed by its numeric arguments.
    #[arg(required_unless_present = "model")]
    name: Option<String>,
    #[arg(allow_negative_numbers = true)]
    args: Vec<f64>,
    #[arg(long, conflicts_with = "name")]
    model: Option<String>,
    #[arg(long, value_delimiter = ',', num_args = 3)]
    params: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Tree sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Extra measures: upsilon, node_count, depth_last, l_annotation, all.
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<String>>,
}

#[derive(Args)]
struct FixpointArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Enumeration,
    Mc,
}

#[derive(Args)]
struct RenewalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Reduced budget.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 20_261_016)]
    seed: u64,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<usize>>,
    #[arg(long, env = "SPLITREE_OUT")]
    out: Option<PathBuf>,
}

/// Resolved `fixpoint` configuration, also the config-file schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FixpointFile {
    model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<[usize; 3]>,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default)]
    seed: u64,
}

fn default_samples() -> usize {
    100_000
}
fn default_tol() -> f64 {
    5e-3
}
fn default_max_iter() -> usize {
    60
}

/// Resolved `renewal` configuration, also the config-file schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RenewalFile {
    model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<[usize; 3]>,
    #[serde(flatten)]
    renewal: RenewalConfig,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 4,
            Failure::Lib(e) => match e {
                Error::Config(_)
                | Error::InvalidParams(_)
                | Error::InvalidModelArgs(_)
                | Error::UnknownModel(_)
                | Error::InsufficientGrid(_)
                | Error::InsufficientCoverage(_) => 2,
                Error::Budget { .. } => 3,
                Error::Io(_) | Error::Csv(_) => 5,
                Error::Json(e) if e.is_io() => 5,
                Error::Json(_) => 2,
                _ => 1,
            },
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = with_threads(cli.threads, move || dispatch(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Assertion(msg) => eprintln!("assertion failed: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Models => {
            for entry in catalogue() {
                println!("{:<24} {}", entry.usage, entry.line);
            }
            Ok(())
        }
        Command::Constants(a) => constants(a),
        Command::Simulate(a) => simulate(a),
        Command::Fixpoint(a) => fixpoint(a),
        Command::Renewal(a) => renewal(a),
        Command::Verify(a) => verify(a),
    }
}

fn params_array(p: Option<Vec<usize>>) -> Option<[usize; 3]> {
    p.map(|v| [v[0], v[1], v[2]])
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Lib(Error::Config(format!("{}: {e}", path.display()))))
}

fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn echo_config<T: Serialize>(dir: &Path, command: &str, config: &T) -> CliResult {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{command}_config.json")), serde_json::to_string_pretty(config)?)?;
    Ok(())
}

fn constants(a: ConstantsArgs) -> CliResult {
    let mut selector = match (&a.model, &a.name) {
        (Some(m), _) => ModelSelector::parse(m)?,
        (None, Some(name)) => ModelSelector { name: name.clone(), args: a.args.clone(), params: None },
        (None, None) => return Err(Error::Config("no model given".into()).into()),
    };
    selector.params = params_array(a.params);
    let model = selector.resolve()?;
    let c = compute_constants(&model)?;
    match a.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&c)?),
        Some(Format::Csv) => {
            println!("model,mu,sigma2,contraction_factor,mean_C,second_moment_C,zeta,method,error_bound");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                c.model,
                c.mu,
                c.sigma2,
                c.contraction_factor,
                c.mean_c,
                c.second_moment_c,
                c.zeta,
                c.method,
                c.error_bound
            );
        }
        None => println!(
            "model={} mu={} sigma2={} bEV2={} zeta={} method={} error_bound={:.1e}",
            c.model, c.mu, c.sigma2, c.contraction_factor, c.zeta, c.method, c.error_bound
        ),
    }
    Ok(())
}

fn parse_measures(names: &[String]) -> Result<Measures, Failure> {
    let mut m = Measures::default();
    for name in names {
        match name.as_str() {
            "psi" => m.psi = true,
            "upsilon" => m.upsilon = true,
            "node_count" => m.node_count = true,
            "depth_last" => m.depth_last = true,
            "l_annotation" => m.l_annotation = true,
            "all" => m = Measures::all(),
            other => return Err(Error::Config(format!("unknown measure `{other}`")).into()),
        }
    }
    Ok(m)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut cfg = match &a.common.config {
        Some(path) => read_config::<ExperimentConfig>(path)?,
        None => ExperimentConfig::new("bst", vec![1_000], 100, 0),
    };
    if let Some(m) = a.common.model {
        cfg.model = m;
    }
    if let Some(p) = params_array(a.common.params) {
        cfg.params = Some(p);
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(r) = a.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(m) = &a.measures {
        cfg.measures = parse_measures(m)?;
    }
    let dir = out_dir(a.common.out.or(cfg.out.clone()));
    cfg.out = Some(dir.clone());
    cfg.validate()?;
    echo_config(&dir, "simulate", &cfg)?;
    let model = cfg.selector()?.resolve()?;
    let mut result = experiments::run_with(&cfg, &model, Execution::default())?;
    let files = experiments::write_outputs(&mut result, &dir)?;
    match a.common.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&result)?),
        Some(Format::Csv) => print!("{}", std::fs::read_to_string(summary_path(&files))?),
        None => {
            for r in &result.records {
                println!(
                    "n={} mean_psi={:.3} se={:.3} var={:.3} q_hat={:.5} ({:.5})",
                    r.n, r.mean_psi, r.se_psi, r.var_psi, r.q_hat, r.q_hat_se
                );
            }
            println!("wrote {} files to {}", files.len(), dir.display());
        }
    }
    Ok(())
}

fn summary_path(files: &[PathBuf]) -> &Path {
    files
        .iter()
        .find(|p| p.file_name().is_some_and(|f| f.to_string_lossy().starts_with("summary_")))
        .expect("summary file is always written")
}

fn fixpoint(a: FixpointArgs) -> CliResult {
    let mut cfg = match &a.common.config {
        Some(path) => read_config::<FixpointFile>(path)?,
        None => FixpointFile {
            model: "bst".into(),
            params: None,
            samples: default_samples(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: 0,
        },
    };
    if let Some(m) = a.common.model {
        cfg.model = m;
    }
    if let Some(p) = params_array(a.common.params) {
        cfg.params = Some(p);
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.tol {
        cfg.tol = v;
    }
    if let Some(v) = a.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = a.common.seed {
        cfg.seed = v;
    }
    let dir = out_dir(a.common.out);
    echo_config(&dir, "fixpoint", &cfg)?;
    let mut selector = ModelSelector::parse(&cfg.model)?;
    selector.params = cfg.params;
    let model = selector.resolve()?;
    let run =
        iterate_with(&model, &FixpointConfig::new(cfg.samples, cfg.tol, cfg.max_iter, cfg.seed), Execution::default())?;
    let tag = format!("{}_seed{}", slug(&run.model), cfg.seed);
    std::fs::write(dir.join(format!("fixpoint_{tag}.json")), serde_json::to_string_pretty(&run)?)?;
    run.distribution.write_csv(&dir.join(format!("fixpoint_samples_{tag}.csv")))?;
    match a.common.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&run)?),
        Some(Format::Csv) => {
            println!("model,iterations,mean,variance,third_central_moment,converged");
            println!(
                "{},{},{},{},{},{}",
                run.model, run.iterations, run.mean, run.variance, run.third_central_moment, run.converged
            );
        }
        None => println!(
            "{}: {} iterations, mean {:.5}, variance {:.5}, third central moment {:.5}",
            run.model, run.iterations, run.mean, run.variance, run.third_central_moment
        ),
    }
    Ok(())
}

fn renewal(a: RenewalArgs) -> CliResult {
    let mut cfg = match &a.common.config {
        Some(path) => read_config::<RenewalFile>(path)?,
        None => RenewalFile {
            model: "bst".into(),
            params: None,
            renewal: RenewalConfig::new(12.0, 0.05, RenewalMethod::BranchingEnumeration, 0),
        },
    };
    if let Some(m) = a.common.model {
        cfg.model = m;
    }
    if let Some(p) = params_array(a.common.params) {
        cfg.params = Some(p);
    }
    if let Some(method) = a.method {
        let method = match method {
            MethodArg::Enumeration => RenewalMethod::BranchingEnumeration,
            MethodArg::Mc => RenewalMethod::TiltedWalkMc,
        };
        if method != cfg.renewal.method {
            let r = &cfg.renewal;
            cfg.renewal = RenewalConfig::new(r.t_max, r.grid_step, method, r.seed);
        }
    }
    if let Some(v) = a.tmax {
        cfg.renewal.t_max = v;
    }
    if let Some(v) = a.grid {
        cfg.renewal.grid_step = v;
    }
    if let Some(v) = a.replicas {
        cfg.renewal.replicas = v;
    }
    if let Some(v) = a.common.seed {
        cfg.renewal.seed = v;
    }
    let dir = out_dir(a.common.out);
    echo_config(&dir, "renewal", &cfg)?;
    let mut selector = ModelSelector::parse(&cfg.model)?;
    selector.params = cfg.params;
    let model = selector.resolve()?;
    let table = renewal_u(&model, &cfg.renewal)?;
    let tag = format!("{}_seed{}", slug(&model.id()), cfg.renewal.seed);
    let csv_path = dir.join(format!("renewal_{tag}.csv"));
    table.write_csv(&csv_path)?;
    std::fs::write(dir.join(format!("renewal_{tag}.json")), serde_json::to_string_pretty(&table)?)?;
    match a.common.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&table)?),
        Some(Format::Csv) => print!("{}", std::fs::read_to_string(&csv_path)?),
        None => {
            let last = table.t.len() - 1;
            println!(
                "{}: U({}) = {:.4}, U_hat = {:.4}; table in {}",
                model.id(),
                table.t[last],
                table.u[last],
                table.u_hat[last],
                csv_path.display()
            );
        }
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> CliResult {
    let profile = if a.quick { Profile::Quick } else { Profile::Full };
    let suite = Suite::new(profile, a.seed);
    let ids: Vec<usize> = a.only.unwrap_or_else(|| (1..=CRITERIA).collect());
    if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > CRITERIA) {
        return Err(Error::Config(format!("no criterion {bad}")).into());
    }
    println!("{:<6} {:>2} {:<28} {:>8}  detail", "status", "id", "criterion", "time");
    let outcomes: Vec<_> = ids
        .iter()
        .map(|&id| {
            let o = suite.run(id);
            println!("{o}");
            o
        })
        .collect();
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&outcomes)?)?;
    }
    if all_passed(&outcomes) {
        Ok(())
    } else {
        let failed: Vec<String> =
            outcomes.iter().filter(|o| o.status == Status::Fail).map(|o| o.id.to_string()).collect();
        Err(Failure::Assertion(format!("criteria {} failed", failed.join(", "))))
    }
}
