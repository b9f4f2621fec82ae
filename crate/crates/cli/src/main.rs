//! `fraclab`: generate point clouds, decompose them into cubes, build
//! measures, estimate dimensions and reproduce the bundled experiments.
//!
//! Exit codes: 0 success, 1 invalid input or failed precondition (error JSON
//! on stderr), 2 a reproduced experiment failed its checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use fraclab_core::cube_tree::build_cube_tree;
use fraclab_core::dim_est::{
    count_sweep, doubling_profile, mass_sweep, reverse_doubling_min, Centers, Mode, Sweep, SweepConfig,
    WeightedSpace,
};
use fraclab_core::experiments::{self, Experiment, ExperimentConfig, ExperimentReport, Verdict, SUITE};
use fraclab_core::mass::{build_mass, build_mass_doubling, MassParams};
use fraclab_core::report::canonical_json;
use fraclab_core::{Error, FiniteMetricSpace, IfsSystem};

#[derive(Parser, Debug)]
#[command(name = "fraclab", version, about = "Finite-resolution fractal geometry toolkit")]
struct Cli {
    /// Worker threads for sweeps; FRACLAB_JOBS takes precedence.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for center sampling; defaults to the config's seed, else 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the point cloud of an IFS at resolution delta.
    Generate(GenerateArgs),
    /// Build the nested cube system and print its verification report.
    Cubes(CubesArgs),
    /// Build a measure with lower regularity exponent t on a cube tree.
    BuildMeasure(BuildMeasureArgs),
    /// Estimate a dimension of a space or a weighted space.
    Estimate(EstimateArgs),
    /// Check the (condensation) open set condition of an IFS.
    Cosc(CoscArgs),
    /// Run the bundled experiments.
    Reproduce(ReproduceArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CloudKind {
    /// E_C when the system has a condensation set, else the attractor.
    Auto,
    Attractor,
    Inhomogeneous,
    Condensation,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// IFS spec file, or the name of a bundled config.
    #[arg(long)]
    ifs: String,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value = "auto")]
    kind: CloudKind,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CubesArgs {
    /// Point cloud or distance matrix JSON.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// Deepest level; defaults to the deepest one above the resolution floor.
    #[arg(long)]
    depth: Option<usize>,
    /// Also write the full tree as JSON.
    #[arg(long)]
    tree_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[arg(long, default_value_t = 2.0)]
    base: f64,
    #[arg(long, default_value_t = 10.0)]
    guard: f64,
    #[arg(long, default_value_t = 3)]
    window_radii: usize,
    #[arg(long, default_value_t = 2)]
    min_level: usize,
    /// auto, all, sample:K or net:K
    #[arg(long, default_value = "auto")]
    centers: String,
}

#[derive(Args, Debug)]
struct BuildMeasureArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    t: f64,
    /// Auxiliary exponent s > t for the constraint report; defaults to t + 0.25.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 1.0 / 729.0)]
    rho: f64,
    #[arg(long)]
    depth: Option<usize>,
    /// Build the doubling variant.
    #[arg(long)]
    doubling: bool,
    /// Child bound M of the doubling variant; defaults to the largest child count.
    #[arg(long)]
    m: Option<usize>,
    /// Cube weights JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Regularity sweep CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    space: PathBuf,
    /// assouad, lower, uppereg or lowreg
    #[arg(long)]
    mode: String,
    /// Point weights for the regularity modes (JSON array or {"weights": [...]});
    /// uniform when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args, Debug)]
struct CoscArgs {
    #[arg(long)]
    ifs: String,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// thm41, thm42, vk, regularity or all
    experiment: String,
    /// Config file or bundled config name; without it the bundled suite runs.
    #[arg(long)]
    config: Option<String>,
    /// Measure even when the system fails COSC.
    #[arg(long)]
    force: bool,
    /// Directory for one JSON report per run and summary.md.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Markdown summary file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error("argument", e.render().to_string().trim_end(), None);
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let (kind, detail) = match e.downcast_ref::<Error>() {
                Some(Error::Precondition { detail, .. }) => ("precondition", detail.clone()),
                Some(core) => (core.kind(), None),
                None => ("io", None),
            };
            emit_error(kind, &format!("{e:#}"), detail);
            ExitCode::from(1)
        }
    }
}

fn emit_error(kind: &str, message: &str, detail: Option<Value>) {
    let mut err = json!({ "kind": kind, "message": message });
    if let Some(d) = detail {
        err["detail"] = d;
    }
    let text = canonical_json(&json!({ "error": err })).unwrap_or_else(|_| format!("{{\"error\": {message:?}}}\n"));
    eprint!("{text}");
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let jobs = match std::env::var("FRACLAB_JOBS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| anyhow!("FRACLAB_JOBS must be a positive integer, got {v:?}"))?),
        Err(_) => cli.jobs,
    };
    if let Some(n) = jobs {
        if n == 0 {
            bail!(Error::Argument("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Cubes(a) => cubes(a),
        Command::BuildMeasure(a) => build_measure(a, cli.seed),
        Command::Estimate(a) => estimate(a, cli.seed),
        Command::Cosc(a) => cosc(a),
        Command::Reproduce(a) => reproduce(a, cli.seed),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let text = canonical_json(value)?;
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_space(path: &Path) -> anyhow::Result<FiniteMetricSpace> {
    FiniteMetricSpace::from_json_str(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// A config file, or a bundled config by name.
fn load_config(spec: &str) -> anyhow::Result<ExperimentConfig> {
    let path = Path::new(spec);
    if path.exists() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
        return ExperimentConfig::from_json_str(stem, &read(path)?).with_context(|| format!("in {spec}"));
    }
    experiments::bundled_config(spec).map_err(|_| anyhow!(Error::Argument(format!("no file or bundled config {spec:?}"))))
}

fn load_ifs(spec: &str) -> anyhow::Result<IfsSystem> {
    Ok(load_config(spec)?.ifs)
}

fn generate(a: GenerateArgs) -> anyhow::Result<ExitCode> {
    let ifs = load_ifs(&a.ifs)?;
    let space = match (a.kind, &ifs.condensation) {
        (CloudKind::Attractor, _) | (CloudKind::Auto, None) => ifs.attractor_points(a.delta)?,
        (CloudKind::Inhomogeneous, _) | (CloudKind::Auto, Some(_)) => ifs.inhomogeneous_points(a.delta)?,
        (CloudKind::Condensation, _) => ifs.condensation_points(a.delta)?,
    };
    write_json(a.out.as_deref(), &space.to_json())?;
    if a.out.is_some() {
        write_json(None, &json!({ "points": space.len(), "resolution_floor": space.resolution_floor(), "diam": space.diam() }))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Deepest level whose cube scale stays above the resolution floor.
fn default_depth(space: &FiniteMetricSpace, rho: f64) -> usize {
    let ratio = space.resolution_floor() / space.diam();
    if !(rho > 0.0 && rho < 1.0) || !(ratio > 0.0 && ratio < 1.0) {
        return 1;
    }
    ((ratio.ln() / rho.ln()) * (1.0 + 1e-12)).floor().max(1.0) as usize
}

fn cubes(a: CubesArgs) -> anyhow::Result<ExitCode> {
    let space = Arc::new(load_space(&a.space)?);
    let depth = a.depth.unwrap_or_else(|| default_depth(&space, a.rho));
    let tree = build_cube_tree(space, a.rho, depth)?;
    if let Some(p) = &a.tree_out {
        write_json(Some(p), &tree.to_json())?;
    }
    write_json(None, &tree.verify())?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_config(a: &SweepArgs, seed: Option<u64>) -> anyhow::Result<SweepConfig> {
    let centers = match a.centers.split_once(':') {
        None if a.centers == "auto" => Centers::Auto,
        None if a.centers == "all" => Centers::All,
        Some(("sample", k)) => Centers::Sample(k.parse().context("--centers sample:K needs an integer")?),
        Some(("net", k)) => Centers::Net(k.parse().context("--centers net:K needs an integer")?),
        _ => bail!(Error::Argument(format!("unknown --centers {:?}", a.centers))),
    };
    let cfg = SweepConfig {
        centers,
        base: a.base,
        guard: a.guard,
        max_levels: None,
        window_radii: a.window_radii,
        min_level: a.min_level,
        seed: seed.unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct MassRow {
    x_index: usize,
    r: f64,
    #[serde(rename = "R")]
    big_r: f64,
    mu_r: f64,
    #[serde(rename = "mu_R")]
    mu_big_r: f64,
    log_ratio_exponent: f64,
}

#[derive(Serialize)]
struct CountRow {
    x_index: usize,
    r: f64,
    #[serde(rename = "R")]
    big_r: f64,
    count: f64,
    log_ratio_exponent: f64,
}

fn write_sweep_csv(path: &Path, sweep: &Sweep, mass: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in &sweep.rows {
        if mass {
            w.serialize(MassRow {
                x_index: row.center,
                r: row.r,
                big_r: row.big_r,
                mu_r: row.at_r,
                mu_big_r: row.at_big_r,
                log_ratio_exponent: row.log_ratio_exponent,
            })?;
        } else {
            w.serialize(CountRow {
                x_index: row.center,
                r: row.r,
                big_r: row.big_r,
                count: row.at_r,
                log_ratio_exponent: row.log_ratio_exponent,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn build_measure(a: BuildMeasureArgs, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let space = Arc::new(load_space(&a.space)?);
    let cfg = sweep_config(&a.sweep, seed)?;
    let depth = a.depth.unwrap_or_else(|| default_depth(&space, a.rho));
    let tree = Arc::new(build_cube_tree(space, a.rho, depth)?);
    let params = MassParams::new(a.t, a.s.unwrap_or(a.t + 0.25), a.c0, a.rho)?;
    let mu = if a.doubling {
        let most = tree.levels().iter().flatten().map(|c| c.children.len()).max().unwrap_or(0);
        build_mass_doubling(tree.clone(), params.with_child_bound(a.m.unwrap_or(most)))?
    } else {
        build_mass(tree.clone(), params)?
    };
    let lower = mass_sweep(&mu, Mode::LowerReg, &cfg)?;
    let upper = mass_sweep(&mu, Mode::UpperReg, &cfg)?;
    let mut summary = json!({
        "variant": mu.variant(),
        "params": mu.params(),
        "rho": tree.rho(),
        "depth": tree.depth(),
        "constraints": mu.constraints(),
        "check": mu.check(),
        "lower_reg": lower.estimate,
        "upper_reg": upper.estimate,
        "reverse_doubling_min": reverse_doubling_min(&mu, 1.0 / tree.rho(), &cfg).ok(),
    });
    if a.doubling {
        summary["doubling"] = serde_json::to_value(doubling_profile(&mu, &cfg)?)?;
    }
    if let Some(p) = &a.out {
        write_json(Some(p), &mu.to_json())?;
    }
    if let Some(p) = &a.csv {
        write_sweep_csv(p, &lower, true)?;
    }
    write_json(None, &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn load_weights(path: &Path) -> anyhow::Result<Vec<f64>> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(Error::from).with_context(|| format!("in {}", path.display()))?;
    let arr = match &v {
        Value::Array(_) => &v,
        Value::Object(o) => o.get("weights").ok_or_else(|| anyhow!(Error::Format("expected a \"weights\" array".into())))?,
        _ => bail!(Error::Format("weights must be an array or an object with \"weights\"".into())),
    };
    Ok(serde_json::from_value(arr.clone()).map_err(Error::from)?)
}

fn estimate(a: EstimateArgs, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let mode: Mode = a.mode.parse()?;
    let space = load_space(&a.space)?;
    let cfg = sweep_config(&a.sweep, seed)?;
    let (sweep, mass) = match mode {
        Mode::Assouad | Mode::Lower => (count_sweep(&space, mode, &cfg)?, false),
        Mode::UpperReg | Mode::LowerReg => {
            let mu = match &a.weights {
                Some(p) => WeightedSpace::new(space, load_weights(p)?)?,
                None => WeightedSpace::uniform(space),
            };
            log::info!("weighted space with {} points", mu.space().len());
            (mass_sweep(&mu, mode, &cfg)?, true)
        }
    };
    if let Some(p) = &a.csv {
        write_sweep_csv(p, &sweep, mass)?;
    }
    write_json(None, &sweep.estimate)?;
    Ok(ExitCode::SUCCESS)
}

fn cosc(a: CoscArgs) -> anyhow::Result<ExitCode> {
    let ifs = load_ifs(&a.ifs)?;
    write_json(None, &ifs.check_cosc()?)?;
    Ok(ExitCode::SUCCESS)
}

fn reproduce(a: ReproduceArgs, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let wanted: Option<Experiment> = match a.experiment.as_str() {
        "all" => None,
        name => Some(name.parse()?),
    };
    let mut runs: Vec<(Experiment, ExperimentConfig, bool)> = Vec::new();
    match &a.config {
        Some(spec) => {
            let cfg = load_config(spec)?;
            let exps: Vec<Experiment> = match wanted {
                Some(e) => vec![e],
                None => Experiment::ALL.to_vec(),
            };
            runs.extend(exps.into_iter().map(|e| (e, cfg.clone(), a.force)));
        }
        None => {
            for entry in SUITE.iter().filter(|s| wanted.is_none_or(|w| w == s.experiment)) {
                runs.push((entry.experiment, experiments::bundled_config(entry.config)?, entry.force || a.force));
            }
        }
    }
    let mut reports: Vec<ExperimentReport> = Vec::with_capacity(runs.len());
    for (exp, mut cfg, force) in runs {
        if let Some(s) = seed {
            cfg.params.seed = s;
        }
        log::info!("running {} on {}", exp.name(), cfg.name);
        reports.push(experiments::run(exp, &cfg, force).with_context(|| format!("{} on {}", exp.name(), cfg.name))?);
    }
    let summary = experiments::markdown_summary(&reports);
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &reports {
            write_json(Some(&dir.join(format!("{}_{}.json", r.experiment.name(), r.system))), r)?;
        }
        fs::write(dir.join("summary.md"), &summary).context("writing summary.md")?;
    }
    if let Some(p) = &a.summary {
        fs::write(p, &summary).with_context(|| format!("writing {}", p.display()))?;
    }
    match reports.as_slice() {
        [one] => write_json(None, one)?,
        many => write_json(None, many)?,
    }
    let failed = reports.iter().any(|r| r.verdict == Verdict::Fail);
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
