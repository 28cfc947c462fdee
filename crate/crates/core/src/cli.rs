//! `scenred` command line: stage commands that read and write files, plus
//! an end-to-end `pipeline` that produces the same files in one run.

use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use crate::clustering::{grid_cluster, representative_table, select_representatives, Anchor, ClusterResult, GridConfig, RepresentativeRule};
use crate::coordinates::{collisions, from_csv, to_csv, BoundMode, Coordinate, CoordinateConfig, KappaMode};
use crate::distribute::{coordinate_remote, run_parallel_coordinates, serve_worker, RemoteOptions, WorkerOptions};
use crate::ellipsoid::MvieOptions;
use crate::io::{builtin, load_instance, parse_json, read_text, to_json, write_text, Instance};
use crate::linsolve::MilpOptions;
use crate::model::{enumerate_scenarios, sample_iid, Scenario, ENUMERATION_CAP};
use crate::saa::{consistency_report, random_feasible_points, solve_saa, ConsistencyReport, SolveReport};

#[derive(Debug, Parser)]
#[command(name = "scenred", version, about = "Scenario reduction for two-stage stochastic programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the instance with an explicit scenario list to problem.json.
    Gen(GenArgs),
    /// Compute coordinates.csv.
    Coords(CoordsArgs),
    /// Cluster coordinates into clusters.json, representatives.csv, scatter.gp.
    Cluster(ClusterArgs),
    /// Solve the full and (given clusters) reduced sample.
    Solve(SolveArgs),
    /// All stages in sequence.
    Pipeline(PipelineArgs),
    /// Serve coordinate jobs over TCP.
    Worker(WorkerArgs),
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["problem", "builtin"])))]
pub struct SourceArgs {
    /// JSON problem file.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Built-in instance: example1, newsvendor, synthetic750.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Use the full support of the distribution.
    #[arg(long, conflicts_with = "sample")]
    pub enumerate: bool,
    /// Draw this many iid scenarios.
    #[arg(long, value_name = "K")]
    pub sample: Option<usize>,
    /// Sampling seed (defaults to the distribution's seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest support size that may be enumerated.
    #[arg(long, default_value_t = ENUMERATION_CAP)]
    pub cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CoordArgs {
    /// Relaxation for equality recourse rows.
    #[arg(long, default_value_t = crate::model::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value = "lp", value_parser = ["lp", "milp"])]
    pub kappa_mode: String,
    /// Ellipsoid solver tolerance on the log-det gap.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// In-process worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Remote workers, host:port[,host:port...]. Overrides --threads.
    #[arg(long, value_delimiter = ',')]
    pub workers: Vec<String>,
    /// Upper bounds for unbounded recourse variables.
    #[arg(long, default_value = "sample", value_parser = ["sample", "per-scenario"])]
    pub y_bounds: String,
}

impl CoordArgs {
    fn config(&self) -> Result<CoordinateConfig> {
        if !(self.epsilon >= 0.0) {
            bail!("--epsilon must be >= 0");
        }
        if !(self.tol > 0.0) {
            bail!("--tol must be > 0");
        }
        Ok(CoordinateConfig {
            epsilon: self.epsilon,
            mvie: MvieOptions { tol: self.tol, ..MvieOptions::default() },
            kappa_mode: self.kappa_mode.parse::<KappaMode>().map_err(|e| anyhow!(e))?,
            bounds: if self.y_bounds == "sample" { BoundMode::Sample } else { BoundMode::PerScenario },
        })
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("grid").required(true).args(["delta", "delta_sweep"])))]
pub struct GridArgs {
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated list of deltas; each gets its own delta_<value> directory.
    #[arg(long, value_delimiter = ',')]
    pub delta_sweep: Option<Vec<f64>>,
    #[arg(long, default_value = "min-corner", value_parser = ["min-corner", "origin"])]
    pub anchor: String,
    #[arg(long, default_value = "nearest-centroid", value_parser = ["nearest-centroid", "lowest-index"])]
    pub representative: String,
}

impl GridArgs {
    fn configs(&self) -> Result<Vec<GridConfig>> {
        let deltas = match (&self.delta, &self.delta_sweep) {
            (Some(d), _) => vec![*d],
            (None, Some(list)) => list.clone(),
            (None, None) => bail!("one of --delta or --delta-sweep is required"),
        };
        if let Some(d) = deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            bail!("delta must be finite and >= 0, got {d}");
        }
        let anchor = if self.anchor == "origin" { Anchor::Origin } else { Anchor::MinCorner };
        let rule = if self.representative == "lowest-index" {
            RepresentativeRule::LowestIndex
        } else {
            RepresentativeRule::NearestCentroid
        };
        Ok(deltas.into_iter().map(|delta| GridConfig { delta, anchor, rule }).collect())
    }

    fn is_sweep(&self) -> bool {
        self.delta.is_none()
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveOpts {
    /// Skip the full-sample solve (and the consistency report).
    #[arg(long)]
    pub no_full: bool,
    /// Random first-stage probe points in the consistency report.
    #[arg(long, default_value_t = 20)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub probe_seed: u64,
    /// Record wall-clock times in solve reports (makes them non-reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoordsArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub coord: CoordArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Coordinates file (default: <out>/coordinates.csv).
    #[arg(long)]
    pub coords: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// clusters.json from the cluster stage; without it only the full sample is solved.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub coord: CoordArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solve: SolveOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    /// Address to listen on; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
    /// Exit abruptly when job number N+1 arrives (fault injection).
    #[arg(long, value_name = "N")]
    pub crash_after: Option<usize>,
}

/// Parse `args` (including the program name) and run.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli.command)
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a),
        Command::Coords(a) => cmd_coords(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::Worker(a) => cmd_worker(&a),
    }
}

fn ingest(src: &SourceArgs) -> Result<(Instance, Vec<Scenario>)> {
    let instance = match (&src.problem, &src.builtin) {
        (Some(path), _) => load_instance(path),
        (None, Some(name)) => builtin(name),
        (None, None) => Err(crate::io::IoError::UnknownBuiltin(String::new())),
    }
    .context("stage: ingest")?;
    let dist = instance.distribution.as_ref();
    let scenarios = if src.enumerate {
        let dist = dist.ok_or_else(|| anyhow!("--enumerate needs a distribution")).context("stage: sample")?;
        enumerate_scenarios(&instance.program, dist, src.cap).context("stage: sample")?
    } else if let Some(k) = src.sample {
        let dist = dist.ok_or_else(|| anyhow!("--sample needs a distribution")).context("stage: sample")?;
        sample_iid(&instance.program, dist, k, src.seed.unwrap_or(dist.seed)).context("stage: sample")?
    } else if let Some(list) = &instance.scenarios {
        list.clone()
    } else if let Some(dist) = dist {
        enumerate_scenarios(&instance.program, dist, src.cap).context("stage: sample")?
    } else {
        return Err(anyhow!("instance has neither scenarios nor a distribution")).context("stage: sample");
    };
    Ok((instance, scenarios))
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    write_text(&out.join(name), text).context("stage: report")
}

fn write_problem(out: &Path, instance: &Instance, scenarios: &[Scenario]) -> Result<()> {
    let mut inst = instance.clone();
    inst.scenarios = Some(scenarios.to_vec());
    write(out, "problem.json", &to_json(&inst.to_file()))
}

fn compute_coordinates(instance: &Instance, scenarios: &[Scenario], args: &CoordArgs) -> Result<Vec<Coordinate>> {
    let cfg = args.config().context("stage: coordinates")?;
    if args.workers.is_empty() {
        run_parallel_coordinates(&instance.program, scenarios, &cfg, args.threads.max(1)).context("stage: coordinates")
    } else {
        coordinate_remote(&args.workers, &instance.program, scenarios, &cfg, &RemoteOptions::default())
            .context("stage: coordinates")
    }
}

const SCATTER_GP: &str = "\
set datafile separator ','
set xlabel 'kappa'
set ylabel 'sigma'
set key off
set grid
plot 'coordinates.csv' every ::1 using 2:3 with points pt 7 ps 0.6
";

#[derive(Debug, Serialize)]
struct SweepRow {
    delta: f64,
    representatives: usize,
    #[serde(rename = "K_delta")]
    k_delta: usize,
    beta: f64,
    beta_prime: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu_reduced: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_reduced: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu_gap: Option<f64>,
}

/// Cluster and write the per-delta artifacts into `dir`.
fn cluster_into(dir: &Path, coords: &[Coordinate], scenarios: &[Scenario], cfg: &GridConfig) -> Result<(ClusterResult, Vec<Scenario>)> {
    let probs = probabilities(coords, scenarios).context("stage: cluster")?;
    let result = grid_cluster(coords, &probs, cfg).context("stage: cluster")?;
    let reduced = select_representatives(&result, scenarios).context("stage: cluster")?;
    ensure_dir(dir)?;
    write(dir, "clusters.json", &to_json(&result))?;
    write(dir, "representatives.csv", &representative_table(&reduced))?;
    Ok((result, reduced))
}

fn probabilities(coords: &[Coordinate], scenarios: &[Scenario]) -> Result<Vec<f64>> {
    coords
        .iter()
        .map(|c| {
            scenarios
                .get(c.k)
                .filter(|s| s.k == c.k)
                .or_else(|| scenarios.iter().find(|s| s.k == c.k))
                .map(|s| s.prob)
                .ok_or_else(|| anyhow!("coordinate for scenario {} has no matching scenario", c.k))
        })
        .collect()
}

fn delta_dir(out: &Path, delta: f64) -> PathBuf {
    out.join(format!("delta_{delta}"))
}

#[derive(Debug, Serialize)]
struct Gaps {
    nu_gap: f64,
    probe_gaps: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ReducedOutput<'a> {
    #[serde(flatten)]
    report: &'a SolveReport,
    beta: f64,
    beta_prime: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaps: Option<Gaps>,
}

fn strip(mut r: SolveReport, timings: bool) -> SolveReport {
    if !timings {
        r.timings = None;
    }
    r
}

fn solve_full(instance: &Instance, scenarios: &[Scenario], opts: &SolveOpts, out: &Path) -> Result<Option<SolveReport>> {
    if opts.no_full {
        return Ok(None);
    }
    let full = solve_saa(&instance.program, scenarios, &MilpOptions::default()).context("stage: solve (full sample)")?;
    let full = strip(full, opts.timings);
    write(out, "solve_full.json", &to_json(&full))?;
    Ok(Some(full))
}

fn solve_reduced(
    instance: &Instance,
    scenarios: &[Scenario],
    result: &ClusterResult,
    reduced: &[Scenario],
    full: Option<&SolveReport>,
    opts: &SolveOpts,
    dir: &Path,
) -> Result<(SolveReport, Option<ConsistencyReport>)> {
    let red = solve_saa(&instance.program, reduced, &MilpOptions::default()).context("stage: solve (reduced sample)")?;
    let red = strip(red, opts.timings);
    let consistency = match full {
        Some(full) => {
            let probes = random_feasible_points(&instance.program, opts.probes, opts.probe_seed).context("stage: solve (probes)")?;
            Some(
                consistency_report(&instance.program, scenarios, reduced, full, &red, &probes, result.beta, result.beta_prime)
                    .context("stage: solve (consistency)")?,
            )
        }
        None => None,
    };
    let output = ReducedOutput {
        report: &red,
        beta: result.beta,
        beta_prime: result.beta_prime,
        gaps: consistency.as_ref().map(|c| Gaps {
            nu_gap: c.nu_gap,
            probe_gaps: c.probe_gaps.iter().map(|p| p.gap).collect(),
        }),
    };
    write(dir, "solve_reduced.json", &to_json(&output))?;
    if let Some(c) = &consistency {
        write(dir, "consistency.json", &to_json(c))?;
    }
    Ok((red, consistency))
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let (instance, scenarios) = ingest(&a.source)?;
    ensure_dir(&a.out)?;
    write_problem(&a.out, &instance, &scenarios)?;
    println!("{} scenarios -> {}", scenarios.len(), a.out.join("problem.json").display());
    Ok(())
}

pub fn cmd_coords(a: &CoordsArgs) -> Result<()> {
    let (instance, scenarios) = ingest(&a.source)?;
    let coords = compute_coordinates(&instance, &scenarios, &a.coord)?;
    ensure_dir(&a.out)?;
    write(&a.out, "coordinates.csv", &to_csv(&coords))?;
    summarize_coordinates(&coords);
    Ok(())
}

fn summarize_coordinates(coords: &[Coordinate]) {
    let usable = coords.iter().filter(|c| c.status.is_usable()).count();
    let ordered = coords
        .iter()
        .filter_map(|c| Some((c.kappa?, c.sigma?)))
        .all(|(k, s)| k <= s + 1e-7);
    let same = collisions(coords).len();
    println!(
        "{} coordinates, {} usable, kappa <= sigma: {}, {} exact collisions",
        coords.len(),
        usable,
        ordered,
        same
    );
}

pub fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let (_, scenarios) = ingest(&a.source)?;
    let path = a.coords.clone().unwrap_or_else(|| a.out.join("coordinates.csv"));
    let coords = from_csv(&read_text(&path).context("stage: ingest")?).context("stage: ingest")?;
    ensure_dir(&a.out)?;
    write(&a.out, "scatter.gp", SCATTER_GP)?;
    let configs = a.grid.configs()?;
    let mut rows = Vec::new();
    for cfg in &configs {
        let dir = if a.grid.is_sweep() { delta_dir(&a.out, cfg.delta) } else { a.out.clone() };
        let (result, _) = cluster_into(&dir, &coords, &scenarios, cfg)?;
        rows.push(sweep_row(&result, None, None));
    }
    report_sweep(&a.out, a.grid.is_sweep(), &rows)
}

fn sweep_row(result: &ClusterResult, red: Option<&SolveReport>, c: Option<&ConsistencyReport>) -> SweepRow {
    SweepRow {
        delta: result.delta,
        representatives: result.representatives().len(),
        k_delta: result.k_delta,
        beta: result.beta,
        beta_prime: result.beta_prime,
        nu_reduced: red.map(|r| r.nu),
        x_reduced: red.map(|r| r.x_star.clone()),
        nu_gap: c.map(|c| c.nu_gap),
    }
}

fn report_sweep(out: &Path, sweep: bool, rows: &[SweepRow]) -> Result<()> {
    for r in rows {
        print!("delta {}: {} representatives, K(delta) = {}, beta' = {}", r.delta, r.representatives, r.k_delta, r.beta_prime);
        if let (Some(nu), Some(x)) = (r.nu_reduced, &r.x_reduced) {
            print!(", reduced nu = {nu}, x = {x:?}");
        }
        println!();
    }
    if sweep {
        write(out, "sweep.json", &to_json(&rows))?;
    }
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let (instance, scenarios) = ingest(&a.source)?;
    ensure_dir(&a.out)?;
    let full = solve_full(&instance, &scenarios, &a.solve, &a.out)?;
    if let Some(f) = &full {
        println!("full: nu = {}, x = {:?}, {} variables, {} constraints", f.nu, f.x_star, f.variables, f.constraints);
    }
    if let Some(path) = &a.clusters {
        let text = read_text(path).context("stage: ingest")?;
        let result: ClusterResult = parse_json(&text).context("stage: ingest")?;
        let reduced = select_representatives(&result, &scenarios).context("stage: cluster")?;
        let (red, _) = solve_reduced(&instance, &scenarios, &result, &reduced, full.as_ref(), &a.solve, &a.out)?;
        println!("reduced: nu = {}, x = {:?}, {} variables, {} constraints", red.nu, red.x_star, red.variables, red.constraints);
    }
    Ok(())
}

pub fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let (instance, scenarios) = ingest(&a.source)?;
    let configs = a.grid.configs()?;
    ensure_dir(&a.out)?;
    write_problem(&a.out, &instance, &scenarios)?;
    let coords = compute_coordinates(&instance, &scenarios, &a.coord)?;
    write(&a.out, "coordinates.csv", &to_csv(&coords))?;
    write(&a.out, "scatter.gp", SCATTER_GP)?;
    summarize_coordinates(&coords);
    let full = solve_full(&instance, &scenarios, &a.solve, &a.out)?;
    if let Some(f) = &full {
        println!("full: nu = {}, x = {:?}, {} variables, {} constraints", f.nu, f.x_star, f.variables, f.constraints);
    }
    let mut rows = Vec::new();
    for cfg in &configs {
        let dir = if a.grid.is_sweep() { delta_dir(&a.out, cfg.delta) } else { a.out.clone() };
        let (result, reduced) = cluster_into(&dir, &coords, &scenarios, cfg)?;
        let (red, c) = solve_reduced(&instance, &scenarios, &result, &reduced, full.as_ref(), &a.solve, &dir)?;
        println!("reduced: {} variables, {} constraints", red.variables, red.constraints);
        rows.push(sweep_row(&result, Some(&red), c.as_ref()));
    }
    report_sweep(&a.out, a.grid.is_sweep(), &rows)
}

pub fn cmd_worker(a: &WorkerArgs) -> Result<()> {
    let listener = TcpListener::bind(&a.listen).with_context(|| format!("stage: worker (bind {})", a.listen))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    serve_worker(listener, WorkerOptions { crash_after: a.crash_after }).context("stage: worker")?;
    Ok(())
}
