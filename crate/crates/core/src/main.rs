use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use slab_hybrid::config::{FileConfig, LadderChoice};
use slab_hybrid::experiments::{
    content_hash, grid_refinement_study, linf_error, relative_l2_error, ExperimentError,
};
use slab_hybrid::lo::LoError;
use slab_hybrid::mc::McError;
use slab_hybrid::problem::ProblemError;
use slab_hybrid::sn::{refine_and_extrapolate, BenchmarkSolution, SnError};
use slab_hybrid::{
    run_histories, solve_hybrid, CaptureMode, ClosureSet, Mesh1D, Method, Provenance, RunConfig,
    SlabProblem,
};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "slab-hybrid",
    version,
    about = "Hybrid MC / low-order transport for 1D slabs"
)]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "SLAB_HYBRID_OUT", default_value = "runs")]
    out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and certify S_N reference solutions.
    Reference {
        /// Target grids, e.g. 4,8,16.
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        ladder: Option<LadderArg>,
    },
    /// Plain Monte Carlo run: raw tallies and track-length flux.
    Mc(RunArgs),
    /// MC closures followed by HQD and/or HSM solves.
    Hybrid {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        /// Skip the reference solve and error report.
        #[arg(long)]
        no_reference: bool,
    },
    /// Replicated grid-refinement study.
    Study {
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        histories: Option<Vec<u64>>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        capture: Option<Vec<CaptureMode>>,
    },
    /// Write the closure functionals of one MC run.
    DumpClosures(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    histories: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    capture: Option<CaptureMode>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Hqd,
    Hsm,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Hqd => vec![Method::Hqd],
            MethodArg::Hsm => vec![Method::Hsm],
            MethodArg::Both => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LadderArg {
    Default,
    Alternate,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Certification(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Certification(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Certification(m) => write!(f, "certification failure: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Config(_)
            | ProblemError::InvalidRegion { .. }
            | ProblemError::Tiling { .. }
            | ProblemError::Length(_)
            | ProblemError::EmptyMesh
            | ProblemError::UnalignedRegion(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SnError> for CliError {
    fn from(e: SnError) -> Self {
        match e {
            SnError::Certification { .. } | SnError::Ladder { .. } => {
                CliError::Certification(e.to_string())
            }
            SnError::Problem(p) => p.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Problem(p) => p.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<LoError> for CliError {
    fn from(e: LoError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => CliError::Config(e.to_string()),
            ExperimentError::Problem(p) => p.into(),
            ExperimentError::Mc(m) => m.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Serialize)]
struct RunManifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    seed: u64,
    problem: &'a SlabProblem,
    settings: &'a T,
}

/// Creates `<root>/<command>-<hash prefix>-s<seed>` and writes its manifest.
fn run_dir<T: Serialize>(
    root: &Path,
    command: &str,
    seed: u64,
    problem: &SlabProblem,
    settings: &T,
) -> Result<PathBuf, CliError> {
    let hash = content_hash(&(command, problem, settings, seed));
    let dir = root.join(format!("{command}-{}-s{seed}", &hash[..12]));
    fs::create_dir_all(&dir)?;
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: &hash,
        seed,
        problem,
        settings,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn run_settings(file: &FileConfig, args: &RunArgs) -> (usize, RunConfig) {
    let mut run = file.run_config();
    if let Some(n) = args.histories {
        run.histories = n;
    }
    if let Some(s) = args.seed {
        run.rng_seed = s;
    }
    if let Some(c) = args.capture {
        run.capture_mode = c;
    }
    (args.cells.unwrap_or(file.cells()), run)
}

fn references(
    problem: &SlabProblem,
    cells: &[usize],
    ladder: LadderChoice,
) -> Result<Vec<BenchmarkSolution>, CliError> {
    cells
        .iter()
        .map(|&i| {
            let mesh = Mesh1D::uniform(problem, i)?;
            Ok(refine_and_extrapolate(problem, &mesh, &ladder.levels())?)
        })
        .collect()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let problem = file.problem()?;
    match cli.command {
        Command::Reference { cells, ladder } => {
            let cells = cells.unwrap_or_else(|| file.reference_cells());
            let ladder = match ladder {
                Some(LadderArg::Default) => LadderChoice::Default,
                Some(LadderArg::Alternate) => LadderChoice::Alternate,
                None => file.ladder(),
            };
            let settings = (&cells, ladder);
            let dir = run_dir(&cli.out, "reference", 0, &problem, &settings)?;
            for sol in references(&problem, &cells, ladder)? {
                let mut out = create(&dir, &format!("reference_I{}.csv", sol.cells()))?;
                sol.write_csv(&mut out)?;
                out.flush()?;
                println!(
                    "I={} certified_digits={}",
                    sol.cells(),
                    sol.certified_digits
                );
            }
            println!("{}", dir.display());
        }
        Command::Mc(args) => {
            let (cells, run) = run_settings(&file, &args);
            run.validate()?;
            let mesh = Mesh1D::uniform(&problem, cells)?;
            let dir = run_dir(&cli.out, "mc", run.rng_seed, &problem, &(cells, &run))?;
            let tallies = run_histories(&problem, &mesh, &run)?;
            let mut out = create(&dir, "tallies.csv")?;
            tallies.write_csv(&mut out)?;
            out.flush()?;
            let closures = ClosureSet::from_tallies(&tallies, &mesh, None);
            let mut out = create(&dir, "flux.csv")?;
            writeln!(out, "cell,x_center,phi,rel_err")?;
            for i in 0..cells {
                writeln!(
                    out,
                    "{i},{:.10},{:.10e},{:.4e}",
                    mesh.center(i),
                    closures.phi_mc[i],
                    closures.phi_rel_err[i]
                )?;
            }
            out.flush()?;
            println!(
                "histories={} anomalous={} dir={}",
                tallies.histories(),
                tallies.anomalous_histories(),
                dir.display()
            );
        }
        Command::DumpClosures(args) => {
            let (cells, run) = run_settings(&file, &args);
            run.validate()?;
            let mesh = Mesh1D::uniform(&problem, cells)?;
            let dir = run_dir(
                &cli.out,
                "dump-closures",
                run.rng_seed,
                &problem,
                &(cells, &run),
            )?;
            let tallies = run_histories(&problem, &mesh, &run)?;
            let provenance = Provenance {
                seed: run.rng_seed,
                histories: tallies.histories(),
            };
            let closures = ClosureSet::from_tallies(&tallies, &mesh, Some(provenance));
            let mut out = create(&dir, "closures.csv")?;
            closures.write_csv(&mut out)?;
            out.flush()?;
            println!(
                "fallback_cells={} dir={}",
                closures.fallback_cells.len(),
                dir.display()
            );
        }
        Command::Hybrid {
            run: args,
            method,
            no_reference,
        } => {
            let (cells, run) = run_settings(&file, &args);
            run.validate()?;
            let mesh = Mesh1D::uniform(&problem, cells)?;
            let methods = method.methods();
            let dir = run_dir(
                &cli.out,
                "hybrid",
                run.rng_seed,
                &problem,
                &(cells, &run, &methods),
            )?;
            let reference = if no_reference {
                None
            } else {
                Some(references(&problem, &[cells], file.ladder())?.remove(0))
            };
            let tallies = run_histories(&problem, &mesh, &run)?;
            let provenance = Provenance {
                seed: run.rng_seed,
                histories: tallies.histories(),
            };
            let closures = ClosureSet::from_tallies(&tallies, &mesh, Some(provenance));
            let mut out = create(&dir, "closures.csv")?;
            closures.write_csv(&mut out)?;
            out.flush()?;
            let mut solutions = Vec::new();
            for &m in &methods {
                solutions.push(solve_hybrid(&problem, &mesh, &closures, m)?);
            }
            let mut out = create(&dir, "solution.csv")?;
            write!(out, "cell,x_center,phi_mc")?;
            for s in &solutions {
                write!(out, ",phi_{}", s.method.as_str().to_lowercase())?;
            }
            if reference.is_some() {
                write!(out, ",phi_ex")?;
            }
            writeln!(out)?;
            for i in 0..cells {
                write!(
                    out,
                    "{i},{:.10},{:.10e}",
                    mesh.center(i),
                    closures.phi_mc[i]
                )?;
                for s in &solutions {
                    write!(out, ",{:.10e}", s.phi[i])?;
                }
                if let Some(r) = &reference {
                    write!(out, ",{:.10e}", r.phi[i])?;
                }
                writeln!(out)?;
            }
            out.flush()?;
            if let Some(r) = &reference {
                let mut out = create(&dir, "errors.csv")?;
                writeln!(out, "method,rel_l2,rel_linf")?;
                let mut rows = vec![("MC", closures.phi_mc.clone())];
                rows.extend(solutions.iter().map(|s| (s.method.as_str(), s.phi.clone())));
                for (name, phi) in rows {
                    let l2 = relative_l2_error(&phi, &r.phi, &mesh)?;
                    let linf = linf_error(&phi, &r.phi)?;
                    writeln!(out, "{name},{l2:.6e},{linf:.6e}")?;
                    println!("{name}: RE_L2={l2:.4e} RE_Linf={linf:.4e}");
                }
                out.flush()?;
            }
            for s in &solutions {
                println!("{} balance_error={:.2e}", s.method, s.balance_error());
            }
            println!("{}", dir.display());
        }
        Command::Study {
            cells,
            histories,
            replicates,
            master_seed,
            capture,
        } => {
            let mut study = file.study_config();
            if let Some(c) = cells {
                study.cells = c;
            }
            if let Some(h) = histories {
                study.histories = h;
            }
            if let Some(r) = replicates {
                study.replicates = r;
            }
            if let Some(s) = master_seed {
                study.master_seed = s;
            }
            if let Some(c) = capture {
                study.capture_modes = c;
            }
            study.validate()?;
            let hash = study.hash(&problem);
            let dir = cli
                .out
                .join(format!("study-{}-s{}", &hash[..12], study.master_seed));
            let refs = references(&problem, &study.cells, file.ladder())?;
            let report = grid_refinement_study(&problem, &study, &refs)?;
            report.write_outputs(&dir)?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("{}", CliError::Config("--workers must be >= 1".into()));
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("{}", CliError::Runtime(e.to_string()));
            return ExitCode::from(1);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
