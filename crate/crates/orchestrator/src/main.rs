use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use sandbench::{api, cloud_format, Orchestrator, OrchestratorError, RunConfig, RunManifest};
use sandbench_control::{
    simulate_execution, tune_gains_default, write_trajectory_csv, HeightField, WrenchRegion,
};
use sandbench_geometry::{load_cloud, save_ply, save_xyz, PlyEncoding, PointCloud};
use sandbench_perception::{detect_defects, make_synthetic_scan, DefectSeed, SyntheticScanSpec};
use sandbench_planner::plan_path;
use sandbench_wizard::{parse_transcript, Speaker, Status};

#[derive(Parser)]
#[command(name = "sandbench", version, about = "Scan, plan and simulate robotic surface treatment")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; the data directory for run, wizard and serve.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Produce or convert scans.
    #[command(subcommand)]
    Scan(ScanCommand),
    /// Detect surface defects and print the report.
    Detect { input: PathBuf },
    /// Plan a meander tool path and print it.
    Plan { input: PathBuf },
    /// Plan and simulate force-controlled execution.
    Simulate(SimulateArgs),
    /// Interactive dialog on the terminal.
    Wizard { input: PathBuf },
    /// End-to-end run answering prompts from a transcript file.
    Run {
        input: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Subcommand)]
enum ScanCommand {
    /// Write a synthetic scan (.ply or .xyz by extension of --out).
    Gen(GenArgs),
    /// Convert a scan to binary PLY at --out.
    Import { input: PathBuf },
}

#[derive(Args)]
struct GenArgs {
    /// Full synthetic scan specification (JSON); the flags below are ignored.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Cylinder radius in meters; a plane when omitted.
    #[arg(long)]
    radius: Option<f64>,
    /// Patch extent across and along scan lines, millimeters.
    #[arg(long, num_args = 2, default_values_t = [200.0, 300.0])]
    size: Vec<f64>,
    /// Point spacing, millimeters.
    #[arg(long, default_value_t = 2.0)]
    spacing: f64,
    /// Gaussian noise sigma, millimeters.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Defects as `x,y,radius,depth` in millimeters; negative depth is a
    /// dent.
    #[arg(long = "defect")]
    defects: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    input: PathBuf,
    /// Normal force setpoint, N.
    #[arg(long, default_value_t = 5.0)]
    force: f64,
    /// Apply execution-grade vibration and sensor noise.
    #[arg(long)]
    execution: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Stage(String),
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Stage { .. } | OrchestratorError::Module(_) => CliError::Stage(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn stage(e: impl std::fmt::Display) -> CliError {
    CliError::Stage(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Stage(m)) => {
            eprintln!("stage failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    if !path.is_file() {
        return Err(usage(OrchestratorError::MissingInput(path.to_path_buf())));
    }
    load_cloud(path, cloud_format(path)?).map_err(usage)
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(usage),
        None => std::io::stdout().write_all(bytes).map_err(usage),
    }
}

fn json_bytes<T: serde::Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v).map_err(usage)?;
    b.push(b'\n');
    Ok(b)
}

fn data_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Scan(ScanCommand::Gen(args)) => scan_gen(args, out, cli.seed.unwrap_or(cfg.seed)),
        Command::Scan(ScanCommand::Import { input }) => {
            let cloud = read_cloud(input)?;
            let out = out.ok_or_else(|| usage("scan import needs --out"))?;
            save_ply(&cloud, out, PlyEncoding::BinaryLittleEndian).map_err(usage)
        }
        Command::Detect { input } => {
            let cloud = read_cloud(input)?;
            let report = detect_defects(&cloud, &cfg.perception).map_err(stage)?;
            emit(out, &json_bytes(&report)?)
        }
        Command::Plan { input } => {
            let cloud = read_cloud(input)?;
            let plan = plan_path(&cloud, &cfg.planner).map_err(stage)?;
            emit(out, &json_bytes(&plan)?)
        }
        Command::Simulate(args) => simulate(args, &cfg, out),
        Command::Wizard { input } => {
            let o = Orchestrator::open(data_dir(&cli))?;
            interactive(&o, input, cfg)
        }
        Command::Run { input, transcript } => {
            let o = Orchestrator::open(data_dir(&cli))?;
            let text = std::fs::read_to_string(transcript)
                .map_err(|e| usage(format!("{}: {e}", transcript.display())))?;
            let answers: Vec<String> = parse_transcript(&text)
                .map_err(usage)?
                .into_iter()
                .filter(|t| t.speaker == Speaker::User)
                .map(|t| t.text)
                .collect();
            let m = run_with_answers(&o, input, cfg, answers)?;
            println!("{}", o.run_dir(&m.id).display());
            if m.wizard.status != Status::Done {
                return Err(stage(format!(
                    "transcript ended before the run was done; waiting for: {}",
                    m.wizard.prompt.as_deref().unwrap_or("an action")
                )));
            }
            Ok(())
        }
        Command::Serve { addr } => {
            let o = Arc::new(Orchestrator::open(data_dir(&cli))?);
            let rt = tokio::runtime::Runtime::new().map_err(usage)?;
            rt.block_on(api::serve(addr, o)).map_err(usage)
        }
    }
}

fn parse_defect(s: &str) -> CliResult<DefectSeed> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("defect `{s}`: {e}")))?;
    let [x, y, r, d] = v[..] else {
        return Err(usage(format!("defect `{s}` needs x,y,radius,depth")));
    };
    Ok(DefectSeed {
        center: [x * 1e-3, y * 1e-3],
        radius: r * 1e-3,
        depth: d * 1e-3,
    })
}

fn scan_gen(args: &GenArgs, out: Option<&Path>, seed: u64) -> CliResult<()> {
    let out = out.ok_or_else(|| usage("scan gen needs --out"))?;
    let spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(usage)?
        }
        None => {
            let size = [args.size[0] * 1e-3, args.size[1] * 1e-3];
            let mut spec = match args.radius {
                Some(r) => SyntheticScanSpec::cylinder(r, size, args.spacing * 1e-3),
                None => SyntheticScanSpec::plane(size, args.spacing * 1e-3),
            };
            spec.noise_sigma = args.noise * 1e-3;
            spec.defects = args.defects.iter().map(|d| parse_defect(d)).collect::<CliResult<_>>()?;
            spec.seed = seed;
            spec
        }
    };
    let scan = make_synthetic_scan(&spec).map_err(usage)?;
    match cloud_format(out)? {
        sandbench_geometry::CloudFormat::Ply => save_ply(&scan.cloud, out, PlyEncoding::BinaryLittleEndian),
        sandbench_geometry::CloudFormat::XyzAscii => save_xyz(&scan.cloud, out),
    }
    .map_err(usage)
}

fn simulate(args: &SimulateArgs, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let cloud = read_cloud(&args.input)?;
    let plan = plan_path(&cloud, &cfg.planner).map_err(stage)?;
    let plant = if args.execution { cfg.execution_plant() } else { cfg.simulation_plant() };
    let surface = HeightField::from_cloud(&cloud, &plan.frame, cfg.heightfield_cell).map_err(stage)?;
    let region = WrenchRegion::normal_force(args.force).map_err(usage)?;
    let gains = tune_gains_default(&plant);
    let sim = simulate_execution(&plan.path, &surface, &region, &gains, &plant, cfg.seed).map_err(stage)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(usage)?;
            let f = std::fs::File::create(dir.join("trajectory.csv")).map_err(usage)?;
            write_trajectory_csv(&sim.trajectory, std::io::BufWriter::new(f)).map_err(usage)?;
            std::fs::write(dir.join("metrics.json"), json_bytes(&sim.metrics)?).map_err(usage)?;
        }
        None => emit(None, &json_bytes(&sim.metrics)?)?,
    }
    match sim.metrics.failure {
        Some(f) if !sim.metrics.success => Err(stage(format!("{:?} at t = {:.3} s", f.reason, f.t))),
        _ => Ok(()),
    }
}

/// Drives a new run, taking answers from `answers` in order. Stops early
/// when the answers run out.
fn run_with_answers(o: &Orchestrator, input: &Path, cfg: RunConfig, answers: Vec<String>) -> CliResult<RunManifest> {
    let mut m = o.create_run(input, cfg)?;
    let mut answers = answers.into_iter();
    loop {
        m = match m.wizard.status {
            Status::Done => return Ok(m),
            Status::AwaitingAction => o.advance(&m.id, None, None)?,
            Status::AwaitingUser => match answers.next() {
                Some(a) => o.advance(&m.id, Some(&a), None)?,
                None => return Ok(m),
            },
        };
    }
}

fn interactive(o: &Orchestrator, input: &Path, cfg: RunConfig) -> CliResult<()> {
    let mut m = o.create_run(input, cfg)?;
    println!("run {} in {}", m.id, o.run_dir(&m.id).display());
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        match m.wizard.status {
            Status::Done => {
                println!("wizard: {}", sandbench_wizard::DONE_TEXT);
                return Ok(());
            }
            Status::AwaitingAction => {
                let action = m.wizard.action.clone().unwrap_or_default();
                println!("running {action} ...");
                m = o.advance(&m.id, None, Some(1))?;
            }
            Status::AwaitingUser => {
                println!("wizard: {}", m.wizard.prompt.as_deref().unwrap_or(""));
                print!("> ");
                std::io::stdout().flush().map_err(usage)?;
                let Some(line) = lines.next() else {
                    return Err(usage("input ended before the run was done"));
                };
                m = o.advance(&m.id, Some(line.map_err(usage)?.trim()), None)?;
            }
        }
    }
}
