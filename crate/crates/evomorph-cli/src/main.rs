//! Command line front end: run experiments, replay brain evolution on frozen
//! bodies, summarise archives into tables and plots, and inspect genomes.

mod analyze;
mod plot;

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use evomorph::archive::{save_run, schema_check, RunArchive, RunMode};
use evomorph::cppn::CppnGenome;
use evomorph::decode::{decode_bfs, decode_random, QueryMechanism};
use evomorph::evolve::{
    run_fixed_body_with_progress, run_with_progress, EvolutionConfig, GenerationSummary,
    Inheritance, RunResult,
};
use evomorph::learn::RevDeConfig;
use evomorph::morphology::MorphologyTree;
use evomorph::render::{render_ascii, render_svg};

#[derive(Parser)]
#[command(name = "evomorph", version)]
#[command(about = "Evolve modular robots with learning brains on a point-navigation task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run body-and-brain evolution and write one archive per run
    Evolve(EvolveArgs),
    /// Rerun brain evolution on the founder bodies of an existing archive
    FixedBody(FixedBodyArgs),
    /// Summarise one or more archives into CSV tables and optional SVG charts
    Analyze(AnalyzeArgs),
    /// Draw the body a genome decodes to
    Render(RenderArgs),
    /// Decode a genome and print its module table
    Decode(DecodeArgs),
    /// Check an archive for internal inconsistencies
    SchemaCheck(SchemaCheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueryArg {
    Bfs,
    Random,
}

impl From<QueryArg> for QueryMechanism {
    fn from(q: QueryArg) -> Self {
        match q {
            QueryArg::Bfs => QueryMechanism::Bfs,
            QueryArg::Random => QueryMechanism::RandomQuery,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemArg {
    Lamarckian,
    Darwinian,
}

impl From<SystemArg> for Inheritance {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::Lamarckian => Inheritance::Lamarckian,
            SystemArg::Darwinian => Inheritance::Darwinian,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Ascii,
    Svg,
}

#[derive(Args)]
struct EvolveArgs {
    /// Body decode mechanism
    #[arg(long, value_enum)]
    query: Option<QueryArg>,
    /// What offspring inherit: learned brain weights or birth weights
    #[arg(long, value_enum)]
    system: Option<SystemArg>,
    /// Master seed; run r uses seed + r
    #[arg(long)]
    seed: Option<u64>,
    /// How many runs to launch, with consecutive seeds
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    generations: Option<usize>,
    /// Population size
    #[arg(long)]
    pop: Option<usize>,
    /// Offspring per generation
    #[arg(long)]
    offspring: Option<usize>,
    /// Directory the run archives are written under
    #[arg(long)]
    out: Option<PathBuf>,
    /// Small preset: population 16, 8 offspring, 10 generations, lighter learning
    #[arg(long)]
    desk_scale: bool,
    /// key=value file applied after built-in defaults; flags still win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for lifetime learning (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FixedBodyArgs {
    /// Archive whose configuration and founder bodies are reused
    #[arg(long)]
    source: PathBuf,
    /// Directory the new archive is written under
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for lifetime learning (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run archive directories
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Directory the tables are written to
    #[arg(long, default_value = "analysis")]
    out: PathBuf,
    /// Also report assessments spent until this fitness is first reached
    #[arg(long)]
    threshold: Option<f64>,
    /// Write SVG line charts next to the tables
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Body genome file (JSON)
    #[arg(long)]
    genome: PathBuf,
    #[arg(long, value_enum, default_value = "bfs")]
    query: QueryArg,
    /// Decode seed, used by the random query mechanism
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, value_enum, default_value = "ascii")]
    format: FormatArg,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Body genome file (JSON)
    #[arg(long)]
    genome: PathBuf,
    #[arg(long, value_enum, default_value = "bfs")]
    query: QueryArg,
    /// Decode seed, used by the random query mechanism
    #[arg(long, default_value = "0")]
    seed: u64,
}

#[derive(Args)]
struct SchemaCheckArgs {
    /// Run archive directory
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evolve(args) => cmd_evolve(args),
        Command::FixedBody(args) => cmd_fixed_body(args),
        Command::Analyze(args) => {
            analyze::cmd_analyze(&args.inputs, &args.out, args.threshold, args.plot)
        }
        Command::Render(args) => cmd_render(args),
        Command::Decode(args) => cmd_decode(args),
        Command::SchemaCheck(args) => cmd_schema_check(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Everything `evolve` needs, resolved from defaults, then an optional
/// key=value file, then the desk-scale preset, then explicit flags.
struct EvolveSettings {
    query: QueryMechanism,
    system: Inheritance,
    seed: u64,
    runs: u64,
    generations: usize,
    pop: usize,
    offspring: usize,
    mu: usize,
    iterations: usize,
    out: PathBuf,
    jobs: Option<usize>,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        let cfg = EvolutionConfig::default();
        EvolveSettings {
            query: cfg.query,
            system: cfg.inheritance,
            seed: cfg.seed,
            runs: 1,
            generations: cfg.generations,
            pop: cfg.population_size,
            offspring: cfg.offspring_count,
            mu: cfg.learn.mu,
            iterations: cfg.learn.iterations,
            out: PathBuf::from("runs"),
            jobs: None,
        }
    }
}

impl EvolveSettings {
    fn apply_file(&mut self, path: &Path) -> Result<(), Box<dyn Error>> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| format!("config line {}: {e}", lineno + 1);
            match key {
                "query" => {
                    self.query = match value {
                        "bfs" => QueryMechanism::Bfs,
                        "random" => QueryMechanism::RandomQuery,
                        other => return Err(bad(&format!("unknown query {other:?}")).into()),
                    }
                }
                "system" => {
                    self.system = match value {
                        "lamarckian" => Inheritance::Lamarckian,
                        "darwinian" => Inheritance::Darwinian,
                        other => return Err(bad(&format!("unknown system {other:?}")).into()),
                    }
                }
                "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
                "runs" => self.runs = value.parse().map_err(|e| bad(&e))?,
                "generations" => self.generations = value.parse().map_err(|e| bad(&e))?,
                "pop" => self.pop = value.parse().map_err(|e| bad(&e))?,
                "offspring" => self.offspring = value.parse().map_err(|e| bad(&e))?,
                "mu" => self.mu = value.parse().map_err(|e| bad(&e))?,
                "iterations" => self.iterations = value.parse().map_err(|e| bad(&e))?,
                "jobs" => self.jobs = Some(value.parse().map_err(|e| bad(&e))?),
                "out" => self.out = PathBuf::from(value),
                other => return Err(bad(&format!("unknown key {other:?}")).into()),
            }
        }
        Ok(())
    }

    fn apply_desk_scale(&mut self) {
        let cfg = EvolutionConfig::desk_scale();
        self.generations = cfg.generations;
        self.pop = cfg.population_size;
        self.offspring = cfg.offspring_count;
        self.mu = cfg.learn.mu;
        self.iterations = cfg.learn.iterations;
    }

    fn apply_flags(&mut self, args: &EvolveArgs) {
        if let Some(q) = args.query {
            self.query = q.into();
        }
        if let Some(s) = args.system {
            self.system = s.into();
        }
        if let Some(v) = args.seed {
            self.seed = v;
        }
        if let Some(v) = args.runs {
            self.runs = v;
        }
        if let Some(v) = args.generations {
            self.generations = v;
        }
        if let Some(v) = args.pop {
            self.pop = v;
        }
        if let Some(v) = args.offspring {
            self.offspring = v;
        }
        if let Some(v) = &args.out {
            self.out = v.clone();
        }
        if let Some(v) = args.jobs {
            self.jobs = Some(v);
        }
    }

    fn to_config(&self, seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            seed,
            population_size: self.pop,
            offspring_count: self.offspring,
            generations: self.generations,
            query: self.query,
            inheritance: self.system,
            learn: RevDeConfig { mu: self.mu, iterations: self.iterations, ..RevDeConfig::default() },
            ..EvolutionConfig::default()
        }
    }
}

fn run_dir_name(cfg: &EvolutionConfig, fixed: bool) -> String {
    let query = match cfg.query {
        QueryMechanism::Bfs => "bfs",
        QueryMechanism::RandomQuery => "random",
    };
    let system = match cfg.inheritance {
        Inheritance::Lamarckian => "lamarckian",
        Inheritance::Darwinian => "darwinian",
    };
    if fixed {
        format!("run_{query}_{system}_fixed_{}", cfg.seed)
    } else {
        format!("run_{query}_{system}_{}", cfg.seed)
    }
}

/// Run one evolution, optionally pinning worker count via a private rayon
/// pool. Results are identical for any worker count; the pool only bounds
/// parallelism.
fn execute(
    cfg: &EvolutionConfig,
    bodies: Option<&[MorphologyTree]>,
    jobs: Option<usize>,
) -> Result<RunResult, Box<dyn Error>> {
    let progress = |s: &GenerationSummary| {
        eprintln!("gen {:>3}  best {:>8.3}  mean {:>8.3}", s.generation, s.best, s.mean);
    };
    let go = || match bodies {
        Some(b) => run_fixed_body_with_progress(cfg, b, progress),
        None => run_with_progress(cfg, progress),
    };
    let result = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(go)?,
        None => go()?,
    };
    Ok(result)
}

fn cmd_evolve(args: EvolveArgs) -> Result<(), Box<dyn Error>> {
    let mut settings = EvolveSettings::default();
    if let Some(path) = &args.config {
        settings.apply_file(path)?;
    }
    if args.desk_scale {
        settings.apply_desk_scale();
    }
    settings.apply_flags(&args);
    if settings.runs == 0 {
        return Err("runs must be at least 1".into());
    }

    for r in 0..settings.runs {
        let cfg = settings.to_config(settings.seed + r);
        eprintln!(
            "run seed {} ({} individuals, {} assessments)",
            cfg.seed,
            cfg.total_individuals(),
            cfg.total_assessments()
        );
        let result = execute(&cfg, None, settings.jobs)?;
        let dir = settings.out.join(run_dir_name(&cfg, false));
        save_run(&dir, &cfg, RunMode::Evolved, &result)?;
        let best = result
            .individuals
            .iter()
            .map(|i| i.fitness_after)
            .fold(f64::NEG_INFINITY, f64::max);
        println!("wrote {} (best fitness {best:.3})", dir.display());
    }
    Ok(())
}

fn cmd_fixed_body(args: FixedBodyArgs) -> Result<(), Box<dyn Error>> {
    let archive = RunArchive::open(&args.source)?;
    let cfg = archive.manifest.config.clone();
    let bodies: Vec<MorphologyTree> = (0..cfg.population_size)
        .map(|id| archive.morphology(id))
        .collect::<Result<_, _>>()?;
    eprintln!(
        "fixed-body rerun of {} (seed {}, {} founder bodies)",
        args.source.display(),
        cfg.seed,
        bodies.len()
    );
    let result = execute(&cfg, Some(&bodies), args.jobs)?;
    let dir = args.out.join(run_dir_name(&cfg, true));
    save_run(&dir, &cfg, RunMode::FixedBody, &result)?;
    let best = result
        .individuals
        .iter()
        .map(|i| i.fitness_after)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("wrote {} (best fitness {best:.3})", dir.display());
    Ok(())
}

fn decode_genome_file(
    path: &Path,
    query: QueryMechanism,
    seed: u64,
) -> Result<MorphologyTree, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read genome {}: {e}", path.display()))?;
    let genome = CppnGenome::from_json(&text)?;
    let body = match query {
        QueryMechanism::Bfs => decode_bfs(&genome)?,
        QueryMechanism::RandomQuery => {
            decode_random(&genome, &mut ChaCha8Rng::seed_from_u64(seed))?
        }
    };
    Ok(body)
}

fn cmd_render(args: RenderArgs) -> Result<(), Box<dyn Error>> {
    let body = decode_genome_file(&args.genome, args.query.into(), args.seed)?;
    let text = match args.format {
        FormatArg::Ascii => render_ascii(&body),
        FormatArg::Svg => render_svg(&body),
    };
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), Box<dyn Error>> {
    let body = decode_genome_file(&args.genome, args.query.into(), args.seed)?;
    println!("{:>3}  {:<11}  {:>12}  {:<5}  parent", "id", "kind", "position", "rot");
    for (id, m) in body.modules().iter().enumerate() {
        let parent = match m.parent {
            Some((p, socket)) => format!("{p}:{socket}"),
            None => "-".to_string(),
        };
        let position = format!("{},{},{}", m.position[0], m.position[1], m.position[2]);
        println!(
            "{id:>3}  {:<11}  {position:>12}  {:<5}  {parent}",
            format!("{:?}", m.kind),
            format!("{:?}", m.rotation)
        );
    }
    println!("modules {}  joints {}  hash {}", body.len(), body.n_joints(), body.body_hash());
    Ok(())
}

fn cmd_schema_check(args: SchemaCheckArgs) -> Result<(), Box<dyn Error>> {
    let report = schema_check(&args.dir)?;
    println!(
        "individuals {}  generations {}  assessments {}",
        report.individuals, report.generations, report.assessments
    );
    if report.is_clean() {
        println!("ok");
        Ok(())
    } else {
        for problem in &report.problems {
            eprintln!("problem: {problem}");
        }
        Err(format!("{} problem(s) found", report.problems.len()).into())
    }
}
