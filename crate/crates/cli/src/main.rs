use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use autoopt::agents::{backend, classify_corpus, load_corpus, AgentKind};
use autoopt::config::{compile_problem, parse_spec, ConfigError, DEFAULT_SEED};
use autoopt::moo::{
    aasf_select, nsga3_run, ParetoDocument, Problem, RefDirMethod, RunMetadata, SolverParams, AASF_RHO,
};
use autoopt::objectives::ConstraintVector;
use autoopt::pipeline::{parse_script, replay, Pipeline, PipelineSettings};
use autoopt::scene::{load_scene, packaged, Layout, Scene};
use autoopt_service::{serve_blocking, ServeConfig};

#[derive(Parser)]
#[command(name = "autoopt", version, about = "Instruction-driven layout optimization for 3D widgets")]
struct Cli {
    #[command(flatten)]
    budget: Budget,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Budget {
    /// Candidate layouts to keep from the front (overrides the spec).
    #[arg(long, global = true)]
    candidates: Option<usize>,
    #[arg(long, global = true, default_value_t = SolverParams::default().generations)]
    generations: usize,
    #[arg(long, global = true, default_value_t = SolverParams::default().population)]
    population: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one spec against one scene and write the front and candidates.
    Optimize {
        /// Scene file, or the id of a packaged scene.
        #[arg(long, default_value = "office")]
        scene: String,
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay scripted instructions and answers through a session.
    Pipeline {
        #[arg(long, default_value = "office")]
        scene: String,
        #[arg(long)]
        instructions: PathBuf,
        #[arg(long, default_value = "stub")]
        agents: AgentKind,
        /// Transcript path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print reference directions on the unit simplex.
    Refdirs {
        m: usize,
        n: usize,
        #[arg(long, default_value = "riesz")]
        method: RefDirMethod,
    },
    /// Classify a labelled JSONL corpus with the ambiguity detector.
    Classify {
        corpus: PathBuf,
        #[arg(long, default_value = "stub")]
        agents: AgentKind,
        #[arg(long, default_value = "office")]
        scene: String,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of scene documents; packaged scenes when omitted.
        #[arg(long)]
        scene_dir: Option<PathBuf>,
        #[arg(long, default_value = "stub")]
        agents: AgentKind,
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        /// Origin allowed to call the API from a browser; repeatable.
        #[arg(long = "allow-origin")]
        allow_origin: Vec<String>,
    },
}

/// Exit 1 for runtime failures, 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

fn runtime(message: impl ToString) -> Failure {
    Failure { code: 1, message: message.to_string() }
}

fn invalid(message: impl ToString) -> Failure {
    Failure { code: 2, message: message.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize { scene, spec, out } => optimize(&cli.budget, &scene, &spec, &out),
        Command::Pipeline { scene, instructions, agents, out } => {
            pipeline(&cli.budget, &scene, &instructions, agents, out.as_deref())
        }
        Command::Refdirs { m, n, method } => refdirs(m, n, method, cli.budget.seed),
        Command::Classify { corpus, agents, scene } => classify(&corpus, agents, &scene),
        Command::Serve { port, scene_dir, agents, data_dir, allow_origin } => {
            let config = ServeConfig {
                port,
                scene_dir,
                agents,
                data_dir,
                allowed_origins: allow_origin,
                settings: settings(&cli.budget),
            };
            serve_blocking(config, |addr| eprintln!("listening on {addr} (seed {})", cli.budget.seed))
                .map_err(runtime)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn settings(b: &Budget) -> PipelineSettings {
    PipelineSettings {
        seed: b.seed,
        population: b.population,
        generations: b.generations,
        candidate_count: b.candidates,
        ..PipelineSettings::default()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// A scene file, or a packaged scene id when no such file exists.
fn scene_arg(arg: &str) -> Result<Scene, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_scene(&read(path)?).map_err(|e| invalid(format!("{arg}: {e}")));
    }
    packaged::all()
        .iter()
        .find(|(id, _)| *id == arg)
        .map(|(_, doc)| load_scene(doc).expect("packaged scene is valid"))
        .ok_or_else(|| invalid(format!("no scene file or packaged scene named '{arg}'")))
}

fn timing_table(rows: &[(String, f64)]) {
    println!("{:<22} {:>10}", "module", "seconds");
    for (module, secs) in rows {
        println!("{module:<22} {secs:>10.3}");
    }
}

#[derive(Serialize)]
struct CandidateEntry {
    index: usize,
    front_index: usize,
    weight_index: Option<usize>,
    score: f64,
    layout: Layout,
    objectives: Vec<f64>,
    constraints: ConstraintVector,
    feasible: bool,
}

#[derive(Serialize)]
struct CandidateDocument {
    metadata: RunMetadata,
    objectives: Vec<&'static str>,
    weights: Vec<Vec<f64>>,
    candidates: Vec<CandidateEntry>,
}

fn optimize(b: &Budget, scene: &str, spec_path: &Path, out: &Path) -> Result<(), Failure> {
    let scene = scene_arg(scene)?;
    let t = Instant::now();
    let mut spec = parse_spec(&read(spec_path)?).map_err(|e| invalid(format!("{}: {e}", spec_path.display())))?;
    spec.seed = b.seed;
    if let Some(k) = b.candidates {
        spec.candidate_count = k;
    }
    let problem = compile_problem(&spec, &scene).map_err(|e| match e {
        ConfigError::Parse { .. } | ConfigError::Invalid { .. } | ConfigError::Violations(_) => {
            invalid(format!("{}: {e}", spec_path.display()))
        }
        other => invalid(other),
    })?;
    let compile_s = t.elapsed().as_secs_f64();

    let params = SolverParams {
        population: b.population,
        generations: b.generations,
        seed: b.seed,
        ..SolverParams::default()
    };
    params.validate().map_err(invalid)?;
    let method = RefDirMethod::default();
    let t = Instant::now();
    let dirs = method.generate(problem.n_obj(), params.population, params.seed).map_err(runtime)?;
    let front = nsga3_run(&problem, &params, &dirs).map_err(runtime)?;
    let solve_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let chosen = aasf_select(&front.individuals, spec.candidate_count, AASF_RHO, spec.seed).map_err(runtime)?;
    let select_s = t.elapsed().as_secs_f64();

    let metadata = RunMetadata {
        seed: b.seed,
        generations: params.generations,
        population: params.population,
        refdir_method: method,
        n_obj: problem.n_obj(),
    };
    let pareto = ParetoDocument::new(metadata.clone(), &front.individuals);
    let candidates = CandidateDocument {
        metadata,
        objectives: spec.active_objectives.iter().map(|k| k.name()).collect(),
        weights: chosen.weights_used.clone(),
        candidates: chosen
            .members
            .iter()
            .enumerate()
            .map(|(index, c)| {
                let v = &c.individual.violations;
                CandidateEntry {
                    index,
                    front_index: c.front_index,
                    weight_index: c.weight_index,
                    score: c.score,
                    layout: problem.decode(&c.individual.genome),
                    objectives: c.individual.objectives.clone(),
                    constraints: ConstraintVector { occlusion: v[0], fov: v[1], distance: v[2] },
                    feasible: c.individual.feasible(),
                }
            })
            .collect(),
    };
    fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    write(&out.join("pareto.json"), &serde_json::to_string_pretty(&pareto).expect("serializes"))?;
    write(&out.join("candidates.json"), &serde_json::to_string_pretty(&candidates).expect("serializes"))?;
    write(&out.join("pareto.csv"), &pareto.to_csv())?;

    let feasible = candidates.candidates.iter().filter(|c| c.feasible).count();
    println!("seed: {}", b.seed);
    println!(
        "front: {} individuals; candidates: {} ({} feasible)",
        front.individuals.len(),
        candidates.candidates.len(),
        feasible
    );
    timing_table(&[
        ("configuration".into(), compile_s),
        ("optimization".into(), solve_s),
        ("selection".into(), select_s),
    ]);
    Ok(())
}

fn pipeline(
    b: &Budget,
    scene: &str,
    instructions: &Path,
    agents: AgentKind,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let scene = scene_arg(scene)?;
    let id = scene.id.clone();
    let lines = parse_script(&read(instructions)?);
    if lines.is_empty() {
        return Err(invalid(format!("{}: no instructions", instructions.display())));
    }
    let p = Pipeline::new(vec![scene], backend(agents).map_err(runtime)?, settings(b));
    let mut session = p.create_session(&id).map_err(runtime)?;
    replay(&p, &mut session, &lines).map_err(runtime)?;
    let transcript = session.transcript().to_json();
    match out {
        Some(path) => write(path, &transcript)?,
        None => println!("{transcript}"),
    }
    eprintln!("seed: {}; phase: {}; candidates: {}", b.seed, session.phase, session.candidates.len());
    if let Some(r) = session.recommended {
        eprintln!("recommended: {r} ({})", session.rationale.as_deref().unwrap_or(""));
    }
    let rows: Vec<(String, f64)> = session.timings.iter().map(|t| (t.module.clone(), t.seconds)).collect();
    if out.is_some() && !rows.is_empty() {
        timing_table(&rows);
    }
    Ok(())
}

fn refdirs(m: usize, n: usize, method: RefDirMethod, seed: u64) -> Result<(), Failure> {
    let dirs = method.generate(m, n, seed).map_err(invalid)?;
    dirs.check_simplex(1e-9).map_err(runtime)?;
    println!("# method {method}, m {m}, {} directions, seed {seed}", dirs.len());
    for d in &dirs.dirs {
        let cells: Vec<String> = d.iter().map(|x| format!("{x:.6}")).collect();
        println!("{}", cells.join(","));
    }
    Ok(())
}

fn classify(corpus: &Path, agents: AgentKind, scene: &str) -> Result<(), Failure> {
    let scene = scene_arg(scene)?;
    let examples = load_corpus(&read(corpus)?).map_err(|e| invalid(format!("{}: {e}", corpus.display())))?;
    let backend = backend(agents).map_err(runtime)?;
    let c = classify_corpus(&examples, backend.as_ref(), &scene).map_err(runtime)?;
    println!("accuracy: {}/{} = {:.4}", c.correct, c.total, c.accuracy);
    println!("{:<14} {:>12} {:>10}", "truth \\ pred", "well-formed", "ambiguous");
    for (label, row) in ["well-formed", "ambiguous"].iter().zip(c.confusion) {
        println!("{label:<14} {:>12} {:>10}", row[0], row[1]);
    }
    for i in &c.errors {
        println!("misclassified: {}", examples[*i].instruction);
    }
    Ok(())
}
