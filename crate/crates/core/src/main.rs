//! Command-line entry points: tube synthesis, closed-loop simulation,
//! reduction benchmarks, and single-state policy queries.
//!
//! Exit codes: 0 success, 2 infeasible, 3 config error, 4 solver budget
//! exceeded, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use zonotube::config::{parse_mode_schedule, BuiltSystem, LoadedScenario, ScenarioFile};
use zonotube::io;
use zonotube::policy::{ControllerState, PolicyLibrary};
use zonotube::simlab::{monte_carlo, rollout_by_index, volume_benchmark, volume_benchmark_hybrid, Rollout};
use zonotube::synth::{
    audit, audit_hybrid, build_hybrid_ocp, build_ocp, recompute_slacks, recompute_slacks_hybrid,
    solve,
    SynthStatus, SynthesisResult,
    AUDIT_TOL,
};
use zonotube::zonoset::Zonotope;
use zonotube::{Error, Result};

#[derive(Parser)]
#[command(name = "zonotube", version, about = "Robust zonotope tube synthesis and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a tube, audit it, and write the artifacts.
    Synth(CommonArgs),
    /// Run Monte-Carlo closed-loop rollouts against a synthesized tube.
    Simulate(CommonArgs),
    /// Benchmark order-reduction methods along a synthesized tube.
    BenchReduce(CommonArgs),
    /// Print the policy choice (kappa, u) for one state.
    PolicyEval {
        #[command(flatten)]
        common: CommonArgs,
        /// Query state, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        state: String,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Artifact directory (written by synth, read by the others).
    #[arg(long)]
    out: PathBuf,
    /// RNG seed; overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Reduction column target; 0 disables reduction.
    #[arg(long)]
    reduction_p: Option<usize>,
    /// Fixed mode schedule, one comma-separated mode per step.
    #[arg(long)]
    mode_schedule: Option<String>,
    /// Worker threads for rollouts (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(3),
            };
        }
    };
    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::BenchReduce(args) => cmd_bench_reduce(&args),
        Command::PolicyEval { common, state } => cmd_policy_eval(&common, &state),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Infeasible(_) => 2,
                Error::Config(_) => 3,
                Error::BudgetExceeded(_) => 4,
                _ => 1,
            })
        }
    }
}

struct Context {
    file: ScenarioFile,
    loaded: LoadedScenario,
    seed: u64,
}

fn load_context(args: &CommonArgs) -> Result<Context> {
    let file = ScenarioFile::load(&args.scenario)?;
    let base = args
        .scenario
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut loaded = file.build(&base)?;
    if let Some(p) = args.reduction_p {
        loaded.scenario.reduction_columns = (p > 0).then_some(p);
    }
    if let Some(text) = &args.mode_schedule {
        let BuiltSystem::Hybrid(system) = &loaded.system else {
            return Err(Error::Config(
                "mode schedule only applies to hybrid systems".into(),
            ));
        };
        loaded.schedule = Some(parse_mode_schedule(
            text,
            system.horizon(),
            system.num_modes(),
        )?);
    }
    let seed = args.seed.unwrap_or(file.seed);
    Ok(Context { file, loaded, seed })
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?
            .install(f),
    }
}

fn read_artifacts(ctx: &Context, out: &Path) -> Result<SynthesisResult> {
    if !out.join("states.csv").exists() {
        return Err(Error::Config(format!(
            "no synthesis artifacts in {}; run synth first",
            out.display()
        )));
    }
    let result = io::read_result(out)?;
    if result.inputs.len() != ctx.loaded.system.horizon() {
        return Err(Error::Config(format!(
            "artifacts cover {} steps but the scenario has horizon {}",
            result.inputs.len(),
            ctx.loaded.system.horizon()
        )));
    }
    Ok(result)
}

fn disturbance_sequence(system: &BuiltSystem) -> Vec<Zonotope> {
    match system {
        BuiltSystem::Hybrid(h) => (0..h.horizon())
            .map(|k| h.modes()[0].disturbance_at(k).clone())
            .collect(),
        BuiltSystem::Single(s) => (0..s.horizon())
            .map(|k| s.disturbance_at(k).clone())
            .collect(),
    }
}

fn cmd_synth(args: &CommonArgs) -> Result<()> {
    let ctx = load_context(args)?;
    let built = match &ctx.loaded.system {
        BuiltSystem::Hybrid(system) => build_hybrid_ocp(
            system,
            &ctx.loaded.scenario,
            ctx.file.solver.big_m,
            ctx.loaded.schedule.as_ref().map(|s| &s[1..]),
        )?,
        BuiltSystem::Single(system) => build_ocp(system, &ctx.loaded.scenario)?,
    };
    let mut result = solve(&built, &ctx.file.solver.adapter(), &ctx.file.solver.bnb())?;
    let report = match &ctx.loaded.system {
        BuiltSystem::Hybrid(system) => {
            recompute_slacks_hybrid(&mut result, system, &ctx.loaded.scenario)?;
            audit_hybrid(&result, system, &ctx.loaded.scenario)?
        }
        BuiltSystem::Single(system) => {
            recompute_slacks(&mut result, system, &ctx.loaded.scenario)?;
            audit(&result, system, &ctx.loaded.scenario)?
        }
    };
    std::fs::create_dir_all(&args.out)?;
    io::write_result(&args.out, &result)?;
    io::write_audit(&args.out.join("audit.csv"), &report)?;
    io::write_outlines(&args.out.join("tube_outline.csv"), &result.states, (0, 1))?;
    println!(
        "status: {}",
        match result.status {
            SynthStatus::Optimal => "optimal",
            SynthStatus::BudgetExceeded => "budget exceeded (best incumbent)",
        }
    );
    println!("objective: {}", result.objective);
    println!("nodes explored: {}", result.nodes_explored);
    println!(
        "audit: {} (max violation {:.3e})",
        if report.passes(AUDIT_TOL) { "pass" } else { "FAIL" },
        report.max_violation()
    );
    if result.status == SynthStatus::BudgetExceeded {
        return Err(Error::BudgetExceeded(
            "optimality not proven; incumbent artifacts were written".into(),
        ));
    }
    Ok(())
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let ctx = load_context(args)?;
    let result = read_artifacts(&ctx, &args.out)?;
    let library = PolicyLibrary::from_result(&result)?;
    let family = ctx.file.plant_family(&ctx.loaded, result.schedule.as_deref())?;
    let disturbance = disturbance_sequence(&ctx.loaded.system);
    let sim = &ctx.file.simulate;
    let steps = sim.steps.unwrap_or(result.inputs.len());
    let mode = sim.mode.mode();
    let initial = &ctx.loaded.scenario.initial_set;
    let stats = with_workers(args.workers, || {
        monte_carlo(
            &family,
            &library,
            &result.states,
            initial,
            &disturbance,
            sim.rollouts,
            steps,
            mode,
            ctx.seed,
        )
    })?;
    io::write_containment(&args.out.join("containment.csv"), &stats)?;
    let summary = io::containment_summary(&stats);
    std::fs::write(args.out.join("containment_summary.txt"), &summary)?;
    let examples: Vec<Rollout> = (0..sim.example_rollouts.min(sim.rollouts))
        .map(|i| {
            rollout_by_index(
                &family,
                &library,
                &result.states,
                initial,
                &disturbance,
                i,
                steps,
                mode,
                ctx.seed,
            )
        })
        .collect::<Result<_>>()?;
    if !examples.is_empty() {
        io::write_rollouts(&args.out.join("rollouts.csv"), &examples)?;
    }
    print!("{summary}");
    Ok(())
}

fn cmd_bench_reduce(args: &CommonArgs) -> Result<()> {
    let ctx = load_context(args)?;
    let result = read_artifacts(&ctx, &args.out)?;
    let p = args
        .reduction_p
        .or(ctx.file.bench.columns)
        .or(ctx.loaded.scenario.reduction_columns)
        .ok_or_else(|| {
            Error::Config("no reduction target: set bench.columns or --reduction-p".into())
        })?;
    if p == 0 {
        return Err(Error::Config("benchmark needs a positive reduction target".into()));
    }
    let methods = ctx.file.bench_methods()?;
    let (rows, summaries) = match &ctx.loaded.system {
        BuiltSystem::Hybrid(system) => volume_benchmark_hybrid(&result, system, &methods, p)?,
        BuiltSystem::Single(system) => volume_benchmark(&result, system, &methods, p)?,
    };
    io::write_benchmark(&args.out.join("bench.csv"), &rows)?;
    let table = io::benchmark_table(&summaries);
    std::fs::write(args.out.join("bench_summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_policy_eval(args: &CommonArgs, state_text: &str) -> Result<()> {
    let ctx = load_context(args)?;
    let result = read_artifacts(&ctx, &args.out)?;
    let library = PolicyLibrary::from_result(&result)?;
    let state: Vec<f64> = state_text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("state entry '{s}' is not a number")))
        })
        .collect::<Result<_>>()?;
    if state.len() != library.dim() {
        return Err(Error::ShapeMismatch(format!(
            "state has {} entries, library expects {}",
            state.len(),
            library.dim()
        )));
    }
    let mut controller = ControllerState::new();
    let (u, kappa) = library.choose_policy(&DVector::from_vec(state), &mut controller);
    println!("kappa: {kappa}");
    println!(
        "u: {}",
        u.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
    );
    Ok(())
}
