use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coreecs::fuzz::fuzz;
use coreecs::po::DEFAULT_LINEARIZATION_LIMIT;
use coreecs::safety::{brute_force_determinism, check_safe, Verdict};
use coreecs::scenario::{
    disjoint_entities_scenario, mutation_category_suite, render_frames, scenario_by_name, scenario_names,
    toy_physics_scenario,
};
use coreecs::{EcsError, RunConfig};

#[derive(Parser)]
#[command(name = "coreecs", version, about = "Run and analyse small ECS schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a demo program and print one line per frame.
    Demo {
        #[arg(value_enum)]
        program: Program,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, value_enum, default_value_t = Interpreter::Ref)]
        interpreter: Interpreter,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        workers: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the safety report of a scenario's schedule at its start state.
    Check { scenario: String },
    /// Run the mutation-category suite against its expected outputs.
    Categories,
    /// Check random schedules for safe-but-nondeterministic behaviour.
    Fuzz {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        max_invocations: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Program {
    ToyPhys,
    DisjointEntities,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Interpreter {
    Ref,
    Parallel,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, EcsError> {
    match command {
        Command::Demo { program, frames, interpreter, workers, seed } => {
            let scenario = match program {
                Program::ToyPhys => toy_physics_scenario(),
                Program::DisjointEntities => disjoint_entities_scenario(),
            };
            let frames = frames.unwrap_or(scenario.frames);
            let states = match interpreter {
                Interpreter::Ref => scenario.run_reference(frames)?,
                Interpreter::Parallel => scenario.run_parallel(frames, RunConfig::new(workers as usize, seed))?,
            };
            print!("{}", render_frames(&states));
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { scenario } => {
            let Some(s) = scenario_by_name(&scenario) else {
                eprintln!("unknown scenario {scenario}; expected one of: {}", scenario_names().join(", "));
                return Ok(ExitCode::from(2));
            };
            let c = s.start_state()?;
            let report = check_safe(&c, &s.schedule)?;
            println!("schedule: {}", s.schedule);
            match brute_force_determinism(&c, &s.schedule, DEFAULT_LINEARIZATION_LIMIT) {
                Ok(d) => {
                    let safe = report.verdict == Verdict::Safe;
                    let report = if safe { report } else { report.with_determinism(&d)? };
                    println!("{report}");
                    println!(
                        "determinism: {} ({} linearizations, {} distinct outcomes)",
                        if d.deterministic { "deterministic" } else { "nondeterministic" },
                        d.linearizations,
                        d.distinct_outcomes
                    );
                    if let Some((a, b)) = &d.witness {
                        println!("witness order {:?}: {}", a.order, a.state);
                        println!("witness order {:?}: {}", b.order, b.state);
                    }
                    if safe && !d.deterministic {
                        return Ok(ExitCode::from(1));
                    }
                }
                Err(EcsError::TooManyLinearizations { limit, .. }) => {
                    println!("{report}");
                    println!("determinism: not checked (more than {limit} linearizations)");
                }
                Err(e) => return Err(e),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Categories => {
            let mut failed = false;
            for s in mutation_category_suite() {
                let out = render_frames(&s.run_reference(s.frames)?);
                let ok = s.expected_output.as_deref() == Some(out.as_str());
                failed |= !ok;
                println!("{}: {}", s.name, if ok { "ok" } else { "MISMATCH" });
                print!("{out}");
            }
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Fuzz { instances, max_invocations, seed } => {
            let summary = fuzz(instances, max_invocations, seed)?;
            println!("{summary}");
            Ok(if summary.ok() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
