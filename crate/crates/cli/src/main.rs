use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use semalloc_cli::experiments::{self, plan_type};
use semalloc_cli::grid::Grid;
use semalloc_cli::{Usage, THREADS_ENV};
use semalloc_core::baselines::{solve_evf, solve_random, RandomSchemeConfig, RandomSummary};
use semalloc_core::ingest::{load_problem, to_json};
use semalloc_core::solvers::{solve_dip_with, DEFAULT_NODE_LIMIT};
use semalloc_core::{solve_sip, DipInstance, ProblemInstance, Solution, SolverConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "semalloc",
    version,
    about = "Stochastic subscription provisioning for semantic-data transmissions"
)]
struct Cli {
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Sip,
    Dip,
    Evf,
    Random,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    node_limit: Option<u64>,
}

impl SolveArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            node_limit: self.node_limit.unwrap_or(DEFAULT_NODE_LIMIT),
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem with one scheme and write the solution JSON.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "sip")]
        scheme: Scheme,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Scenario whose demand the deterministic scheme treats as known.
        #[arg(long)]
        scenario: Option<usize>,
        #[command(flatten)]
        solver: SolveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary P(λ₁) (with P(λ₂) = 1 − P(λ₁)) and re-solve at each point.
    SweepProbability {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "0:1:0.1")]
        grid: Grid,
        #[command(flatten)]
        solver: SolveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage costs for 0..=max bundles on one (vsp, device) entry.
    SweepBundles {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 0)]
        vsp: usize,
        #[arg(long, default_value_t = 0)]
        device: usize,
        /// Defaults to the solver's bundle bound plus two.
        #[arg(long)]
        max: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scale on-demand pricing and compare SIP, EVF and random totals.
    Compare {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "0.5,1,1.5,2,3")]
        grid: Grid,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        solver: SolveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-device transmission energy with and without semantic extraction.
    EnergyReport {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the similarity tensor of a problem.
    Similarity {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(path: &Path) -> Result<ProblemInstance> {
    load_problem(path).with_context(|| format!("loading {}", path.display()))
}

fn print_summary(to: &mut dyn Write, scheme: &str, solution: &Solution) -> io::Result<()> {
    let c = &solution.cost;
    writeln!(to, "scheme              {scheme}")?;
    writeln!(to, "membership_total    {}", c.membership_total)?;
    writeln!(to, "reservation_total   {}", c.reservation_total)?;
    writeln!(to, "expected_on_demand  {}", c.expected_on_demand)?;
    writeln!(to, "total               {}", c.total)?;
    for (w, row) in solution.plan.bundles.iter().enumerate() {
        writeln!(to, "vsp {w} bundles       {row:?}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RandomReport<'a> {
    summary: &'a RandomSummary,
    best: &'a Solution,
}

fn solve(
    problem: &Path,
    scheme: Scheme,
    random: RandomSchemeConfig,
    scenario: Option<usize>,
    config: SolverConfig,
    out: Option<&Path>,
) -> Result<()> {
    let instance = load(problem)?;
    let (name, solution, json) = match scheme {
        Scheme::Sip => {
            let s = solve_sip(&instance, &config)?;
            let j = to_json(&s);
            ("sip", s, j)
        }
        Scheme::Evf => {
            let s = solve_evf(&instance)?;
            let j = to_json(&s);
            ("evf", s, j)
        }
        Scheme::Dip => {
            let s = match (scenario, instance.num_scenarios()) {
                (Some(s), n) if s < n => s,
                (Some(s), n) => {
                    return Err(Usage(format!("--scenario {s} out of range ({n} scenarios)")).into())
                }
                (None, 1) => 0,
                (None, n) => {
                    return Err(Usage(format!("problem has {n} scenarios; pick one with --scenario")).into())
                }
            };
            let sol = solve_dip_with(&DipInstance::from_scenario(&instance, s), &config)?;
            let j = to_json(&sol);
            ("dip", sol, j)
        }
        Scheme::Random => {
            let outcome = solve_random(&instance, &random)?;
            let best = outcome.solutions[outcome.summary.best_sample].clone();
            let j = to_json(&RandomReport {
                summary: &outcome.summary,
                best: &best,
            });
            ("random", best, j)
        }
    };
    match out {
        Some(path) => {
            std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
            print_summary(&mut io::stdout().lock(), name, &solution)?;
        }
        None => {
            io::stdout().lock().write_all(json.as_bytes())?;
            print_summary(&mut io::stderr().lock(), name, &solution)?;
        }
    }
    if let Scheme::Sip = scheme {
        for w in 0..instance.num_vsps() {
            log_line(
                &format!("vsp {w} plan: {}", plan_type(&solution, &instance, w)),
                out.is_none(),
            );
        }
    }
    Ok(())
}

fn log_line(line: &str, to_stderr: bool) {
    if to_stderr {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            problem,
            scheme,
            seed,
            samples,
            scenario,
            solver,
            out,
        } => solve(
            &problem,
            scheme,
            RandomSchemeConfig { seed, samples },
            scenario,
            solver.config(),
            out.as_deref(),
        ),
        Command::SweepProbability {
            problem,
            grid,
            solver,
            out,
        } => {
            grid.check_probabilities().map_err(|e| Usage(e.to_string()))?;
            let instance = load(&problem)?;
            let rows = experiments::sweep_probability(&instance, grid.points(), &solver.config())?;
            experiments::write_probability_csv(&rows, instance.num_vsps(), output(out.as_deref())?)
        }
        Command::SweepBundles {
            problem,
            vsp,
            device,
            max,
            out,
        } => {
            let instance = load(&problem)?;
            let (points, argmin) = experiments::sweep_bundles(&instance, vsp, device, max)?;
            experiments::write_bundles_csv(&points, argmin, output(out.as_deref())?)
        }
        Command::Compare {
            problem,
            grid,
            seed,
            samples,
            solver,
            out,
        } => {
            grid.check_positive().map_err(|e| Usage(e.to_string()))?;
            if samples < 1 {
                return Err(Usage("--samples must be >= 1".into()).into());
            }
            let instance = load(&problem)?;
            let rows = experiments::compare(
                &instance,
                grid.points(),
                &RandomSchemeConfig { seed, samples },
                &solver.config(),
            )?;
            experiments::write_compare_csv(&rows, output(out.as_deref())?)
        }
        Command::EnergyReport { problem, out } => {
            let instance = load(&problem)?;
            let (rows, overall) = experiments::energy_report(&instance)?;
            experiments::write_energy_csv(&rows, overall, output(out.as_deref())?)
        }
        Command::Similarity { problem, out } => {
            let instance = load(&problem)?;
            experiments::write_similarity_csv(&instance, output(out.as_deref())?)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let usage = err.downcast_ref::<Usage>().is_some();
            let message = format!("{err:#}");
            if json_errors {
                let kind = if usage { "usage" } else { "error" };
                eprintln!("{}", serde_json::json!({ "error": message, "kind": kind }));
            } else {
                eprintln!("error: {message}");
            }
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
