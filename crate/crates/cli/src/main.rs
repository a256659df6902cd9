use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ensemble_core::estimates::{self, checkpoint, EstimatorKind, Hyperparams, TrainSpec};
use ensemble_core::experiment::{run_experiment, BoundaryDump};
use ensemble_core::heuristics::exclusive_select;
use ensemble_core::oracle::{dataset, learning, matching, resolution};
use toml::{Table, Value};

mod config;

#[derive(Parser)]
#[command(version, about = "Smart-factory ensemble experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-week experiment and write its artifacts.
    Run {
        /// Flat TOML file with scenario and experiment keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        weeks: Option<u32>,
        #[arg(long)]
        late_fraction: Option<f64>,
        /// Comma-separated policies per week, e.g. `rigid,ml,ml`.
        #[arg(long)]
        policy_schedule: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override any configuration key (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Info logging and a per-tick ensemble dump in `trace.txt`.
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate a saved estimator on the (day, offset) grid.
    Boundary {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the implementation against brute-force references.
    OracleCheck {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Resolution,
    Dataset,
    Selection,
    Learning,
    All,
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    seed: Option<u64>,
    weeks: Option<u32>,
    late_fraction: Option<f64>,
    policy_schedule: Option<String>,
    out: Option<PathBuf>,
    overrides: Vec<String>,
    verbose: bool,
) -> Result<()> {
    let mut table = match &config {
        Some(path) => config::read_table(path)?,
        None => Table::new(),
    };
    for o in &overrides {
        let (k, v) = config::parse_assignment(o)?;
        table.insert(k, v);
    }
    if let Some(s) = seed {
        table.insert("seed".into(), Value::Integer(s as i64));
    }
    if let Some(w) = weeks {
        table.insert("weeks".into(), Value::Integer(w.into()));
    }
    if let Some(f) = late_fraction {
        table.insert("late_fraction".into(), Value::Float(f));
    }
    if let Some(s) = policy_schedule {
        table.insert("policy_schedule".into(), Value::String(s));
    }
    if let Some(o) = out {
        table.insert(
            "out".into(),
            Value::String(o.to_string_lossy().into_owned()),
        );
    }
    if verbose {
        table.insert("trace".into(), Value::Boolean(true));
    }
    let cfg = config::experiment_from_table(table)?;
    if cfg.out_dir.is_none() {
        bail!("no output directory: pass --out or set `out` in the config");
    }

    let result = run_experiment(&cfg)?;
    for week in 1..=cfg.weeks {
        let (standbys, lateness) = result.week_means(week);
        println!(
            "week {week} ({}): {standbys:.2} standbys, lateness {lateness:.0} per shift-day",
            cfg.policy(week).as_str()
        );
    }
    for t in &result.trainings {
        println!(
            "training after week {}: {}",
            t.after_week,
            t.boundary.summary()
        );
    }
    let d = &result.diagnostics;
    if d.infeasible_selections > 0 {
        log::warn!(
            "{} ticks with infeasible standby selection",
            d.infeasible_selections
        );
    }
    if d.unauthorized_entries + d.cancel_conflicts + d.duplicate_calls > 0 {
        bail!(
            "contract violation: {} unauthorized entries, {} cancel conflicts, {} duplicate calls",
            d.unauthorized_entries,
            d.cancel_conflicts,
            d.duplicate_calls
        );
    }
    for path in &result.artifacts {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn boundary(checkpoint_path: PathBuf, out: PathBuf) -> Result<()> {
    let file = File::open(&checkpoint_path)
        .with_context(|| format!("opening {}", checkpoint_path.display()))?;
    let est =
        checkpoint::load(file).with_context(|| format!("loading {}", checkpoint_path.display()))?;
    let dump = BoundaryDump::from_estimator(&est)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    dump.write_csv(BufWriter::new(file))?;
    println!("{}", dump.summary());
    Ok(())
}

/// Runs one suite, returning a failure description per failed case.
fn oracle_suite(suite: Suite) -> Vec<String> {
    let mut failures = Vec::new();
    match suite {
        Suite::Resolution => {
            for seed in 0..50 {
                let diff = resolution::check_case(&resolution::random_case(seed, 8, 3));
                if !diff.is_empty() {
                    failures.push(format!("resolution seed {seed}: {}", diff.join("; ")));
                }
            }
        }
        Suite::Dataset => {
            for seed in 0..20 {
                let case = dataset::random_case(seed, 50);
                let oracle = dataset::nested_loop_dataset(&case.estimate, &case.trace);
                let n = dataset::mismatches(
                    &oracle,
                    &dataset::collected_rows(&case.estimate, &case.trace),
                );
                if n > 0 {
                    failures.push(format!("dataset seed {seed}: {n} mismatching rows"));
                }
            }
        }
        Suite::Selection => {
            let (mut feasible, mut solved) = (0, 0);
            for seed in 0..1000 {
                let p = matching::random_problem(seed, 10);
                let ok = matching::is_feasible(&p);
                feasible += ok as u32;
                if let Some(a) = exclusive_select(&p) {
                    let v = a.violations(&p);
                    if !v.is_empty() || !ok {
                        failures.push(format!("selection seed {seed}: invalid assignment {v:?}"));
                    }
                    solved += ok as u32;
                }
            }
            if (solved as f64) < 0.9 * feasible as f64 {
                failures.push(format!(
                    "selection: greedy solved {solved} of {feasible} feasible problems"
                ));
            }
        }
        Suite::Learning => {
            for seed in 0..100 {
                let (est, data) = learning::random_configuration(seed);
                let err = learning::gradient_relative_error(&est, &data, 1e-6);
                if err > 1e-4 {
                    failures.push(format!("gradient seed {seed}: relative error {err:e}"));
                }
            }
            let (data, _) = learning::separable_set(7, 200, 1.0);
            if learning::perceptron_passes(&data, 1000).is_none() {
                failures.push("separable set is not separable".into());
            }
            match estimates::train(
                &data,
                &TrainSpec::plain(EstimatorKind::Binary, 2),
                &Hyperparams::default(),
            ) {
                Ok((est, _)) if est.accuracy(&data) >= 0.95 => {}
                Ok((est, _)) => {
                    failures.push(format!("separable accuracy {}", est.accuracy(&data)))
                }
                Err(e) => failures.push(format!("training failed: {e}")),
            }
            let dev = learning::softmax_max_deviation(0..50);
            if dev > 1e-6 {
                failures.push(format!("softmax sums deviate by {dev:e}"));
            }
        }
        Suite::All => {
            for s in [
                Suite::Resolution,
                Suite::Dataset,
                Suite::Selection,
                Suite::Learning,
            ] {
                failures.extend(oracle_suite(s));
            }
        }
    }
    failures
}

fn oracle_check(suite: Suite) -> Result<()> {
    let failures = oracle_suite(suite);
    for f in &failures {
        eprintln!("{f}");
    }
    if !failures.is_empty() {
        bail!("{} oracle comparisons failed", failures.len());
    }
    println!("all oracle comparisons passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = matches!(cli.command, Command::Run { verbose: true, .. });
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose {
        "info"
    } else {
        "warn"
    }))
    .init();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            weeks,
            late_fraction,
            policy_schedule,
            out,
            overrides,
            verbose,
        } => run(
            config,
            seed,
            weeks,
            late_fraction,
            policy_schedule,
            out,
            overrides,
            verbose,
        ),
        Command::Boundary { checkpoint, out } => boundary(checkpoint, out),
        Command::OracleCheck { suite } => oracle_check(suite),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
