use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coverage_core::analysis::{compare, coverage_report, eta_tilde_audit, ComparisonTable};
use coverage_core::control::{max_dwell_time, max_gain, ControllerConfig};
use coverage_core::engine::{validate_initial, Engine, RunOptions};
use coverage_core::output::{derived_bounds, remove_partial, svg, write_run};
use coverage_core::scenario::{load_config, preset, ScenarioConfig};

#[derive(Parser)]
#[command(name = "coverage", version, about = "Timer-based coverage control simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write events.csv, metrics.csv and meta.json.
    Run(RunArgs),
    /// Check a scenario's initial state and dwell-time condition without running.
    Validate(ValidateArgs),
    /// Run several scenarios and compare event counts and coverage.
    Compare(CompareArgs),
    /// Print the maximum dwell time and maximum gain for a timer controller.
    Bounds(BoundsArgs),
}

#[derive(Args, Clone)]
struct Source {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace every seed in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    metrics_dt: Option<f64>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => load_config(path)?,
            (None, None) => bail!("either --preset or --config is required"),
        };
        if let Some(seed) = self.seed {
            cfg.reseed(seed);
        }
        if let Some(t) = self.t_final {
            cfg.t_final = t;
        }
        if let Some(dt) = self.metrics_dt {
            cfg.metrics_dt = dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory; defaults to the scenario's output_dir or runs/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Run even if the initial state is not admissible.
    #[arg(long)]
    allow_inadmissible: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,
    /// Also fail when T2 exceeds the maximum dwell time.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Presets to compare.
    #[arg(
        long = "preset",
        default_values = ["comparison12_lloyd", "comparison12_selftrig", "comparison12_timer"]
    )]
    presets: Vec<String>,
    #[arg(long, default_value = "runs/compare")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    metrics_dt: Option<f64>,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    eta_tilde_max: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Number of agents.
    #[arg(long)]
    agents: Option<usize>,
    /// T2 at which to evaluate the maximum gain.
    #[arg(long)]
    t2: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Bounds(args) => cmd_bounds(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn default_out(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| {
        Path::new("runs").join(cfg.name.as_deref().unwrap_or("scenario"))
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let cfg = args.source.load()?;
    let scenario = cfg.resolve()?;
    let out = args.out.clone().unwrap_or_else(|| default_out(&cfg));
    let trace = Engine::new(&scenario)
        .run(RunOptions {
            allow_inadmissible: args.allow_inadmissible,
        })
        .context("simulation aborted")?;
    let files = write_run(&out, &cfg, &scenario, &trace, args.svg)
        .with_context(|| format!("writing results to {}", out.display()))?;
    let cov = coverage_report(&trace, scenario.coverage_nu);
    println!("controller      {}", trace.controller);
    println!("agents          {}", trace.agent_count);
    println!("events          {}", trace.events.len());
    println!("samples         {}", trace.samples.len());
    match cov.first_time_covered {
        Some(t) => println!("covered from    t = {t} (nu = {})", cov.nu),
        None => println!("covered from    never (nu = {})", cov.nu),
    }
    println!("final max |e|   {:e}", cov.final_max_error);
    if let Some(last) = trace.samples.last() {
        println!("final cost      {}", last.cost);
    }
    if let ControllerConfig::Timer(params) = &scenario.controller {
        let audit = eta_tilde_audit(&trace, params);
        println!(
            "max |eta_tilde| {} (bound {}, {} violations)",
            audit.max,
            audit.bound,
            audit.violations.len()
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let cfg = args.source.load()?;
    let scenario = cfg.resolve()?;
    let mut engine = Engine::new(&scenario);
    let (state, _) = engine.initial_state().context("building the initial state")?;
    let report = validate_initial(&state, &scenario);
    let bounds = derived_bounds(&scenario.controller, scenario.agent_count());
    let mut ok = report.is_ok();
    println!("{report}");
    if let (Some(bound), Some(t2), Some(holds)) =
        (bounds.max_dwell_time, bounds.t2, bounds.t2_satisfies_bound)
    {
        if holds {
            println!("dwell time: T2 = {t2} <= {bound}");
        } else {
            println!("dwell time: T2 = {t2} exceeds {bound}; the sample-and-hold bound is not guaranteed");
            ok &= !args.strict;
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let created = !args.out.exists();
    let mut written: Vec<PathBuf> = Vec::new();
    let result = compare_into(&args, &mut written);
    match result {
        Ok(table) => {
            print!("{}", table.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            for dir in &written {
                let _ = fs::remove_dir_all(dir);
            }
            remove_partial(&args.out, created, &[]);
            Err(err)
        }
    }
}

/// Runs every preset into its own subdirectory; `written` collects what must
/// be removed if a later step fails.
fn compare_into(args: &CompareArgs, written: &mut Vec<PathBuf>) -> Result<ComparisonTable> {
    let mut runs = Vec::new();
    for name in &args.presets {
        let source = Source {
            preset: Some(name.clone()),
            config: None,
            seed: args.seed,
            t_final: args.t_final,
            metrics_dt: args.metrics_dt,
        };
        let cfg = source.load()?;
        let scenario = cfg.resolve()?;
        let trace = Engine::new(&scenario)
            .run(RunOptions::default())
            .with_context(|| format!("running {name}"))?;
        let dir = args.out.join(name);
        let existed = dir.exists();
        write_run(&dir, &cfg, &scenario, &trace, args.svg)
            .with_context(|| format!("writing results to {}", dir.display()))?;
        if !existed {
            written.push(dir);
        }
        runs.push((name.clone(), trace));
    }
    let labelled: Vec<(String, &_)> = runs.iter().map(|(n, t)| (n.clone(), t)).collect();
    let nu = 0.5;
    let table = compare(&labelled, nu);
    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    let files = [
        ("comparison.json", json),
        ("comparison.txt", table.to_text()),
    ];
    for (name, text) in files {
        let path = args.out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    if args.svg {
        let path = args.out.join("counts.svg");
        fs::write(&path, svg::count_plot(&labelled))?;
        written.push(path);
    }
    Ok(table)
}

fn cmd_bounds(args: BoundsArgs) -> Result<ExitCode> {
    let cfg = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => load_config(path)?,
        (None, None) => preset("validation30")?,
    };
    let ControllerConfig::Timer(mut params) = cfg.controller else {
        bail!("bounds apply to the timer controller only");
    };
    let n = args.agents.unwrap_or(cfg.agent_count);
    if let Some(v) = args.k1 {
        params.k1 = v;
    }
    if let Some(v) = args.nu {
        params.nu = v;
    }
    if let Some(v) = args.epsilon {
        params.epsilon = v;
    }
    if let Some(v) = args.eta_tilde_max {
        params.eta_tilde_max = v;
    }
    if let Some(v) = args.lipschitz {
        params.lipschitz = v;
    }
    let errs = params.validate(n);
    if !errs.is_empty() {
        bail!("invalid parameters:\n  - {}", errs.join("\n  - "));
    }
    let t2 = args.t2.unwrap_or_else(|| {
        params
            .timers
            .all(n)
            .iter()
            .map(|t| t.t2)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let dwell = max_dwell_time(&params, n);
    let gain = max_gain(&params, t2, n);
    if args.json {
        let v = serde_json::json!({
            "agents": n,
            "max_dwell_time": dwell,
            "t2": t2,
            "t2_satisfies_bound": t2 <= dwell,
            "max_gain": gain,
            "k1": params.k1,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("max_dwell_time  {dwell}");
        println!("t2              {t2} ({})", if t2 <= dwell { "satisfies bound" } else { "exceeds bound" });
        println!("max_gain        {gain} (k1 = {})", params.k1);
    }
    Ok(ExitCode::SUCCESS)
}
