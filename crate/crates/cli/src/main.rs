use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use edgesim_core::config::{apply_override, parse_scalar};
use edgesim_core::experiment::{ledger_csv, run_experiment, seats_csv, ArchRun, Experiment};
use edgesim_core::metrics::{compare, metrics_csv, Comparison};
use edgesim_core::scenario::RunOptions;
use edgesim_core::{Architecture, ConfigError, RunError, ScenarioConfig, ScenarioReport};

#[derive(Parser)]
#[command(name = "edgesim", version, about = "Edge vs centralized reservation-system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Edge,
    Centralized,
    Both,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Edge => Architecture::Edge,
            ArchArg::Centralized => Architecture::Centralized,
            ArchArg::Both => Architecture::Both,
        }
    }
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario file; the shipped reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the architecture(s) to run.
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    /// Overrides one config value, as dotted.path=value. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Checks a scenario file and lists every diagnostic.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Runs a scenario and writes reports to the output directory.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also writes the event trace of each run.
        #[arg(long)]
        trace: bool,
    },
    /// Re-compares two existing report files.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        edge: PathBuf,
        /// Writes the comparison here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs both architectures over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// dotted.path=v1,v2,... (one comparison row per value)
        #[arg(long, value_name = "PATH=V1,V2,...")]
        param: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, ConfigError> {
    let mut table = match &args.config {
        Some(p) => ScenarioConfig::parse_table(&fs::read_to_string(p)?)?,
        None => ScenarioConfig::parse_table(edgesim_core::config::REFERENCE_SCENARIO)?,
    };
    for s in &args.set {
        let (path, value) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::UnknownPath(s.clone()))?;
        apply_override(&mut table, path, parse_scalar(value))?;
    }
    if let Some(seed) = args.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    let mut cfg = ScenarioConfig::from_table(table)?;
    if let Some(a) = args.arch {
        cfg.architecture = a.into();
    }
    Ok(cfg)
}

fn validate(args: &ScenarioArgs) -> Result<bool> {
    let cfg = load(args)?;
    let diags = cfg.validate();
    if diags.is_empty() {
        println!("ok {} (config {})", cfg.name, cfg.config_hash());
        return Ok(true);
    }
    for d in &diags {
        eprintln!("{d}");
    }
    Ok(false)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_run(dir: &Path, exp: &Experiment, run: &ArchRun) -> Result<()> {
    let r = &run.output.report;
    let stem = format!("{}.{}", r.scenario, r.architecture.as_str());
    write(&dir.join(format!("{stem}.report.txt")), r.to_text())?;
    write(&dir.join(format!("{stem}.audit.txt")), run.audit.to_string())?;
    write(&dir.join(format!("{stem}.seats.csv")), seats_csv(&exp.resolved, &run.output.audit))?;
    write(&dir.join(format!("{stem}.ledger.csv")), ledger_csv(&exp.resolved, &run.output.audit))?;
    if let Some(t) = &run.output.trace {
        write(&dir.join(format!("{stem}.trace.csv")), t)?;
    }
    Ok(())
}

fn run(args: &ScenarioArgs, out: &Path, trace: bool) -> Result<bool> {
    let cfg = load(args)?;
    let exp = run_experiment(&cfg, RunOptions { trace })?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for r in exp.runs() {
        write_run(out, &exp, r)?;
    }
    let reports: Vec<&ScenarioReport> = exp.runs().map(|r| &r.output.report).collect();
    write(
        &out.join(format!("{}.metrics.csv", cfg.name)),
        metrics_csv(&reports, exp.comparison.as_ref()),
    )?;
    if let Some(c) = &exp.comparison {
        write(&out.join(format!("{}.compare.txt", cfg.name)), c.to_text())?;
        print_comparison(c);
    }
    if exp.passed() {
        return Ok(true);
    }
    // Reruns with tracing so the violation can be inspected; runs are
    // deterministic, so the trace matches the audited run.
    let traced = if trace {
        exp
    } else {
        let t = run_experiment(&cfg, RunOptions { trace: true })?;
        for r in t.runs() {
            write_run(out, &t, r)?;
        }
        t
    };
    for r in traced.runs() {
        let stem = format!("{}.{}", cfg.name, r.output.report.architecture.as_str());
        for c in r.audit.failures() {
            eprintln!("invariant violated [{stem}] {}: {}", c.name, c.detail);
        }
        if !r.audit.passed() {
            eprintln!("trace: {}", out.join(format!("{stem}.trace.csv")).display());
        }
    }
    Ok(false)
}

fn print_comparison(c: &Comparison) {
    println!(
        "latency_reduction_pct={:.2} throughput_gain_pct={:.2} satisfaction_gain_pct={:.2}",
        c.latency_reduction_pct, c.throughput_gain_pct, c.satisfaction_gain_pct
    );
}

fn compare_files(baseline: &Path, edge: &Path, out: Option<&Path>) -> Result<bool> {
    let read = |p: &Path| -> Result<ScenarioReport> {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        ScenarioReport::from_text(&text).with_context(|| format!("parsing {}", p.display()))
    };
    let c = compare(&read(baseline)?, &read(edge)?)?;
    match out {
        Some(p) => write(p, c.to_text())?,
        None => print!("{}", c.to_text()),
    }
    Ok(true)
}

fn sweep(args: &ScenarioArgs, param: &str, out: &Path) -> Result<bool> {
    let (path, values) = param
        .split_once('=')
        .ok_or_else(|| anyhow!("--param expects PATH=V1,V2,..."))?;
    let values: Vec<&str> = values.split(',').filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("--param {path} has no values");
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut a = ScenarioArgs {
                config: args.config.clone(),
                seed: args.seed,
                arch: Some(ArchArg::Both),
                set: args.set.clone(),
            };
            a.set.push(format!("{path}={v}"));
            load(&a)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<Experiment, RunError>> = configs
        .par_iter()
        .map(|c| run_experiment(c, RunOptions::default()))
        .collect();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut csv = format!(
        "point,{path},latency_reduction_pct,response_time_reduction_pct,throughput_gain_pct,satisfaction_gain_pct,\
         centralized_mean_ms,edge_mean_ms,centralized_throughput_rps,edge_throughput_rps,\
         centralized_satisfaction,edge_satisfaction,audit\n"
    );
    let mut ok = true;
    for (i, (v, res)) in values.iter().zip(results).enumerate() {
        let exp = res?;
        let c = exp.comparison.as_ref().expect("sweep runs both architectures");
        let b = &exp.centralized.as_ref().expect("centralized run").output.report;
        let e = &exp.edge.as_ref().expect("edge run").output.report;
        let f = |x: Option<f64>| x.map(|x| format!("{x:.6}")).unwrap_or_else(|| "absent".into());
        let passed = exp.passed();
        ok &= passed;
        csv.push_str(&format!(
            "{i},{v},{:.4},{:.4},{:.4},{:.4},{},{},{:.4},{:.4},{},{},{}\n",
            c.latency_reduction_pct,
            c.response_time_reduction_pct,
            c.throughput_gain_pct,
            c.satisfaction_gain_pct,
            f(b.mean_latency_ms()),
            f(e.mean_latency_ms()),
            b.throughput_rps,
            e.throughput_rps,
            f(b.satisfaction),
            f(e.satisfaction),
            if passed { "pass" } else { "fail" }
        ));
    }
    let name = configs[0].name.clone();
    let file = out.join(format!("{name}.sweep.csv"));
    write(&file, &csv)?;
    print!("{csv}");
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { scenario } => validate(scenario),
        Command::Run { scenario, out, trace } => run(scenario, out, *trace),
        Command::Compare { baseline, edge, out } => compare_files(baseline, edge, out.as_deref()),
        Command::Sweep { scenario, param, out } => sweep(scenario, param, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
