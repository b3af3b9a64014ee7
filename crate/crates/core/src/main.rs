//! Command-line front end: validate configs, plan single actions, replay
//! prediction runs, and drive the experiment suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use aixilab::config;
use aixilab::harness;
use aixilab::predictor::run_prediction_on_stream;
use aixilab::report::{fmt_f64, Table};
use aixilab::{
    sample_stream, select_action, validate_env, Env, Error, HistoryTape, Mixture, OutputFormat,
    PredictorPolicy, Result, RunMeta,
};

#[derive(Parser)]
#[command(
    name = "aixilab",
    version,
    about = "Bayes mixtures over finite model classes, loss-minimizing prediction, and finite-horizon expectimax planning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that every section of a config file builds and validates.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Choose one action from an empty history and write an audit table.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Replay seeded prediction runs, one loss ledger per seed.
    Predict {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run a configured experiment suite and print its verdicts.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Validate { config } => cmd_validate(&config),
        Cmd::Plan { config, out, format } => cmd_plan(&config, &out, format),
        Cmd::Predict { config, seed, out, format } => cmd_predict(&config, seed, &out, format),
        Cmd::Experiment { config, seed, out, format } => {
            cmd_experiment(&config, seed, &out, format)
        }
    }
}

fn cmd_validate(path: &Path) -> Result<bool> {
    let loaded = config::load(path)?;
    let file = &loaded.file;
    let mut checked = 0usize;
    if let Some(section) = &file.environment {
        let env = section.build()?;
        validate_env(&env, 3)?;
        println!(
            "environment ok: {} actions, {} percepts",
            env.spaces().actions.size(),
            env.spaces().percept_count()
        );
        checked += 1;
    }
    if let Some(section) = &file.model_class {
        let mix = Mixture::new(section.build()?);
        validate_env(&mix, 2)?;
        println!("model class ok: {} members", mix.class().len());
        checked += 1;
    }
    let loss = match &file.loss {
        Some(section) => {
            let m = section.build()?;
            println!("loss ok: {} percepts x {} actions", m.n_percepts(), m.n_actions());
            checked += 1;
            Some(m)
        }
        None => None,
    };
    if let Some(section) = &file.planner {
        let pcfg = section.build(loss.as_ref())?;
        if let Some(env) = &file.environment {
            pcfg.validate(env.build()?.spaces())?;
        }
        println!("planner ok: lifetime {} cycles", section.cycles);
        checked += 1;
    }
    if let Some(section) = &file.experiment {
        harness::check_experiment_section(section)?;
        println!("experiment ok: kind {}", section.kind);
        checked += 1;
    }
    if checked == 0 {
        return Err(Error::Config("nothing to validate: no sections present".into()));
    }
    println!("config {} valid ({checked} sections)", &loaded.sha256[..12]);
    Ok(true)
}

fn cmd_plan(path: &Path, out: &Path, format: OutputFormat) -> Result<bool> {
    let loaded = config::load(path)?;
    let file = &loaded.file;
    let section = file
        .planner
        .as_ref()
        .ok_or_else(|| Error::Config("plan needs a [planner] section".into()))?;
    let loss = file.loss.as_ref().map(|l| l.build()).transpose()?;
    let pcfg = section.build(loss.as_ref())?;
    let started = Instant::now();
    // a model class plans under the mixture; a bare environment under itself
    let result = if let Some(mc) = &file.model_class {
        let mix = Mixture::new(mc.build()?);
        let tape = HistoryTape::new(mix.spaces().clone());
        select_action(&mix, &tape, &pcfg, 1)?
    } else if let Some(env) = &file.environment {
        let env = env.build()?;
        let tape = HistoryTape::new(env.spaces().clone());
        select_action(&env, &tape, &pcfg, 1)?
    } else {
        return Err(Error::Config(
            "plan needs an [environment] or [model_class] section".into(),
        ));
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let meta = RunMeta::new(out, format, loaded.sha256.clone());
    let mut audit = Table::new("plan_audit", &["action", "value", "chosen", "nodes", "wall_ms"]);
    for (i, v) in result.root_values.iter().enumerate() {
        audit.push(vec![
            i.to_string(),
            fmt_f64(*v),
            (i == result.action.0).to_string(),
            result.nodes.to_string(),
            format!("{wall_ms:.3}"),
        ]);
    }
    let written = audit.write(&meta)?;
    println!(
        "chosen action {} with expected loss {}",
        result.action,
        fmt_f64(result.value)
    );
    println!("audit written to {}", written.display());
    Ok(true)
}

fn cmd_predict(
    path: &Path,
    cli_seeds: Option<Vec<u64>>,
    out: &Path,
    format: OutputFormat,
) -> Result<bool> {
    let loaded = config::load(path)?;
    let file = &loaded.file;
    let truth = file
        .environment
        .as_ref()
        .ok_or_else(|| Error::Config("predict needs an [environment] section".into()))?
        .build()?;
    let loss = file
        .loss
        .as_ref()
        .ok_or_else(|| Error::Config("predict needs a [loss] section".into()))?
        .build()?;
    let cycles = file
        .experiment
        .as_ref()
        .and_then(|e| e.cycles)
        .or_else(|| file.planner.as_ref().map(|p| p.cycles))
        .unwrap_or(100);
    let seeds = match &file.experiment {
        Some(e) => e.resolve_seeds(cli_seeds),
        None => cli_seeds,
    }
    .unwrap_or_else(|| vec![0]);

    let meta = RunMeta::new(out, format, loaded.sha256.clone());
    let base_columns = ["cycle", "action", "percept", "incurred_loss", "cumulative_loss"];
    let mut files = Vec::new();
    match &file.model_class {
        Some(mc) => {
            let policy = PredictorPolicy::new(Mixture::new(mc.build()?), loss)?;
            let mut columns: Vec<String> =
                base_columns.iter().map(|c| c.to_string()).collect();
            columns.extend((0..policy.rho().class().len()).map(|i| format!("w_{i}")));
            let refs: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
            for &seed in &seeds {
                let stream = sample_stream(&truth, cycles, seed)?;
                let mut table = Table::new(format!("predict_seed_{seed:04}"), &refs);
                run_prediction_on_stream(&policy, &stream, |r| {
                    let mut row = vec![
                        r.cycle.to_string(),
                        r.action.to_string(),
                        r.percept.to_string(),
                        fmt_f64(r.loss),
                        fmt_f64(r.cumulative),
                    ];
                    row.extend(r.rho_ctx.weights().iter().map(|w| fmt_f64(*w)));
                    table.push(row);
                })?;
                files.push(table.write(&meta)?);
            }
        }
        None => {
            let policy = PredictorPolicy::new(truth.clone(), loss)?;
            for &seed in &seeds {
                let stream = sample_stream(&truth, cycles, seed)?;
                let mut table = Table::new(format!("predict_seed_{seed:04}"), &base_columns);
                run_prediction_on_stream(&policy, &stream, |r| {
                    table.push(vec![
                        r.cycle.to_string(),
                        r.action.to_string(),
                        r.percept.to_string(),
                        fmt_f64(r.loss),
                        fmt_f64(r.cumulative),
                    ]);
                })?;
                files.push(table.write(&meta)?);
            }
        }
    }
    println!("{} ledgers written to {}", files.len(), out.display());
    Ok(true)
}

fn cmd_experiment(
    path: &Path,
    cli_seeds: Option<Vec<u64>>,
    out: &Path,
    format: OutputFormat,
) -> Result<bool> {
    let loaded = config::load(path)?;
    let report = harness::run_from_config(&loaded, cli_seeds, out, format)?;
    for label in &report.labels {
        println!("note: {label}");
    }
    for v in &report.verdicts {
        println!("{} {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("{} files written to {}", report.files.len(), out.display());
    Ok(report.all_pass())
}
