use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use nll_core::analysis::{
    config_hash, estimate_learning, estimate_nstate_learning, Estimate, ExperimentResult, NStateResult,
};
use nll_core::seeding::derive_seed;
use nll_core::sim::{run_trial_nstate, simulate_with, AgentProcessConfig};
use serde_json::json;

use crate::config::{parse, read_json, Plan, SimulateConfig, StateChoice};
use crate::output::{self, csv_writer, opt, quantile_column, write_json, RunManifest};
use crate::{CliError, Classify};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config file.
    pub config: PathBuf,
    /// Override the number of trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Override the state: `draw`, or a state index.
    #[arg(long)]
    pub state: Option<StateChoice>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Headline numbers of one simulation, for sweep indices.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_checkpoint: u64,
    pub p_correct: Estimate,
    pub outputs: Vec<String>,
}

pub fn run(args: &SimulateArgs, seed: u64) -> Result<(), CliError> {
    let start = Instant::now();
    let mut raw = read_json(&args.config)?;
    let mut manifest = RunManifest::new("simulate", seed);
    if let Some(trials) = args.trials {
        raw["trials"] = json!(trials);
        manifest.overrides.insert("trials".into(), json!(trials));
    }
    if let Some(state) = args.state {
        raw["state"] = json!(state);
        manifest.overrides.insert("state".into(), json!(state));
    }
    let config: SimulateConfig = parse(&raw)?;
    let plan = config.plan()?;
    let hash = config_hash(&raw);

    output::create_dir(&args.out)?;
    let summary = execute(&config, &plan, seed, &hash, &args.out)?;

    manifest.config_path = Some(args.config.display().to_string());
    manifest.config_hash = Some(hash);
    manifest.config = Some(raw);
    manifest.outputs = summary.outputs;
    manifest.write(&args.out)?;
    eprintln!(
        "simulate: {} trials, P(correct) at agent {} = {:.4}, {:.2}s",
        config.trials,
        summary.final_checkpoint,
        summary.p_correct.estimate,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

/// Runs a validated plan and writes its result files into `dir`.
pub fn execute(
    config: &SimulateConfig,
    plan: &Plan,
    seed: u64,
    hash: &str,
    dir: &Path,
) -> Result<RunSummary, CliError> {
    let checkpoints = config.checkpoints();
    let run_id = &hash[..12];
    let mut outputs = vec!["result.json".to_string(), "result.csv".to_string()];
    let summary = match plan {
        Plan::Binary(process) => {
            let result =
                estimate_learning(process, config.trials, &checkpoints, seed, &config.options).or_runtime()?;
            write_json(&dir.join("result.json"), &result)?;
            write_binary_csv(&dir.join("result.csv"), &result, &config.options.quantile_levels)?;
            if config.save_trajectories > 0 {
                write_binary_trajectories(&dir.join("trajectories.csv"), process, config.save_trajectories, seed, run_id)?;
                outputs.push("trajectories.csv".into());
            }
            let last = result.p_correct.len() - 1;
            (result.checkpoints[last], result.p_correct[last])
        }
        Plan::NState {
            model,
            horizon,
            conditioning,
        } => {
            let result = estimate_nstate_learning(
                model,
                *horizon,
                config.trials,
                &checkpoints,
                seed,
                *conditioning,
                config.options.confidence,
                &config.options.quantile_levels,
            )
            .or_runtime()?;
            write_json(&dir.join("result.json"), &result)?;
            write_nstate_csv(&dir.join("result.csv"), &result, &config.options.quantile_levels)?;
            if config.save_trajectories > 0 {
                let path = dir.join("trajectories.csv");
                let mut w = csv_writer(&path)?;
                w.write_record(["run_id", "trial", "step", "omega", "action"]).or_runtime()?;
                for trial in 0..config.save_trajectories {
                    let traj = run_trial_nstate(model, *horizon, derive_seed(seed, trial), *conditioning).or_runtime()?;
                    for (step, a) in traj.actions.iter().enumerate() {
                        w.write_record([
                            run_id.to_string(),
                            trial.to_string(),
                            step.to_string(),
                            traj.omega.to_string(),
                            a.to_string(),
                        ])
                        .or_runtime()?;
                    }
                }
                w.flush().or_runtime()?;
                outputs.push("trajectories.csv".into());
            }
            let last = result.checkpoints.last().expect("at least one checkpoint");
            (last.checkpoint, last.p_correct)
        }
    };
    Ok(RunSummary {
        final_checkpoint: summary.0,
        p_correct: summary.1,
        outputs,
    })
}

fn estimate_cells(e: Option<&Estimate>) -> [String; 4] {
    match e {
        Some(e) => [
            e.successes.to_string(),
            e.estimate.to_string(),
            e.ci_low.to_string(),
            e.ci_high.to_string(),
        ],
        None => Default::default(),
    }
}

fn write_binary_csv(path: &Path, result: &ExperimentResult, levels: &[f64]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["checkpoint", "conditioning", "trials", "successes", "p_correct", "ci_low", "ci_high"]
        .map(String::from)
        .to_vec();
    header.extend(levels.iter().map(|&l| quantile_column("x", l)));
    w.write_record(&header).or_runtime()?;
    for (c, cp) in result.checkpoints.iter().enumerate() {
        let mut row = vec![cp.to_string(), "all".into(), result.trials.to_string()];
        row.extend(estimate_cells(Some(&result.p_correct[c])));
        row.extend(levels.iter().map(|_| String::new()));
        w.write_record(&row).or_runtime()?;
        for cond in &result.conditional {
            let mut row = vec![cp.to_string(), cond.omega.index().to_string(), cond.trials.to_string()];
            row.extend(estimate_cells(cond.p_correct[c].as_ref()));
            let qs = &cond.x_quantiles[c];
            row.extend(levels.iter().map(|&l| opt(qs.iter().find(|q| q.level == l).map(|q| q.value))));
            w.write_record(&row).or_runtime()?;
        }
    }
    w.flush().or_runtime()
}

fn write_nstate_csv(path: &Path, result: &NStateResult, levels: &[f64]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["checkpoint", "conditioning", "trials", "successes", "p_correct", "ci_low", "ci_high"]
        .map(String::from)
        .to_vec();
    header.extend(levels.iter().map(|&l| quantile_column("correct_proportion", l)));
    w.write_record(&header).or_runtime()?;
    for cp in &result.checkpoints {
        let mut row = vec![cp.checkpoint.to_string(), "all".into(), result.trials.to_string()];
        row.extend(estimate_cells(Some(&cp.p_correct)));
        row.extend(cp.correct_proportion.iter().map(|q| q.value.to_string()));
        w.write_record(&row).or_runtime()?;
    }
    w.flush().or_runtime()
}

/// Full paths of the first `count` trials, on the same streams as the
/// experiment's trials.
fn write_binary_trajectories(
    path: &Path,
    process: &AgentProcessConfig,
    count: u64,
    seed: u64,
    run_id: &str,
) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "run_id", "trial", "step", "t", "omega", "model_index", "m", "k", "x", "prior", "signal", "posterior", "action",
    ])
    .or_runtime()?;
    for trial in 0..count {
        let mut rows = Vec::with_capacity(process.horizon as usize);
        let (omega, _) = simulate_with(process, derive_seed(seed, trial), |r| {
            rows.push([
                r.step.to_string(),
                r.t.to_string(),
                r.model_index.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                r.x.to_string(),
                r.prior.to_string(),
                r.signal.map(|s| s.to_string()).unwrap_or_default(),
                opt(r.posterior),
                r.action.to_string(),
            ])
        })
        .or_runtime()?;
        for [step, t, model_index, m, k, x, prior, signal, posterior, action] in rows {
            w.write_record([
                run_id.to_string(),
                trial.to_string(),
                step,
                t,
                omega.index().to_string(),
                model_index,
                m,
                k,
                x,
                prior,
                signal,
                posterior,
                action,
            ])
            .or_runtime()?;
        }
    }
    w.flush().or_runtime()
}

