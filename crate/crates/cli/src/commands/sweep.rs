use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use nll_core::analysis::config_hash;
use nll_core::seeding::derive_seed;
use serde_json::{json, Value};

use crate::commands::simulate::execute;
use crate::config::{parse, read_json, Plan, SimulateConfig, SweepConfig};
use crate::output::{self, csv_writer, write_json, RunManifest};
use crate::{config_error, CliError, Classify};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON file with a `base` simulate config and a `grid`.
    pub config: PathBuf,
    /// Override the number of trials in every cell.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// One grid cell: its axis values and effective config.
#[derive(Debug, Clone)]
pub struct Cell {
    pub epsilon: Option<f64>,
    pub decision: Option<Value>,
    pub prior: Option<Value>,
    pub config: Value,
}

fn axis<T: Clone>(values: &Option<Vec<T>>) -> Result<Vec<Option<T>>, CliError> {
    match values {
        None => Ok(vec![None]),
        Some(v) if v.is_empty() => Err(config_error("empty grid axis")),
        Some(v) => Ok(v.iter().cloned().map(Some).collect()),
    }
}

/// Cartesian product of the grid axes applied to the base config.
pub fn expand(sweep: &SweepConfig, trials: Option<u64>) -> Result<Vec<Cell>, CliError> {
    let g = &sweep.grid;
    if g.epsilon.is_none() && g.decision.is_none() && g.prior.is_none() {
        return Err(config_error("empty grid: give at least one of epsilon, decision, prior"));
    }
    if !sweep.base.is_object() {
        return Err(config_error("sweep `base` must be a JSON object"));
    }
    let mut cells = Vec::new();
    for epsilon in axis(&g.epsilon)? {
        for decision in axis(&g.decision)? {
            for prior in axis(&g.prior)? {
                let mut config = sweep.base.clone();
                let obj = config.as_object_mut().expect("checked above");
                if let Some(e) = epsilon {
                    let mut binary = json!({"epsilon": e});
                    if let Some(mu) = obj.get("model").and_then(|m| m.pointer("/binary_symmetric/mu")) {
                        binary["mu"] = mu.clone();
                    }
                    obj.remove("cyclic");
                    obj.remove("nstate");
                    obj.insert("model".into(), json!({"binary_symmetric": binary}));
                }
                if let Some(d) = &decision {
                    obj.insert("decision".into(), d.clone());
                }
                if let Some(p) = &prior {
                    obj.insert("prior".into(), p.clone());
                }
                if let Some(t) = trials {
                    obj.insert("trials".into(), json!(t));
                }
                cells.push(Cell {
                    epsilon,
                    decision: decision.clone(),
                    prior,
                    config,
                });
            }
        }
    }
    Ok(cells)
}

/// A cell's seed depends on the master seed and the cell's content, never
/// on its position in the grid.
pub fn cell_seed(master: u64, hash: &str) -> u64 {
    derive_seed(master, u64::from_str_radix(&hash[..16], 16).expect("hex digest"))
}

fn compact(v: &Option<Value>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

pub fn run(args: &SweepArgs, seed: u64) -> Result<(), CliError> {
    let start = Instant::now();
    let raw = read_json(&args.config)?;
    let sweep: SweepConfig = parse(&raw)?;
    let cells = expand(&sweep, args.trials)?;
    // validate every cell before running any
    let plans = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| -> Result<(SimulateConfig, Plan), CliError> {
            let config: SimulateConfig = parse(&cell.config)
                .map_err(|e| config_error(format!("cell {i}: {e}")))?;
            let plan = config.plan().map_err(|e| config_error(format!("cell {i}: {e}")))?;
            Ok((config, plan))
        })
        .collect::<Result<Vec<_>, _>>()?;

    output::create_dir(&args.out)?;
    let mut index = csv_writer(&args.out.join("index.csv"))?;
    index
        .write_record([
            "cell", "dir", "config_hash", "seed", "epsilon", "decision", "prior", "checkpoint", "p_correct", "ci_low",
            "ci_high",
        ])
        .or_runtime()?;
    let mut outputs = vec!["index.csv".to_string()];
    for (i, (cell, (config, plan))) in cells.iter().zip(&plans).enumerate() {
        let name = format!("cell_{i:04}");
        let dir = args.out.join(&name);
        output::create_dir(&dir)?;
        let hash = config_hash(&cell.config);
        let cell_seed = cell_seed(seed, &hash);
        write_json(&dir.join("config.json"), &cell.config)?;
        let summary = execute(config, plan, cell_seed, &hash, &dir)?;
        outputs.push(format!("{name}/config.json"));
        outputs.extend(summary.outputs.iter().map(|o| format!("{name}/{o}")));
        index
            .write_record([
                i.to_string(),
                name.clone(),
                hash,
                cell_seed.to_string(),
                cell.epsilon.map(|e| e.to_string()).unwrap_or_default(),
                compact(&cell.decision),
                compact(&cell.prior),
                summary.final_checkpoint.to_string(),
                summary.p_correct.estimate.to_string(),
                summary.p_correct.ci_low.to_string(),
                summary.p_correct.ci_high.to_string(),
            ])
            .or_runtime()?;
        eprintln!("sweep: {name} P(correct) = {:.4}", summary.p_correct.estimate);
    }
    index.flush().or_runtime()?;

    let mut manifest = RunManifest::new("sweep", seed);
    manifest.config_path = Some(args.config.display().to_string());
    manifest.config_hash = Some(config_hash(&raw));
    manifest.config = Some(raw);
    if let Some(t) = args.trials {
        manifest.overrides.insert("trials".into(), json!(t));
    }
    manifest.outputs = outputs;
    manifest.write(&args.out)?;
    eprintln!("sweep: {} cells, {:.2}s", cells.len(), start.elapsed().as_secs_f64());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(grid: Value) -> SweepConfig {
        parse(&json!({
            "base": {"model": {"binary_symmetric": {"epsilon": 0.2, "mu": 0.4}}, "horizon": 20, "trials": 5},
            "grid": grid
        }))
        .unwrap()
    }

    #[test]
    fn cardinality_and_overrides() {
        let s = sweep(json!({
            "epsilon": [0.05, 0.1, 0.2, 0.3],
            "decision": ["probability_matching", "bayes_threshold"]
        }));
        let cells = expand(&s, Some(7)).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[3].config["trials"], json!(7));
        assert_eq!(cells[3].config["model"]["binary_symmetric"]["mu"], json!(0.4));
        assert_eq!(cells[3].config["decision"], json!("bayes_threshold"));
        for c in &cells {
            let config: SimulateConfig = parse(&c.config).unwrap();
            config.plan().unwrap();
        }
    }

    #[test]
    fn empty_grids_rejected() {
        assert_eq!(expand(&sweep(json!({})), None).unwrap_err().exit_code(), 2);
        assert_eq!(expand(&sweep(json!({"epsilon": []})), None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn seeds_follow_content_not_position() {
        let a = expand(&sweep(json!({"epsilon": [0.1, 0.3]})), None).unwrap();
        let b = expand(&sweep(json!({"epsilon": [0.3, 0.1]})), None).unwrap();
        let seed_of = |c: &Cell| cell_seed(42, &config_hash(&c.config));
        assert_eq!(seed_of(&a[0]), seed_of(&b[1]));
        assert_ne!(seed_of(&a[0]), seed_of(&a[1]));
    }
}
