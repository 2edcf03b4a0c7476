use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use nll_core::analysis::config_hash;
use nll_core::urn::DriftClass;
use nll_core::{build_urn_function, drift_sign_scan, find_fixed_points, find_plateaus, Error, State, UrnFunction};
use serde_json::json;

use crate::config::{parse, read_json, StateChoice, UrnConfig, UrnSpec};
use crate::output::{self, csv_writer, write_json, RunManifest};
use crate::{config_error, CliError, Classify};

/// Grid of the fixed-point and plateau searches on `[0,1]`.
const SEARCH_GRID: usize = 10_000;
const SEARCH_TOL: f64 = 1e-10;

#[derive(Debug, Args)]
pub struct UrnArgs {
    /// JSON config file.
    pub config: PathBuf,
    /// Conditioning state, 0 or 1; overrides the config.
    #[arg(long)]
    pub state: Option<StateChoice>,
    /// Number of interior grid points of the table and drift scan.
    #[arg(long, default_value_t = 99)]
    pub grid: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn build(config: &UrnConfig) -> Result<UrnFunction, CliError> {
    match (&config.urn, &config.model) {
        (Some(_), Some(_)) => Err(config_error("give either `urn` or `model`, not both")),
        (None, None) => Err(config_error("give either `urn` or `model`")),
        (Some(UrnSpec::Identity), None) => Ok(UrnFunction::identity()),
        (Some(UrnSpec::Constant(v)), None) => UrnFunction::constant(*v).or_config(),
        (None, Some(model)) => {
            let state = match config.state {
                Some(StateChoice::Fixed(i)) => State::from_index(i),
                _ => None,
            }
            .ok_or_else(|| config_error("an urn function needs a fixed state, 0 or 1"))?;
            let prior = config.prior.resolve(Some(model)).or_config()?;
            build_urn_function(model, &prior, &config.decision, state).map_err(|e| match e {
                Error::NotSizeInvariant => config_error(
                    "this prior depends on the counts, not only their proportion, so it has no urn function",
                ),
                other => CliError::Config(other.into()),
            })
        }
    }
}

pub fn run(args: &UrnArgs, seed: u64) -> Result<(), CliError> {
    let start = Instant::now();
    let mut raw = read_json(&args.config)?;
    let mut manifest = RunManifest::new("urn", seed);
    if let Some(state) = args.state {
        raw["state"] = json!(state);
        manifest.overrides.insert("state".into(), json!(state));
    }
    manifest.overrides.insert("grid".into(), json!(args.grid));
    let config: UrnConfig = parse(&raw)?;
    if args.grid < 3 {
        return Err(config_error("--grid must be at least 3"));
    }
    let f = build(&config)?;

    let scan = drift_sign_scan(&f, args.grid).or_runtime()?;
    let fixed = find_fixed_points(&f, SEARCH_GRID, SEARCH_TOL).or_runtime()?;
    let plateaus = find_plateaus(&f, SEARCH_GRID, SEARCH_TOL).or_runtime()?;

    output::create_dir(&args.out)?;
    let mut w = csv_writer(&args.out.join("urn_table.csv"))?;
    w.write_record(["x", "f", "drift"]).or_runtime()?;
    for &(x, drift) in &scan.points {
        w.write_record([x.to_string(), f.eval(x).to_string(), drift.to_string()])
            .or_runtime()?;
    }
    w.flush().or_runtime()?;

    let report = json!({
        "label": f.label(),
        "state": f.state().map(|s| s.index()),
        "grid": args.grid,
        "drift": {
            "class": scan.class,
            "min_margin": scan.min_margin,
            "min_margin_x": scan.min_margin_x,
            "first_above": scan.first_above,
            "first_below": scan.first_below,
        },
        "fixed_points": fixed,
        "plateaus": plateaus,
        "degenerate_identity": fixed.degenerate_identity,
    });
    write_json(&args.out.join("fixed_points.json"), &report)?;

    manifest.config_path = Some(args.config.display().to_string());
    manifest.config_hash = Some(config_hash(&raw));
    manifest.config = Some(raw);
    manifest.outputs = vec!["urn_table.csv".into(), "fixed_points.json".into()];
    manifest.write(&args.out)?;
    let class = match scan.class {
        DriftClass::AllAbove => "all-above",
        DriftClass::AllBelow => "all-below",
        DriftClass::Mixed => "mixed",
    };
    eprintln!(
        "urn: {class}, {} interior crossings, {:.2}s",
        fixed.interior().count(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
