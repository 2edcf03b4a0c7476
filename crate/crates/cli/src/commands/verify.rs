use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use nll_core::verify::{run_suite, Suite, VerifyContext};
use serde_json::json;

use crate::output::{self, write_json, RunManifest};
use crate::{CliError, Classify};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// One of exact, urn, theorem1, theorem2, theorem3, nstate, all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Directory of pilot calibration files; missing ones are created.
    #[arg(long)]
    pub calibration_dir: Option<PathBuf>,
    /// Write `verify.json` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &VerifyArgs, seed: u64) -> Result<(), CliError> {
    let start = Instant::now();
    let suite: Suite = args.suite.parse().or_config()?;
    let mut ctx = VerifyContext::new(seed);
    if let Some(dir) = &args.calibration_dir {
        ctx.calibration_dir = dir.clone();
    }
    let reports = run_suite(suite, &ctx).or_runtime()?;
    for r in &reports {
        println!("{}", r.summary_line());
        for c in r.checks.iter().filter(|c| !c.passed) {
            println!("    failed check {}: {}", c.name, c.detail);
        }
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();

    if let Some(out) = &args.out {
        output::create_dir(out)?;
        let doc = json!({
            "suite": args.suite,
            "seed": seed,
            "passed": failed.is_empty(),
            "criteria": reports,
        });
        write_json(&out.join("verify.json"), &doc)?;
        let mut manifest = RunManifest::new("verify", seed);
        manifest.overrides.insert("suite".into(), json!(args.suite));
        manifest.outputs = vec!["verify.json".into()];
        manifest.write(out)?;
    }
    eprintln!("verify: {:.2}s", start.elapsed().as_secs_f64());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("criteria {}", failed.join(", "))))
    }
}
