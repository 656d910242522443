//! Command-line entry point: run a scenario, validate the built-in suites,
//! or inspect the derived geometry of a configuration.
//!
//! Exit codes: 0 success, 1 oracle failure, 2 configuration error,
//! 3 numerical failure.

use clap::{Parser, Subcommand};
use enclosure::config::Scenario;
use enclosure::pipeline::{run_scenario, validate_suite, write_artifacts, ValidateLevel};
use enclosure::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "enclose",
    about = "Locate a penetrable obstacle buried in the lower layer of a \
             two-layered medium from time-domain boundary data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario end to end and write its artifacts
    Run { config: PathBuf },
    /// Run a built-in validation suite ("fast" or "full")
    Validate { level: String },
    /// Print the derived geometry of a configuration
    Geometry {
        config: PathBuf,
        /// Print only; do not write geometry.json to the output directory
        #[arg(long)]
        dry_run: bool,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch() -> Result<ExitCode, Error> {
    match Cli::parse().cmd {
        Cmd::Run { config } => {
            let scenario = Scenario::from_path(&config)?;
            let out = run_scenario(&scenario)?;
            write_artifacts(&scenario, &out)?;
            println!("config_hash      {}", scenario.config_hash);
            println!("l(D,B) true      {:.6}", out.summary.l_db_true);
            println!("l(D,B) estimate  {:.6}", out.summary.l_db_est);
            println!("relative error   {:.4}", out.summary.relative_error);
            println!("sign class       {}", out.summary.sign_class);
            println!(
                "oracles          {}/{} passed",
                out.summary.oracles_passed, out.summary.oracles_total
            );
            println!("artifacts        {}", scenario.output_dir.display());
            if out.summary.oracles_passed < out.summary.oracles_total {
                for r in out.reports.iter().filter(|r| !r.pass) {
                    eprintln!("FAIL {}", r.to_json_line());
                }
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { level } => {
            let level: ValidateLevel = level.parse()?;
            let reports = validate_suite(level)?;
            let mut failed = 0usize;
            for r in &reports {
                let status = if r.pass { "PASS" } else { "FAIL" };
                println!("{status} {}", r.to_json_line());
                failed += usize::from(!r.pass);
            }
            println!("{} checks, {} failed", reports.len(), failed);
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Geometry { config, dry_run } => {
            let scenario = Scenario::from_path(&config)?;
            let d = &scenario.distances;
            let geom = serde_json::json!({
                "config_hash": scenario.config_hash,
                "l_db": d.l_db,
                "l_dp": d.l_dp,
                "x0": [d.x0.x1, d.x0.x2, d.x0.x3],
                "y0": [d.y0.x1, d.y0.x2, d.y0.x3],
                "refraction_point": d.z0,
                "threshold_2l": 2.0 * d.l_db,
                "t_window": scenario.t_window,
                "t_total": scenario.t_total,
            });
            println!("l(D,B)              {:.9}", d.l_db);
            println!("l(D,p)              {:.9}", d.l_dp);
            println!("refraction point z' ({:.9}, {:.9})", d.z0[0], d.z0[1]);
            println!("threshold 2 l(D,B)  {:.9}", 2.0 * d.l_db);
            println!("window T            {:.9}", scenario.t_window);
            if !dry_run {
                std::fs::create_dir_all(&scenario.output_dir)?;
                let path = scenario.output_dir.join("geometry.json");
                std::fs::write(&path, format!("{geom:#}\n"))?;
                println!("wrote               {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
