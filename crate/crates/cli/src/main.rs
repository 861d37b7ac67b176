use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inband::analysis::{bianchi_fixed_point, false_positive_ratio, stationary_alarm_prob};
use inband::harness::{
    reproduce, run_replications, write_aggregate_csv, write_runs_csv, Aggregate, ReproduceOptions,
    ScenarioConfig,
};
use inband::mac::MacParams;
use inband::Error;

#[derive(Parser)]
#[command(
    name = "inband",
    version,
    about = "In-band pairing simulator and analysis toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary alarm probability and expected false positives.
    Analyze {
        #[arg(long = "p-ch")]
        p_ch: f64,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        k: f64,
    },
    /// Saturated DCF operating point for n stations.
    Bianchi {
        #[arg(long)]
        n: u32,
    },
    /// Run the replications described by a scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed` from the file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerate a named figure or table as CSV.
    Reproduce {
        /// One of fig7, fig8, fig9, table2, table3, case_study.
        name: String,
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> inband::Result<()> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let sets = run_replications(&cfg)?;
    std::fs::create_dir_all(out)?;
    let single = sets.len() == 1;
    for s in &sets {
        let name = if single {
            "runs.csv".to_string()
        } else {
            format!("runs_{}.csv", s.label.replace('=', ""))
        };
        write_runs_csv(&out.join(name), &s.runs)?;
    }
    let aggs: Vec<Aggregate> = sets.iter().map(|s| s.aggregate.clone()).collect();
    write_aggregate_csv(&out.join("aggregate.csv"), &aggs)?;
    for a in &aggs {
        eprintln!(
            "{}: {} of {} runs alarmed, rate {:.5} [{:.5}, {:.5}]",
            a.label, a.alarms, a.runs, a.rate, a.ci_low, a.ci_high
        );
    }
    Ok(())
}

fn run(cli: Cli) -> inband::Result<()> {
    match cli.command {
        Command::Analyze { p_ch, m, k } => {
            let pi = stationary_alarm_prob(p_ch, m)?;
            let fp = false_positive_ratio(k, p_ch, m)?;
            println!("p_ch,m,k,pi_m,p_fp");
            println!("{p_ch},{m},{k},{pi:.6e},{:.6e}", fp.clamp(0.0, 1.0));
        }
        Command::Bianchi { n } => {
            let op = bianchi_fixed_point(n, &MacParams::default())?;
            println!("n,tau,p,p_ch");
            println!("{n},{:.6},{:.6},{:.6}", op.tau, op.p_cond, op.p_ch);
        }
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out)?,
        Command::Reproduce {
            name,
            runs,
            seed,
            out,
        } => {
            let files = reproduce(
                &name,
                &ReproduceOptions {
                    runs,
                    base_seed: seed,
                    out,
                },
            )?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invariant(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
