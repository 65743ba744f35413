use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use avgpower::mc::McConfig;
use avgpower::procedure::DEFAULT_PROCEDURE;
use avgpower::report::{
    cmd_ci, cmd_compare_cp, cmd_construct, cmd_mc_validate, cmd_power, cmd_table1, RunConfig,
    DEFAULT_POWER_THETAS,
};
use avgpower::weighting::DEFAULT_WEIGHTING;
use avgpower::BetaPrior;
use clap::{Args, Parser, Subcommand};

/// Confidence regions with maximal average power for the binomial experiment.
#[derive(Parser)]
#[command(name = "avgpower", version)]
struct Cli {
    #[command(flatten)]
    shared: SharedArgs,

    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Unset flags fall back to the
/// `--config` file, then to the built-in defaults.
#[derive(Args)]
struct SharedArgs {
    /// Plain `key=value` file with any of the shared settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of binomial trials [default: 100]
    #[arg(long, global = true)]
    n: Option<u64>,
    /// Test level [default: 0.05]
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// First beta shape of the prior [default: 0.5]
    #[arg(long, global = true)]
    prior_a: Option<f64>,
    /// Second beta shape of the prior [default: 0.5]
    #[arg(long, global = true)]
    prior_b: Option<f64>,
    /// Number of null values on the grid [default: 499]
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Smallest grid value [default: 0.002]
    #[arg(long, global = true)]
    grid_min: Option<f64>,
    /// Largest grid value [default: 0.998]
    #[arg(long, global = true)]
    grid_max: Option<f64>,
    /// Random seed for sampling commands [default: 1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl SharedArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)
                .with_context(|| format!("reading config file {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.alpha {
            cfg.level = v;
        }
        if let Some(v) = self.prior_a {
            cfg.prior_a = v;
        }
        if let Some(v) = self.prior_b {
            cfg.prior_b = v;
        }
        if let Some(v) = self.grid_points {
            cfg.grid_points = v;
        }
        if let Some(v) = self.grid_min {
            cfg.grid_min = v;
        }
        if let Some(v) = self.grid_max {
            cfg.grid_max = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the decision matrix and write it as long-form CSV
    Construct,
    /// Confidence region for one observed count, or for every count
    Ci {
        /// Observed number of successes; all outcomes when omitted
        #[arg(long)]
        x: Option<u64>,
        /// Interval procedure (average-power, clopper-pearson)
        #[arg(long, default_value = DEFAULT_PROCEDURE)]
        method: String,
    },
    /// Power curves, mixed power and average power
    Power {
        /// Data-generating parameters, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_POWER_THETAS)]
        theta: Vec<f64>,
        /// Grid weighting rule (piecewise-constant, renormalized)
        #[arg(long, default_value = DEFAULT_WEIGHTING)]
        weighting: String,
    },
    /// Average power of two tests under two averaging priors
    Table1 {
        #[arg(long, default_value_t = 100.0)]
        informative_a: f64,
        #[arg(long, default_value_t = 100.0)]
        informative_b: f64,
        #[arg(long, default_value_t = 0.5)]
        noninformative_a: f64,
        #[arg(long, default_value_t = 0.5)]
        noninformative_b: f64,
        /// Grid weighting rule (piecewise-constant, renormalized)
        #[arg(long, default_value = DEFAULT_WEIGHTING)]
        weighting: String,
    },
    /// Interval lengths against symmetric Clopper-Pearson intervals
    CompareCp,
    /// Compare sampled decision rows with the exact ones
    McValidate {
        /// Sampled parameters
        #[arg(long, default_value_t = 1_000)]
        mc_params: usize,
        /// Data sets drawn per sampled parameter
        #[arg(long, default_value_t = 100)]
        mc_data: usize,
        /// Smallest acceptable fraction of agreeing cells
        #[arg(long, default_value_t = 0.95)]
        min_agreement: f64,
        /// Smallest effective sample size per row
        #[arg(long, default_value_t = McConfig::DEFAULT_ESS_FLOOR)]
        ess_floor: f64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.shared.resolve()?;
    match cli.command {
        Command::Construct => {
            let out = cmd_construct(&cfg)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Ci { x, method } => {
            let out = cmd_ci(&cfg, x, &method)?;
            for line in &out.summary {
                println!("{line}");
            }
            println!("wrote {}", out.file.display());
        }
        Command::Power { theta, weighting } => {
            for f in cmd_power(&cfg, &theta, &weighting)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Table1 {
            informative_a,
            informative_b,
            noninformative_a,
            noninformative_b,
            weighting,
        } => {
            let out = cmd_table1(
                &cfg,
                BetaPrior::new(informative_a, informative_b)?,
                BetaPrior::new(noninformative_a, noninformative_b)?,
                &weighting,
            )?;
            let [l0, l1] = &out.table.labels;
            println!(
                "{:<16} {:>18} {:>18}",
                "hypotheses",
                format!("{l0}_test"),
                format!("{l1}_test")
            );
            for (label, row) in out.table.labels.iter().zip(&out.table.cells) {
                println!("{label:<16} {:>18.3} {:>18.3}", row[0], row[1]);
            }
            println!("wrote {}", out.file.display());
        }
        Command::CompareCp => {
            let out = cmd_compare_cp(&cfg)?;
            println!(
                "mean length: proposed {:.5}, Clopper-Pearson {:.5} (grid step {})",
                out.mean_proposed_length, out.mean_cp_length, out.grid_step
            );
            println!("wrote {}", out.file.display());
        }
        Command::McValidate {
            mc_params,
            mc_data,
            min_agreement,
            ess_floor,
        } => {
            let mc =
                McConfig::new(cfg.seed, mc_params, mc_data, cfg.level)?.with_ess_floor(ess_floor);
            let out = cmd_mc_validate(&cfg, &mc, min_agreement)?;
            println!(
                "agreement {:.4} (minimum {min_agreement}), {} rows below the precision floor",
                out.agreement.overall, out.agreement.failed_rows
            );
            println!("wrote {}", out.file.display());
            if !out.passed {
                eprintln!("error: agreement below the required minimum");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
