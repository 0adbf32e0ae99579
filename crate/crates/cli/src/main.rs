use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use codesign_core::{run_experiment, ExperimentConfig, Mode, ModelKind, Scale};

/// Policy learning and actuator placement for 1-D stochastic PDEs.
#[derive(Parser, Debug)]
#[command(name = "codesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy and actuator layout; writes iterations.csv,
    /// checkpoints and snapshot.csv.
    Train(RunArgs),
    /// Run the Monte-Carlo measure checks; writes checks.csv.
    Verify(RunArgs),
    /// Simulate without control; writes snapshot.csv.
    Baseline(RunArgs),
    /// Print a preset as TOML.
    Preset {
        /// heat, burgers, nagumo or euler_bernoulli.
        name: String,
        #[arg(long)]
        desk_scale: bool,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file or a preset name.
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Use desk-scale presets (for a file: as fallback for missing keys).
    #[arg(long)]
    desk_scale: bool,
    /// Continue training from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Record elapsed seconds in iterations.csv (breaks byte-reproducibility).
    #[arg(long)]
    wall_clock: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let scale = if self.desk_scale { Scale::Desk } else { Scale::Full };
        let path = Path::new(&self.config);
        let mut c = if path.is_file() {
            ExperimentConfig::load_scaled(path, scale)
                .with_context(|| format!("loading {}", path.display()))?
        } else if ModelKind::parse(&self.config).is_some() {
            ExperimentConfig::preset_by_name(&self.config, scale)?
        } else {
            bail!("`{}` is neither a config file nor a preset name", self.config);
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = &self.out_dir {
            c.out_dir = d.clone();
        }
        if let Some(k) = self.iterations {
            c.iterations = k;
        }
        c.wall_clock |= self.wall_clock;
        c.validate()?;
        Ok(c)
    }
}

fn run(args: &RunArgs, mode: Mode) -> Result<bool> {
    let config = args.config()?;
    if args.resume.is_some() && mode != Mode::Train {
        bail!("--resume only applies to train");
    }
    let summary = run_experiment(&config, mode, args.resume.as_deref())?;
    let mut ok = true;
    match mode {
        Mode::Train => {
            if let (Some(first), Some(last)) = (summary.reports.first(), summary.reports.last()) {
                println!(
                    "iterations {}..{}: mean J {:.4} -> {:.4}, mean P {:.4}",
                    first.iteration, last.iteration, first.mean_j, last.mean_j, last.mean_p
                );
            } else {
                println!("nothing to do: checkpoint already at {} iterations", config.iterations);
            }
        }
        Mode::Verify => {
            for c in &summary.checks {
                println!(
                    "{:<20} mean {:+.6e} stderr {:.3e} n {} {}",
                    c.name,
                    c.mean,
                    c.stderr,
                    c.n,
                    if c.pass { "PASS" } else { "FAIL" }
                );
                ok &= c.pass;
            }
        }
        Mode::Baseline => {}
    }
    println!("artifacts in {}", summary.out_dir.display());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => run(a, Mode::Train),
        Command::Verify(a) => run(a, Mode::Verify),
        Command::Baseline(a) => run(a, Mode::Baseline),
        Command::Preset { name, desk_scale } => {
            let scale = if *desk_scale { Scale::Desk } else { Scale::Full };
            ExperimentConfig::preset_by_name(name, scale).map(|c| {
                print!("{}", c.to_toml());
                true
            }).map_err(Into::into)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        // a check failed; artifacts were still written
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
