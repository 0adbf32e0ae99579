use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use crate::actuation::{round_to_grid, ActuatorSet};
use crate::error::{Error, Result};
use crate::field::Grid1D;
use crate::models::{ImplicitSolver, Model};
use crate::optimizer::{
    rollout_batch, train_iteration, CostConfig, LossReport, OptimizerState, Problem,
    RolloutOptions, RolloutRecord,
};
use crate::policy::PolicyParams;
use crate::seed::{stream_rng, StreamKind};
use crate::verify::{
    free_energy_gap, importance_equivalence_check, martingale_check, terminal_region_mean,
    CheckSetup, MeasureCheckReport,
};

use super::{Checkpoint, ExperimentConfig};

pub const SNAPSHOT_HEADER: &str = "t,node,mean,two_sigma";
pub const CHECKS_HEADER: &str = "name,mean,stderr,n,pass";
/// Iteration index of the seed streams used for snapshot rollouts. Train and
/// baseline snapshots share it, so they see identical noise per rollout.
pub const SNAPSHOT_ITERATION: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Verify,
    Baseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub reports: Vec<LossReport>,
    pub checks: Vec<MeasureCheckReport>,
}

/// Live training state: the problem plus everything the optimizer mutates.
pub struct Session {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub params: PolicyParams,
    pub actuators: ActuatorSet,
    pub optimizer: OptimizerState,
    /// Completed iterations.
    pub iteration: u64,
}

impl Session {
    /// Fresh Xavier policy and actuators drawn uniformly from the init
    /// interval, both from the `Init` stream of the master seed.
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let problem = build_problem(config)?;
        let mut rng = stream_rng(config.seed, StreamKind::Init, 0, 0);
        let params = PolicyParams::xavier_init(config.policy_dims(), &mut rng)?;
        let shadow: Vec<f64> = (0..config.actuators)
            .map(|_| {
                if config.init_hi > config.init_lo {
                    rng.random_range(config.init_lo..config.init_hi)
                } else {
                    config.init_lo
                }
            })
            .collect();
        let actuators = ActuatorSet::new(round_to_grid(&shadow, &problem.grid), config.sigma_sq)?;
        let optimizer = OptimizerState::new(&params, shadow, config.lr_theta, config.lr_x);
        Ok(Self {
            config: config.clone(),
            problem,
            params,
            actuators,
            optimizer,
            iteration: 0,
        })
    }

    pub fn from_checkpoint(config: &ExperimentConfig, ckpt: Checkpoint) -> Result<Self> {
        config.validate()?;
        if ckpt.params.dims() != config.policy_dims() {
            return Err(Error::Checkpoint(format!(
                "checkpoint dims {:?} do not match config {:?}",
                ckpt.params.dims(),
                config.policy_dims()
            )));
        }
        Ok(Self {
            config: config.clone(),
            problem: build_problem(config)?,
            params: ckpt.params,
            actuators: ckpt.actuators,
            optimizer: ckpt.optimizer,
            iteration: ckpt.iteration,
        })
    }

    pub fn step(&mut self) -> Result<LossReport> {
        let rep = train_iteration(
            &self.problem,
            &mut self.params,
            &mut self.actuators,
            &mut self.optimizer,
            self.iteration,
        )?;
        self.iteration += 1;
        Ok(rep)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration,
            params: self.params.clone(),
            actuators: self.actuators.clone(),
            optimizer: self.optimizer.clone(),
        }
    }

    /// Rollouts of the current design on the snapshot streams.
    pub fn snapshot_rollouts(&self, controlled: bool) -> Result<Vec<RolloutRecord>> {
        let c = &self.config;
        let m = self.actuators.influence(&self.problem.grid);
        rollout_batch(
            &self.problem.model,
            &self.problem.grid,
            &self.problem.solver,
            &self.params,
            &m,
            self.problem.cost.steps()?,
            c.snapshot_rollouts,
            RolloutOptions {
                master_seed: c.seed,
                kind: StreamKind::Rollout,
                iteration: SNAPSHOT_ITERATION,
                controlled,
                noisy: c.noisy,
            },
        )
    }

    /// Martingale, importance-sampling and free-energy checks of the current
    /// design.
    pub fn verify(&self) -> Result<Vec<MeasureCheckReport>> {
        let c = &self.config;
        let p = &self.problem;
        let short = CostConfig::new(c.kappa, c.regions.clone(), c.verify_horizon, c.dt)?;
        let mut setup = CheckSetup {
            model: &p.model,
            grid: &p.grid,
            solver: &p.solver,
            params: &self.params,
            actuators: &self.actuators,
            steps: short.steps()?,
            rollouts: c.verify_rollouts,
            master_seed: c.seed,
        };
        let mut checks = vec![martingale_check(&setup)?];
        let probe = terminal_region_mean(&p.grid, 0.4 * c.length, 0.6 * c.length);
        checks.push(importance_equivalence_check(&setup, &probe)?);
        setup.steps = p.cost.steps()?;
        checks.push(free_energy_gap(&setup, &p.cost)?.as_check("free_energy"));
        Ok(checks)
    }
}

fn build_problem(config: &ExperimentConfig) -> Result<Problem> {
    let grid: Grid1D = config.grid()?;
    let model: Model = config.build_model()?;
    let solver: ImplicitSolver = model.build_solver(&grid, config.dt, config.time_scheme())?;
    Ok(Problem {
        model,
        grid,
        solver,
        cost: config.cost_config()?,
        rollouts: config.rollouts,
        master_seed: config.seed,
        weight_mode: config.weight_mode(),
    })
}

/// Per node and time: mean and twice the standard deviation of the cost
/// component over the rollouts that did not blow up.
pub fn snapshot_csv(records: &[RolloutRecord], grid: &Grid1D, dt: f64) -> String {
    let ok: Vec<&RolloutRecord> = records.iter().filter(|r| !r.blow_up).collect();
    let mut out = String::from(SNAPSHOT_HEADER);
    out.push('\n');
    let Some(first) = ok.first() else {
        return out;
    };
    let n = ok.len() as f64;
    for t in 0..first.states.len() {
        for (j, x) in grid.nodes().iter().enumerate() {
            let vals = ok.iter().map(|r| r.states[t].cost_field()[j]);
            let mean = vals.clone().sum::<f64>() / n;
            let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            out.push_str(&format!(
                "{:.6},{x},{mean:.10e},{:.10e}\n",
                t as f64 * dt,
                2.0 * var.sqrt()
            ));
        }
    }
    out
}

fn iterations_header(n: usize) -> String {
    let mut h = String::from("iter,meanJ,minJ,meanP,loss");
    for i in 1..=n {
        h.push_str(&format!(",x_{i}"));
    }
    h.push_str(",wall_s");
    h
}

fn iteration_row(rep: &LossReport, locations: &[f64], wall: f64) -> String {
    let mut row = format!(
        "{},{:.10e},{:.10e},{:.10e},{:.10e}",
        rep.iteration, rep.mean_j, rep.min_j, rep.mean_p, rep.loss
    );
    for x in locations {
        row.push_str(&format!(",{x}"));
    }
    row.push_str(&format!(",{wall:.3}"));
    row
}

/// Opens `iterations.csv` for appending. When resuming, rows from
/// iterations at or after `start` are dropped first.
fn open_iterations(path: &Path, header: &str, start: u64) -> Result<BufWriter<File>> {
    if start > 0 && path.exists() {
        let text = fs::read_to_string(path)?;
        let mut kept = String::new();
        for (i, line) in text.lines().enumerate() {
            let keep = i == 0
                || line
                    .split(',')
                    .next()
                    .and_then(|k| k.parse::<u64>().ok())
                    .is_some_and(|k| k < start);
            if keep {
                kept.push_str(line);
                kept.push('\n');
            }
        }
        fs::write(path, kept)?;
    } else {
        fs::write(path, format!("{header}\n"))?;
    }
    Ok(BufWriter::new(OpenOptions::new().append(true).open(path)?))
}

/// Runs one mode and writes its artifacts under `config.out_dir`.
///
/// * train: `iterations.csv`, `checkpoint_NNNNNN.txt` every
///   `checkpoint_every` iterations and at the end, and `snapshot.csv` of the
///   final design.
/// * verify: `checks.csv`.
/// * baseline: `snapshot.csv` of uncontrolled rollouts.
pub fn run_experiment(
    config: &ExperimentConfig,
    mode: Mode,
    resume: Option<&Path>,
) -> Result<RunSummary> {
    let mut session = match resume {
        Some(p) => Session::from_checkpoint(config, Checkpoint::load(p)?)?,
        None => Session::new(config)?,
    };
    let out = config.out_dir.clone();
    fs::create_dir_all(&out)?;
    let mut summary = RunSummary {
        out_dir: out.clone(),
        reports: Vec::new(),
        checks: Vec::new(),
    };
    let dt = config.dt;
    match mode {
        Mode::Train => {
            let header = iterations_header(config.actuators);
            let mut csv = open_iterations(&out.join("iterations.csv"), &header, session.iteration)?;
            let clock = Instant::now();
            let total = config.iterations as u64;
            while session.iteration < total {
                let locations = session.actuators.locations.clone();
                let rep = session.step()?;
                let wall = if config.wall_clock {
                    clock.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                writeln!(csv, "{}", iteration_row(&rep, &locations, wall))?;
                csv.flush()?;
                if session.iteration % config.checkpoint_every as u64 == 0 || session.iteration == total {
                    let name = format!("checkpoint_{:06}.txt", session.iteration);
                    session.checkpoint().save(&out.join(name))?;
                }
                summary.reports.push(rep);
            }
            let recs = session.snapshot_rollouts(true)?;
            fs::write(out.join("snapshot.csv"), snapshot_csv(&recs, &session.problem.grid, dt))?;
        }
        Mode::Verify => {
            let checks = session.verify()?;
            let mut text = format!("{CHECKS_HEADER}\n");
            for c in &checks {
                text.push_str(&c.csv_row());
                text.push('\n');
            }
            fs::write(out.join("checks.csv"), text)?;
            summary.checks = checks;
        }
        Mode::Baseline => {
            let recs = session.snapshot_rollouts(false)?;
            fs::write(out.join("snapshot.csv"), snapshot_csv(&recs, &session.problem.grid, dt))?;
        }
    }
    Ok(summary)
}
