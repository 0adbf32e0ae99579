//! Monte-Carlo checks of the change of measure between controlled and
//! uncontrolled dynamics.
//!
//! Every check is a 3-sigma gate on a sample mean. Controlled and
//! uncontrolled rollouts draw from separate seed streams so their
//! estimators are independent.

use crate::actuation::{ActuatorSet, InfluenceMatrix};
use crate::error::{Error, Result};
use crate::field::Grid1D;
use crate::models::{ImplicitSolver, Model};
use crate::optimizer::{path_terms, rollout_batch, state_cost, CostConfig, RolloutOptions, RolloutRecord};
use crate::policy::PolicyParams;
use crate::seed::StreamKind;

/// Smallest batch accepted by the martingale and free-energy checks.
pub const MIN_CHECK_ROLLOUTS: usize = 1000;

/// Width of every acceptance gate in standard errors.
pub const SIGMA_GATE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCheckReport {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub pass: bool,
}

impl MeasureCheckReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.10e},{:.10e},{},{}",
            self.name, self.mean, self.stderr, self.n, self.pass
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyReport {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub n: usize,
    pub pass: bool,
}

impl FreeEnergyReport {
    /// Summarized as `lhs - rhs` with the combined standard error.
    pub fn as_check(&self, name: &str) -> MeasureCheckReport {
        MeasureCheckReport {
            name: name.to_string(),
            mean: self.lhs - self.rhs,
            stderr: self.lhs_stderr.hypot(self.rhs_stderr),
            n: self.n,
            pass: self.pass,
        }
    }
}

/// Everything needed to sample rollouts for a check.
#[derive(Debug, Clone, Copy)]
pub struct CheckSetup<'a> {
    pub model: &'a Model,
    pub grid: &'a Grid1D,
    pub solver: &'a ImplicitSolver,
    pub params: &'a PolicyParams,
    pub actuators: &'a ActuatorSet,
    pub steps: usize,
    pub rollouts: usize,
    pub master_seed: u64,
}

impl CheckSetup<'_> {
    fn sample(&self, controlled: bool) -> Result<(InfluenceMatrix, Vec<RolloutRecord>)> {
        let m = self.actuators.influence(self.grid);
        let opts = RolloutOptions {
            master_seed: self.master_seed,
            kind: if controlled {
                StreamKind::VerifyControlled
            } else {
                StreamKind::VerifyUncontrolled
            },
            iteration: 0,
            controlled,
            noisy: true,
        };
        let recs = rollout_batch(
            self.model,
            self.grid,
            self.solver,
            self.params,
            &m,
            self.steps,
            self.rollouts,
            opts,
        )?;
        if let Some(r) = recs.iter().position(|r| r.blow_up) {
            return Err(Error::param(
                "rollouts",
                format!("rollout {r} blew up; estimator would be biased"),
            ));
        }
        Ok((m, recs))
    }

    fn require(&self, min: usize) -> Result<()> {
        if self.rollouts < min {
            return Err(Error::param(
                "rollouts",
                format!("need at least {min}, got {}", self.rollouts),
            ));
        }
        Ok(())
    }
}

/// `exp(-sqrt(rho) N - rho/2 P)`: density of the uncontrolled path measure
/// with respect to the controlled one along a controlled rollout.
pub fn rn_derivative(record: &RolloutRecord, m: &InfluenceMatrix, rho: f64, grid: &Grid1D, dt: f64) -> f64 {
    log_rn_derivative(record, m, rho, grid, dt).exp()
}

pub fn log_rn_derivative(record: &RolloutRecord, m: &InfluenceMatrix, rho: f64, grid: &Grid1D, dt: f64) -> f64 {
    let (n, p) = path_terms(record, m, grid, dt);
    -rho.sqrt() * n - 0.5 * rho * p
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E[dL/dL~] = 1` under the controlled measure.
pub fn martingale_check(setup: &CheckSetup<'_>) -> Result<MeasureCheckReport> {
    setup.require(MIN_CHECK_ROLLOUTS)?;
    let (m, recs) = setup.sample(true)?;
    let rho = setup.model.rho();
    let dt = setup.solver.dt();
    let rn: Vec<f64> = recs
        .iter()
        .map(|r| rn_derivative(r, &m, rho, setup.grid, dt))
        .collect();
    let (mean, stderr) = mean_stderr(&rn);
    let pass = if stderr == 0.0 {
        if mean != 1.0 {
            return Err(Error::DegenerateEstimator(format!(
                "zero variance with mean {mean}"
            )));
        }
        true
    } else {
        (mean - 1.0).abs() <= SIGMA_GATE * stderr
    };
    Ok(MeasureCheckReport {
        name: "martingale".into(),
        mean,
        stderr,
        n: recs.len(),
        pass,
    })
}

/// Compares `E~[f dL/dL~]` from controlled rollouts with `E[f]` from
/// uncontrolled ones. The report's mean is the difference.
pub fn importance_equivalence_check(
    setup: &CheckSetup<'_>,
    f: &(dyn Fn(&RolloutRecord) -> f64 + Sync),
) -> Result<MeasureCheckReport> {
    setup.require(2)?;
    let rho = setup.model.rho();
    let dt = setup.solver.dt();
    let (m, controlled) = setup.sample(true)?;
    let weighted: Vec<f64> = controlled
        .iter()
        .map(|r| f(r) * rn_derivative(r, &m, rho, setup.grid, dt))
        .collect();
    let (_, plain) = setup.sample(false)?;
    let direct: Vec<f64> = plain.iter().map(f).collect();
    let (a, sa) = mean_stderr(&weighted);
    let (b, sb) = mean_stderr(&direct);
    let stderr = sa.hypot(sb);
    let diff = a - b;
    Ok(MeasureCheckReport {
        name: "importance_sampling".into(),
        mean: diff,
        stderr,
        n: controlled.len(),
        pass: diff.abs() <= SIGMA_GATE * stderr || (diff == 0.0 && stderr == 0.0),
    })
}

/// Mean of the cost component over nodes in `[lo, hi]` at the final state.
pub fn terminal_region_mean(grid: &Grid1D, lo: f64, hi: f64) -> impl Fn(&RolloutRecord) -> f64 + Sync {
    let idx: Vec<usize> = grid
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= lo && x <= hi)
        .map(|(j, _)| j)
        .collect();
    move |r: &RolloutRecord| {
        let h = r.states.last().expect("non-empty record").cost_field();
        idx.iter().map(|&j| h[j]).sum::<f64>() / idx.len() as f64
    }
}

/// `-1/rho log mean(exp(-rho J))` by log-sum-exp, with a delta-method
/// standard error.
pub fn free_energy_estimate(j: &[f64], rho: f64) -> (f64, f64) {
    let min = j.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = j.iter().map(|&v| (-rho * (v - min)).exp()).collect();
    let (mean, se) = mean_stderr(&e);
    (min - mean.ln() / rho, se / (mean * rho))
}

/// Checks `-1/rho log E[exp(-rho J)] <= E~[J] + E~[P]/2` where the left side
/// uses uncontrolled rollouts and the right side controlled ones.
pub fn free_energy_gap(setup: &CheckSetup<'_>, cost: &CostConfig) -> Result<FreeEnergyReport> {
    setup.require(MIN_CHECK_ROLLOUTS)?;
    let rho = setup.model.rho();
    let dt = setup.solver.dt();
    let targets = cost.targets(setup.grid)?;

    let (_, plain) = setup.sample(false)?;
    let j0: Vec<f64> = plain.iter().map(|r| state_cost(r, cost, &targets)).collect();
    let (lhs, lhs_stderr) = free_energy_estimate(&j0, rho);

    let (m, controlled) = setup.sample(true)?;
    let rhs_samples: Vec<f64> = controlled
        .iter()
        .map(|r| state_cost(r, cost, &targets) + 0.5 * path_terms(r, &m, setup.grid, dt).1)
        .collect();
    let (rhs, rhs_stderr) = mean_stderr(&rhs_samples);
    let pass = lhs <= rhs + SIGMA_GATE * lhs_stderr.hypot(rhs_stderr);
    Ok(FreeEnergyReport {
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        n: plain.len(),
        pass,
    })
}
