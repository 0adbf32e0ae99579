use crate::actuation::{boundary_penalty, boundary_penalty_gradient, round_to_grid, ActuatorSet};
use crate::error::{Error, Result};
use crate::field::Grid1D;
use crate::models::{ImplicitSolver, Model};
use crate::policy::PolicyParams;

use super::{
    adam_step, cost_terms, frozen_gradient, gibbs_weights, loss, rollout_batch, AdamMoments,
    CostConfig, FrozenBatch, RolloutOptions, WeightMode,
};

/// Everything a training iteration reads but does not modify.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: Model,
    pub grid: Grid1D,
    pub solver: ImplicitSolver,
    pub cost: CostConfig,
    pub rollouts: usize,
    pub master_seed: u64,
    pub weight_mode: WeightMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub theta: AdamMoments,
    pub x: AdamMoments,
    /// Number of updates applied so far.
    pub t: u64,
    pub lr_theta: f64,
    pub lr_x: f64,
    /// Gradient carried over while an actuator's rounded location is stuck.
    pub accumulators: Vec<f64>,
    /// Continuous locations before rounding.
    pub shadow: Vec<f64>,
}

impl OptimizerState {
    pub fn new(params: &PolicyParams, shadow: Vec<f64>, lr_theta: f64, lr_x: f64) -> Self {
        let n = shadow.len();
        Self {
            theta: AdamMoments::zeros(params.len()),
            x: AdamMoments::zeros(n),
            t: 0,
            lr_theta,
            lr_x,
            accumulators: vec![0.0; n],
            shadow,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub iteration: u64,
    pub weights: Vec<f64>,
    pub loss: f64,
    pub penalty: f64,
    pub grad_norm_theta: f64,
    pub grad_norm_x: f64,
    pub mean_j: f64,
    pub min_j: f64,
    pub mean_p: f64,
    pub blown_up: usize,
}

impl LossReport {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Samples a batch under the current design, evaluates the loss and applies
/// one ADAM step to the policy and to the shadow locations, then rounds the
/// actuators back onto the grid. The report describes the batch that was
/// sampled, before the update.
pub fn train_iteration(
    problem: &Problem,
    params: &mut PolicyParams,
    actuators: &mut ActuatorSet,
    state: &mut OptimizerState,
    iteration: u64,
) -> Result<LossReport> {
    let grid = &problem.grid;
    let rho = problem.model.rho();
    let dt = problem.cost.dt;
    let steps = problem.cost.steps()?;
    if state.shadow.len() != actuators.count() || state.x.len() != actuators.count() {
        return Err(Error::DimensionMismatch {
            expected: actuators.count(),
            actual: state.shadow.len(),
        });
    }

    let m = actuators.influence(grid);
    let records = rollout_batch(
        &problem.model,
        grid,
        &problem.solver,
        params,
        &m,
        steps,
        problem.rollouts,
        RolloutOptions::training(problem.master_seed, iteration),
    )?;
    let terms = cost_terms(&records, &m, grid, &problem.cost, rho)?;
    let j_tilde: Vec<f64> = terms.iter().map(|t| t.j_tilde).collect();
    let weights = gibbs_weights(&j_tilde, rho)?;
    let penalty = boundary_penalty(&state.shadow, grid);
    let loss_value = loss(&terms, &weights, rho, penalty);

    let state_costs: Vec<f64> = terms.iter().map(|t| t.j).collect();
    let batch = FrozenBatch::new(
        &records,
        grid,
        &m,
        &weights,
        &state_costs,
        rho,
        dt,
        actuators.sigma_sq,
        problem.weight_mode,
    )?;
    let (g_theta, mut g_x) = frozen_gradient(&batch, params, &actuators.locations)?;
    for (g, p) in g_x.iter_mut().zip(boundary_penalty_gradient(&state.shadow, grid)) {
        *g += p;
    }
    if !g_theta.is_finite() {
        return Err(Error::NonFiniteGradient(format!(
            "policy gradient at iteration {iteration}"
        )));
    }
    if g_x.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!(
            "actuator gradient at iteration {iteration}: {g_x:?}"
        )));
    }

    state.t += 1;
    adam_step(
        &mut state.theta,
        params.as_mut_slice(),
        g_theta.as_slice(),
        state.lr_theta,
        state.t,
    );
    let g_eff: Vec<f64> = g_x
        .iter()
        .zip(&state.accumulators)
        .map(|(g, a)| g + a)
        .collect();
    adam_step(&mut state.x, &mut state.shadow, &g_eff, state.lr_x, state.t);
    let rounded = round_to_grid(&state.shadow, grid);
    for ((acc, g), (new, old)) in state
        .accumulators
        .iter_mut()
        .zip(&g_eff)
        .zip(rounded.iter().zip(&actuators.locations))
    {
        *acc = if new == old { *g } else { 0.0 };
    }
    actuators.locations = rounded;

    let finite: Vec<_> = terms.iter().filter(|t| t.is_finite()).collect();
    let k = finite.len() as f64;
    let grad_norm_x = g_x.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(LossReport {
        iteration,
        weights,
        loss: loss_value,
        penalty,
        grad_norm_theta: g_theta.norm(),
        grad_norm_x,
        mean_j: finite.iter().map(|t| t.j).sum::<f64>() / k,
        min_j: finite.iter().map(|t| t.j).fold(f64::INFINITY, f64::min),
        mean_p: finite.iter().map(|t| t.p).sum::<f64>() / k,
        blown_up: terms.len() - finite.len(),
    })
}
