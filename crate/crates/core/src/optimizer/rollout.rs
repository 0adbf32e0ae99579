use rayon::prelude::*;

use crate::actuation::InfluenceMatrix;
use crate::error::{Error, Result};
use crate::field::{fill_noise, Grid1D};
use crate::models::{ImplicitSolver, Model, State};
use crate::policy::PolicyParams;
use crate::seed::{stream_rng, StreamKind};

/// One simulated trajectory.
///
/// `states` holds `Z_0 .. Z_n`; `controls[t]` and `noise[t]` are the policy
/// output and the increment used to go from `Z_t` to `Z_{t+1}`. A rollout that
/// blew up is truncated at the last finite state.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    pub states: Vec<State>,
    pub controls: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
    pub blow_up: bool,
}

impl RolloutRecord {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub master_seed: u64,
    pub kind: StreamKind,
    pub iteration: u64,
    /// Apply the policy. When false every control is zero.
    pub controlled: bool,
    /// Draw noise. When false every increment is zero.
    pub noisy: bool,
}

impl RolloutOptions {
    pub fn training(master_seed: u64, iteration: u64) -> Self {
        Self {
            master_seed,
            kind: StreamKind::Rollout,
            iteration,
            controlled: true,
            noisy: true,
        }
    }
}

/// Simulates `count` rollouts from the model's initial state with a
/// zero-order hold on the controls. Rollout `r` draws its noise from the
/// stream `(seed, kind, iteration, r)`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_batch(
    model: &Model,
    grid: &Grid1D,
    solver: &ImplicitSolver,
    params: &PolicyParams,
    m: &InfluenceMatrix,
    steps: usize,
    count: usize,
    opts: RolloutOptions,
) -> Result<Vec<RolloutRecord>> {
    if count == 0 {
        return Err(Error::param("rollouts", "need at least one rollout"));
    }
    if params.input_dim() != model.observation_dim(grid) {
        return Err(Error::DimensionMismatch {
            expected: model.observation_dim(grid),
            actual: params.input_dim(),
        });
    }
    if params.output_dim() != m.actuators() || m.nodes() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: m.actuators(),
            actual: params.output_dim(),
        });
    }
    (0..count)
        .into_par_iter()
        .map(|r| rollout_one(model, grid, solver, params, m, steps, opts, r as u64))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn rollout_one(
    model: &Model,
    grid: &Grid1D,
    solver: &ImplicitSolver,
    params: &PolicyParams,
    m: &InfluenceMatrix,
    steps: usize,
    opts: RolloutOptions,
    index: u64,
) -> Result<RolloutRecord> {
    let mut rng = stream_rng(opts.master_seed, opts.kind, opts.iteration, index);
    let j = grid.len();
    let dt = solver.dt();
    let mut record = RolloutRecord {
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps),
        noise: Vec::with_capacity(steps),
        blow_up: false,
    };
    let mut state = model.initial_state(grid);
    let mut obs = Vec::with_capacity(params.input_dim());
    let mut phi = vec![0.0; j];
    for _ in 0..steps {
        let u = if opts.controlled {
            state.observation_into(&mut obs);
            params.evaluate(&obs)?
        } else {
            vec![0.0; m.actuators()]
        };
        let mut dw = vec![0.0; j];
        if opts.noisy {
            fill_noise(&mut dw, grid, dt, &mut rng);
        }
        if u.iter().any(|v| !v.is_finite()) {
            record.blow_up = true;
            break;
        }
        m.assemble_into(&u, &mut phi);
        let next = match model.step(grid, solver, &state, &phi, &dw) {
            Ok(s) => s,
            Err(Error::NonFiniteState) => {
                record.blow_up = true;
                break;
            }
            Err(e) => return Err(e),
        };
        record.states.push(std::mem::replace(&mut state, next));
        record.controls.push(u);
        record.noise.push(dw);
    }
    if !record.blow_up {
        record.states.push(state);
    }
    Ok(record)
}
