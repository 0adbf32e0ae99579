//! Loss gradients with the sampled paths held fixed.
//!
//! A batch is frozen by keeping the visited states `Z_t` and the increments
//! `dW_hat_t = dW_t + sqrt(rho) dt Phi_t` of the uncontrolled reference
//! process. As a function of the design `(Theta, x)` each rollout then
//! contributes
//!
//! ```text
//! l_r = sum_t -sqrt(rho) <Phi_t, dW_hat_t> + rho/2 dt <u_t, M u_t>
//! ```
//!
//! which equals `-sqrt(rho) N_r - rho/2 P_r` at the sampled design, so the
//! frozen loss agrees with the episodic loss in value. Its gradient with
//! respect to `Phi_t` there is `-sqrt(rho) dW_t`.

use rayon::prelude::*;

use crate::actuation::{influence_derivative, weighted, ActuatorSet, InfluenceMatrix};
use crate::error::{Error, Result};
use crate::field::{inner_product_unchecked, Grid1D};
use crate::policy::{PolicyGrad, PolicyParams};

use super::RolloutRecord;

/// How the Gibbs weights enter the gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightMode {
    /// Weights are constants.
    #[default]
    Frozen,
    /// Weights are recomputed from the frozen path terms and differentiated.
    Full,
}

impl WeightMode {
    pub fn name(self) -> &'static str {
        match self {
            WeightMode::Frozen => "frozen",
            WeightMode::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "frozen" => Some(WeightMode::Frozen),
            "full" => Some(WeightMode::Full),
            _ => None,
        }
    }
}

pub struct FrozenBatch<'a> {
    grid: &'a Grid1D,
    records: &'a [RolloutRecord],
    dw_hat: Vec<Vec<Vec<f64>>>,
    weights: Vec<f64>,
    state_costs: Vec<f64>,
    rho: f64,
    dt: f64,
    sigma_sq: f64,
    mode: WeightMode,
}

impl<'a> FrozenBatch<'a> {
    /// `m` must be the influence matrix the records were simulated with.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        records: &'a [RolloutRecord],
        grid: &'a Grid1D,
        m: &InfluenceMatrix,
        weights: &[f64],
        state_costs: &[f64],
        rho: f64,
        dt: f64,
        sigma_sq: f64,
        mode: WeightMode,
    ) -> Result<Self> {
        if weights.len() != records.len() || state_costs.len() != records.len() {
            return Err(Error::DimensionMismatch {
                expected: records.len(),
                actual: weights.len().min(state_costs.len()),
            });
        }
        let shift = rho.sqrt() * dt;
        let dw_hat = records
            .iter()
            .map(|rec| {
                if rec.blow_up {
                    return Vec::new();
                }
                rec.controls
                    .iter()
                    .zip(&rec.noise)
                    .map(|(u, dw)| {
                        let mut phi = vec![0.0; grid.len()];
                        m.assemble_into(u, &mut phi);
                        dw.iter().zip(&phi).map(|(w, p)| w + shift * p).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            grid,
            records,
            dw_hat,
            weights: weights.to_vec(),
            state_costs: state_costs.to_vec(),
            rho,
            dt,
            sigma_sq,
            mode,
        })
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    fn included(&self) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&r| !self.records[r].blow_up)
            .collect()
    }

    fn influence_at(&self, x: &[f64]) -> Result<(ActuatorSet, InfluenceMatrix)> {
        let act = ActuatorSet::new(x.to_vec(), self.sigma_sq)?;
        let m = act.influence(self.grid);
        Ok((act, m))
    }

    fn rollout_loss(&self, r: usize, params: &PolicyParams, m: &InfluenceMatrix) -> Result<f64> {
        let rec = &self.records[r];
        let sr = self.rho.sqrt();
        let mut phi = vec![0.0; self.grid.len()];
        let mut obs = Vec::new();
        let mut ell = 0.0;
        for (state, dwh) in rec.states.iter().zip(&self.dw_hat[r]) {
            state.observation_into(&mut obs);
            let u = params.evaluate(&obs)?;
            m.assemble_into(&u, &mut phi);
            ell += -sr * inner_product_unchecked(&phi, dwh, self.grid)
                + 0.5 * self.rho * self.dt * m.quadratic_unchecked(&u);
        }
        Ok(ell)
    }

    /// Per-rollout coefficient multiplying `d l_r`.
    fn coefficients(&self, params: &PolicyParams, m: &InfluenceMatrix) -> Result<Vec<f64>> {
        match self.mode {
            WeightMode::Frozen => Ok(self.weights.clone()),
            WeightMode::Full => {
                let (w, ell) = self.full_weights(params, m)?;
                let mean: f64 = w.iter().zip(&ell).map(|(a, b)| a * b).sum();
                Ok(w.iter()
                    .zip(&ell)
                    .map(|(&wr, &lr)| if wr > 0.0 { wr * (1.0 + lr - mean) } else { 0.0 })
                    .collect())
            }
        }
    }

    /// Weights `softmax(l_r - rho J_r)` and the `l_r` they were built from.
    fn full_weights(&self, params: &PolicyParams, m: &InfluenceMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let idx = self.included();
        let vals: Vec<f64> = idx
            .par_iter()
            .map(|&r| self.rollout_loss(r, params, m))
            .collect::<Result<_>>()?;
        let mut ell = vec![0.0; self.records.len()];
        let mut logits = vec![f64::NEG_INFINITY; self.records.len()];
        for (&r, v) in idx.iter().zip(vals) {
            ell[r] = v;
            logits[r] = v - self.rho * self.state_costs[r];
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::AllRolloutsBlewUp(self.records.len()));
        }
        let mut w: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        Ok((w, ell))
    }
}

/// Weighted frozen loss `sum_r E_r l_r(Theta, x)`, with `x` used unrounded.
/// The boundary penalty is not included.
pub fn frozen_loss(batch: &FrozenBatch<'_>, params: &PolicyParams, x: &[f64]) -> Result<f64> {
    let (_, m) = batch.influence_at(x)?;
    match batch.mode {
        WeightMode::Frozen => {
            let idx: Vec<usize> = batch
                .included()
                .into_iter()
                .filter(|&r| batch.weights[r] > 0.0)
                .collect();
            let vals: Vec<f64> = idx
                .par_iter()
                .map(|&r| batch.rollout_loss(r, params, &m))
                .collect::<Result<_>>()?;
            Ok(idx.iter().zip(vals).map(|(&r, v)| batch.weights[r] * v).sum())
        }
        WeightMode::Full => {
            let (w, ell) = batch.full_weights(params, &m)?;
            Ok(w.iter().zip(&ell).map(|(a, b)| a * b).sum())
        }
    }
}

/// Gradient of [`frozen_loss`] with respect to the policy parameters and the
/// actuator locations.
pub fn frozen_gradient(
    batch: &FrozenBatch<'_>,
    params: &PolicyParams,
    x: &[f64],
) -> Result<(PolicyGrad, Vec<f64>)> {
    let (act, m) = batch.influence_at(x)?;
    let dm = influence_derivative(&act, &m, batch.grid);
    let coeff = batch.coefficients(params, &m)?;
    let idx: Vec<usize> = batch
        .included()
        .into_iter()
        .filter(|&r| coeff[r] != 0.0)
        .collect();
    let parts: Vec<(PolicyGrad, Vec<f64>)> = idx
        .par_iter()
        .map(|&r| rollout_gradient(batch, r, coeff[r], params, &m, &dm))
        .collect::<Result<_>>()?;

    let n = x.len();
    let mut g_theta = PolicyGrad::zeros(params.dims());
    let mut g_x = vec![0.0; n];
    for (gt, gx) in &parts {
        g_theta.add_assign(gt);
        for (a, b) in g_x.iter_mut().zip(gx) {
            *a += b;
        }
    }
    Ok((g_theta, g_x))
}

fn rollout_gradient(
    batch: &FrozenBatch<'_>,
    r: usize,
    c: f64,
    params: &PolicyParams,
    m: &InfluenceMatrix,
    dm: &[f64],
) -> Result<(PolicyGrad, Vec<f64>)> {
    let grid = batch.grid;
    let j = grid.len();
    let n = m.actuators();
    let sr = batch.rho.sqrt();
    let rdt = batch.rho * batch.dt;
    let rec = &batch.records[r];
    let mut g_theta = PolicyGrad::zeros(params.dims());
    let mut g_x = vec![0.0; n];
    let mut obs = Vec::new();
    let mut phi = vec![0.0; j];
    let mut g_phi = vec![0.0; j];
    for (state, dwh) in rec.states.iter().zip(&batch.dw_hat[r]) {
        state.observation_into(&mut obs);
        let (u, tape) = params.forward(&obs)?;
        m.assemble_into(&u, &mut phi);
        for ((g, p), w) in g_phi.iter_mut().zip(&phi).zip(dwh) {
            *g = c * (-sr * w + rdt * p);
        }
        let wg = weighted(&g_phi, grid);
        let g_u: Vec<f64> = (0..n)
            .map(|i| m.row(i).iter().zip(&wg).map(|(a, b)| a * b).sum())
            .collect();
        for (i, gx) in g_x.iter_mut().enumerate() {
            let row = &dm[i * j..(i + 1) * j];
            *gx += u[i] * row.iter().zip(&wg).map(|(a, b)| a * b).sum::<f64>();
        }
        tape.backward_into(&g_u, &mut g_theta)?;
    }
    Ok((g_theta, g_x))
}
