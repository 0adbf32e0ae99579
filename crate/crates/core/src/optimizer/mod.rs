//! Batched rollouts, path cost terms, Gibbs weights, the episodic loss and
//! the joint policy/placement update.

mod adam;
mod gradient;
mod rollout;
mod train;

pub use adam::{adam_step, AdamMoments, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use gradient::{frozen_gradient, frozen_loss, FrozenBatch, WeightMode};
pub use rollout::{rollout_batch, RolloutOptions, RolloutRecord};
pub use train::{train_iteration, LossReport, OptimizerState, Problem};

use crate::actuation::InfluenceMatrix;
use crate::error::{Error, Result};
use crate::field::{inner_product_unchecked, Grid1D};

/// Closed interval of the domain with a target value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
    pub desired: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    pub kappa: f64,
    pub regions: Vec<Region>,
    pub horizon: f64,
    pub dt: f64,
}

impl CostConfig {
    pub fn new(kappa: f64, regions: Vec<Region>, horizon: f64, dt: f64) -> Result<Self> {
        let cfg = Self {
            kappa,
            regions,
            horizon,
            dt,
        };
        cfg.steps()?;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::param("kappa", "must be finite and non-negative"));
        }
        for r in &cfg.regions {
            if !(r.lo <= r.hi) || !r.desired.is_finite() {
                return Err(Error::param("regions", "need lo <= hi and a finite target"));
            }
        }
        Ok(cfg)
    }

    /// Number of steps `T / dt`; rejects horizons that are not a whole
    /// number of steps.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) {
            return Err(Error::NonPositiveTimeStep(self.dt));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        let n = self.horizon / self.dt;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.max(1.0) || rounded < 1.0 {
            return Err(Error::param("horizon", "must be a whole number of time steps"));
        }
        Ok(rounded as usize)
    }

    /// Target per node, `None` outside every region. The first region
    /// containing a node wins.
    pub fn targets(&self, grid: &Grid1D) -> Result<Vec<Option<f64>>> {
        let a = grid.length();
        let tol = 1e-12 * a;
        for r in &self.regions {
            if r.lo < -tol || r.hi > a + tol {
                return Err(Error::param("regions", "region leaves the domain"));
            }
        }
        let inside = |r: &Region, x: f64| x >= r.lo - tol && x <= r.hi + tol;
        if let Some(r) = self
            .regions
            .iter()
            .find(|r| !grid.nodes().iter().any(|&x| inside(r, x)))
        {
            return Err(Error::param(
                "regions",
                format!("[{}, {}] contains no grid node", r.lo, r.hi),
            ));
        }
        Ok(grid
            .nodes()
            .iter()
            .map(|&x| self.regions.iter().find(|r| inside(r, x)).map(|r| r.desired))
            .collect())
    }
}

/// Per-rollout statistics feeding the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub j: f64,
    pub n: f64,
    pub p: f64,
    pub j_tilde: f64,
}

impl CostTerms {
    pub fn new(j: f64, n: f64, p: f64, rho: f64) -> Self {
        Self {
            j,
            n,
            p,
            j_tilde: augmented_cost(j, n, p, rho),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.j_tilde.is_finite()
    }
}

/// `sum_t sum_{nodes in regions} kappa (h - target)^2` over the states after
/// each step.
pub fn state_cost(record: &RolloutRecord, cost: &CostConfig, targets: &[Option<f64>]) -> f64 {
    record.states[1..]
        .iter()
        .map(|s| {
            s.cost_field()
                .iter()
                .zip(targets)
                .filter_map(|(h, t)| t.map(|d| (h - d) * (h - d)))
                .sum::<f64>()
        })
        .sum::<f64>()
        * cost.kappa
}

/// `(sum_t <Phi_t, dW_t>, sum_t dt u_t^T M u_t)`.
pub fn path_terms(record: &RolloutRecord, m: &InfluenceMatrix, grid: &Grid1D, dt: f64) -> (f64, f64) {
    let mut phi = vec![0.0; grid.len()];
    let mut n = 0.0;
    let mut p = 0.0;
    for (u, dw) in record.controls.iter().zip(&record.noise) {
        if u.iter().all(|&v| v == 0.0) {
            continue;
        }
        m.assemble_into(u, &mut phi);
        n += inner_product_unchecked(&phi, dw, grid);
        p += dt * m.quadratic_unchecked(u);
    }
    (n, p)
}

/// `J + rho^{-1/2} N + P / 2`.
pub fn augmented_cost(j: f64, n: f64, p: f64, rho: f64) -> f64 {
    j + n / rho.sqrt() + 0.5 * p
}

/// Cost terms of every rollout; blown-up rollouts get infinite entries.
pub fn cost_terms(
    records: &[RolloutRecord],
    m: &InfluenceMatrix,
    grid: &Grid1D,
    cost: &CostConfig,
    rho: f64,
) -> Result<Vec<CostTerms>> {
    let targets = cost.targets(grid)?;
    Ok(records
        .iter()
        .map(|r| {
            if r.blow_up {
                return CostTerms {
                    j: f64::INFINITY,
                    n: f64::NAN,
                    p: f64::INFINITY,
                    j_tilde: f64::INFINITY,
                };
            }
            let j = state_cost(r, cost, &targets);
            let (n, p) = path_terms(r, m, grid, cost.dt);
            CostTerms::new(j, n, p, rho)
        })
        .collect())
}

/// Min-shifted softmax of `-rho J_tilde`. Non-finite entries get weight 0.
pub fn gibbs_weights(j_tilde: &[f64], rho: f64) -> Result<Vec<f64>> {
    let min = j_tilde
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::AllRolloutsBlewUp(j_tilde.len()));
    }
    let mut w: Vec<f64> = j_tilde
        .iter()
        .map(|&v| if v.is_finite() { (-rho * (v - min)).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// `sum_r E_r (-sqrt(rho) N_r - rho/2 P_r) + penalty`, skipping zero weights.
pub fn loss(terms: &[CostTerms], weights: &[f64], rho: f64, penalty: f64) -> f64 {
    let sr = rho.sqrt();
    terms
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(t, w)| w * (-sr * t.n - 0.5 * rho * t.p))
        .sum::<f64>()
        + penalty
}
