//! Semi-implicit time steppers for the four SPDE models.
//!
//! Every model is written as `dz = (L z + F(z)) dt + G (Phi dt + rho^{-1/2} dW)`
//! with `L` a banded linear operator carrying the stiff terms. A step solves
//!
//! ```text
//! (I - theta dt L) z' = (I + (1 - theta) dt L) z + dt F(z) + G (dt Phi + rho^{-1/2} dW)
//! ```
//!
//! on free rows, while rows of Dirichlet-type boundary nodes are pinned to
//! their boundary value.

mod beam;
mod burgers;
mod heat;
mod nagumo;

pub use beam::{beam_energy, EulerBernoulliModel};
pub use burgers::BurgersModel;
pub use heat::HeatModel;
pub use nagumo::NagumoModel;

use crate::banded::{BandMatrix, BandedLu};
use crate::error::{Error, Result};
use crate::field::{Field, Grid1D, SecondOrderState};

/// Weighting of the implicit linear operator between the old and new time level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    /// `theta = 1`.
    BackwardEuler,
    /// `theta = 1/2`.
    #[default]
    CrankNicolson,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::BackwardEuler => "backward_euler",
            TimeScheme::CrankNicolson => "crank_nicolson",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "backward_euler" => Some(TimeScheme::BackwardEuler),
            "crank_nicolson" => Some(TimeScheme::CrankNicolson),
            _ => None,
        }
    }
}

/// Factored implicit system `I - theta dt L` for a fixed grid, step and model.
#[derive(Debug, Clone)]
pub struct ImplicitSolver {
    dt: f64,
    theta: f64,
    operator: BandMatrix,
    implicit: BandMatrix,
    lu: BandedLu,
    pinned: Vec<Option<f64>>,
}

impl ImplicitSolver {
    pub(crate) fn assemble(
        operator: BandMatrix,
        pinned: Vec<Option<f64>>,
        dt: f64,
        scheme: TimeScheme,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositiveTimeStep(dt));
        }
        let theta = scheme.theta();
        let n = operator.size();
        let mut implicit =
            BandMatrix::zeros(n, operator.lower_bandwidth(), operator.upper_bandwidth());
        for (i, pin) in pinned.iter().enumerate() {
            if pin.is_some() {
                implicit.set(i, i, 1.0);
                continue;
            }
            let lo = i.saturating_sub(operator.lower_bandwidth());
            let hi = (i + operator.upper_bandwidth()).min(n - 1);
            for j in lo..=hi {
                let delta = if i == j { 1.0 } else { 0.0 };
                implicit.set(i, j, delta - theta * dt * operator.get(i, j));
            }
        }
        let lu = implicit.factor()?;
        Ok(Self {
            dt,
            theta,
            operator,
            implicit,
            lu,
            pinned,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The assembled matrix `I - theta dt L` (identity rows on pinned nodes).
    pub fn implicit_matrix(&self) -> &BandMatrix {
        &self.implicit
    }

    /// The stiff linear operator `L`.
    pub fn operator(&self) -> &BandMatrix {
        &self.operator
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.lu.solve(rhs)
    }

    /// One step given the explicit increment `dt F(z) + G (dt Phi + rho^{-1/2} dW)`
    /// already laid out in the unknown ordering.
    pub(crate) fn advance(&self, z: &[f64], explicit: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; z.len()];
        if self.theta < 1.0 {
            self.operator.matvec_into(z, &mut rhs);
            let c = (1.0 - self.theta) * self.dt;
            for r in rhs.iter_mut() {
                *r *= c;
            }
        }
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = match self.pinned[i] {
                Some(v) => v,
                None => *r + z[i] + explicit[i],
            };
        }
        self.lu.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        // exact pinning, independent of solve rounding
        for (v, pin) in rhs.iter_mut().zip(&self.pinned) {
            if let Some(p) = pin {
                *v = *p;
            }
        }
        Ok(rhs)
    }
}

/// Central second difference `eps * D2` as a tridiagonal band with the
/// boundary handling left to the caller.
pub(crate) fn second_difference(grid: &Grid1D, eps: f64) -> BandMatrix {
    let n = grid.len();
    let c = eps / (grid.dx() * grid.dx());
    let mut op = BandMatrix::zeros(n, 1, 1);
    for j in 1..n - 1 {
        op.set(j, j - 1, c);
        op.set(j, j, -2.0 * c);
        op.set(j, j + 1, c);
    }
    op
}

pub(crate) fn check_dt(solver: &ImplicitSolver, dt: f64) -> Result<()> {
    if (solver.dt() - dt).abs() > 1e-12 * solver.dt() {
        return Err(Error::param(
            "dt",
            format!("increment dt {dt} does not match solver dt {}", solver.dt()),
        ));
    }
    Ok(())
}

/// State of any supported model.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Scalar(Field),
    SecondOrder(SecondOrderState),
}

impl State {
    /// Flattened policy input: the field, or `y` followed by `v`.
    pub fn observation(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.observation_into(&mut out);
        out
    }

    pub fn observation_into(&self, out: &mut Vec<f64>) {
        out.clear();
        match self {
            State::Scalar(h) => out.extend_from_slice(h.values()),
            State::SecondOrder(z) => {
                out.extend_from_slice(z.y.values());
                out.extend_from_slice(z.v.values());
            }
        }
    }

    /// The component the state cost is evaluated on.
    pub fn cost_field(&self) -> &[f64] {
        match self {
            State::Scalar(h) => h.values(),
            State::SecondOrder(z) => z.y.values(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            State::Scalar(h) => h.is_finite(),
            State::SecondOrder(z) => z.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Heat(HeatModel),
    Burgers(BurgersModel),
    Nagumo(NagumoModel),
    EulerBernoulli(EulerBernoulliModel),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Heat(_) => "heat",
            Model::Burgers(_) => "burgers",
            Model::Nagumo(_) => "nagumo",
            Model::EulerBernoulli(_) => "euler_bernoulli",
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            Model::Heat(m) => m.rho,
            Model::Burgers(m) => m.rho,
            Model::Nagumo(m) => m.rho,
            Model::EulerBernoulli(m) => m.rho,
        }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Model::Heat(m) => m.rho = rho,
            Model::Burgers(m) => m.rho = rho,
            Model::Nagumo(m) => m.rho = rho,
            Model::EulerBernoulli(m) => m.rho = rho,
        }
        out
    }

    pub fn build_solver(&self, grid: &Grid1D, dt: f64, scheme: TimeScheme) -> Result<ImplicitSolver> {
        match self {
            Model::Heat(m) => m.build_solver(grid, dt, scheme),
            Model::Burgers(m) => m.build_solver(grid, dt, scheme),
            Model::Nagumo(m) => m.build_solver(grid, dt, scheme),
            Model::EulerBernoulli(m) => m.build_solver(grid, dt, scheme),
        }
    }

    /// Length of the policy input vector.
    pub fn observation_dim(&self, grid: &Grid1D) -> usize {
        match self {
            Model::EulerBernoulli(_) => 2 * grid.len(),
            _ => grid.len(),
        }
    }

    /// Initial condition used by the experiments.
    pub fn initial_state(&self, grid: &Grid1D) -> State {
        match self {
            Model::Heat(_) => State::Scalar(Field::zeros(grid.len())),
            Model::Burgers(m) => {
                let mut h = Field::zeros(grid.len());
                let n = h.len();
                h.0[0] = m.bc_value;
                h.0[n - 1] = m.bc_value;
                State::Scalar(h)
            }
            Model::Nagumo(_) => State::Scalar(NagumoModel::front_initial_condition(grid)),
            Model::EulerBernoulli(_) => {
                State::SecondOrder(EulerBernoulliModel::mode_initial_condition(grid, 3))
            }
        }
    }

    /// Advances `state` by one step with control field `phi` and noise `dw`
    /// (both nodal vectors on the grid).
    pub fn step(
        &self,
        grid: &Grid1D,
        solver: &ImplicitSolver,
        state: &State,
        phi: &[f64],
        dw: &[f64],
    ) -> Result<State> {
        match (self, state) {
            (Model::Heat(m), State::Scalar(h)) => {
                m.step_raw(grid, solver, h.values(), phi, dw).map(|v| State::Scalar(Field(v)))
            }
            (Model::Burgers(m), State::Scalar(h)) => {
                m.step_raw(grid, solver, h.values(), phi, dw).map(|v| State::Scalar(Field(v)))
            }
            (Model::Nagumo(m), State::Scalar(h)) => {
                m.step_raw(grid, solver, h.values(), phi, dw).map(|v| State::Scalar(Field(v)))
            }
            (Model::EulerBernoulli(m), State::SecondOrder(z)) => {
                m.step_raw(grid, solver, z, phi, dw).map(State::SecondOrder)
            }
            _ => Err(Error::param("state", "state kind does not match model")),
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use nalgebra::{DMatrix, DVector};

    use crate::banded::BandMatrix;

    /// Dense LU solve used as an independent oracle.
    pub fn dense_solve(a: &BandMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.size();
        let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        m.lu()
            .solve(&DVector::from_column_slice(b))
            .expect("oracle matrix singular")
            .as_slice()
            .to_vec()
    }
}
