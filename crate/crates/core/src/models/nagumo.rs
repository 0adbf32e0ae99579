use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, Field, Grid1D, WienerIncrement};

use super::{check_dt, second_difference, ImplicitSolver, TimeScheme};

/// Nagumo: `dh = (eps h_xx + h (1 - h)(h - alpha)) dt + Phi dt + rho^{-1/2} dW`
/// with `h_x = 0` at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct NagumoModel {
    pub epsilon: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl NagumoModel {
    pub fn new(epsilon: f64, alpha: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        Ok(Self {
            epsilon,
            alpha,
            rho,
        })
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        BoundaryCondition::NeumannHomogeneous
    }

    /// `(1 + exp(-(2 - x)/sqrt 2))^{-1}`: a front sitting near `x = 2`.
    pub fn front_initial_condition(grid: &Grid1D) -> Field {
        Field::from_fn(grid, |x| 1.0 / (1.0 + (-(2.0 - x) / 2f64.sqrt()).exp()))
    }

    #[inline]
    pub fn reaction(&self, h: f64) -> f64 {
        h * (1.0 - h) * (h - self.alpha)
    }

    pub(crate) fn operator(&self, grid: &Grid1D) -> (BandMatrix, Vec<Option<f64>>) {
        let n = grid.len();
        let c = self.epsilon / (grid.dx() * grid.dx());
        let mut op = second_difference(grid, self.epsilon);
        // mirrored ghosts h_{-1} = h_1, h_n = h_{n-2}
        op.set(0, 0, -2.0 * c);
        op.set(0, 1, 2.0 * c);
        op.set(n - 1, n - 1, -2.0 * c);
        op.set(n - 1, n - 2, 2.0 * c);
        (op, vec![None; n])
    }

    pub fn build_solver(
        &self,
        grid: &Grid1D,
        dt: f64,
        scheme: TimeScheme,
    ) -> Result<ImplicitSolver> {
        let (op, pinned) = self.operator(grid);
        ImplicitSolver::assemble(op, pinned, dt, scheme)
    }

    pub fn step(
        &self,
        grid: &Grid1D,
        solver: &ImplicitSolver,
        h: &Field,
        phi: &Field,
        dw: &WienerIncrement,
    ) -> Result<Field> {
        grid.check(h.len())?;
        grid.check(phi.len())?;
        grid.check(dw.values.len())?;
        check_dt(solver, dw.dt)?;
        self.step_raw(grid, solver, h.values(), phi.values(), &dw.values)
            .map(Field)
    }

    pub(crate) fn step_raw(
        &self,
        _grid: &Grid1D,
        solver: &ImplicitSolver,
        h: &[f64],
        phi: &[f64],
        dw: &[f64],
    ) -> Result<Vec<f64>> {
        let dt = solver.dt();
        let sigma = self.rho.sqrt().recip();
        let explicit: Vec<f64> = h
            .iter()
            .zip(phi.iter().zip(dw))
            .map(|(&hj, (p, w))| dt * (self.reaction(hj) + p) + sigma * w)
            .collect();
        solver.advance(h, &explicit)
    }
}
