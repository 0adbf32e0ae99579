use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, Field, Grid1D, WienerIncrement};

use super::{check_dt, second_difference, ImplicitSolver, TimeScheme};

/// `dh = eps h_xx dt + Phi dt + rho^{-1/2} dW`, `h = 0` at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatModel {
    pub epsilon: f64,
    pub rho: f64,
}

impl HeatModel {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        Ok(Self { epsilon, rho })
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        BoundaryCondition::DirichletHomogeneous
    }

    pub(crate) fn operator(&self, grid: &Grid1D) -> (BandMatrix, Vec<Option<f64>>) {
        let n = grid.len();
        let op = second_difference(grid, self.epsilon);
        let mut pinned = vec![None; n];
        pinned[0] = Some(0.0);
        pinned[n - 1] = Some(0.0);
        (op, pinned)
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
        let explicit: Vec<f64> = phi
            .iter()
            .zip(dw)
            .map(|(p, w)| dt * p + sigma * w)
            .collect();
        solver.advance(h, &explicit)
    }
}
