use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, Field, Grid1D, WienerIncrement};

use super::{check_dt, second_difference, ImplicitSolver, TimeScheme};

/// Viscous Burgers: `dh + h h_x dt = eps h_xx dt + Phi dt + rho^{-1/2} dW`,
/// with `h = bc_value` at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersModel {
    pub epsilon: f64,
    pub rho: f64,
    pub bc_value: f64,
}

impl BurgersModel {
    pub fn new(epsilon: f64, rho: f64, bc_value: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !bc_value.is_finite() {
            return Err(Error::param("bc_value", "must be finite"));
        }
        Ok(Self {
            epsilon,
            rho,
            bc_value,
        })
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        BoundaryCondition::DirichletConstant(self.bc_value)
    }

    pub(crate) fn operator(&self, grid: &Grid1D) -> (BandMatrix, Vec<Option<f64>>) {
        let n = grid.len();
        let op = second_difference(grid, self.epsilon);
        let mut pinned = vec![None; n];
        pinned[0] = Some(self.bc_value);
        pinned[n - 1] = Some(self.bc_value);
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
        grid: &Grid1D,
        solver: &ImplicitSolver,
        h: &[f64],
        phi: &[f64],
        dw: &[f64],
    ) -> Result<Vec<f64>> {
        let dt = solver.dt();
        let n = h.len();
        let sigma = self.rho.sqrt().recip();
        let half_inv_dx = 0.5 / grid.dx();
        let mut explicit = vec![0.0; n];
        for j in 1..n - 1 {
            let advection = h[j] * (h[j + 1] - h[j - 1]) * half_inv_dx;
            explicit[j] = dt * (phi[j] - advection) + sigma * dw[j];
        }
        solver.advance(h, &explicit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;
    use crate::models::test_support::dense_solve;

    #[test]
    fn constant_state_is_steady() {
        let grid = make_grid(1.0, 16).unwrap();
        let model = BurgersModel::new(0.1, 10.0, 1.0).unwrap();
        let solver = model.build_solver(&grid, 0.01, TimeScheme::default()).unwrap();
        let h = Field(vec![1.0; 16]);
        let out = model
            .step(&grid, &solver, &h, &Field::zeros(16), &WienerIncrement::zeros(16, 0.01))
            .unwrap();
        for v in out.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_layers_diffuse_inward() {
        let grid = make_grid(1.0, 5).unwrap();
        let model = BurgersModel::new(0.1, 10.0, 1.0).unwrap();
        for scheme in [TimeScheme::BackwardEuler, TimeScheme::CrankNicolson] {
            let solver = model.build_solver(&grid, 0.01, scheme).unwrap();
            let h = Field(vec![1.0, 0.0, 0.0, 0.0, 1.0]);
            let out = model
                .step(&grid, &solver, &h, &Field::zeros(5), &WienerIncrement::zeros(5, 0.01))
                .unwrap();
            assert!(out.0[1] > 0.0 && out.0[3] > 0.0);
            assert_eq!(out.0[0], 1.0);
            assert_eq!(out.0[4], 1.0);
        }
    }

    #[test]
    fn single_step_matches_dense_oracle() {
        let grid = make_grid(1.0, 5).unwrap();
        let (eps, rho, dt) = (0.2, 9.0, 0.01);
        let model = BurgersModel::new(eps, rho, 1.0).unwrap();
        let h = [1.0, 0.4, -0.3, 0.8, 1.0];
        let phi = [0.0, 2.0, -1.0, 0.5, 3.0];
        let dw = [0.1, 0.2, -0.3, 0.05, 0.7];
        for scheme in [TimeScheme::BackwardEuler, TimeScheme::CrankNicolson] {
            let solver = model.build_solver(&grid, dt, scheme).unwrap();
            let out = model.step_raw(&grid, &solver, &h, &phi, &dw).unwrap();
            let theta = scheme.theta();
            let dx = 0.25;
            let r = eps * dt / (dx * dx);
            let mut a = BandMatrix::zeros(5, 4, 4);
            let mut b = vec![1.0; 5];
            a.set(0, 0, 1.0);
            a.set(4, 4, 1.0);
            for j in 1..4 {
                a.set(j, j - 1, -theta * r);
                a.set(j, j, 1.0 + 2.0 * theta * r);
                a.set(j, j + 1, -theta * r);
                let lap = h[j - 1] - 2.0 * h[j] + h[j + 1];
                let adv = h[j] * (h[j + 1] - h[j - 1]) / (2.0 * dx);
                b[j] = h[j] + (1.0 - theta) * r * lap + dt * (phi[j] - adv) + dw[j] / 3.0;
            }
            let expected = dense_solve(&a, &b);
            for (u, v) in out.iter().zip(&expected) {
                assert!((u - v).abs() <= 1e-12, "{u} vs {v}");
            }
        }
    }
}
