use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, Field, Grid1D, SecondOrderState, WienerIncrement};

use super::{check_dt, ImplicitSolver, TimeScheme};

/// Simply supported Euler-Bernoulli beam with Kelvin-Voigt (`c_d`) and
/// viscous (`mu`) damping, in first-order form `z = (y, v)`:
///
/// ```text
/// dy = v dt
/// dv = (-A0 y - c_d A0 v - mu v) dt + Phi dt + rho^{-1/2} dW,   A0 = d^4/dx^4
/// ```
///
/// Unknowns are interleaved `(y_0, v_0, y_1, v_1, ...)` so the coupled
/// system stays banded.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerBernoulliModel {
    pub c_d: f64,
    pub mu: f64,
    pub rho: f64,
}

#[inline]
fn yi(j: usize) -> usize {
    2 * j
}

#[inline]
fn vi(j: usize) -> usize {
    2 * j + 1
}

impl EulerBernoulliModel {
    pub fn new(c_d: f64, mu: f64, rho: f64) -> Result<Self> {
        if !(c_d >= 0.0) {
            return Err(Error::param("c_d", "must be non-negative"));
        }
        if !(mu >= 0.0) {
            return Err(Error::param("mu", "must be non-negative"));
        }
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        Ok(Self { c_d, mu, rho })
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        BoundaryCondition::SimplySupported
    }

    /// `y = sin(k pi x / a)`, `v = 0`.
    pub fn mode_initial_condition(grid: &Grid1D, k: u32) -> SecondOrderState {
        let a = grid.length();
        let mut y = Field::from_fn(grid, |x| (k as f64 * std::f64::consts::PI * x / a).sin());
        let n = y.len();
        y.0[0] = 0.0;
        y.0[n - 1] = 0.0;
        SecondOrderState {
            y,
            v: Field::zeros(n),
        }
    }

    /// Biharmonic row `j` (interior) as `(column, coefficient)` pairs, with
    /// anti-symmetric ghosts `y_{-1} = -y_1`, `y_n = -y_{n-2}` folded in.
    fn biharmonic_row(j: usize, n: usize, inv_dx4: f64) -> Vec<(usize, f64)> {
        const STENCIL: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(5);
        for (s, c) in STENCIL.iter().enumerate() {
            let k = j as isize + s as isize - 2;
            let (col, sign) = if k < 0 {
                ((-k) as usize, -1.0)
            } else if k as usize >= n {
                (2 * (n - 1) - k as usize, -1.0)
            } else {
                (k as usize, 1.0)
            };
            match out.iter_mut().find(|(c0, _)| *c0 == col) {
                Some(entry) => entry.1 += sign * c * inv_dx4,
                None => out.push((col, sign * c * inv_dx4)),
            }
        }
        out
    }

    pub(crate) fn operator(&self, grid: &Grid1D) -> (BandMatrix, Vec<Option<f64>>) {
        let n = grid.len();
        let dx = grid.dx();
        let inv_dx4 = 1.0 / (dx * dx * dx * dx);
        let mut op = BandMatrix::zeros(2 * n, 5, 5);
        let mut pinned = vec![None; 2 * n];
        for j in [0, n - 1] {
            pinned[yi(j)] = Some(0.0);
            pinned[vi(j)] = Some(0.0);
        }
        for j in 1..n - 1 {
            op.set(yi(j), vi(j), 1.0);
            for (k, a) in Self::biharmonic_row(j, n, inv_dx4) {
                op.add(vi(j), yi(k), -a);
                op.add(vi(j), vi(k), -self.c_d * a);
            }
            op.add(vi(j), vi(j), -self.mu);
        }
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
        z: &SecondOrderState,
        phi: &Field,
        dw: &WienerIncrement,
    ) -> Result<SecondOrderState> {
        grid.check(z.y.len())?;
        grid.check(z.v.len())?;
        grid.check(phi.len())?;
        grid.check(dw.values.len())?;
        check_dt(solver, dw.dt)?;
        self.step_raw(grid, solver, z, phi.values(), &dw.values)
    }

    pub(crate) fn step_raw(
        &self,
        grid: &Grid1D,
        solver: &ImplicitSolver,
        z: &SecondOrderState,
        phi: &[f64],
        dw: &[f64],
    ) -> Result<SecondOrderState> {
        let n = grid.len();
        let dt = solver.dt();
        let sigma = self.rho.sqrt().recip();
        let mut packed = vec![0.0; 2 * n];
        let mut explicit = vec![0.0; 2 * n];
        for j in 0..n {
            packed[yi(j)] = z.y.0[j];
            packed[vi(j)] = z.v.0[j];
            explicit[vi(j)] = dt * phi[j] + sigma * dw[j];
        }
        let out = solver.advance(&packed, &explicit)?;
        let y = (0..n).map(|j| out[yi(j)]).collect();
        let v = (0..n).map(|j| out[vi(j)]).collect();
        Ok(SecondOrderState {
            y: Field(y),
            v: Field(v),
        })
    }
}

/// Discrete energy `1/2 ||v||^2 + 1/2 ||y_xx||^2` with `y_xx = 0` at the supports.
pub fn beam_energy(z: &SecondOrderState, grid: &Grid1D) -> f64 {
    let n = grid.len();
    let dx = grid.dx();
    let kinetic = crate::field::inner_product_unchecked(z.v.values(), z.v.values(), grid);
    let y = z.y.values();
    let bending: f64 = (1..n - 1)
        .map(|j| {
            let c = (y[j - 1] - 2.0 * y[j] + y[j + 1]) / (dx * dx);
            c * c
        })
        .sum::<f64>()
        * dx;
    0.5 * (kinetic + bending)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;
    use crate::models::test_support::dense_solve;
    use std::f64::consts::PI;

    fn run(
        model: &EulerBernoulliModel,
        grid: &Grid1D,
        scheme: TimeScheme,
        z0: SecondOrderState,
        steps: usize,
        mut visit: impl FnMut(&SecondOrderState),
    ) {
        let solver = model.build_solver(grid, 0.01, scheme).unwrap();
        let zero = Field::zeros(grid.len());
        let dw = WienerIncrement::zeros(grid.len(), 0.01);
        let mut z = z0;
        visit(&z);
        for _ in 0..steps {
            z = model.step(grid, &solver, &z, &zero, &dw).unwrap();
            visit(&z);
        }
    }

    #[test]
    fn equilibrium() {
        let grid = make_grid(1.0, 16).unwrap();
        let model = EulerBernoulliModel::new(1e-4, 1e-3, 1.0).unwrap();
        run(&model, &grid, TimeScheme::default(), SecondOrderState::zeros(16), 3, |z| {
            assert!(z.y.values().iter().chain(z.v.values()).all(|&v| v == 0.0));
        });
    }

    #[test]
    fn block_coupling() {
        let grid = make_grid(1.0, 8).unwrap();
        let model = EulerBernoulliModel::new(1e-4, 1e-3, 1.0).unwrap();
        let solver = model.build_solver(&grid, 0.01, TimeScheme::BackwardEuler).unwrap();
        let a = solver.implicit_matrix();
        // y row couples to its own v, v row couples to neighbouring y
        assert_eq!(a.get(yi(3), vi(3)), -0.01);
        assert!(a.get(vi(3), yi(2)) != 0.0);
        assert!(a.get(vi(3), yi(5)) != 0.0);
        assert_eq!(a.get(yi(0), yi(0)), 1.0);
        assert_eq!(a.get(yi(0), vi(0)), 0.0);
    }

    #[test]
    fn ghost_folding_gives_squared_laplacian() {
        // A0 with anti-symmetric ghosts equals D2 * D2 on the interior
        let n = 7;
        let row = EulerBernoulliModel::biharmonic_row(1, n, 1.0);
        let get = |c: usize| row.iter().find(|(k, _)| *k == c).map_or(0.0, |e| e.1);
        assert_eq!(get(1), 5.0);
        assert_eq!(get(2), -4.0);
        assert_eq!(get(3), 1.0);
        let row = EulerBernoulliModel::biharmonic_row(n - 2, n, 1.0);
        let get = |c: usize| row.iter().find(|(k, _)| *k == c).map_or(0.0, |e| e.1);
        assert_eq!(get(n - 2), 5.0);
        assert_eq!(get(n - 3), -4.0);
    }

    #[test]
    fn single_step_matches_dense_oracle() {
        let grid = make_grid(1.0, 5).unwrap();
        let (c_d, mu, rho, dt) = (0.01, 0.3, 4.0, 0.01);
        let model = EulerBernoulliModel::new(c_d, mu, rho).unwrap();
        let z = SecondOrderState {
            y: Field(vec![0.0, 0.4, -0.2, 0.3, 0.0]),
            v: Field(vec![0.0, 1.0, 0.5, -0.7, 0.0]),
        };
        let phi = [0.0, 1.0, 2.0, -1.0, 0.0];
        let dw = [0.3, 0.1, -0.2, 0.4, 0.2];
        // A0 on interior nodes 1..=3, D2 squared with Dirichlet zeros
        let h4 = 0.25f64.powi(4);
        let a0 = [[5.0, -4.0, 1.0], [-4.0, 6.0, -4.0], [1.0, -4.0, 5.0]].map(|r| r.map(|v| v / h4));
        for scheme in [TimeScheme::BackwardEuler, TimeScheme::CrankNicolson] {
            let solver = model.build_solver(&grid, dt, scheme).unwrap();
            let out = model.step_raw(&grid, &solver, &z, &phi, &dw).unwrap();
            let th = scheme.theta();
            // unknowns [y1 y2 y3 v1 v2 v3]
            let mut a = BandMatrix::zeros(6, 5, 5);
            let mut b = vec![0.0; 6];
            for i in 0..3 {
                a.set(i, i, 1.0);
                a.set(i, 3 + i, -th * dt);
                b[i] = z.y.0[i + 1] + (1.0 - th) * dt * z.v.0[i + 1];
                let mut ay = 0.0;
                let mut av = 0.0;
                for k in 0..3 {
                    a.add(3 + i, k, th * dt * a0[i][k]);
                    a.add(3 + i, 3 + k, th * dt * c_d * a0[i][k]);
                    ay += a0[i][k] * z.y.0[k + 1];
                    av += a0[i][k] * z.v.0[k + 1];
                }
                a.add(3 + i, 3 + i, 1.0 + th * dt * mu);
                let vold = z.v.0[i + 1];
                b[3 + i] = vold - (1.0 - th) * dt * (ay + c_d * av + mu * vold)
                    + dt * phi[i + 1]
                    + dw[i + 1] / 2.0;
            }
            let x = dense_solve(&a, &b);
            for i in 0..3 {
                assert!((out.y.0[i + 1] - x[i]).abs() < 1e-12);
                assert!((out.v.0[i + 1] - x[3 + i]).abs() < 1e-12);
            }
            assert_eq!(out.y.0[0], 0.0);
            assert_eq!(out.v.0[4], 0.0);
        }
    }

    #[test]
    fn damped_energy_is_non_increasing() {
        let grid = make_grid(1.0, 32).unwrap();
        let model = EulerBernoulliModel::new(1e-4, 1e-3, 1.0).unwrap();
        for scheme in [TimeScheme::BackwardEuler, TimeScheme::CrankNicolson] {
            let z0 = EulerBernoulliModel::mode_initial_condition(&grid, 3);
            let mut energies = Vec::new();
            run(&model, &grid, scheme, z0, 100, |z| energies.push(beam_energy(z, &grid)));
            for w in energies.windows(2) {
                assert!(w[1] <= w[0], "{} > {} ({scheme:?})", w[1], w[0]);
            }
        }
    }

    #[test]
    fn undamped_mode_one_period() {
        let grid = make_grid(1.0, 33).unwrap();
        let model = EulerBernoulliModel::new(0.0, 0.0, 1.0).unwrap();
        let z0 = EulerBernoulliModel::mode_initial_condition(&grid, 1);
        let mut mid = Vec::new();
        run(&model, &grid, TimeScheme::default(), z0, 200, |z| mid.push(z.y.0[16]));
        let crossings: Vec<f64> = mid
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].signum() != w[1].signum())
            .map(|(i, w)| 0.01 * (i as f64 + w[0] / (w[0] - w[1])))
            .collect();
        assert!(crossings.len() >= 4);
        let half = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let period = 2.0 * half;
        let expected = 2.0 * PI / (PI * PI);
        assert!((period - expected).abs() / expected < 0.05, "period {period}");
    }
}
