//! Gaussian actuator footprints and placement helpers.

use crate::error::{Error, Result};
use crate::field::Grid1D;

/// Coefficient of the quadratic penalty on locations outside `[0, a]`.
pub const PENALTY_COEFF: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorSet {
    pub locations: Vec<f64>,
    pub sigma_sq: f64,
}

impl ActuatorSet {
    pub fn new(locations: Vec<f64>, sigma_sq: f64) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::param("locations", "need at least one actuator"));
        }
        if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
            return Err(Error::param("sigma_sq", "must be positive"));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("locations", "must be finite"));
        }
        Ok(Self {
            locations,
            sigma_sq,
        })
    }

    pub fn count(&self) -> usize {
        self.locations.len()
    }

    pub fn influence(&self, grid: &Grid1D) -> InfluenceMatrix {
        influence(self, grid)
    }
}

/// `m[i][j] = exp(-(node_j - x_i)^2 / (2 sigma^2))` together with the
/// quadrature Gram matrix `M = m W m^T dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    n: usize,
    j: usize,
    m: Vec<f64>,
    gram: Vec<f64>,
}

impl InfluenceMatrix {
    pub fn actuators(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.j
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.m[i * self.j..(i + 1) * self.j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.j + j]
    }

    pub fn gram(&self, i: usize, k: usize) -> f64 {
        self.gram[i * self.n + k]
    }

    /// Control field `Phi_j = sum_i m[i][j] u_i`.
    pub fn assemble(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_controls(u)?;
        let mut phi = vec![0.0; self.j];
        self.assemble_into(u, &mut phi);
        Ok(phi)
    }

    pub(crate) fn assemble_into(&self, u: &[f64], phi: &mut [f64]) {
        phi.fill(0.0);
        for (row, &ui) in self.m.chunks_exact(self.j).zip(u) {
            if ui == 0.0 {
                continue;
            }
            for (p, r) in phi.iter_mut().zip(row) {
                *p += ui * r;
            }
        }
    }

    /// `u^T M u`.
    pub fn quadratic(&self, u: &[f64]) -> Result<f64> {
        self.check_controls(u)?;
        Ok(self.quadratic_unchecked(u))
    }

    pub(crate) fn quadratic_unchecked(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            let row = &self.gram[i * self.n..(i + 1) * self.n];
            acc += ui * row.iter().zip(u).map(|(g, uk)| g * uk).sum::<f64>();
        }
        acc
    }

    /// Adjoint of [`assemble`](Self::assemble) under the quadrature inner
    /// product: `out_i = dx sum_j w_j m[i][j] f_j`.
    pub fn project(&self, f: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
        grid.check(f.len())?;
        let wf = weighted(f, grid);
        Ok(self
            .m
            .chunks_exact(self.j)
            .map(|row| row.iter().zip(&wf).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn check_controls(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: u.len(),
            });
        }
        Ok(())
    }
}

/// `dx w_j f_j`.
pub(crate) fn weighted(f: &[f64], grid: &Grid1D) -> Vec<f64> {
    let dx = grid.dx();
    f.iter()
        .enumerate()
        .map(|(j, v)| dx * grid.weight(j) * v)
        .collect()
}

pub fn influence(actuators: &ActuatorSet, grid: &Grid1D) -> InfluenceMatrix {
    let n = actuators.count();
    let j = grid.len();
    let inv = 0.5 / actuators.sigma_sq;
    let mut m = Vec::with_capacity(n * j);
    for &x in &actuators.locations {
        m.extend(grid.nodes().iter().map(|&node| (-(node - x).powi(2) * inv).exp()));
    }
    let weights: Vec<f64> = (0..j).map(|k| grid.dx() * grid.weight(k)).collect();
    let mut gram = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let ra = &m[a * j..(a + 1) * j];
            let rb = &m[b * j..(b + 1) * j];
            let v: f64 = ra.iter().zip(rb).zip(&weights).map(|((p, q), w)| p * q * w).sum();
            gram[a * n + b] = v;
            gram[b * n + a] = v;
        }
    }
    InfluenceMatrix { n, j, m, gram }
}

pub fn assemble_control_field(m: &InfluenceMatrix, u: &[f64]) -> Result<Vec<f64>> {
    m.assemble(u)
}

pub fn control_quadratic(m: &InfluenceMatrix, u: &[f64]) -> Result<f64> {
    m.quadratic(u)
}

/// `d m[i][j] / d x_i = m[i][j] (node_j - x_i) / sigma^2`, laid out like `m`.
pub fn influence_derivative(
    actuators: &ActuatorSet,
    m: &InfluenceMatrix,
    grid: &Grid1D,
) -> Vec<f64> {
    let mut d = Vec::with_capacity(m.m.len());
    for (i, &x) in actuators.locations.iter().enumerate() {
        d.extend(
            grid.nodes()
                .iter()
                .zip(m.row(i))
                .map(|(&node, &mij)| mij * (node - x) / actuators.sigma_sq),
        );
    }
    d
}

/// Nearest node (ties away from zero), clamped into the domain.
pub fn round_to_grid(x: &[f64], grid: &Grid1D) -> Vec<f64> {
    let last = (grid.len() - 1) as f64;
    x.iter()
        .map(|&xi| {
            let k = (xi / grid.dx()).round().clamp(0.0, last);
            grid.nodes()[k as usize]
        })
        .collect()
}

fn outside(x: f64, a: f64) -> f64 {
    if x < 0.0 {
        x
    } else if x > a {
        x - a
    } else {
        0.0
    }
}

pub fn boundary_penalty(x: &[f64], grid: &Grid1D) -> f64 {
    x.iter()
        .map(|&xi| PENALTY_COEFF * outside(xi, grid.length()).powi(2))
        .sum()
}

pub fn boundary_penalty_gradient(x: &[f64], grid: &Grid1D) -> Vec<f64> {
    x.iter()
        .map(|&xi| 2.0 * PENALTY_COEFF * outside(xi, grid.length()))
        .collect()
}
